//! Query specifications and prompt contextualization.
//!
//! Every node has one evaluation rubric and zero or more generative queries.
//! The prompt constructor is a fixed template engine over the closed
//! placeholder set `{claim}`, `{goal}`, `{code}`, `{pred_states}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::assessment::{Assessment, DomainKind};
use crate::claims::{Claim, GlobalState, StateError};
use crate::graph::{EvaluationGraph, GraphError, NodeId};

/// Predecessor evidence excerpts included per claim unless configured.
pub const DEFAULT_EVIDENCE_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("unknown placeholder `{{{0}}}`")]
    UnknownPlaceholder(String),
    #[error("unterminated placeholder starting at byte {0}")]
    Unterminated(usize),
    #[error("template needs `{{{0}}}` but no value is available")]
    MissingPlaceholderData(&'static str),
    #[error("evaluation queries need a claim and generative queries must not have one")]
    ClaimArity,
    #[error("max_claims must be at least 1")]
    ZeroMaxClaims,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placeholder {
    Claim,
    Goal,
    Code,
    PredStates,
}

impl Placeholder {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "claim" => Some(Placeholder::Claim),
            "goal" => Some(Placeholder::Goal),
            "code" => Some(Placeholder::Code),
            "pred_states" => Some(Placeholder::PredStates),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Placeholder::Claim => "claim",
            Placeholder::Goal => "goal",
            Placeholder::Code => "code",
            Placeholder::PredStates => "pred_states",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Hole(Placeholder),
}

/// A parsed prompt template. `{{` and `}}` escape literal braces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    raw: String,
    segments: Vec<Segment>,
}

impl Template {
    pub fn parse(raw: &str) -> Result<Self, QueryError> {
        let mut segments = Vec::new();
        let mut text = String::new();
        let bytes = raw.as_bytes();
        let mut i = 0;
        while i < raw.len() {
            let rest = &raw[i..];
            if rest.starts_with("{{") || rest.starts_with("}}") {
                text.push_str(&rest[..1]);
                i += 2;
            } else if bytes[i] == b'{' {
                let close = rest.find('}').ok_or(QueryError::Unterminated(i))?;
                let name = &rest[1..close];
                let hole = Placeholder::parse(name)
                    .ok_or_else(|| QueryError::UnknownPlaceholder(name.to_string()))?;
                if !text.is_empty() {
                    segments.push(Segment::Text(std::mem::take(&mut text)));
                }
                segments.push(Segment::Hole(hole));
                i += close + 1;
            } else {
                let ch = rest.chars().next().expect("non-empty");
                text.push(ch);
                i += ch.len_utf8();
            }
        }
        if !text.is_empty() {
            segments.push(Segment::Text(text));
        }
        Ok(Template {
            raw: raw.to_string(),
            segments,
        })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn uses(&self, p: Placeholder) -> bool {
        self.segments.contains(&Segment::Hole(p))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalQuery {
    pub id: String,
    pub template: Template,
    pub bilateral: bool,
    /// Extra guidance for the support subquery of a bilateral rubric.
    pub support_focus: Option<String>,
    /// Extra guidance for the refutation subquery of a bilateral rubric.
    pub refute_focus: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenQuery {
    pub id: String,
    pub template: Template,
    pub max_claims: usize,
}

impl GenQuery {
    pub fn new(
        id: impl Into<String>,
        template: Template,
        max_claims: usize,
    ) -> Result<Self, QueryError> {
        if max_claims == 0 {
            return Err(QueryError::ZeroMaxClaims);
        }
        Ok(GenQuery {
            id: id.into(),
            template,
            max_claims,
        })
    }
}

/// `ψ_n = (q_e, Q_g)` for one node.
#[derive(Debug, Clone, Copy)]
pub struct QuerySpec<'a> {
    pub eval: &'a EvalQuery,
    pub gen: &'a [GenQuery],
}

#[derive(Debug, Clone)]
pub struct QuerySpecs {
    pub default_eval: EvalQuery,
    pub per_node: BTreeMap<NodeId, EvalQuery>,
    pub gen: BTreeMap<NodeId, Vec<GenQuery>>,
}

impl QuerySpecs {
    pub fn new(default_eval: EvalQuery) -> Self {
        QuerySpecs {
            default_eval,
            per_node: BTreeMap::new(),
            gen: BTreeMap::new(),
        }
    }

    pub fn spec_for(&self, n: &NodeId) -> QuerySpec<'_> {
        QuerySpec {
            eval: self.per_node.get(n).unwrap_or(&self.default_eval),
            gen: self.gen.get(n).map(Vec::as_slice).unwrap_or(&[]),
        }
    }

    pub fn has_generative(&self, n: &NodeId) -> bool {
        self.gen.get(n).is_some_and(|g| !g.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodeSnippet {
    pub node: NodeId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredClaim {
    pub claim: String,
    pub label: String,
    pub assessment: Assessment,
    pub excerpts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredState {
    pub node: NodeId,
    pub claims: Vec<PredClaim>,
}

/// Prompt context `Γ_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Context {
    pub node: NodeId,
    pub code: Vec<CodeSnippet>,
    pub goal: String,
    /// One entry per extended predecessor, in node id order.
    pub pred_states: Vec<PredState>,
}

/// Assembles `Γ_n` from the code neighborhood, the goal, and the claim view
/// of every extended predecessor. At most `evidence_cap` active excerpts per
/// claim are included, newest first.
pub fn build_context(
    g: &EvaluationGraph,
    s: &GlobalState,
    goal: &str,
    n: &NodeId,
    evidence_cap: usize,
) -> Result<Context, QueryError> {
    let code = g
        .code_context(n)?
        .into_iter()
        .map(|(node, text)| CodeSnippet { node, text })
        .collect();
    let mut pred_states = Vec::new();
    for m in g.pred_ext(n)? {
        let ns = s.node(&m)?;
        let claims = ns
            .entries()
            .iter()
            .map(|e| PredClaim {
                claim: e.claim.key.clone(),
                label: e.claim.label.clone(),
                assessment: e.assessment,
                excerpts: s
                    .active_evidence(e)
                    .into_iter()
                    .take(evidence_cap)
                    .map(|r| r.excerpt.clone())
                    .collect(),
            })
            .collect();
        pred_states.push(PredState { node: m, claims });
    }
    Ok(Context {
        node: n.clone(),
        code,
        goal: goal.to_string(),
        pred_states,
    })
}

#[derive(Debug, Clone, Copy)]
pub enum QueryRef<'a> {
    Eval(&'a EvalQuery),
    Gen(&'a GenQuery),
}

fn render_code(ctx: &Context) -> String {
    if ctx.code.is_empty() {
        return "(no source in scope)".to_string();
    }
    let mut out = String::new();
    for snip in &ctx.code {
        let _ = writeln!(out, "--- {} ---\n{}", snip.node, snip.text.trim_end());
    }
    out.trim_end().to_string()
}

fn render_preds(ctx: &Context) -> String {
    if ctx.pred_states.is_empty() {
        return "(no upstream claims)".to_string();
    }
    let mut out = String::new();
    for p in &ctx.pred_states {
        if p.claims.is_empty() {
            let _ = writeln!(out, "{}: (no claims)", p.node);
        }
        for c in &p.claims {
            let _ = writeln!(out, "{} {} = {}", p.node, c.label, c.assessment);
            if c.label != c.claim {
                let _ = writeln!(out, "  claim: {}", c.claim);
            }
            for ex in &c.excerpts {
                let _ = writeln!(out, "  - {ex}");
            }
        }
    }
    out.trim_end().to_string()
}

fn grading_block(domain: DomainKind) -> &'static str {
    match domain {
        DomainKind::Four => {
            "Report, separately for each side, whether any evidence was found (present) \
             or none was found (absent)."
        }
        DomainKind::Graded => {
            "Grade each side as bot (nothing found), w (weak) or s (strong). \
             Choose w for evidence that is indirect, partial, generic, argued from silence, \
             or not clearly tied to this exact version, code path, contract, or obligation. \
             Choose s only for evidence that is direct, specific, applicable here, and enough \
             on its own to settle that side of the claim."
        }
        DomainKind::Stratified => {
            "Do not return a single grade. Return every evidence record you rely on, each with \
             a polarity (support or refute), a strength (w or s, using w for indirect, partial, \
             or weakly applicable evidence and s for direct, specific, applicable evidence) and \
             a confidence basis: model (your own judgment only), located (a concrete record), \
             applicable (confirmed to apply to this program and version), corroborated \
             (independent applicable sources agree) or checked (validated by code inspection, \
             a tool, or a human)."
        }
    }
}

fn side_label(domain: DomainKind, side: &str) -> String {
    match domain {
        DomainKind::Four => format!("Mark the {side} side as present or absent."),
        DomainKind::Graded => format!("Grade the {side} level as bot, w, or s."),
        DomainKind::Stratified => format!("Record each {side} item as an evidence record."),
    }
}

/// Substitutes every placeholder. Bilateral evaluation rubrics get separate
/// support and refutation sections followed by the domain's grading rules.
pub fn render_prompt(
    q: QueryRef<'_>,
    ctx: &Context,
    claim: Option<&Claim>,
    domain: DomainKind,
) -> Result<String, QueryError> {
    let template = match (q, claim) {
        (QueryRef::Eval(e), Some(_)) => &e.template,
        (QueryRef::Gen(g), None) => &g.template,
        _ => return Err(QueryError::ClaimArity),
    };
    let mut out = String::new();
    for seg in &template.segments {
        match seg {
            Segment::Text(t) => out.push_str(t),
            Segment::Hole(Placeholder::Claim) => {
                let c = claim.ok_or(QueryError::MissingPlaceholderData(
                    Placeholder::Claim.name(),
                ))?;
                out.push_str(&c.text);
            }
            Segment::Hole(Placeholder::Goal) => out.push_str(&ctx.goal),
            Segment::Hole(Placeholder::Code) => out.push_str(&render_code(ctx)),
            Segment::Hole(Placeholder::PredStates) => out.push_str(&render_preds(ctx)),
        }
    }

    if let QueryRef::Eval(e) = q {
        if e.bilateral {
            let focus =
                |f: &Option<String>| f.as_deref().map(|s| format!(" {s}")).unwrap_or_default();
            let _ = write!(
                out,
                "\n\nSUPPORT: Search for evidence that supports the claim.{} {}\
                 \n\nREFUTE: Search for evidence that refutes the claim.{} {}\
                 \n\nGRADING: {}\
                 \n\nAnswer with the support result and its evidence records, the refutation \
                 result and its evidence records, and a short rationale.",
                focus(&e.support_focus),
                side_label(domain, "support"),
                focus(&e.refute_focus),
                side_label(domain, "refutation"),
                grading_block(domain),
            );
        } else {
            let _ = write!(out, "\n\nGRADING: {}", grading_block(domain));
        }
    }
    Ok(out)
}
