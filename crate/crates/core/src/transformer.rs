//! The node transformer `T_n`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, AgentError, AgentEvalResult, EvalRequest, EvidenceItem, GenRequest};
use crate::assessment::{summarize_polarity, Assessment, DomainKind, StratifiedValue, Strength};
use crate::claims::{
    Claim, ClaimOrigin, EvidenceId, EvidenceRecord, EvidenceStatus, GlobalState, Polarity,
    StateError,
};
use crate::graph::{EvaluationGraph, NodeId};
use crate::queries::{build_context, render_prompt, Context, QueryError, QueryRef, QuerySpecs};
use crate::revision::{BoundedCounters, RevisionEventKind};

pub const DEFAULT_CLAIM_CAP: usize = 16;

/// Per-node claim cap `k_n`. Overflow always discards the new claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClaimPolicy {
    pub cap: usize,
}

impl Default for ClaimPolicy {
    fn default() -> Self {
        ClaimPolicy {
            cap: DEFAULT_CLAIM_CAP,
        }
    }
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("agent transport failure at {node}: {message}")]
    Transport { node: NodeId, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    MalformedResponse,
    NoScriptEntry,
    GenTruncated,
    CapExceeded,
    IntroductionDenied,
    InvalidClaimText,
    StratifiedDiscrepancy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub node: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdatePhase {
    Existing,
    New,
}

/// One evaluated claim: `after = before ⊔ returned`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimUpdate {
    pub key: String,
    pub label: String,
    pub phase: UpdatePhase,
    pub before: Assessment,
    pub returned: Assessment,
    pub after: Assessment,
    pub attached: Vec<EvidenceId>,
}

impl ClaimUpdate {
    pub fn changed(&self) -> bool {
        self.before != self.after
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepReport {
    pub updates: Vec<ClaimUpdate>,
    /// Claims inserted by generation, in insertion order.
    pub inserted: Vec<Claim>,
    pub diagnostics: Vec<Diagnostic>,
    pub ac_changed: bool,
    /// Evidence was attached but no assessment moved.
    pub evidence_only: bool,
}

/// Inputs shared by every transformer application in a run.
#[derive(Debug, Clone, Copy)]
pub struct StepConfig<'a> {
    pub goal: &'a str,
    pub specs: &'a QuerySpecs,
    pub evidence_cap: usize,
    /// Extra attempts after a malformed response.
    pub retries: u32,
}

/// Position of one application within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepPosition {
    pub epoch: u32,
    pub step: u32,
    pub visit: u32,
}

/// Applies `T_n` in place. Only `S(n)` and the evidence store change. A
/// failed agent call leaves its claim untouched and is reported as a
/// diagnostic; transport failures abort.
#[allow(clippy::too_many_arguments)]
pub fn apply_transformer(
    g: &EvaluationGraph,
    s: &mut GlobalState,
    n: &NodeId,
    agent: &mut dyn Agent,
    policy: ClaimPolicy,
    cfg: StepConfig<'_>,
    pos: StepPosition,
    mut bounded: Option<&mut BoundedCounters>,
) -> Result<StepReport, TransformError> {
    let domain = s.domain();
    let ctx = build_context(g, s, cfg.goal, n, cfg.evidence_cap)?;
    let spec = cfg.specs.spec_for(n);
    let ac_before = s.ac(n)?;
    let mut report = StepReport::default();

    let existing: Vec<Claim> = s
        .node(n)?
        .entries()
        .iter()
        .map(|e| e.claim.clone())
        .collect();
    for claim in &existing {
        evaluate(
            s,
            agent,
            &ctx,
            cfg,
            pos,
            claim,
            UpdatePhase::Existing,
            &mut report,
        )?;
    }

    let mut fresh = Vec::new();
    for q in spec.gen {
        let prompt = render_prompt(QueryRef::Gen(q), &ctx, None, domain)?;
        let req = GenRequest {
            ctx: &ctx,
            query: q,
            prompt: &prompt,
            visit: pos.visit,
            domain,
        };
        let mut attempt = 0;
        let out = loop {
            match agent.gen(&req) {
                Err(AgentError::Malformed(m)) if attempt < cfg.retries => {
                    log::debug!("retrying gen {} at {n}: {m}", q.id);
                    attempt += 1;
                }
                other => break other,
            }
        };
        let mut texts = match out {
            Ok(r) => r.claims,
            Err(e) => {
                diagnose(&mut report, n, Some(&q.id), e)?;
                continue;
            }
        };
        if texts.len() > q.max_claims {
            log::warn!(
                "gen {} at {n} returned {} claims, keeping {}",
                q.id,
                texts.len(),
                q.max_claims
            );
            report.diagnostics.push(Diagnostic {
                kind: DiagnosticKind::GenTruncated,
                node: n.clone(),
                target: Some(q.id.clone()),
                message: format!(
                    "returned {} claims for max_claims {}",
                    texts.len(),
                    q.max_claims
                ),
            });
            texts.truncate(q.max_claims);
        }
        for text in texts {
            let claim = match Claim::new(n.clone(), text.clone(), ClaimOrigin::Generated) {
                Ok(c) => c,
                Err(_) => {
                    report.diagnostics.push(Diagnostic {
                        kind: DiagnosticKind::InvalidClaimText,
                        node: n.clone(),
                        target: Some(q.id.clone()),
                        message: format!("claim text {text:?} is empty after canonicalization"),
                    });
                    continue;
                }
            };
            if s.node(n)?.contains(&claim.key) {
                continue;
            }
            if s.node(n)?.len() >= policy.cap {
                log::info!(
                    "discarding claim {:?} at {n}: cap {} reached",
                    claim.key,
                    policy.cap
                );
                report.diagnostics.push(Diagnostic {
                    kind: DiagnosticKind::CapExceeded,
                    node: n.clone(),
                    target: Some(claim.key.clone()),
                    message: format!("claim cap {} reached; new claim discarded", policy.cap),
                });
                continue;
            }
            if let Some(counters) = bounded.as_deref_mut() {
                if !counters.guard_bounded(n, RevisionEventKind::Introduction, &claim.key) {
                    report.diagnostics.push(Diagnostic {
                        kind: DiagnosticKind::IntroductionDenied,
                        node: n.clone(),
                        target: Some(claim.key.clone()),
                        message: "introduction limit reached".into(),
                    });
                    continue;
                }
            }
            s.insert_claim(claim.clone())?;
            report.inserted.push(claim.clone());
            fresh.push(claim);
        }
    }

    for claim in &fresh {
        evaluate(
            s,
            agent,
            &ctx,
            cfg,
            pos,
            claim,
            UpdatePhase::New,
            &mut report,
        )?;
    }

    report.ac_changed = s.ac(n)? != ac_before;
    report.evidence_only =
        !report.ac_changed && report.updates.iter().any(|u| !u.attached.is_empty());
    if report.evidence_only {
        log::info!("evidence attached at {n} without an assessment change; not propagating");
    }
    Ok(report)
}

fn diagnose(
    report: &mut StepReport,
    n: &NodeId,
    target: Option<&str>,
    e: AgentError,
) -> Result<(), TransformError> {
    let kind = match &e {
        AgentError::Malformed(_) => DiagnosticKind::MalformedResponse,
        AgentError::NoScriptEntry { .. } => DiagnosticKind::NoScriptEntry,
        AgentError::Transport(m) => {
            return Err(TransformError::Transport {
                node: n.clone(),
                message: m.clone(),
            })
        }
    };
    log::warn!("{e}");
    report.diagnostics.push(Diagnostic {
        kind,
        node: n.clone(),
        target: target.map(str::to_string),
        message: e.to_string(),
    });
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    s: &mut GlobalState,
    agent: &mut dyn Agent,
    ctx: &Context,
    cfg: StepConfig<'_>,
    pos: StepPosition,
    claim: &Claim,
    phase: UpdatePhase,
    report: &mut StepReport,
) -> Result<(), TransformError> {
    let n = &claim.node;
    let domain = s.domain();
    let query = cfg.specs.spec_for(n).eval;
    let prompt = render_prompt(QueryRef::Eval(query), ctx, Some(claim), domain)?;
    let req = EvalRequest {
        ctx,
        query,
        claim,
        prompt: &prompt,
        visit: pos.visit,
        domain,
    };
    let mut attempt = 0;
    let resolved = loop {
        let out = agent
            .eval(&req)
            .and_then(|r| resolve(s, claim, &r).map_err(AgentError::Malformed));
        match out {
            Err(AgentError::Malformed(m)) if attempt < cfg.retries => {
                log::debug!("retrying eval of {} at {n}: {m}", claim.key);
                attempt += 1;
            }
            other => break other,
        }
    };
    let resolved = match resolved {
        Ok(r) => r,
        Err(e) => return diagnose(report, n, Some(&claim.key), e),
    };
    if let Some(msg) = resolved.discrepancy {
        log::warn!("{msg}");
        report.diagnostics.push(Diagnostic {
            kind: DiagnosticKind::StratifiedDiscrepancy,
            node: n.clone(),
            target: Some(claim.key.clone()),
            message: msg,
        });
    }
    let records = resolved
        .items
        .into_iter()
        .map(|item| match item {
            Resolved::Existing(rec) => rec,
            Resolved::Fresh(seed, id) => EvidenceRecord {
                id: id.unwrap_or_else(|| s.mint_evidence_id()),
                claim_key: claim.key.clone(),
                node: n.clone(),
                polarity: seed.polarity,
                strength: seed.strength,
                basis: seed.basis,
                source_kind: seed.source_kind,
                excerpt: seed.excerpt,
                status: EvidenceStatus::Active,
                epoch: pos.epoch,
                step: pos.step,
                status_reason: None,
            },
        })
        .collect();
    let out = s.record_update(n, &claim.key, resolved.assessment, records)?;
    report.updates.push(ClaimUpdate {
        key: claim.key.clone(),
        label: claim.label.clone(),
        phase,
        before: out.old,
        returned: resolved.assessment,
        after: out.new,
        attached: out.attached,
    });
    Ok(())
}

enum Resolved {
    Existing(EvidenceRecord),
    Fresh(crate::agent::EvidenceSeed, Option<EvidenceId>),
}

struct Resolution {
    assessment: Assessment,
    items: Vec<Resolved>,
    discrepancy: Option<String>,
}

/// Checks an evaluation result against the store and the domain, and fixes
/// its assessment. Nothing is mutated, so a rejected result leaves no trace.
fn resolve(s: &GlobalState, claim: &Claim, r: &AgentEvalResult) -> Result<Resolution, String> {
    let domain = s.domain();
    let mut items = Vec::new();
    let mut seen = BTreeSet::new();
    let mut signals: Vec<(Polarity, Strength, crate::assessment::ConfidenceBasis)> = Vec::new();

    let cite = |id: &EvidenceId| -> Result<EvidenceRecord, String> {
        let rec = s
            .evidence(id)
            .ok_or_else(|| format!("cited evidence {id} does not exist"))?;
        if rec.node != claim.node || rec.claim_key != claim.key {
            return Err(format!(
                "evidence {id} belongs to {} at {}",
                rec.claim_key, rec.node
            ));
        }
        if rec.status != EvidenceStatus::Active {
            return Err(format!("evidence {id} is {}", rec.status));
        }
        Ok(rec.clone())
    };

    for item in &r.evidence {
        let id = match item {
            EvidenceItem::Cite { cite } => Some(cite.clone()),
            EvidenceItem::Fresh(seed) => seed.id.clone(),
        };
        if let Some(id) = &id {
            if !seen.insert(id.clone()) {
                return Err(format!("evidence {id} appears twice"));
            }
        }
        match item {
            EvidenceItem::Cite { cite: id } => {
                let rec = cite(id)?;
                signals.push((rec.polarity, rec.strength, rec.basis));
                items.push(Resolved::Existing(rec));
            }
            EvidenceItem::Fresh(seed) => match &seed.id {
                Some(id) if s.evidence(id).is_some() => {
                    let rec = cite(id)?;
                    signals.push((rec.polarity, rec.strength, rec.basis));
                    items.push(Resolved::Existing(rec));
                }
                id => {
                    signals.push((seed.polarity, seed.strength, seed.basis));
                    items.push(Resolved::Fresh(seed.clone(), id.clone()));
                }
            },
        }
    }

    if let Some(a) = &r.assessment {
        if a.kind() != domain {
            return Err(format!("assessment {a} is not in the {domain} domain"));
        }
    }
    let strongest = |pol: Polarity| {
        signals
            .iter()
            .filter(|(p, _, _)| *p == pol)
            .map(|(_, st, _)| *st)
            .max()
            .unwrap_or(Strength::Bot)
    };
    let derived = match domain {
        DomainKind::Four => Assessment::four(
            strongest(Polarity::Support) > Strength::Bot,
            strongest(Polarity::Refute) > Strength::Bot,
        ),
        DomainKind::Graded => {
            Assessment::graded(strongest(Polarity::Support), strongest(Polarity::Refute))
        }
        DomainKind::Stratified => {
            let side = |pol: Polarity| {
                let pairs: Vec<_> = signals
                    .iter()
                    .filter(|(p, _, _)| *p == pol)
                    .map(|(_, st, b)| (*st, *b))
                    .collect();
                summarize_polarity(&pairs)
            };
            Assessment::Stratified(StratifiedValue::new(
                side(Polarity::Support),
                side(Polarity::Refute),
            ))
        }
    };

    let mut discrepancy = None;
    let assessment = match (domain, r.assessment) {
        (DomainKind::Stratified, claimed) => {
            if let Some(c) = claimed.filter(|c| *c != derived) {
                discrepancy = Some(format!(
                    "claimed {c} for {} disagrees with evidence summary {derived}; using the summary",
                    claim.key
                ));
            }
            derived
        }
        (_, None) => derived,
        (_, Some(a)) if r.evidence.is_empty() => a,
        (_, Some(a)) if a == derived => a,
        (_, Some(a)) => {
            return Err(format!(
                "assessment {a} is inconsistent with the strongest evidence {derived}"
            ));
        }
    };
    Ok(Resolution {
        assessment,
        items,
        discrepancy,
    })
}

/// Checks the frame property between two states for a processed node.
pub fn frame_violations(before: &GlobalState, after: &GlobalState, n: &NodeId) -> Vec<NodeId> {
    before
        .nodes()
        .filter(|(m, ns)| *m != n && !after.node(m).is_ok_and(|other| other == *ns))
        .map(|(m, _)| m.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{
        AgentGenResult, EvidenceSeed, ScriptEntry, ScriptKey, ScriptResult, ScriptVisit,
        ScriptedAgent,
    };
    use crate::assessment::ConfidenceBasis;
    use crate::claims::SourceKind;
    use crate::graph::fixtures::review_graph;
    use crate::queries::{EvalQuery, GenQuery, Template};
    use crate::revision::RevisionLimits;
    use Strength::{Bot, Strong as S, Weak as W};

    fn specs() -> QuerySpecs {
        QuerySpecs::new(EvalQuery {
            id: "eval".into(),
            template: Template::parse("Assess: {claim}").unwrap(),
            bilateral: true,
            support_focus: None,
            refute_focus: None,
        })
    }

    fn seed(pol: Polarity, strength: Strength, basis: ConfidenceBasis) -> EvidenceItem {
        EvidenceItem::Fresh(EvidenceSeed {
            id: None,
            polarity: pol,
            strength,
            basis,
            source_kind: SourceKind::Doc,
            excerpt: format!("{pol:?} {strength}"),
        })
    }

    fn eval_entry(
        n: &str,
        key: &str,
        visit: ScriptVisit,
        a: Option<Assessment>,
        ev: Vec<EvidenceItem>,
    ) -> ScriptEntry {
        ScriptEntry {
            key: ScriptKey {
                node: n.into(),
                key: key.into(),
                visit,
            },
            result: ScriptResult::Eval(AgentEvalResult {
                assessment: a,
                evidence: ev,
                rationale: String::new(),
            }),
        }
    }

    fn cfg(specs: &QuerySpecs) -> StepConfig<'_> {
        StepConfig {
            goal: "goal",
            specs,
            evidence_cap: 8,
            retries: 1,
        }
    }

    const POS: StepPosition = StepPosition {
        epoch: 1,
        step: 1,
        visit: 0,
    };

    fn state_with(claims: &[(&str, &str)]) -> (EvaluationGraph, GlobalState) {
        let g = review_graph();
        let mut s = GlobalState::new(&g, DomainKind::Graded);
        for (n, text) in claims {
            s.insert_claim(Claim::new((*n).into(), *text, ClaimOrigin::Seeded).unwrap())
                .unwrap();
        }
        (g, s)
    }

    #[test]
    fn verifier_step_joins_both_claims() {
        let (g, mut s) = state_with(&[("n_2", "verifier local"), ("n_2", "verifier scope")]);
        let mut agent = ScriptedAgent::from_entries([
            eval_entry(
                "n_2",
                "verifier local",
                ScriptVisit::Exact(0),
                Some(Assessment::graded(S, Bot)),
                vec![seed(Polarity::Support, S, ConfidenceBasis::Located)],
            ),
            eval_entry(
                "n_2",
                "verifier scope",
                ScriptVisit::Exact(0),
                Some(Assessment::graded(Bot, W)),
                vec![seed(Polarity::Refute, W, ConfidenceBasis::Located)],
            ),
        ]);
        let sp = specs();
        let before = s.clone();
        let rep = apply_transformer(
            &g,
            &mut s,
            &"n_2".into(),
            &mut agent,
            ClaimPolicy::default(),
            cfg(&sp),
            POS,
            None,
        )
        .unwrap();
        assert!(rep.ac_changed);
        assert_eq!(rep.updates.len(), 2);
        assert_eq!(rep.updates[0].after, Assessment::graded(S, Bot));
        assert_eq!(rep.updates[1].after, Assessment::graded(Bot, W));
        assert!(rep.updates.iter().all(|u| u.before.is_bottom()));
        assert!(frame_violations(&before, &s, &"n_2".into()).is_empty());
        assert_eq!(s.evidence_store().count(), 2);
    }

    #[test]
    fn empty_node_is_a_no_op() {
        let (g, mut s) = state_with(&[]);
        let before = s.clone();
        let sp = specs();
        let rep = apply_transformer(
            &g,
            &mut s,
            &"n_4".into(),
            &mut ScriptedAgent::new(),
            ClaimPolicy::default(),
            cfg(&sp),
            POS,
            None,
        )
        .unwrap();
        assert_eq!(rep, StepReport::default());
        assert_eq!(before, s);
    }

    #[test]
    fn generation_respects_cap() {
        let (g, mut s) = state_with(&[("n_3", "fields are checked")]);
        let mut sp = specs();
        sp.gen.insert(
            "n_3".into(),
            vec![GenQuery::new(
                "ranges",
                Template::parse("Propose ranges.\n{code}").unwrap(),
                4,
            )
            .unwrap()],
        );
        let mut agent = ScriptedAgent::from_entries([
            eval_entry("n_3", "fields are checked", ScriptVisit::Any, None, vec![]),
            eval_entry(
                "n_3",
                "amount is bounded",
                ScriptVisit::Any,
                Some(Assessment::graded(W, Bot)),
                vec![],
            ),
            ScriptEntry {
                key: ScriptKey {
                    node: "n_3".into(),
                    key: "ranges".into(),
                    visit: ScriptVisit::Any,
                },
                result: ScriptResult::Gen(AgentGenResult {
                    claims: vec![
                        "Amount is bounded.".into(),
                        "recipient is non-empty".into(),
                        "fields are checked".into(),
                    ],
                }),
            },
        ]);
        let rep = apply_transformer(
            &g,
            &mut s,
            &"n_3".into(),
            &mut agent,
            ClaimPolicy { cap: 2 },
            cfg(&sp),
            POS,
            None,
        )
        .unwrap();
        let keys: Vec<_> = s.node(&"n_3".into()).unwrap().keys().collect();
        assert_eq!(keys, ["fields are checked", "amount is bounded"]);
        let discarded: Vec<_> = rep
            .diagnostics
            .iter()
            .filter(|d| d.kind == DiagnosticKind::CapExceeded)
            .collect();
        assert_eq!(discarded.len(), 1);
        assert_eq!(rep.inserted.len(), 1);
        assert_eq!(rep.updates.last().unwrap().phase, UpdatePhase::New);
        assert_eq!(
            rep.updates.last().unwrap().after,
            Assessment::graded(W, Bot)
        );
        assert!(rep.ac_changed);
    }

    #[test]
    fn truncates_long_generations() {
        let (g, mut s) = state_with(&[]);
        let mut sp = specs();
        sp.gen.insert(
            "n_3".into(),
            vec![GenQuery::new("q", Template::parse("x").unwrap(), 1).unwrap()],
        );
        let mut agent = ScriptedAgent::from_entries([
            ScriptEntry {
                key: ScriptKey {
                    node: "n_3".into(),
                    key: "q".into(),
                    visit: ScriptVisit::Any,
                },
                result: ScriptResult::Gen(AgentGenResult {
                    claims: vec!["a".into(), "b".into()],
                }),
            },
            eval_entry("n_3", "a", ScriptVisit::Any, None, vec![]),
        ]);
        let rep = apply_transformer(
            &g,
            &mut s,
            &"n_3".into(),
            &mut agent,
            ClaimPolicy::default(),
            cfg(&sp),
            POS,
            None,
        )
        .unwrap();
        assert!(rep
            .diagnostics
            .iter()
            .any(|d| d.kind == DiagnosticKind::GenTruncated));
        assert_eq!(s.node(&"n_3".into()).unwrap().len(), 1);
    }

    #[test]
    fn inconsistent_result_is_a_diagnostic() {
        let (g, mut s) = state_with(&[("n_1", "parser safe")]);
        let mut agent = ScriptedAgent::from_entries([eval_entry(
            "n_1",
            "parser safe",
            ScriptVisit::Any,
            Some(Assessment::graded(S, Bot)),
            vec![seed(Polarity::Support, W, ConfidenceBasis::Located)],
        )]);
        let sp = specs();
        let before = s.clone();
        let rep = apply_transformer(
            &g,
            &mut s,
            &"n_1".into(),
            &mut agent,
            ClaimPolicy::default(),
            cfg(&sp),
            POS,
            None,
        )
        .unwrap();
        assert!(!rep.ac_changed);
        assert_eq!(rep.diagnostics[0].kind, DiagnosticKind::MalformedResponse);
        assert_eq!(s, before);
    }

    #[test]
    fn missing_script_entry_is_a_diagnostic() {
        let (g, mut s) = state_with(&[("n_1", "parser safe")]);
        let sp = specs();
        let rep = apply_transformer(
            &g,
            &mut s,
            &"n_1".into(),
            &mut ScriptedAgent::new(),
            ClaimPolicy::default(),
            cfg(&sp),
            POS,
            None,
        )
        .unwrap();
        assert_eq!(rep.diagnostics[0].kind, DiagnosticKind::NoScriptEntry);
    }

    #[test]
    fn stratified_is_derived_from_evidence() {
        let g = review_graph();
        let mut s = GlobalState::new(&g, DomainKind::Stratified);
        s.insert_claim(Claim::new("n_1".into(), "parser safe", ClaimOrigin::Seeded).unwrap())
            .unwrap();
        let mut agent = ScriptedAgent::from_entries([eval_entry(
            "n_1",
            "parser safe",
            ScriptVisit::Any,
            Some(Assessment::bottom(DomainKind::Stratified)),
            vec![
                seed(Polarity::Support, S, ConfidenceBasis::Model),
                seed(Polarity::Support, W, ConfidenceBasis::Checked),
            ],
        )]);
        let sp = specs();
        let rep = apply_transformer(
            &g,
            &mut s,
            &"n_1".into(),
            &mut agent,
            ClaimPolicy::default(),
            cfg(&sp),
            POS,
            None,
        )
        .unwrap();
        assert!(rep
            .diagnostics
            .iter()
            .any(|d| d.kind == DiagnosticKind::StratifiedDiscrepancy));
        let Assessment::Stratified(v) = rep.updates[0].after else {
            panic!()
        };
        assert_eq!(v.support.at(ConfidenceBasis::Model), S);
        assert_eq!(v.support.at(ConfidenceBasis::Checked), W);
    }

    #[test]
    fn recitation_absorbs() {
        let (g, mut s) = state_with(&[("n_1", "parser safe")]);
        let mut sp_seed = seed(Polarity::Refute, S, ConfidenceBasis::Applicable);
        if let EvidenceItem::Fresh(x) = &mut sp_seed {
            x.id = Some(EvidenceId::new("adv-1"));
        }
        let mut agent = ScriptedAgent::from_entries([
            eval_entry(
                "n_1",
                "parser safe",
                ScriptVisit::Exact(0),
                Some(Assessment::graded(Bot, S)),
                vec![sp_seed],
            ),
            eval_entry(
                "n_1",
                "parser safe",
                ScriptVisit::Any,
                Some(Assessment::graded(Bot, S)),
                vec![EvidenceItem::Cite {
                    cite: EvidenceId::new("adv-1"),
                }],
            ),
        ]);
        let sp = specs();
        let n: NodeId = "n_1".into();
        let first = apply_transformer(
            &g,
            &mut s,
            &n,
            &mut agent,
            ClaimPolicy::default(),
            cfg(&sp),
            POS,
            None,
        )
        .unwrap();
        assert!(first.ac_changed);
        let pos = StepPosition {
            visit: 1,
            step: 2,
            ..POS
        };
        let second = apply_transformer(
            &g,
            &mut s,
            &n,
            &mut agent,
            ClaimPolicy::default(),
            cfg(&sp),
            pos,
            None,
        )
        .unwrap();
        assert!(!second.ac_changed);
        assert!(!second.evidence_only);
        assert_eq!(s.evidence_store().count(), 1);
    }

    #[test]
    fn introductions_can_be_denied() {
        let (g, mut s) = state_with(&[]);
        let mut sp = specs();
        sp.gen.insert(
            "n_3".into(),
            vec![GenQuery::new("q", Template::parse("x").unwrap(), 2).unwrap()],
        );
        let mut agent = ScriptedAgent::from_entries([ScriptEntry {
            key: ScriptKey {
                node: "n_3".into(),
                key: "q".into(),
                visit: ScriptVisit::Any,
            },
            result: ScriptResult::Gen(AgentGenResult {
                claims: vec!["a".into()],
            }),
        }]);
        let mut counters = BoundedCounters::new(RevisionLimits {
            introductions: 0,
            retractions: 0,
            downward: 0,
        });
        let rep = apply_transformer(
            &g,
            &mut s,
            &"n_3".into(),
            &mut agent,
            ClaimPolicy::default(),
            cfg(&sp),
            POS,
            Some(&mut counters),
        )
        .unwrap();
        assert!(rep
            .diagnostics
            .iter()
            .any(|d| d.kind == DiagnosticKind::IntroductionDenied));
        assert!(s.node(&"n_3".into()).unwrap().is_empty());
    }
}
