//! Scenario files: a single JSON document that fully determines a run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use serde_json::Value;

use crate::agent::{
    decode_eval_value, Agent, AgentGenResult, ScriptEntry, ScriptKey, ScriptResult, ScriptVisit,
    ScriptedAgent,
};
use crate::assessment::{stratified_levels_unchecked, Assessment, DomainKind};
use crate::claims::{canonicalize, Claim, ClaimOrigin, GlobalState};
use crate::graph::{EvaluationGraph, NodeId, ProgramGraph, Violation};
use crate::queries::{
    EvalQuery, GenQuery, Placeholder, QuerySpecs, Template, DEFAULT_EVIDENCE_CAP,
};
use crate::revision::{
    run_epochs, BoundedMode, BoundedMove, EpochConfig, EpochRun, RevisionAction, RevisionLimits,
    RevisionPlan, RevisionTarget,
};
use crate::transformer::DEFAULT_CLAIM_CAP;
use crate::worklist::{ActionLabels, CapTable, Harness, RunError, RunOptions, WorklistPolicy};

pub const DEFAULT_RETRIES: u32 = 1;
pub const DEFAULT_TIMEOUT_SECS: u64 = 120;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosticClass {
    Io,
    Parse,
    Validation(&'static str),
}

/// A load problem with its location: `line:col` for syntax and type errors,
/// a JSON path for validation errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadDiagnostic {
    pub class: DiagnosticClass,
    pub location: String,
    pub message: String,
}

impl fmt::Display for LoadDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let class = match &self.class {
            DiagnosticClass::Io => "io error",
            DiagnosticClass::Parse => "parse error",
            DiagnosticClass::Validation(rule) => rule,
        };
        if self.location.is_empty() {
            write!(f, "{class}: {}", self.message)
        } else {
            write!(f, "{}: {class}: {}", self.location, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadError {
    pub diagnostics: Vec<LoadDiagnostic>,
}

impl LoadError {
    pub fn has_rule(&self, rule: &str) -> bool {
        self.diagnostics
            .iter()
            .any(|d| d.class == DiagnosticClass::Validation(rule_name(rule)))
    }
}

// Interned rule names so diagnostics compare cheaply.
fn rule_name(rule: &str) -> &'static str {
    RULES
        .iter()
        .find(|r| **r == rule)
        .copied()
        .unwrap_or("Unknown")
}

const RULES: &[&str] = &[
    "EmptyNodeId",
    "DuplicateNode",
    "Disjointness",
    "DanglingEdge",
    "DuplicateEdge",
    "NeighborhoodViolation",
    "UnknownNeighborhoodOwner",
    "UnknownSourceNode",
    "UnknownNode",
    "EmptyClaim",
    "DuplicateClaim",
    "DuplicateLabel",
    "SeedNotBottom",
    "NonAntitone",
    "BadAssessment",
    "BadTemplate",
    "MissingPlaceholderData",
    "ZeroMaxClaims",
    "DuplicateQuery",
    "ZeroCap",
    "CapBelowSeeds",
    "UnknownPolicy",
    "DanglingScript",
    "DuplicateScript",
    "BadScript",
    "BadVisit",
    "DanglingRevisionTarget",
    "BadEpoch",
    "UnknownBackend",
];

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for LoadError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Scripted,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    pub endpoint: Option<String>,
    pub timeout: Duration,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub goal: String,
    pub domain: DomainKind,
    pub graph: EvaluationGraph,
    /// Seeded claims in declaration order.
    pub claims: Vec<Claim>,
    pub specs: QuerySpecs,
    pub caps: CapTable,
    pub policy: WorklistPolicy,
    pub hard_step_cap: Option<u64>,
    pub evidence_cap: usize,
    pub labels: ActionLabels,
    pub script: Vec<ScriptEntry>,
    pub backend: BackendKind,
    pub remote: RemoteConfig,
    pub retries: u32,
    pub epochs: EpochConfig,
    pub bounded: Option<(RevisionLimits, Vec<BoundedMove>)>,
    /// `(node, claim key)` whose final value is the verdict.
    pub goal_claim: Option<(NodeId, String)>,
}

impl Scenario {
    pub fn initial_state(&self) -> GlobalState {
        let mut s = GlobalState::new(&self.graph, self.domain);
        for c in &self.claims {
            s.insert_claim(c.clone()).expect("validated at load");
        }
        s
    }

    pub fn harness(&self) -> Harness<'_> {
        Harness {
            graph: &self.graph,
            specs: &self.specs,
            goal: &self.goal,
            caps: &self.caps,
            labels: &self.labels,
            evidence_cap: self.evidence_cap,
            retries: self.retries,
        }
    }

    pub fn scripted_agent(&self) -> ScriptedAgent {
        ScriptedAgent::from_entries(self.script.iter().cloned())
    }

    pub fn bounded_mode(&self) -> Option<BoundedMode> {
        self.bounded
            .as_ref()
            .map(|(limits, moves)| BoundedMode::new(*limits, moves.clone()))
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            policy: self.policy.clone(),
            hard_step_cap: self.hard_step_cap,
            ..RunOptions::default()
        }
    }

    /// Runs every configured epoch with the given agent.
    pub fn run(&self, agent: &mut dyn Agent, opts: &RunOptions) -> Result<EpochRun, RunError> {
        let mut bounded = self.bounded_mode();
        run_epochs(
            &self.harness(),
            self.initial_state(),
            agent,
            opts,
            &self.epochs,
            bounded.as_mut(),
        )
    }

    /// Label of a claim, falling back to its key.
    pub fn label_of(&self, node: &NodeId, key: &str) -> String {
        self.claims
            .iter()
            .find(|c| &c.node == node && c.key == key)
            .map_or_else(|| key.to_string(), |c| c.label.clone())
    }

    /// Builds a policy from its command-line name.
    pub fn policy_named(&self, name: &str, seed: Option<u64>) -> Option<WorklistPolicy> {
        let scripted_steps = match &self.policy {
            WorklistPolicy::ScriptedOrder { steps } => Some(steps.clone()),
            _ => None,
        };
        let goal = self.goal_claim.as_ref().map(|(n, _)| n.clone());
        policy_from_name(name, scripted_steps, goal, seed)
    }
}

fn policy_from_name(
    name: &str,
    steps: Option<Vec<NodeId>>,
    goal: Option<NodeId>,
    seed: Option<u64>,
) -> Option<WorklistPolicy> {
    Some(match name.replace('_', "-").to_ascii_lowercase().as_str() {
        "fifo" => WorklistPolicy::Fifo,
        "lifo" => WorklistPolicy::Lifo,
        "wto" => WorklistPolicy::Wto,
        "goal-directed" => WorklistPolicy::GoalDirected { goal: goal? },
        "feedback-priority" => WorklistPolicy::FeedbackPriority,
        "scripted-order" => WorklistPolicy::ScriptedOrder { steps: steps? },
        "shuffled" => WorklistPolicy::Shuffled {
            seed: seed.unwrap_or(0),
        },
        _ => return None,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    goal: String,
    domain: DomainKind,
    graph: RawGraph,
    #[serde(default)]
    claims: Vec<RawClaim>,
    queries: RawQueries,
    #[serde(default)]
    caps: RawCaps,
    #[serde(default)]
    policy: Option<RawPolicy>,
    #[serde(default)]
    budget: RawBudget,
    #[serde(default)]
    evidence_cap: Option<usize>,
    #[serde(default)]
    step_labels: BTreeMap<NodeId, Vec<String>>,
    #[serde(default)]
    agent: RawAgent,
    #[serde(default)]
    revision: Option<RawRevision>,
    #[serde(default)]
    goal_claim: Option<RawClaimRef>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    program_nodes: Vec<NodeId>,
    #[serde(default)]
    program_edges: Vec<(NodeId, NodeId)>,
    #[serde(default)]
    aux_nodes: Vec<NodeId>,
    #[serde(default)]
    context_edges: Vec<(NodeId, NodeId)>,
    #[serde(default)]
    feedback_edges: Vec<(NodeId, NodeId)>,
    #[serde(default)]
    neighborhood: BTreeMap<NodeId, Vec<NodeId>>,
    #[serde(default)]
    sources: BTreeMap<NodeId, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClaim {
    node: NodeId,
    #[serde(default)]
    label: Option<String>,
    text: String,
    #[serde(default)]
    assessment: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    id: String,
    template: String,
    #[serde(default)]
    bilateral: bool,
    #[serde(default)]
    support_focus: Option<String>,
    #[serde(default)]
    refute_focus: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGen {
    id: String,
    template: String,
    max_claims: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQueries {
    default_eval: RawEval,
    #[serde(default)]
    per_node: BTreeMap<NodeId, RawEval>,
    #[serde(default)]
    gen: BTreeMap<NodeId, Vec<RawGen>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawCaps {
    #[serde(default)]
    default: Option<usize>,
    #[serde(default)]
    per_node: BTreeMap<NodeId, usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    kind: String,
    #[serde(default)]
    steps: Option<Vec<NodeId>>,
    #[serde(default)]
    goal: Option<NodeId>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBudget {
    #[serde(default)]
    hard_step_cap: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    #[serde(default)]
    backend: Option<String>,
    #[serde(default)]
    retries: Option<u32>,
    #[serde(default)]
    script: Vec<RawScriptEntry>,
    #[serde(default)]
    remote: Option<RawRemote>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScriptEntry {
    node: NodeId,
    #[serde(default)]
    claim: Option<String>,
    #[serde(default)]
    gen: Option<String>,
    visit: Value,
    #[serde(default)]
    eval: Option<Value>,
    #[serde(default)]
    claims: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRemote {
    #[serde(default)]
    endpoint: Option<String>,
    #[serde(default)]
    timeout_secs: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRevision {
    #[serde(default)]
    epoch_limit: Option<u32>,
    #[serde(default)]
    plans: BTreeMap<String, RawPlan>,
    #[serde(default)]
    bounded: Option<RawBounded>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    #[serde(default)]
    lowers: Vec<RawTarget>,
    #[serde(default)]
    retractions: Vec<RawTarget>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    node: NodeId,
    claim: String,
    #[serde(default)]
    reason: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounded {
    #[serde(default)]
    limits: RevisionLimits,
    #[serde(default)]
    moves: Vec<RawMove>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMove {
    #[serde(default)]
    epoch: Option<u32>,
    before_step: u32,
    node: NodeId,
    claim: String,
    action: RevisionAction,
    #[serde(default)]
    reason: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClaimRef {
    node: NodeId,
    claim: String,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| LoadError {
        diagnostics: vec![LoadDiagnostic {
            class: DiagnosticClass::Io,
            location: path.display().to_string(),
            message: e.to_string(),
        }],
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, LoadError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawScenario = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let suffix = format!(" at line {} column {}", inner.line(), inner.column());
        let text = inner.to_string();
        let text = text.strip_suffix(&suffix).unwrap_or(&text).to_string();
        LoadError {
            diagnostics: vec![LoadDiagnostic {
                class: DiagnosticClass::Parse,
                location: format!("{}:{}", inner.line(), inner.column()),
                message: if path.is_empty() || path == "." {
                    text
                } else {
                    format!("at {path}: {text}")
                },
            }],
        }
    })?;
    Validator::default().build(raw)
}

#[derive(Default)]
struct Validator {
    diags: Vec<LoadDiagnostic>,
}

impl Validator {
    fn push(
        &mut self,
        rule: &'static str,
        location: impl Into<String>,
        message: impl Into<String>,
    ) {
        self.diags.push(LoadDiagnostic {
            class: DiagnosticClass::Validation(rule),
            location: location.into(),
            message: message.into(),
        });
    }

    fn template(&mut self, raw: &str, at: &str) -> Option<Template> {
        match Template::parse(raw) {
            Ok(t) => Some(t),
            Err(e) => {
                self.push("BadTemplate", at, e.to_string());
                None
            }
        }
    }

    fn eval_query(&mut self, raw: RawEval, at: &str) -> Option<EvalQuery> {
        let template = self.template(&raw.template, &format!("{at}.template"))?;
        Some(EvalQuery {
            id: raw.id,
            template,
            bilateral: raw.bilateral,
            support_focus: raw.support_focus,
            refute_focus: raw.refute_focus,
        })
    }

    fn node(&mut self, g: &EvaluationGraph, n: &NodeId, at: &str) -> bool {
        if g.contains(n) {
            true
        } else {
            self.push(
                "UnknownNode",
                at,
                format!("node {n} is not in the evaluation graph"),
            );
            false
        }
    }

    fn build(mut self, raw: RawScenario) -> Result<Scenario, LoadError> {
        let domain = raw.domain;

        // Graph.
        let rg = raw.graph;
        let neighborhood = rg
            .neighborhood
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().collect::<BTreeSet<_>>()))
            .collect();
        let graph = EvaluationGraph::new(
            ProgramGraph {
                nodes: rg.program_nodes,
                edges: rg.program_edges,
                sources: rg.sources,
            },
            rg.aux_nodes,
            rg.context_edges,
            rg.feedback_edges,
            neighborhood,
        );
        for v in graph.validate() {
            let rule = match &v {
                Violation::EmptyNodeId => "EmptyNodeId",
                Violation::DuplicateNode { .. } => "DuplicateNode",
                Violation::Disjointness { .. } => "Disjointness",
                Violation::DanglingEdge { .. } => "DanglingEdge",
                Violation::DuplicateEdge { .. } => "DuplicateEdge",
                Violation::NeighborhoodViolation { .. } => "NeighborhoodViolation",
                Violation::UnknownNeighborhoodOwner { .. } => "UnknownNeighborhoodOwner",
                Violation::UnknownSourceNode { .. } => "UnknownSourceNode",
            };
            self.push(rule, "graph", v.to_string());
        }
        let g = &graph;

        // Claims.
        let mut claims: Vec<Claim> = Vec::new();
        let mut labels = BTreeSet::new();
        for (i, rc) in raw.claims.into_iter().enumerate() {
            let at = format!("claims[{i}]");
            let node_ok = self.node(g, &rc.node, &format!("{at}.node"));
            let claim = match Claim::new(rc.node.clone(), rc.text.clone(), ClaimOrigin::Seeded) {
                Ok(c) => c,
                Err(_) => {
                    self.push(
                        "EmptyClaim",
                        format!("{at}.text"),
                        "claim text is empty after canonicalization",
                    );
                    continue;
                }
            };
            let claim = match rc.label {
                Some(l) => claim.with_label(l),
                None => claim,
            };
            if claims
                .iter()
                .any(|c| c.node == claim.node && c.key == claim.key)
            {
                self.push(
                    "DuplicateClaim",
                    &at,
                    format!("claim {:?} already exists at {}", claim.key, claim.node),
                );
                continue;
            }
            if !labels.insert(claim.label.clone()) {
                self.push(
                    "DuplicateLabel",
                    format!("{at}.label"),
                    format!("label {:?} is used twice", claim.label),
                );
            }
            if let Some(v) = rc.assessment {
                self.seed_assessment(&v, domain, &format!("{at}.assessment"));
            }
            if node_ok {
                claims.push(claim);
            }
        }

        // Queries.
        let mut specs = None;
        if let Some(default_eval) =
            self.eval_query(raw.queries.default_eval, "queries.default_eval")
        {
            let mut s = QuerySpecs::new(default_eval);
            for (n, re) in raw.queries.per_node {
                let at = format!("queries.per_node.{n}");
                if self.node(g, &n, &at) {
                    if let Some(q) = self.eval_query(re, &at) {
                        s.per_node.insert(n, q);
                    }
                }
            }
            for (n, list) in raw.queries.gen {
                let at = format!("queries.gen.{n}");
                if !self.node(g, &n, &at) {
                    continue;
                }
                let mut ids = BTreeSet::new();
                let mut out = Vec::new();
                for (i, rq) in list.into_iter().enumerate() {
                    let qat = format!("{at}[{i}]");
                    if !ids.insert(rq.id.clone()) {
                        self.push(
                            "DuplicateQuery",
                            &qat,
                            format!("query id {:?} repeats at {n}", rq.id),
                        );
                        continue;
                    }
                    let Some(t) = self.template(&rq.template, &format!("{qat}.template")) else {
                        continue;
                    };
                    if t.uses(Placeholder::Claim) {
                        self.push(
                            "MissingPlaceholderData",
                            format!("{qat}.template"),
                            "generative templates have no {claim}",
                        );
                        continue;
                    }
                    match GenQuery::new(rq.id, t, rq.max_claims) {
                        Ok(q) => out.push(q),
                        Err(e) => {
                            self.push("ZeroMaxClaims", format!("{qat}.max_claims"), e.to_string())
                        }
                    }
                }
                s.gen.insert(n, out);
            }
            specs = Some(s);
        }

        // Caps.
        let mut caps = CapTable {
            default: raw.caps.default.unwrap_or(DEFAULT_CLAIM_CAP),
            per_node: BTreeMap::new(),
        };
        if caps.default == 0 {
            self.push("ZeroCap", "caps.default", "claim caps must be positive");
        }
        for (n, k) in raw.caps.per_node {
            let at = format!("caps.per_node.{n}");
            if !self.node(g, &n, &at) {
                continue;
            }
            if k == 0 {
                self.push("ZeroCap", &at, "claim caps must be positive");
            }
            caps.per_node.insert(n, k);
        }
        for n in g.nodes() {
            let seeded = claims.iter().filter(|c| &c.node == n).count();
            let cap = caps.policy(n).cap;
            if seeded > cap {
                self.push(
                    "CapBelowSeeds",
                    format!("caps.per_node.{n}"),
                    format!("{seeded} seeded claims exceed cap {cap}"),
                );
            }
        }

        // Step labels.
        for n in raw.step_labels.keys() {
            self.node(g, n, &format!("step_labels.{n}"));
        }
        let labels = ActionLabels {
            per_node: raw.step_labels,
        };

        // Script. Keys that generation entries may introduce count as known.
        let resolve =
            |node: &NodeId, r: &str, generated: &BTreeSet<(NodeId, String)>| -> Option<String> {
                if let Some(c) = claims.iter().find(|c| &c.node == node && c.label == r) {
                    return Some(c.key.clone());
                }
                let key = canonicalize(r).ok()?;
                let known = claims.iter().any(|c| &c.node == node && c.key == key)
                    || generated.contains(&(node.clone(), key.clone()));
                known.then_some(key)
            };
        let mut generated = BTreeSet::new();
        for e in &raw.agent.script {
            for text in e.claims.iter().flatten() {
                if let Ok(k) = canonicalize(text) {
                    generated.insert((e.node.clone(), k));
                }
            }
        }
        let mut script = Vec::new();
        let mut seen_keys = BTreeSet::new();
        for (i, e) in raw.agent.script.iter().enumerate() {
            let at = format!("agent.script[{i}]");
            if !self.node(g, &e.node, &format!("{at}.node")) {
                continue;
            }
            let visit = match &e.visit {
                Value::Number(n) if n.as_u64().is_some_and(|v| v <= u64::from(u32::MAX)) => {
                    ScriptVisit::Exact(n.as_u64().expect("checked") as u32)
                }
                Value::String(s) if s == "*" => ScriptVisit::Any,
                other => {
                    self.push(
                        "BadVisit",
                        format!("{at}.visit"),
                        format!("expected a visit index or \"*\", got {other}"),
                    );
                    continue;
                }
            };
            let entry = match (&e.claim, &e.gen, &e.eval, &e.claims) {
                (Some(c), None, Some(v), None) => {
                    let Some(key) = resolve(&e.node, c, &generated) else {
                        self.push(
                            "DanglingScript",
                            format!("{at}.claim"),
                            format!("no claim {c:?} at {}", e.node),
                        );
                        continue;
                    };
                    match decode_eval_value(v, domain, &format!("{at}.eval"), true) {
                        Ok(r) => ScriptEntry {
                            key: ScriptKey {
                                node: e.node.clone(),
                                key,
                                visit,
                            },
                            result: ScriptResult::Eval(r),
                        },
                        Err(errs) => {
                            for err in errs {
                                self.push("BadScript", err.path, err.message);
                            }
                            continue;
                        }
                    }
                }
                (None, Some(q), None, Some(texts)) => {
                    let known = specs
                        .as_ref()
                        .is_some_and(|s| s.spec_for(&e.node).gen.iter().any(|gq| &gq.id == q));
                    if !known {
                        self.push(
                            "DanglingScript",
                            format!("{at}.gen"),
                            format!("no generative query {q:?} at {}", e.node),
                        );
                        continue;
                    }
                    ScriptEntry {
                        key: ScriptKey {
                            node: e.node.clone(),
                            key: q.clone(),
                            visit,
                        },
                        result: ScriptResult::Gen(AgentGenResult {
                            claims: texts.clone(),
                        }),
                    }
                }
                _ => {
                    self.push(
                        "BadScript",
                        &at,
                        "an entry needs either claim + eval or gen + claims",
                    );
                    continue;
                }
            };
            let kind = matches!(entry.result, ScriptResult::Gen(_));
            if !seen_keys.insert((kind, entry.key.clone())) {
                self.push(
                    "DuplicateScript",
                    &at,
                    format!(
                        "({}, {}, {}) is scripted twice",
                        entry.key.node, entry.key.key, entry.key.visit
                    ),
                );
                continue;
            }
            script.push(entry);
        }

        let backend = match raw.agent.backend.as_deref() {
            None | Some("scripted") => BackendKind::Scripted,
            Some("remote") => BackendKind::Remote,
            Some(other) => {
                self.push(
                    "UnknownBackend",
                    "agent.backend",
                    format!("unknown backend {other:?}"),
                );
                BackendKind::Scripted
            }
        };
        let remote = RemoteConfig {
            endpoint: raw.agent.remote.as_ref().and_then(|r| r.endpoint.clone()),
            timeout: Duration::from_secs(
                raw.agent
                    .remote
                    .as_ref()
                    .and_then(|r| r.timeout_secs)
                    .unwrap_or(DEFAULT_TIMEOUT_SECS),
            ),
        };

        // Goal claim.
        let goal_claim = raw.goal_claim.and_then(|gc| {
            if !self.node(g, &gc.node, "goal_claim.node") {
                return None;
            }
            match resolve(&gc.node, &gc.claim, &generated) {
                Some(k) => Some((gc.node, k)),
                None => {
                    self.push(
                        "DanglingScript",
                        "goal_claim.claim",
                        format!("no claim {:?} at {}", gc.claim, gc.node),
                    );
                    None
                }
            }
        });

        // Policy.
        let policy = match raw.policy {
            None => WorklistPolicy::Fifo,
            Some(p) => {
                if let Some(steps) = &p.steps {
                    for (i, n) in steps.iter().enumerate() {
                        self.node(g, n, format!("policy.steps[{i}]").as_str());
                    }
                }
                if let Some(n) = &p.goal {
                    self.node(g, n, "policy.goal");
                }
                let goal = p
                    .goal
                    .clone()
                    .or_else(|| goal_claim.as_ref().map(|(n, _)| n.clone()));
                match policy_from_name(&p.kind, p.steps.clone(), goal, p.seed) {
                    Some(pol) => pol,
                    None => {
                        self.push(
                            "UnknownPolicy",
                            "policy.kind",
                            format!("unknown policy {:?} or missing parameters", p.kind),
                        );
                        WorklistPolicy::Fifo
                    }
                }
            }
        };

        // Revision.
        let mut epochs = EpochConfig::default();
        let mut bounded = None;
        if let Some(rv) = raw.revision {
            let target = |this: &mut Self, t: RawTarget, at: &str| -> Option<RevisionTarget> {
                if !this.node(g, &t.node, &format!("{at}.node")) {
                    return None;
                }
                match resolve(&t.node, &t.claim, &generated) {
                    Some(claim) => Some(RevisionTarget {
                        node: t.node,
                        claim,
                        reason: t.reason,
                    }),
                    None => {
                        this.push(
                            "DanglingRevisionTarget",
                            format!("{at}.claim"),
                            format!("no claim {:?} at {}", t.claim, t.node),
                        );
                        None
                    }
                }
            };
            for (k, plan) in rv.plans {
                let at = format!("revision.plans.{k}");
                let Some(epoch) = k.parse::<u32>().ok().filter(|e| *e >= 1) else {
                    self.push("BadEpoch", &at, "plan keys are epoch numbers starting at 1");
                    continue;
                };
                let mut out = RevisionPlan::default();
                for (i, t) in plan.lowers.into_iter().enumerate() {
                    out.lowers
                        .extend(target(&mut self, t, &format!("{at}.lowers[{i}]")));
                }
                for (i, t) in plan.retractions.into_iter().enumerate() {
                    out.retractions
                        .extend(target(&mut self, t, &format!("{at}.retractions[{i}]")));
                }
                epochs.plans.insert(epoch, out);
            }
            let last_plan = epochs.plans.keys().next_back().copied().unwrap_or(0);
            epochs.epoch_limit = rv.epoch_limit.unwrap_or(last_plan + 1);
            if epochs.epoch_limit == 0 {
                self.push(
                    "BadEpoch",
                    "revision.epoch_limit",
                    "epoch_limit must be at least 1",
                );
            }
            if let Some(b) = rv.bounded {
                let mut moves = Vec::new();
                for (i, m) in b.moves.into_iter().enumerate() {
                    let at = format!("revision.bounded.moves[{i}]");
                    let t = RawTarget {
                        node: m.node,
                        claim: m.claim,
                        reason: m.reason,
                    };
                    if let Some(t) = target(&mut self, t, &at) {
                        moves.push(BoundedMove {
                            epoch: m.epoch.unwrap_or(1),
                            before_step: m.before_step,
                            node: t.node,
                            claim: t.claim,
                            action: m.action,
                            reason: t.reason,
                        });
                    }
                }
                bounded = Some((b.limits, moves));
            }
        }

        if !self.diags.is_empty() {
            return Err(LoadError {
                diagnostics: self.diags,
            });
        }
        Ok(Scenario {
            goal: raw.goal,
            domain,
            graph,
            claims,
            specs: specs.expect("no diagnostics"),
            caps,
            policy,
            hard_step_cap: raw.budget.hard_step_cap,
            evidence_cap: raw.evidence_cap.unwrap_or(DEFAULT_EVIDENCE_CAP),
            labels,
            script,
            backend,
            remote,
            retries: raw.agent.retries.unwrap_or(DEFAULT_RETRIES),
            epochs,
            bounded,
            goal_claim,
        })
    }

    fn seed_assessment(&mut self, v: &Value, domain: DomainKind, at: &str) {
        if domain == DomainKind::Stratified {
            if let Some(levels) = stratified_levels_unchecked(v) {
                for side in levels {
                    if !side.windows(2).all(|w| w[1] <= w[0]) {
                        self.push(
                            "NonAntitone",
                            at,
                            format!("stratified levels {side:?} increase with the basis"),
                        );
                        return;
                    }
                }
            }
        }
        match serde_json::from_value::<Assessment>(v.clone()) {
            Ok(a) if a.kind() != domain => {
                self.push("BadAssessment", at, format!("{a} is not a {domain} value"));
            }
            Ok(a) if !a.is_bottom() => {
                self.push(
                    "SeedNotBottom",
                    at,
                    format!("seeded claims start at bottom, got {a}"),
                );
            }
            Ok(_) => {}
            Err(e) => self.push("BadAssessment", at, e.to_string()),
        }
    }
}
