//! The worklist harness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Agent;
use crate::assessment::{domain_height, Assessment, DomainKind};
use crate::claims::{Claim, GlobalState, StateError};
use crate::graph::{EvaluationGraph, NodeId};
use crate::queries::QuerySpecs;
use crate::revision::{reseed_set, BoundedMode, RevisionEntry, RevisionError};
use crate::transformer::{
    apply_transformer, frame_violations, ClaimPolicy, ClaimUpdate, Diagnostic, StepConfig,
    StepPosition, TransformError, DEFAULT_CLAIM_CAP,
};
use crate::wto::wto_order;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorklistPolicy {
    Fifo,
    Lifo,
    Wto,
    GoalDirected {
        goal: NodeId,
    },
    FeedbackPriority,
    ScriptedOrder {
        steps: Vec<NodeId>,
    },
    /// Uniformly random choice from a seeded generator.
    Shuffled {
        seed: u64,
    },
}

impl WorklistPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            WorklistPolicy::Fifo => "fifo",
            WorklistPolicy::Lifo => "lifo",
            WorklistPolicy::Wto => "wto",
            WorklistPolicy::GoalDirected { .. } => "goal-directed",
            WorklistPolicy::FeedbackPriority => "feedback-priority",
            WorklistPolicy::ScriptedOrder { .. } => "scripted-order",
            WorklistPolicy::Shuffled { .. } => "shuffled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnqueueVia {
    Seed,
    Context,
    Feedback,
    GoalDemand,
    Reseed,
    Revision,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnqueueEvent {
    pub node: NodeId,
    pub via: EnqueueVia,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<NodeId>,
}

#[derive(Debug, Clone)]
struct Item {
    node: NodeId,
    via: EnqueueVia,
}

/// `W` as an ordered set; the policy picks which member leaves next.
#[derive(Debug, Clone)]
pub struct Worklist {
    items: Vec<Item>,
    policy: WorklistPolicy,
    rank: BTreeMap<NodeId, usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl Worklist {
    pub fn new(policy: WorklistPolicy, g: &EvaluationGraph) -> Self {
        let rank = match policy {
            WorklistPolicy::Wto => wto_order(g)
                .into_iter()
                .enumerate()
                .map(|(i, n)| (n, i))
                .collect(),
            _ => BTreeMap::new(),
        };
        let seed = match policy {
            WorklistPolicy::Shuffled { seed } => seed,
            _ => 0,
        };
        Worklist {
            items: Vec::new(),
            policy,
            rank,
            cursor: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, n: &NodeId) -> bool {
        self.items.iter().any(|i| &i.node == n)
    }

    /// Adds `n` unless present. A feedback enqueue upgrades a present entry.
    pub fn push(&mut self, n: &NodeId, via: EnqueueVia) -> bool {
        if let Some(item) = self.items.iter_mut().find(|i| &i.node == n) {
            if via == EnqueueVia::Feedback {
                item.via = via;
            }
            return false;
        }
        self.items.push(Item {
            node: n.clone(),
            via,
        });
        true
    }

    /// Members in insertion order.
    pub fn members(&self) -> Vec<NodeId> {
        self.items.iter().map(|i| i.node.clone()).collect()
    }

    fn pick(&mut self) -> Result<usize, RunError> {
        let last = self.items.len() - 1;
        Ok(match &self.policy {
            WorklistPolicy::Fifo => 0,
            WorklistPolicy::Lifo | WorklistPolicy::GoalDirected { .. } => last,
            WorklistPolicy::Wto => {
                let rank = |n: &NodeId| self.rank.get(n).copied().unwrap_or(usize::MAX);
                (0..self.items.len())
                    .min_by(|&a, &b| {
                        let (x, y) = (&self.items[a].node, &self.items[b].node);
                        (rank(x), x).cmp(&(rank(y), y))
                    })
                    .expect("non-empty")
            }
            WorklistPolicy::FeedbackPriority => (0..self.items.len())
                .min_by(|&a, &b| {
                    let key = |i: usize| {
                        (
                            self.items[i].via != EnqueueVia::Feedback,
                            &self.items[i].node,
                        )
                    };
                    key(a).cmp(&key(b))
                })
                .expect("non-empty"),
            WorklistPolicy::ScriptedOrder { steps } => {
                if let Some(next) = steps.get(self.cursor) {
                    self.cursor += 1;
                    match self.items.iter().position(|i| &i.node == next) {
                        Some(p) => p,
                        None => {
                            return Err(RunError::ScriptedOrder {
                                position: self.cursor,
                                expected: next.clone(),
                                worklist: self.members(),
                            })
                        }
                    }
                } else {
                    0
                }
            }
            WorklistPolicy::Shuffled { .. } => self.rng.random_range(0..self.items.len()),
        })
    }

    pub fn pop(&mut self) -> Result<Option<(NodeId, EnqueueVia)>, RunError> {
        if self.items.is_empty() {
            return Ok(None);
        }
        let i = self.pick()?;
        let item = self.items.remove(i);
        Ok(Some((item.node, item.via)))
    }
}

/// Per-node claim caps `k_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapTable {
    pub default: usize,
    pub per_node: BTreeMap<NodeId, usize>,
}

impl Default for CapTable {
    fn default() -> Self {
        CapTable {
            default: DEFAULT_CLAIM_CAP,
            per_node: BTreeMap::new(),
        }
    }
}

impl CapTable {
    pub fn policy(&self, n: &NodeId) -> ClaimPolicy {
        ClaimPolicy {
            cap: self.per_node.get(n).copied().unwrap_or(self.default),
        }
    }

    /// `K_cl = Σ k_n` over `V*`.
    pub fn k_cl(&self, g: &EvaluationGraph) -> u64 {
        g.nodes().map(|n| self.policy(n).cap as u64).sum()
    }
}

/// Action labels per node visit, for the trace's Action column.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionLabels {
    pub per_node: BTreeMap<NodeId, Vec<String>>,
}

impl ActionLabels {
    pub fn label(&self, n: &NodeId, visit: u32) -> String {
        self.per_node
            .get(n)
            .and_then(|v| v.get(visit as usize))
            .cloned()
            .unwrap_or_else(|| {
                if visit == 0 {
                    format!("process {n}")
                } else {
                    format!("reprocess {n}")
                }
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminationBudget {
    pub height: u64,
    pub k_cl: u64,
    /// Extra events granted by bounded replacement.
    pub revision_allowance: u64,
    pub max_trigger_events: u64,
    pub hard_step_cap: u64,
}

impl TerminationBudget {
    /// `max = K_cl + H·K_cl (+ allowance)`, default hard cap ten times that.
    pub fn new(
        domain: DomainKind,
        k_cl: u64,
        revision_allowance: u64,
        hard_step_cap: Option<u64>,
    ) -> Self {
        let height = domain_height(domain) as u64;
        let max_trigger_events = k_cl + height * k_cl + revision_allowance;
        TerminationBudget {
            height,
            k_cl,
            revision_allowance,
            max_trigger_events,
            hard_step_cap: hard_step_cap.unwrap_or(max_trigger_events.saturating_mul(10).max(1)),
        }
    }
}

/// Immutable inputs of a run.
#[derive(Debug, Clone, Copy)]
pub struct Harness<'a> {
    pub graph: &'a EvaluationGraph,
    pub specs: &'a QuerySpecs,
    pub goal: &'a str,
    pub caps: &'a CapTable,
    pub labels: &'a ActionLabels,
    pub evidence_cap: usize,
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub policy: WorklistPolicy,
    pub hard_step_cap: Option<u64>,
    /// Frame, inflation, cap and trigger checks after every step.
    pub check_invariants: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            policy: WorklistPolicy::Fifo,
            hard_step_cap: None,
            check_invariants: cfg!(debug_assertions),
        }
    }
}

/// How many times each node has been processed, across epochs.
pub type Visits = BTreeMap<NodeId, u32>;

#[derive(Debug, Clone)]
pub enum Seeding {
    Initial,
    Reseed {
        nodes: BTreeSet<NodeId>,
        revisions: Vec<RevisionEntry>,
    },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("hard step cap {cap} reached before stabilization")]
    BudgetExceeded { cap: u64 },
    #[error("{events} AC-change events exceed the bound {max}")]
    BoundViolated { events: u64, max: u64 },
    #[error(
        "scripted order entry {position} expects {expected}, which is not in W = {worklist:?}"
    )]
    ScriptedOrder {
        position: usize,
        expected: NodeId,
        worklist: Vec<NodeId>,
    },
    #[error("invariant violated at step {step}: {message}")]
    InvariantViolated { step: u32, message: String },
    #[error("goal node {0} is not in the evaluation graph")]
    UnknownGoalNode(NodeId),
    #[error(transparent)]
    Transform(Box<TransformError>),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Revision(#[from] RevisionError),
}

impl RunError {
    pub fn is_transport(&self) -> bool {
        matches!(self, RunError::Transform(e) if matches!(**e, TransformError::Transport { .. }))
    }
}

impl From<TransformError> for RunError {
    fn from(e: TransformError) -> Self {
        RunError::Transform(Box::new(e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimValue {
    pub node: NodeId,
    pub key: String,
    pub label: String,
    pub assessment: Assessment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceInit {
    pub epoch: u32,
    pub policy: String,
    pub domain: DomainKind,
    pub claims: Vec<ClaimValue>,
    pub worklist: Vec<NodeId>,
    #[serde(default)]
    pub enqueued: Vec<EnqueueEvent>,
    #[serde(default)]
    pub revisions: Vec<RevisionEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub epoch: u32,
    pub step: u32,
    pub node: NodeId,
    pub visit: u32,
    pub action: String,
    /// Bounded moves applied just before this step.
    #[serde(default)]
    pub revisions: Vec<RevisionEntry>,
    pub updates: Vec<ClaimUpdate>,
    #[serde(default)]
    pub inserted: Vec<Claim>,
    /// Every claim's assessment after the step.
    pub snapshot: Vec<ClaimValue>,
    pub worklist_after: Vec<NodeId>,
    pub enqueued: Vec<EnqueueEvent>,
    pub ac_changed: bool,
    pub evidence_only: bool,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: u32,
    /// Steps whose AC projection changed.
    pub ac_change_steps: u64,
    /// Claim insertions plus strict claim increases.
    pub trigger_events: u64,
    pub budget: TerminationBudget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunTrace {
    pub init: TraceInit,
    pub steps: Vec<TraceStep>,
    pub summary: RunSummary,
}

impl RunTrace {
    pub fn final_worklist(&self) -> &[NodeId] {
        self.steps
            .last()
            .map_or(&self.init.worklist, |s| &s.worklist_after)
    }
}

/// Assessment of every claim in insertion order.
pub fn snapshot(s: &GlobalState) -> Vec<ClaimValue> {
    s.claims_in_order()
        .into_iter()
        .map(|e| ClaimValue {
            node: e.claim.node.clone(),
            key: e.claim.key.clone(),
            label: e.claim.label.clone(),
            assessment: e.assessment,
        })
        .collect()
}

/// `W_0`: nodes with claims or generative queries, ordered by their first
/// claim, then generation-only nodes in declaration order.
pub fn seed_worklist(g: &EvaluationGraph, s0: &GlobalState, specs: &QuerySpecs) -> Vec<NodeId> {
    let mut out: Vec<NodeId> = Vec::new();
    for e in s0.claims_in_order() {
        if !out.contains(&e.claim.node) {
            out.push(e.claim.node.clone());
        }
    }
    for n in g.nodes() {
        if specs.has_generative(n) && !out.contains(n) {
            out.push(n.clone());
        }
    }
    out
}

/// Context successors, then feedback-only successors, each in id order.
fn ordered_successors(g: &EvaluationGraph, n: &NodeId) -> Vec<NodeId> {
    let succ = g.succ_ext(n).unwrap_or_default();
    let (ctx, fb): (Vec<NodeId>, Vec<NodeId>) =
        succ.into_iter().partition(|m| g.is_context_edge(n, m));
    ctx.into_iter().chain(fb).collect()
}

fn seedable(g: &EvaluationGraph, s: &GlobalState, specs: &QuerySpecs, n: &NodeId) -> bool {
    g.contains(n) && (s.node(n).is_ok_and(|ns| !ns.is_empty()) || specs.has_generative(n))
}

fn all_bottom(s: &GlobalState, n: &NodeId) -> bool {
    s.node(n)
        .is_ok_and(|ns| ns.entries().iter().all(|e| e.assessment.is_bottom()))
}

/// Algorithm 1 for one epoch: seeds the worklist, processes nodes until it
/// empties, and propagates over extended successors on AC change.
#[allow(clippy::too_many_arguments)]
pub fn run(
    h: &Harness<'_>,
    s: &mut GlobalState,
    visits: &mut Visits,
    agent: &mut dyn Agent,
    opts: &RunOptions,
    epoch: u32,
    seeding: Seeding,
    mut bounded: Option<&mut BoundedMode>,
) -> Result<RunTrace, RunError> {
    let g = h.graph;
    let domain = s.domain();
    let allowance = bounded.as_ref().map_or(0, |b| {
        let per_node = b.counters.limits().total();
        let height = domain_height(domain) as u64;
        per_node * (height + 1) * g.nodes().count() as u64
    });
    let budget = TerminationBudget::new(domain, h.caps.k_cl(g), allowance, opts.hard_step_cap);
    let mut w = Worklist::new(opts.policy.clone(), g);

    let mut init_enqueued = Vec::new();
    let init_revisions = match seeding {
        Seeding::Initial => {
            let seeds = match &opts.policy {
                WorklistPolicy::GoalDirected { goal } => {
                    if !g.contains(goal) {
                        return Err(RunError::UnknownGoalNode(goal.clone()));
                    }
                    vec![goal.clone()]
                }
                _ => seed_worklist(g, s, h.specs),
            };
            for n in seeds {
                w.push(&n, EnqueueVia::Seed);
                init_enqueued.push(EnqueueEvent {
                    node: n,
                    via: EnqueueVia::Seed,
                    from: None,
                });
            }
            Vec::new()
        }
        Seeding::Reseed { nodes, revisions } => {
            for n in nodes {
                w.push(&n, EnqueueVia::Reseed);
                init_enqueued.push(EnqueueEvent {
                    node: n,
                    via: EnqueueVia::Reseed,
                    from: None,
                });
            }
            revisions
        }
    };
    let init = TraceInit {
        epoch,
        policy: opts.policy.name().to_string(),
        domain,
        claims: snapshot(s),
        worklist: w.members(),
        enqueued: init_enqueued,
        revisions: init_revisions,
    };

    let cfg = StepConfig {
        goal: h.goal,
        specs: h.specs,
        evidence_cap: h.evidence_cap,
        retries: h.retries,
    };
    let mut steps: Vec<TraceStep> = Vec::new();
    let mut trigger_events = 0u64;
    let mut ac_change_steps = 0u64;
    let mut demanded: BTreeSet<NodeId> = BTreeSet::new();
    let mut step = 0u32;

    loop {
        let mut revisions = Vec::new();
        let mut enqueued = Vec::new();
        if let Some(b) = bounded.as_deref_mut() {
            let (log, moved) = b.apply_due(s, epoch, step + 1)?;
            revisions = log;
            for n in reseed_set(g, &moved) {
                if w.push(&n, EnqueueVia::Revision) {
                    enqueued.push(EnqueueEvent {
                        node: n,
                        via: EnqueueVia::Revision,
                        from: None,
                    });
                }
            }
            trigger_events += moved.len() as u64;
        }
        let Some((n, _via)) = w.pop()? else {
            if !revisions.is_empty() {
                log::warn!(
                    "bounded moves scheduled after stabilization were applied without a step"
                );
            }
            break;
        };
        if u64::from(step) >= budget.hard_step_cap {
            return Err(RunError::BudgetExceeded {
                cap: budget.hard_step_cap,
            });
        }
        step += 1;
        let visit = *visits.get(&n).unwrap_or(&0);
        visits.insert(n.clone(), visit + 1);

        let before = opts.check_invariants.then(|| s.clone());
        let policy = h.caps.policy(&n);
        let pos = StepPosition { epoch, step, visit };
        let report = apply_transformer(
            g,
            s,
            &n,
            agent,
            policy,
            cfg,
            pos,
            bounded.as_deref_mut().map(|b| &mut b.counters),
        )?;

        let events = report.inserted.len() as u64
            + report.updates.iter().filter(|u| u.changed()).count() as u64;
        trigger_events += events;
        if report.ac_changed {
            ac_change_steps += 1;
        }
        if let Some(before) = before {
            check_step(&before, s, &n, policy, step)?;
        }
        if trigger_events > budget.max_trigger_events {
            return Err(RunError::BoundViolated {
                events: trigger_events,
                max: budget.max_trigger_events,
            });
        }

        if report.ac_changed {
            for m in ordered_successors(g, &n) {
                let via = if g.is_context_edge(&n, &m) {
                    EnqueueVia::Context
                } else {
                    EnqueueVia::Feedback
                };
                if w.push(&m, via) {
                    enqueued.push(EnqueueEvent {
                        node: m,
                        via,
                        from: Some(n.clone()),
                    });
                }
            }
        }
        if matches!(opts.policy, WorklistPolicy::GoalDirected { .. }) {
            demanded.insert(n.clone());
            for m in g.pred_ext(&n).unwrap_or_default() {
                if !demanded.contains(&m)
                    && seedable(g, s, h.specs, &m)
                    && all_bottom(s, &m)
                    && w.push(&m, EnqueueVia::GoalDemand)
                {
                    demanded.insert(m.clone());
                    enqueued.push(EnqueueEvent {
                        node: m,
                        via: EnqueueVia::GoalDemand,
                        from: Some(n.clone()),
                    });
                }
            }
        }

        steps.push(TraceStep {
            epoch,
            step,
            node: n.clone(),
            visit,
            action: h.labels.label(&n, visit),
            revisions,
            updates: report.updates,
            inserted: report.inserted,
            snapshot: snapshot(s),
            worklist_after: w.members(),
            enqueued,
            ac_changed: report.ac_changed,
            evidence_only: report.evidence_only,
            diagnostics: report.diagnostics,
        });
    }

    Ok(RunTrace {
        init,
        summary: RunSummary {
            steps: step,
            ac_change_steps,
            trigger_events,
            budget,
        },
        steps,
    })
}

fn check_step(
    before: &GlobalState,
    after: &GlobalState,
    n: &NodeId,
    policy: ClaimPolicy,
    step: u32,
) -> Result<(), RunError> {
    let fail = |message: String| Err(RunError::InvariantViolated { step, message });
    let moved = frame_violations(before, after, n);
    if !moved.is_empty() {
        return fail(format!("processing {n} changed the state of {moved:?}"));
    }
    let old = before.ac(n)?;
    let new = after.ac(n)?;
    for (k, a) in &old {
        match new.get(k) {
            Some(b) if a.leq(b).unwrap_or(false) => {}
            _ => return fail(format!("claim {k:?} at {n} moved down or vanished")),
        }
    }
    if new.len() > policy.cap && new.len() > old.len() {
        return fail(format!(
            "{} claims at {n} exceed the cap {}",
            new.len(),
            policy.cap
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerViolation {
    pub epoch: u32,
    pub step: u32,
    pub node: NodeId,
    pub reason: String,
}

impl fmt::Display for TriggerViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {} step {}: {} ({})",
            self.epoch, self.step, self.node, self.reason
        )
    }
}

/// Every propagation enqueue at step `t` must come from the node processed
/// at `t`, over an extended edge, after an AC change. Seeds, reseeds,
/// revisions and goal demand are exempt.
pub fn verify_trigger_soundness(trace: &RunTrace, g: &EvaluationGraph) -> Vec<TriggerViolation> {
    let mut out = Vec::new();
    for st in &trace.steps {
        for ev in &st.enqueued {
            if !matches!(ev.via, EnqueueVia::Context | EnqueueVia::Feedback) {
                continue;
            }
            let reason = if ev.from.as_ref() != Some(&st.node) {
                Some("enqueued from a node other than the processed one".to_string())
            } else if !st.ac_changed {
                Some("no AC change at the processed node".to_string())
            } else if !g.is_ext_edge(&st.node, &ev.node) {
                Some(format!("no extended edge {} -> {}", st.node, ev.node))
            } else {
                None
            };
            if let Some(reason) = reason {
                out.push(TriggerViolation {
                    epoch: st.epoch,
                    step: st.step,
                    node: ev.node.clone(),
                    reason,
                });
            }
        }
    }
    out
}
