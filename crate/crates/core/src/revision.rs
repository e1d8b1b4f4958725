//! Controlled downward revision: bounded replacement counters and epochal
//! recomputation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Agent;
use crate::assessment::Assessment;
use crate::claims::{GlobalState, StateError};
use crate::graph::{EvaluationGraph, NodeId};
use crate::worklist::{run, Harness, RunError, RunOptions, RunTrace, Seeding, Visits};

#[derive(Debug, Error)]
pub enum RevisionError {
    #[error("revision target {claim:?} does not exist at {node}")]
    UnknownRevisionTarget { node: NodeId, claim: String },
    #[error("revision requested while the worklist still holds {0} node(s)")]
    RevisionDuringRun(usize),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionLimits {
    pub introductions: u32,
    pub retractions: u32,
    pub downward: u32,
}

impl RevisionLimits {
    pub fn total(&self) -> u64 {
        u64::from(self.introductions) + u64::from(self.retractions) + u64::from(self.downward)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevisionEventKind {
    Introduction,
    Retraction,
    Downward,
}

impl RevisionEventKind {
    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Denial {
    pub node: NodeId,
    pub kind: RevisionEventKind,
    pub target: String,
}

/// Per-node counters for bounded replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundedCounters {
    limits: RevisionLimits,
    used: BTreeMap<NodeId, [u32; 3]>,
    denials: Vec<Denial>,
}

impl BoundedCounters {
    pub fn new(limits: RevisionLimits) -> Self {
        BoundedCounters {
            limits,
            used: BTreeMap::new(),
            denials: Vec::new(),
        }
    }

    pub fn limits(&self) -> RevisionLimits {
        self.limits
    }

    fn limit(&self, kind: RevisionEventKind) -> u32 {
        match kind {
            RevisionEventKind::Introduction => self.limits.introductions,
            RevisionEventKind::Retraction => self.limits.retractions,
            RevisionEventKind::Downward => self.limits.downward,
        }
    }

    pub fn used(&self, n: &NodeId, kind: RevisionEventKind) -> u32 {
        self.used.get(n).map_or(0, |u| u[kind.slot()])
    }

    pub fn denials(&self) -> &[Denial] {
        &self.denials
    }

    /// Counts one event at `n` if the limit allows it.
    pub fn guard_bounded(&mut self, n: &NodeId, kind: RevisionEventKind, target: &str) -> bool {
        let limit = self.limit(kind);
        let slot = &mut self.used.entry(n.clone()).or_default()[kind.slot()];
        if *slot < limit {
            *slot += 1;
            true
        } else {
            log::info!("{kind:?} at {n} for {target:?} denied: limit {limit} reached");
            self.denials.push(Denial {
                node: n.clone(),
                kind,
                target: target.to_string(),
            });
            false
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevisionAction {
    Lower,
    Retract,
}

impl fmt::Display for RevisionAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RevisionAction::Lower => "lower",
            RevisionAction::Retract => "retract",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevisionMode {
    Epochal,
    Bounded,
}

/// One revision log line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionEntry {
    pub epoch: u32,
    pub node: NodeId,
    pub claim: String,
    /// Absent when a bounded move was denied.
    pub old_assessment: Option<Assessment>,
    pub action: RevisionAction,
    pub reason: String,
    pub mode: RevisionMode,
    pub applied: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionTarget {
    pub node: NodeId,
    /// Canonical claim key.
    pub claim: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RevisionPlan {
    pub lowers: Vec<RevisionTarget>,
    pub retractions: Vec<RevisionTarget>,
}

impl RevisionPlan {
    pub fn is_empty(&self) -> bool {
        self.lowers.is_empty() && self.retractions.is_empty()
    }
}

/// Plan `k` is applied after epoch `k` stabilizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochConfig {
    pub epoch_limit: u32,
    pub plans: BTreeMap<u32, RevisionPlan>,
}

impl Default for EpochConfig {
    fn default() -> Self {
        EpochConfig {
            epoch_limit: 1,
            plans: BTreeMap::new(),
        }
    }
}

/// Applies an epoch-boundary plan: lowered claims go to bottom with their
/// evidence superseded, retracted claims are removed with their evidence
/// retracted. Returns the nodes to re-seed (affected nodes and their
/// extended successors).
pub fn apply_revision(
    g: &EvaluationGraph,
    s: &mut GlobalState,
    plan: &RevisionPlan,
    epoch: u32,
    pending: usize,
) -> Result<(BTreeSet<NodeId>, Vec<RevisionEntry>), RevisionError> {
    if pending > 0 {
        return Err(RevisionError::RevisionDuringRun(pending));
    }
    let mut present: BTreeSet<(NodeId, String)> = s.full_projection().into_keys().collect();
    // Validate the whole plan in order before touching the state.
    for t in &plan.lowers {
        if !present.contains(&(t.node.clone(), t.claim.clone())) {
            return Err(RevisionError::UnknownRevisionTarget {
                node: t.node.clone(),
                claim: t.claim.clone(),
            });
        }
    }
    for t in &plan.retractions {
        if !present.remove(&(t.node.clone(), t.claim.clone())) {
            return Err(RevisionError::UnknownRevisionTarget {
                node: t.node.clone(),
                claim: t.claim.clone(),
            });
        }
    }

    let mut log = Vec::new();
    let mut affected = BTreeSet::new();
    for t in &plan.lowers {
        let old = s.lower_claim(&t.node, &t.claim, &t.reason)?;
        log.push(RevisionEntry {
            epoch,
            node: t.node.clone(),
            claim: t.claim.clone(),
            old_assessment: Some(old),
            action: RevisionAction::Lower,
            reason: t.reason.clone(),
            mode: RevisionMode::Epochal,
            applied: true,
        });
        affected.insert(t.node.clone());
    }
    for t in &plan.retractions {
        let old = s.retract_claim(&t.node, &t.claim, &t.reason)?;
        log.push(RevisionEntry {
            epoch,
            node: t.node.clone(),
            claim: t.claim.clone(),
            old_assessment: Some(old.assessment),
            action: RevisionAction::Retract,
            reason: t.reason.clone(),
            mode: RevisionMode::Epochal,
            applied: true,
        });
        affected.insert(t.node.clone());
    }
    Ok((reseed_set(g, &affected), log))
}

pub(crate) fn reseed_set(g: &EvaluationGraph, affected: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
    let mut reseed = affected.clone();
    for n in affected {
        reseed.extend(g.succ_ext(n).unwrap_or_default());
    }
    reseed
}

/// A downward move applied between two steps of a run, subject to the
/// bounded-replacement counters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundedMove {
    pub epoch: u32,
    /// Applied just before this step index of the epoch is taken.
    pub before_step: u32,
    pub node: NodeId,
    pub claim: String,
    pub action: RevisionAction,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct BoundedMode {
    pub counters: BoundedCounters,
    pub moves: Vec<BoundedMove>,
}

impl BoundedMode {
    pub fn new(limits: RevisionLimits, moves: Vec<BoundedMove>) -> Self {
        BoundedMode {
            counters: BoundedCounters::new(limits),
            moves,
        }
    }

    /// Applies the moves scheduled before `step` of `epoch`. Returns the log
    /// entries and the nodes whose claims actually moved.
    pub fn apply_due(
        &mut self,
        s: &mut GlobalState,
        epoch: u32,
        step: u32,
    ) -> Result<(Vec<RevisionEntry>, BTreeSet<NodeId>), StateError> {
        let mut log = Vec::new();
        let mut moved = BTreeSet::new();
        let due: Vec<BoundedMove> = self
            .moves
            .iter()
            .filter(|m| m.epoch == epoch && m.before_step == step)
            .cloned()
            .collect();
        for m in due {
            let current = s.entry(&m.node, &m.claim).map(|e| e.assessment);
            let Ok(current) = current else {
                log::warn!(
                    "bounded move target {:?} at {} is absent; skipped",
                    m.claim,
                    m.node
                );
                continue;
            };
            let kind = match m.action {
                RevisionAction::Lower => RevisionEventKind::Downward,
                RevisionAction::Retract => RevisionEventKind::Retraction,
            };
            let allowed = self.counters.guard_bounded(&m.node, kind, &m.claim);
            if allowed {
                match m.action {
                    RevisionAction::Lower => {
                        s.lower_claim(&m.node, &m.claim, &m.reason)?;
                    }
                    RevisionAction::Retract => {
                        s.retract_claim(&m.node, &m.claim, &m.reason)?;
                    }
                }
                moved.insert(m.node.clone());
            }
            log.push(RevisionEntry {
                epoch,
                node: m.node,
                claim: m.claim,
                old_assessment: allowed.then_some(current),
                action: m.action,
                reason: m.reason,
                mode: RevisionMode::Bounded,
                applied: allowed,
            });
        }
        Ok((log, moved))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochStatus {
    Stabilized,
    EpochLimitReached,
}

#[derive(Debug, Clone)]
pub struct EpochRun {
    pub state: GlobalState,
    pub traces: Vec<RunTrace>,
    pub log: Vec<RevisionEntry>,
    pub status: EpochStatus,
    pub visits: Visits,
}

/// Runs epoch after epoch, applying plan `k` between epochs `k` and `k+1`,
/// until no plan remains or `epoch_limit` epochs have run.
pub fn run_epochs(
    h: &Harness<'_>,
    s0: GlobalState,
    agent: &mut dyn Agent,
    opts: &RunOptions,
    epochs: &EpochConfig,
    mut bounded: Option<&mut BoundedMode>,
) -> Result<EpochRun, RunError> {
    let mut state = s0;
    let mut visits = Visits::new();
    let mut traces = Vec::new();
    let mut log = Vec::new();
    let mut seeding = Seeding::Initial;
    let mut epoch = 1;
    let status = loop {
        let trace = run(
            h,
            &mut state,
            &mut visits,
            agent,
            opts,
            epoch,
            seeding,
            bounded.as_deref_mut(),
        )?;
        log.extend(trace.steps.iter().flat_map(|s| s.revisions.iter().cloned()));
        traces.push(trace);
        let Some(plan) = epochs.plans.get(&epoch) else {
            break EpochStatus::Stabilized;
        };
        if epoch >= epochs.epoch_limit {
            log::info!(
                "epoch limit {} reached with a pending plan",
                epochs.epoch_limit
            );
            break EpochStatus::EpochLimitReached;
        }
        let (reseed, entries) = apply_revision(h.graph, &mut state, plan, epoch, 0)?;
        log.extend(entries.iter().cloned());
        epoch += 1;
        seeding = Seeding::Reseed {
            nodes: reseed,
            revisions: entries,
        };
    };
    Ok(EpochRun {
        state,
        traces,
        log,
        status,
        visits,
    })
}
