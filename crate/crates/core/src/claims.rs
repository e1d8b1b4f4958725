//! Claims, evidence records, and the global analysis state.
//!
//! The state maps every node of `V*` to a finite, insertion-ordered map from
//! claim key to `(assessment, evidence ids)`. Evidence records live in a
//! single store keyed by id; node entries only reference them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assessment::{Assessment, AssessmentError, ConfidenceBasis, DomainKind, Strength};
use crate::graph::{EvaluationGraph, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("claim text is empty after canonicalization")]
    EmptyClaim,
    #[error("claim `{key}` already exists at `{node}`")]
    DuplicateClaim { node: NodeId, key: String },
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("no claim `{key}` at `{node}`")]
    UnknownClaim { node: NodeId, key: String },
    #[error(transparent)]
    Domain(#[from] AssessmentError),
    #[error("evidence `{id}` belongs to {owner_node}/{owner_key}, not {node}/{key}")]
    EvidenceMismatch {
        id: EvidenceId,
        owner_node: NodeId,
        owner_key: String,
        node: NodeId,
        key: String,
    },
    #[error("evidence `{id}` cannot move from {from} to {to}")]
    InvalidTransition {
        id: EvidenceId,
        from: EvidenceStatus,
        to: EvidenceStatus,
    },
}

/// Syntactic normal form of a claim: trimmed, whitespace collapsed,
/// lower-cased, trailing punctuation stripped.
///
/// Lexically distinct paraphrases stay distinct.
pub fn canonicalize(text: &str) -> Result<String, StateError> {
    let collapsed = text
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    let stripped = collapsed.trim_end_matches(|c: char| {
        c.is_whitespace()
            || (c.is_ascii_punctuation() && !matches!(c, ')' | ']' | '}' | '"' | '\''))
    });
    if stripped.is_empty() {
        Err(StateError::EmptyClaim)
    } else {
        Ok(stripped.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClaimOrigin {
    Seeded,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub key: String,
    pub text: String,
    /// Short display name used in traces; defaults to the key.
    pub label: String,
    pub origin: ClaimOrigin,
    pub node: NodeId,
}

impl Claim {
    pub fn new(
        node: NodeId,
        text: impl Into<String>,
        origin: ClaimOrigin,
    ) -> Result<Self, StateError> {
        let text = text.into();
        let key = canonicalize(&text)?;
        Ok(Claim {
            label: key.clone(),
            key,
            text,
            origin,
            node,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EvidenceId(String);

impl EvidenceId {
    pub fn new(id: impl Into<String>) -> Self {
        EvidenceId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EvidenceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Support,
    Refute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Doc,
    Advisory,
    CodeObservation,
    ToolOutput,
    ModelJudgment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceStatus {
    Active,
    Superseded,
    Retracted,
}

impl fmt::Display for EvidenceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvidenceStatus::Active => "active",
            EvidenceStatus::Superseded => "superseded",
            EvidenceStatus::Retracted => "retracted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub id: EvidenceId,
    pub claim_key: String,
    pub node: NodeId,
    pub polarity: Polarity,
    pub strength: Strength,
    pub basis: ConfidenceBasis,
    pub source_kind: SourceKind,
    pub excerpt: String,
    pub status: EvidenceStatus,
    pub epoch: u32,
    pub step: u32,
    /// Why the record left the active state, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status_reason: Option<String>,
}

impl EvidenceRecord {
    fn transition(&mut self, to: EvidenceStatus, reason: &str) -> Result<(), StateError> {
        if self.status != EvidenceStatus::Active {
            return Err(StateError::InvalidTransition {
                id: self.id.clone(),
                from: self.status,
                to,
            });
        }
        self.status = to;
        self.status_reason = Some(reason.to_string());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClaimEntry {
    pub claim: Claim,
    pub assessment: Assessment,
    /// Evidence ids, a set kept in first-seen order.
    pub evidence: Vec<EvidenceId>,
    /// Global insertion sequence number.
    pub seq: u64,
}

/// Claims at one node, in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct NodeState {
    entries: Vec<ClaimEntry>,
}

impl NodeState {
    pub fn entries(&self) -> &[ClaimEntry] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&ClaimEntry> {
        self.entries.iter().find(|e| e.claim.key == key)
    }

    fn get_mut(&mut self, key: &str) -> Option<&mut ClaimEntry> {
        self.entries.iter_mut().find(|e| e.claim.key == key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.claim.key.as_str())
    }
}

/// Claim key to assessment, dropping evidence.
pub type AcProjection = BTreeMap<String, Assessment>;

pub fn ac_projection(ns: &NodeState) -> AcProjection {
    ns.entries
        .iter()
        .map(|e| (e.claim.key.clone(), e.assessment))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateOutcome {
    pub old: Assessment,
    pub new: Assessment,
    /// Ids newly attached to the claim's evidence set.
    pub attached: Vec<EvidenceId>,
}

impl UpdateOutcome {
    pub fn increased(&self) -> bool {
        self.old != self.new
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GlobalState {
    domain: DomainKind,
    per_node: BTreeMap<NodeId, NodeState>,
    evidence: BTreeMap<EvidenceId, EvidenceRecord>,
    next_evidence: u64,
    next_claim: u64,
}

impl GlobalState {
    /// Empty state with an entry for every node of `V*`.
    pub fn new(graph: &EvaluationGraph, domain: DomainKind) -> Self {
        GlobalState {
            domain,
            per_node: graph
                .nodes()
                .map(|n| (n.clone(), NodeState::default()))
                .collect(),
            evidence: BTreeMap::new(),
            next_evidence: 1,
            next_claim: 0,
        }
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn node(&self, n: &NodeId) -> Result<&NodeState, StateError> {
        self.per_node
            .get(n)
            .ok_or_else(|| StateError::UnknownNode(n.clone()))
    }

    fn node_mut(&mut self, n: &NodeId) -> Result<&mut NodeState, StateError> {
        self.per_node
            .get_mut(n)
            .ok_or_else(|| StateError::UnknownNode(n.clone()))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, &NodeState)> {
        self.per_node.iter()
    }

    pub fn ac(&self, n: &NodeId) -> Result<AcProjection, StateError> {
        Ok(ac_projection(self.node(n)?))
    }

    pub fn entry(&self, n: &NodeId, key: &str) -> Result<&ClaimEntry, StateError> {
        self.node(n)?
            .get(key)
            .ok_or_else(|| StateError::UnknownClaim {
                node: n.clone(),
                key: key.to_string(),
            })
    }

    pub fn evidence(&self, id: &EvidenceId) -> Option<&EvidenceRecord> {
        self.evidence.get(id)
    }

    pub fn evidence_store(&self) -> impl Iterator<Item = &EvidenceRecord> {
        self.evidence.values()
    }

    pub fn claim_count(&self) -> usize {
        self.per_node.values().map(NodeState::len).sum()
    }

    /// A fresh evidence id that has never been used in this state.
    pub fn mint_evidence_id(&mut self) -> EvidenceId {
        loop {
            let id = EvidenceId(format!("ev-{:04}", self.next_evidence));
            self.next_evidence += 1;
            if !self.evidence.contains_key(&id) {
                return id;
            }
        }
    }

    /// Adds `claim` at its node with `(⊥, ∅)`.
    pub fn insert_claim(&mut self, claim: Claim) -> Result<(), StateError> {
        let bottom = Assessment::bottom(self.domain);
        let seq = self.next_claim;
        let ns = self.node_mut(&claim.node)?;
        if ns.contains(&claim.key) {
            return Err(StateError::DuplicateClaim {
                node: claim.node.clone(),
                key: claim.key.clone(),
            });
        }
        ns.entries.push(ClaimEntry {
            claim,
            assessment: bottom,
            evidence: Vec::new(),
            seq,
        });
        self.next_claim += 1;
        Ok(())
    }

    /// `(a, E) ← (a ⊔ a_new, E ∪ ev_new)`.
    ///
    /// Records whose id is already in the store are re-citations: the store is
    /// left untouched and only the id is attached. Such records must belong to
    /// the same node and claim.
    pub fn record_update(
        &mut self,
        n: &NodeId,
        key: &str,
        a_new: Assessment,
        ev_new: Vec<EvidenceRecord>,
    ) -> Result<UpdateOutcome, StateError> {
        let old = self.entry(n, key)?.assessment;
        let new = old.join(&a_new)?;
        for rec in &ev_new {
            let owner = self.evidence.get(&rec.id).unwrap_or(rec);
            if owner.node != *n || owner.claim_key != key {
                return Err(StateError::EvidenceMismatch {
                    id: rec.id.clone(),
                    owner_node: owner.node.clone(),
                    owner_key: owner.claim_key.clone(),
                    node: n.clone(),
                    key: key.to_string(),
                });
            }
        }

        let mut attached = Vec::new();
        let mut ids = Vec::with_capacity(ev_new.len());
        for rec in ev_new {
            ids.push(rec.id.clone());
            self.evidence.entry(rec.id.clone()).or_insert(rec);
        }
        let entry = self.node_mut(n)?.get_mut(key).expect("checked above");
        entry.assessment = new;
        for id in ids {
            if !entry.evidence.contains(&id) {
                entry.evidence.push(id.clone());
                attached.push(id);
            }
        }
        Ok(UpdateOutcome { old, new, attached })
    }

    /// Resets a claim to bottom, superseding its active evidence. Returns the
    /// assessment it held.
    pub fn lower_claim(
        &mut self,
        n: &NodeId,
        key: &str,
        reason: &str,
    ) -> Result<Assessment, StateError> {
        let bottom = Assessment::bottom(self.domain);
        let entry = self.entry(n, key)?.clone();
        for id in &entry.evidence {
            if let Some(rec) = self.evidence.get_mut(id) {
                if rec.status == EvidenceStatus::Active {
                    rec.transition(EvidenceStatus::Superseded, reason)?;
                }
            }
        }
        self.node_mut(n)?
            .get_mut(key)
            .expect("checked above")
            .assessment = bottom;
        Ok(entry.assessment)
    }

    /// Removes a claim, retracting its active evidence. Returns the removed
    /// entry.
    pub fn retract_claim(
        &mut self,
        n: &NodeId,
        key: &str,
        reason: &str,
    ) -> Result<ClaimEntry, StateError> {
        let entry = self.entry(n, key)?.clone();
        for id in &entry.evidence {
            if let Some(rec) = self.evidence.get_mut(id) {
                if rec.status == EvidenceStatus::Active {
                    rec.transition(EvidenceStatus::Retracted, reason)?;
                }
            }
        }
        self.node_mut(n)?.entries.retain(|e| e.claim.key != key);
        Ok(entry)
    }

    /// Active evidence records attached to a claim, newest first.
    pub fn active_evidence(&self, entry: &ClaimEntry) -> Vec<&EvidenceRecord> {
        let mut recs: Vec<_> = entry
            .evidence
            .iter()
            .enumerate()
            .filter_map(|(i, id)| self.evidence.get(id).map(|r| (i, r)))
            .filter(|(_, r)| r.status == EvidenceStatus::Active)
            .collect();
        recs.sort_by(|(ia, a), (ib, b)| (b.epoch, b.step, ib).cmp(&(a.epoch, a.step, ia)));
        recs.into_iter().map(|(_, r)| r).collect()
    }

    /// Evidence audit order: `(epoch, step, id)`.
    pub fn audit_records(&self) -> Vec<&EvidenceRecord> {
        let mut recs: Vec<_> = self.evidence.values().collect();
        recs.sort_by(|a, b| (a.epoch, a.step, &a.id).cmp(&(b.epoch, b.step, &b.id)));
        recs
    }

    /// Every evidence id referenced by a node entry is in the store.
    pub fn evidence_closed(&self) -> bool {
        self.per_node
            .values()
            .flat_map(|ns| &ns.entries)
            .flat_map(|e| &e.evidence)
            .all(|id| self.evidence.contains_key(id))
    }

    /// Every claim entry, in global insertion order.
    pub fn claims_in_order(&self) -> Vec<&ClaimEntry> {
        let mut all: Vec<_> = self.per_node.values().flat_map(|ns| &ns.entries).collect();
        all.sort_by_key(|e| e.seq);
        all
    }

    /// `(node, key) → assessment` over the whole graph.
    pub fn full_projection(&self) -> BTreeMap<(NodeId, String), Assessment> {
        self.per_node
            .iter()
            .flat_map(|(n, ns)| {
                ns.entries
                    .iter()
                    .map(move |e| ((n.clone(), e.claim.key.clone()), e.assessment))
            })
            .collect()
    }
}
