//! Deterministic replay backend keyed by `(node, claim key or gen id, visit)`.

use std::collections::BTreeMap;
use std::fmt;

use super::{Agent, AgentError, AgentEvalResult, AgentGenResult, EvalRequest, GenRequest};
use crate::graph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScriptVisit {
    Exact(u32),
    Any,
}

impl fmt::Display for ScriptVisit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScriptVisit::Exact(v) => write!(f, "{v}"),
            ScriptVisit::Any => f.write_str("*"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScriptKey {
    pub node: NodeId,
    /// Canonical claim key for evaluations, query id for generation.
    pub key: String,
    pub visit: ScriptVisit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptResult {
    Eval(AgentEvalResult),
    Gen(AgentGenResult),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptEntry {
    pub key: ScriptKey,
    pub result: ScriptResult,
}

#[derive(Debug, Clone, Default)]
pub struct ScriptedAgent {
    eval: BTreeMap<ScriptKey, AgentEvalResult>,
    gen: BTreeMap<ScriptKey, AgentGenResult>,
}

impl ScriptedAgent {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry. Returns the displaced entry if the key was taken.
    pub fn insert(&mut self, entry: ScriptEntry) -> Option<ScriptResult> {
        match entry.result {
            ScriptResult::Eval(r) => self.eval.insert(entry.key, r).map(ScriptResult::Eval),
            ScriptResult::Gen(r) => self.gen.insert(entry.key, r).map(ScriptResult::Gen),
        }
    }

    pub fn from_entries(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        let mut agent = Self::new();
        for e in entries {
            agent.insert(e);
        }
        agent
    }

    pub fn len(&self) -> usize {
        self.eval.len() + self.gen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lookup<'a, T>(
        map: &'a BTreeMap<ScriptKey, T>,
        node: &NodeId,
        key: &str,
        visit: u32,
    ) -> Option<&'a T> {
        let mut k = ScriptKey {
            node: node.clone(),
            key: key.to_string(),
            visit: ScriptVisit::Exact(visit),
        };
        map.get(&k).or_else(|| {
            k.visit = ScriptVisit::Any;
            map.get(&k)
        })
    }
}

impl Agent for ScriptedAgent {
    fn eval(&mut self, req: &EvalRequest<'_>) -> Result<AgentEvalResult, AgentError> {
        Self::lookup(&self.eval, &req.claim.node, &req.claim.key, req.visit)
            .cloned()
            .ok_or_else(|| AgentError::NoScriptEntry {
                node: req.claim.node.clone(),
                key: req.claim.key.clone(),
                visit: req.visit,
            })
    }

    fn gen(&mut self, req: &GenRequest<'_>) -> Result<AgentGenResult, AgentError> {
        Self::lookup(&self.gen, &req.ctx.node, &req.query.id, req.visit)
            .cloned()
            .ok_or_else(|| AgentError::NoScriptEntry {
                node: req.ctx.node.clone(),
                key: req.query.id.clone(),
                visit: req.visit,
            })
    }
}
