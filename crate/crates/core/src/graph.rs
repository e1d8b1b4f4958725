//! Program-derived graphs and their extension to evaluation graphs.
//!
//! Only extended edges (context and feedback) drive propagation. Program
//! edges are carried for reference and never contribute to
//! [`EvaluationGraph::pred_ext`] or [`EvaluationGraph::succ_ext`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
}

pub type Edge = (NodeId, NodeId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeRelation {
    Program,
    Context,
    Feedback,
}

impl fmt::Display for EdgeRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeRelation::Program => "program",
            EdgeRelation::Context => "context",
            EdgeRelation::Feedback => "feedback",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProgramGraph {
    /// Declaration order is kept; it seeds FIFO worklists.
    pub nodes: Vec<NodeId>,
    pub edges: Vec<Edge>,
    /// Missing entries read as empty source.
    pub sources: BTreeMap<NodeId, String>,
}

impl ProgramGraph {
    pub fn source(&self, n: &NodeId) -> &str {
        self.sources.get(n).map(String::as_str).unwrap_or("")
    }
}

/// Side-condition violations reported by [`EvaluationGraph::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    EmptyNodeId,
    DuplicateNode {
        node: NodeId,
    },
    Disjointness {
        node: NodeId,
    },
    DanglingEdge {
        relation: EdgeRelation,
        from: NodeId,
        to: NodeId,
        missing: NodeId,
    },
    DuplicateEdge {
        relation: EdgeRelation,
        from: NodeId,
        to: NodeId,
    },
    NeighborhoodViolation {
        node: NodeId,
        target: NodeId,
    },
    UnknownNeighborhoodOwner {
        node: NodeId,
    },
    UnknownSourceNode {
        node: NodeId,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyNodeId => write!(f, "node ids must be non-empty"),
            Violation::DuplicateNode { node } => write!(f, "node `{node}` is declared twice"),
            Violation::Disjointness { node } => {
                write!(f, "`{node}` is both a program node and an auxiliary node")
            }
            Violation::DanglingEdge {
                relation,
                from,
                to,
                missing,
            } => {
                write!(
                    f,
                    "{relation} edge {from} -> {to} references unknown node `{missing}`"
                )
            }
            Violation::DuplicateEdge { relation, from, to } => {
                write!(
                    f,
                    "{relation} edge {from} -> {to} is declared more than once"
                )
            }
            Violation::NeighborhoodViolation { node, target } => {
                write!(
                    f,
                    "neighborhood of `{node}` contains non-program node `{target}`"
                )
            }
            Violation::UnknownNeighborhoodOwner { node } => {
                write!(f, "neighborhood declared for unknown node `{node}`")
            }
            Violation::UnknownSourceNode { node } => {
                write!(f, "source text declared for non-program node `{node}`")
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvaluationGraph {
    pub program: ProgramGraph,
    pub aux_nodes: Vec<NodeId>,
    pub context_edges: Vec<Edge>,
    pub feedback_edges: Vec<Edge>,
    pub neighborhood: BTreeMap<NodeId, BTreeSet<NodeId>>,
    preds: BTreeMap<NodeId, BTreeSet<NodeId>>,
    succs: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl EvaluationGraph {
    pub fn new(
        program: ProgramGraph,
        aux_nodes: Vec<NodeId>,
        context_edges: Vec<Edge>,
        feedback_edges: Vec<Edge>,
        neighborhood: BTreeMap<NodeId, BTreeSet<NodeId>>,
    ) -> Self {
        let mut g = EvaluationGraph {
            program,
            aux_nodes,
            context_edges,
            feedback_edges,
            neighborhood,
            preds: BTreeMap::new(),
            succs: BTreeMap::new(),
        };
        g.reindex();
        g
    }

    fn reindex(&mut self) {
        let mut preds: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        let mut succs: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for (m, n) in self.context_edges.iter().chain(&self.feedback_edges) {
            succs.entry(m.clone()).or_default().insert(n.clone());
            preds.entry(n.clone()).or_default().insert(m.clone());
        }
        self.preds = preds;
        self.succs = succs;
    }

    /// `V*` in declaration order: program nodes, then auxiliary nodes.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.program.nodes.iter().chain(&self.aux_nodes)
    }

    pub fn contains(&self, n: &NodeId) -> bool {
        self.program.nodes.contains(n) || self.aux_nodes.contains(n)
    }

    pub fn is_program_node(&self, n: &NodeId) -> bool {
        self.program.nodes.contains(n)
    }

    fn check(&self, n: &NodeId) -> Result<(), GraphError> {
        if self.contains(n) {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(n.clone()))
        }
    }

    /// Sources of extended edges into `n`, in `NodeId` order.
    pub fn pred_ext(&self, n: &NodeId) -> Result<BTreeSet<NodeId>, GraphError> {
        self.check(n)?;
        Ok(self.preds.get(n).cloned().unwrap_or_default())
    }

    /// Targets of extended edges out of `n`, in `NodeId` order.
    pub fn succ_ext(&self, n: &NodeId) -> Result<BTreeSet<NodeId>, GraphError> {
        self.check(n)?;
        Ok(self.succs.get(n).cloned().unwrap_or_default())
    }

    pub fn is_context_edge(&self, m: &NodeId, n: &NodeId) -> bool {
        self.context_edges.iter().any(|(a, b)| a == m && b == n)
    }

    pub fn is_feedback_edge(&self, m: &NodeId, n: &NodeId) -> bool {
        self.feedback_edges.iter().any(|(a, b)| a == m && b == n)
    }

    pub fn is_ext_edge(&self, m: &NodeId, n: &NodeId) -> bool {
        self.succs.get(m).is_some_and(|s| s.contains(n))
    }

    /// `(node, source)` for every node in the code neighborhood of `n`,
    /// sorted by node id.
    pub fn code_context(&self, n: &NodeId) -> Result<Vec<(NodeId, String)>, GraphError> {
        self.check(n)?;
        Ok(self
            .neighborhood
            .get(n)
            .into_iter()
            .flatten()
            .map(|m| (m.clone(), self.program.source(m).to_string()))
            .collect())
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let prog: BTreeSet<&NodeId> = self.program.nodes.iter().collect();

        let mut seen = BTreeSet::new();
        for n in self.nodes() {
            if n.as_str().is_empty() {
                out.push(Violation::EmptyNodeId);
                continue;
            }
            if !seen.insert(n) {
                if prog.contains(n) && self.aux_nodes.contains(n) {
                    out.push(Violation::Disjointness { node: n.clone() });
                } else {
                    out.push(Violation::DuplicateNode { node: n.clone() });
                }
            }
        }

        let edge_sets = [
            (EdgeRelation::Program, &self.program.edges, true),
            (EdgeRelation::Context, &self.context_edges, false),
            (EdgeRelation::Feedback, &self.feedback_edges, false),
        ];
        for (relation, edges, program_only) in edge_sets {
            let mut seen_edges = BTreeSet::new();
            for (from, to) in edges {
                for end in [from, to] {
                    let known = if program_only {
                        prog.contains(end)
                    } else {
                        self.contains(end)
                    };
                    if !known {
                        out.push(Violation::DanglingEdge {
                            relation,
                            from: from.clone(),
                            to: to.clone(),
                            missing: end.clone(),
                        });
                    }
                }
                if !seen_edges.insert((from, to)) {
                    out.push(Violation::DuplicateEdge {
                        relation,
                        from: from.clone(),
                        to: to.clone(),
                    });
                }
            }
        }

        for (owner, hood) in &self.neighborhood {
            if !self.contains(owner) {
                out.push(Violation::UnknownNeighborhoodOwner {
                    node: owner.clone(),
                });
            }
            for target in hood {
                if !prog.contains(target) {
                    out.push(Violation::NeighborhoodViolation {
                        node: owner.clone(),
                        target: target.clone(),
                    });
                }
            }
        }

        for n in self.program.sources.keys() {
            if !prog.contains(n) {
                out.push(Violation::UnknownSourceNode { node: n.clone() });
            }
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    fn ids(xs: &[&str]) -> Vec<NodeId> {
        xs.iter().map(|x| NodeId::from(*x)).collect()
    }

    fn edges(xs: &[(&str, &str)]) -> Vec<Edge> {
        xs.iter()
            .map(|(a, b)| (NodeId::from(*a), NodeId::from(*b)))
            .collect()
    }

    /// The opaque-component review graph.
    pub fn review_graph() -> EvaluationGraph {
        let program = ProgramGraph {
            nodes: ids(&["n_0", "n_1", "n_2", "n_3", "n_4", "n_5"]),
            edges: edges(&[
                ("n_0", "n_1"),
                ("n_1", "n_2"),
                ("n_2", "n_3"),
                ("n_2", "n_4"),
                ("n_3", "n_5"),
                ("n_4", "n_5"),
            ]),
            sources: [
                ("n_0", "function handleRequest(rawInput) { ... }"),
                ("n_3", "function processPayload(payload) { ... }"),
            ]
            .into_iter()
            .map(|(k, v)| (NodeId::from(k), v.to_string()))
            .collect(),
        };
        let hood = |xs: &[&str]| ids(xs).into_iter().collect::<BTreeSet<_>>();
        let neighborhood = [
            ("n_1", hood(&["n_0"])),
            ("n_2", hood(&["n_0"])),
            ("n_3", hood(&["n_3"])),
            ("n_4", hood(&["n_0"])),
            ("n_5", hood(&["n_0"])),
            ("n_C", hood(&["n_0", "n_3"])),
        ]
        .into_iter()
        .map(|(k, v)| (NodeId::from(k), v))
        .collect();
        EvaluationGraph::new(
            program,
            ids(&["n_C"]),
            edges(&[
                ("n_1", "n_C"),
                ("n_2", "n_C"),
                ("n_3", "n_C"),
                ("n_4", "n_5"),
                ("n_C", "n_5"),
            ]),
            edges(&[("n_C", "n_1"), ("n_C", "n_2")]),
            neighborhood,
        )
    }
}
