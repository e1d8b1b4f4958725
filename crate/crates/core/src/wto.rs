//! Weak topological ordering over the extended edges, using the recursive
//! strategy. Roots are taken in node declaration order and successors in
//! node id order, so the result is deterministic.

use std::collections::BTreeMap;
use std::fmt;

use crate::graph::{EvaluationGraph, NodeId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WtoElement {
    Vertex(NodeId),
    /// A head followed by the ordering of the rest of its component.
    Component(NodeId, Vec<WtoElement>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wto(pub Vec<WtoElement>);

impl Wto {
    /// Nodes in ordering position.
    pub fn flatten(&self) -> Vec<NodeId> {
        fn walk(els: &[WtoElement], out: &mut Vec<NodeId>) {
            for e in els {
                match e {
                    WtoElement::Vertex(v) => out.push(v.clone()),
                    WtoElement::Component(h, body) => {
                        out.push(h.clone());
                        walk(body, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.0, &mut out);
        out
    }

    /// Component heads enclosing each node, outermost first.
    pub fn heads(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        fn walk(
            els: &[WtoElement],
            stack: &mut Vec<NodeId>,
            out: &mut BTreeMap<NodeId, Vec<NodeId>>,
        ) {
            for e in els {
                match e {
                    WtoElement::Vertex(v) => {
                        out.insert(v.clone(), stack.clone());
                    }
                    WtoElement::Component(h, body) => {
                        out.insert(h.clone(), stack.clone());
                        stack.push(h.clone());
                        walk(body, stack, out);
                        stack.pop();
                    }
                }
            }
        }
        let mut out = BTreeMap::new();
        walk(&self.0, &mut Vec::new(), &mut out);
        out
    }
}

impl fmt::Display for Wto {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn write_all(els: &[WtoElement], f: &mut fmt::Formatter<'_>) -> fmt::Result {
            for (i, e) in els.iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                match e {
                    WtoElement::Vertex(v) => write!(f, "{v}")?,
                    WtoElement::Component(h, body) => {
                        write!(f, "({h}")?;
                        if !body.is_empty() {
                            f.write_str(" ")?;
                            write_all(body, f)?;
                        }
                        f.write_str(")")?;
                    }
                }
            }
            Ok(())
        }
        write_all(&self.0, f)
    }
}

const DONE: usize = usize::MAX;

struct Builder<'g> {
    succ: BTreeMap<&'g NodeId, Vec<&'g NodeId>>,
    dfn: BTreeMap<&'g NodeId, usize>,
    stack: Vec<&'g NodeId>,
    num: usize,
}

impl<'g> Builder<'g> {
    fn dfn(&self, v: &NodeId) -> usize {
        self.dfn.get(v).copied().unwrap_or(0)
    }

    fn visit(&mut self, v: &'g NodeId, partition: &mut Vec<WtoElement>) -> usize {
        self.stack.push(v);
        self.num += 1;
        self.dfn.insert(v, self.num);
        let mut head = self.num;
        let mut is_loop = false;
        for w in self.succ[v].clone() {
            let min = if self.dfn(w) == 0 {
                self.visit(w, partition)
            } else {
                self.dfn(w)
            };
            if min <= head {
                head = min;
                is_loop = true;
            }
        }
        if head == self.dfn(v) {
            self.dfn.insert(v, DONE);
            let mut element = self.stack.pop().expect("v is on the stack");
            if is_loop {
                while element != v {
                    self.dfn.insert(element, 0);
                    element = self.stack.pop().expect("v is below");
                }
                let body = self.component(v);
                partition.insert(0, WtoElement::Component(v.clone(), body));
            } else {
                partition.insert(0, WtoElement::Vertex(v.clone()));
            }
        }
        head
    }

    fn component(&mut self, v: &'g NodeId) -> Vec<WtoElement> {
        let mut partition = Vec::new();
        for w in self.succ[v].clone() {
            if self.dfn(w) == 0 {
                self.visit(w, &mut partition);
            }
        }
        partition
    }
}

pub fn wto(g: &EvaluationGraph) -> Wto {
    let nodes: Vec<&NodeId> = g.nodes().collect();
    let mut succ: BTreeMap<&NodeId, Vec<&NodeId>> =
        nodes.iter().map(|n| (*n, Vec::new())).collect();
    for (a, b) in g.context_edges.iter().chain(&g.feedback_edges) {
        if let (Some((ka, _)), Some((kb, _))) = (succ.get_key_value(a), succ.get_key_value(b)) {
            let (ka, kb) = (*ka, *kb);
            succ.get_mut(ka).expect("present").push(kb);
        }
    }
    for list in succ.values_mut() {
        list.sort();
        list.dedup();
    }
    let mut b = Builder {
        succ,
        dfn: BTreeMap::new(),
        stack: Vec::new(),
        num: 0,
    };
    let mut partition = Vec::new();
    for v in nodes {
        if b.dfn(v) == 0 {
            b.visit(v, &mut partition);
        }
    }
    Wto(partition)
}

/// Flattened weak topological order of `V*`.
pub fn wto_order(g: &EvaluationGraph) -> Vec<NodeId> {
    wto(g).flatten()
}
