//! Directed acyclic graphs of layer nodes.
//!
//! Nodes are stored in topological order: every edge goes from a lower to a
//! higher index, node 0 is the single source and the last node the single
//! sink. Every other node needs at least one predecessor and one successor,
//! which puts every node on a source-to-sink path.

use std::collections::BTreeSet;

use crate::error::ArchError;
use crate::op::{Combiner, Op, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerNode {
    pub op: Op,
    pub combiner: Combiner,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DagGraph {
    pub stage: Stage,
    pub nodes: Vec<LayerNode>,
    pub edges: BTreeSet<(usize, usize)>,
}

impl DagGraph {
    /// A chain `0 -> 1 -> ... -> n-1`.
    pub fn chain(stage: Stage, nodes: Vec<LayerNode>) -> Self {
        let edges = (1..nodes.len()).map(|j| (j - 1, j)).collect();
        Self { stage, nodes, edges }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn sink(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn preds(&self, j: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.1 == j).map(|e| e.0).collect()
    }

    pub fn succs(&self, i: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.0 == i).map(|e| e.1).collect()
    }

    /// Kahn's algorithm; fails on a cycle or an out-of-range edge.
    pub fn topological_order(&self) -> Result<Vec<usize>, ArchError> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for &(a, b) in &self.edges {
            if a >= n || b >= n {
                return Err(ArchError::Invalid(format!("{} edge {a}->{b} leaves the graph", self.stage.tag())));
            }
            indeg[b] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|i| indeg[*i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for j in self.succs(i) {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        if order.len() != n {
            return Err(ArchError::Invalid(format!("{} graph has a cycle", self.stage.tag())));
        }
        Ok(order)
    }

    /// Structural invariants (ops are checked separately).
    pub fn check(&self) -> Result<(), ArchError> {
        let tag = self.stage.tag();
        let n = self.nodes.len();
        if n == 0 {
            return Err(ArchError::Invalid(format!("{tag} graph is empty")));
        }
        self.topological_order()?;
        for &(a, b) in &self.edges {
            if a >= b {
                return Err(ArchError::Invalid(format!("{tag} edge {a}->{b} does not point forward")));
            }
        }
        let mut has_pred = vec![false; n];
        let mut has_succ = vec![false; n];
        for &(a, b) in &self.edges {
            has_succ[a] = true;
            has_pred[b] = true;
        }
        if let Some(j) = (1..n).find(|j| !has_pred[*j]) {
            return Err(ArchError::Invalid(format!("{tag} node {j} is unreachable from the source")));
        }
        if let Some(i) = (0..n - 1).find(|i| !has_succ[*i]) {
            return Err(ArchError::Invalid(format!("{tag} node {i} does not reach the sink")));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if !node.op.allowed_in(self.stage) {
                return Err(ArchError::Invalid(format!("{tag} node {i}: {} is not a {tag} op", node.op)));
            }
            if !node.op.in_domain() {
                return Err(ArchError::Invalid(format!("{tag} node {i}: {} is out of range", node.op)));
            }
        }
        Ok(())
    }

    /// Adds the minimal chain edges that restore the path invariants.
    pub fn repair(&mut self) {
        let n = self.nodes.len();
        self.edges.retain(|&(a, b)| a < b && b < n);
        for j in 1..n {
            if !self.edges.iter().any(|e| e.1 == j) {
                self.edges.insert((j - 1, j));
            }
        }
        for i in 0..n.saturating_sub(1) {
            if !self.edges.iter().any(|e| e.0 == i) {
                self.edges.insert((i, i + 1));
            }
        }
    }

    /// Inserts `node` at index `p`, shifting later indices up by one.
    pub fn insert_node(&mut self, p: usize, node: LayerNode) {
        self.nodes.insert(p, node);
        let shift = |i: usize| if i >= p { i + 1 } else { i };
        self.edges = self.edges.iter().map(|&(a, b)| (shift(a), shift(b))).collect();
    }

    /// Removes node `p`, bridging each of its predecessors to each successor.
    pub fn remove_node(&mut self, p: usize) {
        let preds = self.preds(p);
        let succs = self.succs(p);
        let mut edges: BTreeSet<(usize, usize)> =
            self.edges.iter().copied().filter(|&(a, b)| a != p && b != p).collect();
        for &a in &preds {
            for &b in &succs {
                edges.insert((a, b));
            }
        }
        let shift = |i: usize| if i > p { i - 1 } else { i };
        self.edges = edges.into_iter().map(|(a, b)| (shift(a), shift(b))).collect();
        self.nodes.remove(p);
    }

    pub fn op_kinds(&self) -> BTreeSet<crate::op::OpKind> {
        self.nodes.iter().map(|n| n.op.kind()).collect()
    }
}
