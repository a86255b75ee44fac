//! k-path coverage of derivation trees against the grammar graph.

use std::collections::HashSet;

use serde::Serialize;
use smallvec::SmallVec;

use crate::graph::{enumerate_k_paths, GrammarGraph, NodeId};
use crate::runtime::{Backend, NodeView};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoverageError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("tree {tree} does not belong to the grammar: {detail}")]
    GrammarMismatch { tree: usize, detail: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KPathReport {
    pub k: usize,
    pub covered: usize,
    pub total: usize,
    pub percent: f64,
}

impl std::fmt::Display for KPathReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}-path coverage: {:.2}% ({}/{})",
            self.k, self.percent, self.covered, self.total
        )
    }
}

type Chain = SmallVec<[NodeId; 8]>;

/// Downward chains of at most `k` nodes observed in one tree.
fn tree_chains<'t, V: NodeView<'t>>(
    graph: &GrammarGraph,
    root: V,
    k: usize,
) -> Result<HashSet<Chain>, String> {
    fn go<'t, V: NodeView<'t>>(
        graph: &GrammarGraph,
        node: V,
        k: usize,
        stack: &mut Vec<NodeId>,
        out: &mut HashSet<Chain>,
    ) -> Result<(), String> {
        let id = node.node_id();
        if id.index() >= graph.len() {
            return Err(format!("node id {id} outside the graph"));
        }
        if let Some(&parent) = stack.last() {
            if !graph.has_edge(parent, id) {
                return Err(format!("no edge {parent} -> {id}"));
            }
        }
        stack.push(id);
        for len in 1..=k.min(stack.len()) {
            out.insert(Chain::from_slice(&stack[stack.len() - len..]));
        }
        for (_, c) in node.children() {
            go(graph, c, k, stack, out)?;
        }
        stack.pop();
        Ok(())
    }
    let mut out = HashSet::new();
    go(graph, root, k, &mut Vec::new(), &mut out)?;
    Ok(out)
}

/// Fraction of the grammar's k-paths that occur in some tree of `forest`.
pub fn kpath_cover<B: Backend>(
    backend: &B,
    forest: &[B::Tree],
    k: usize,
) -> Result<KPathReport, CoverageError> {
    if k == 0 {
        return Err(CoverageError::ZeroK);
    }
    let graph = backend.graph();
    let per_tree = |(i, t): (usize, &B::Tree)| {
        tree_chains(graph, backend.root(t), k)
            .map_err(|detail| CoverageError::GrammarMismatch { tree: i, detail })
    };
    #[cfg(feature = "parallel")]
    let sets: Vec<HashSet<Chain>> = {
        use rayon::prelude::*;
        forest
            .par_iter()
            .enumerate()
            .map(per_tree)
            .collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let sets: Vec<HashSet<Chain>> = forest
        .iter()
        .enumerate()
        .map(per_tree)
        .collect::<Result<_, _>>()?;

    let universe = enumerate_k_paths(graph, k);
    let mut seen: HashSet<&[NodeId]> = HashSet::new();
    for s in &sets {
        for c in s {
            if let Some(p) = universe.get(c.as_slice()) {
                seen.insert(p.as_slice());
            }
        }
    }
    let total = universe.len();
    let covered = seen.len();
    let percent = if total == 0 {
        0.0
    } else {
        100.0 * covered as f64 / total as f64
    };
    Ok(KPathReport {
        k,
        covered,
        total,
        percent,
    })
}
