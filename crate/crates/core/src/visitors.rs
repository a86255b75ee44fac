//! Built-in visitors. All of them traverse in pre-order.

use std::io;
use std::ops::ControlFlow;

use crate::graph::{NodeDef, NodeId};
use crate::runtime::{resolve, NodePath, NodeView, PathError, VisitResult, Visitor};

/// Writes terminal bytes to a sink, forwarding write errors.
pub struct WriteVisitor<W> {
    sink: W,
    written: usize,
}

impl<W> WriteVisitor<W> {
    pub fn new(sink: W) -> Self {
        WriteVisitor { sink, written: 0 }
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

impl<'t, T: NodeView<'t>, W: io::Write> Visitor<T> for WriteVisitor<W> {
    type Break = std::convert::Infallible;
    type Error = io::Error;

    fn visit(mut self, node: T, _: usize) -> VisitResult<Self::Break, Self, Self::Error> {
        if let NodeDef::Terminal(bytes) = node.definition() {
            self.sink.write_all(bytes)?;
            self.written += bytes.len();
            return Ok(ControlFlow::Continue(self));
        }
        node.visit_each(self)
    }
}

/// Writes the tree's terminal bytes, left to right, and returns how many were written.
pub fn write_tree<'t, T: NodeView<'t>>(root: T, sink: impl io::Write) -> io::Result<usize> {
    match WriteVisitor::new(sink).visit(root, 0)? {
        ControlFlow::Continue(v) => Ok(v.written),
        ControlFlow::Break(never) => match never {},
    }
}

/// The tree's terminal bytes.
pub fn serialize<'t, T: NodeView<'t>>(root: T) -> Vec<u8> {
    let mut out = Vec::new();
    write_tree(root, &mut out).expect("writing to a Vec cannot fail");
    out
}

/// Calls `f` on every node in pre-order with its path.
pub fn for_each_node<'t, T: NodeView<'t>>(root: T, mut f: impl FnMut(T, &NodePath)) {
    fn go<'t, T: NodeView<'t>>(node: T, path: &mut NodePath, f: &mut impl FnMut(T, &NodePath)) {
        f(node, path);
        for (i, c) in node.children() {
            path.push(i);
            go(c, path, f);
            path.pop();
        }
    }
    go(root, &mut NodePath::root(), &mut f);
}

struct Count {
    symbols: usize,
    all: usize,
    height: usize,
    depth: usize,
}

impl<'t, T: NodeView<'t>> Visitor<T> for Count {
    type Break = std::convert::Infallible;
    type Error = std::convert::Infallible;

    fn visit(mut self, node: T, _: usize) -> VisitResult<Self::Break, Self, Self::Error> {
        self.all += 1;
        self.depth += 1;
        self.height = self.height.max(self.depth);
        if matches!(
            node.definition(),
            NodeDef::NonterminalHead(_) | NodeDef::Terminal(_)
        ) {
            self.symbols += 1;
        }
        let mut this = match node.visit_each(self)? {
            ControlFlow::Continue(v) => v,
            ControlFlow::Break(never) => match never {},
        };
        this.depth -= 1;
        Ok(ControlFlow::Continue(this))
    }
}

fn count<'t, T: NodeView<'t>>(root: T) -> Count {
    let start = Count {
        symbols: 0,
        all: 0,
        height: 0,
        depth: 0,
    };
    match start.visit(root, 0) {
        Ok(ControlFlow::Continue(c)) => c,
        Ok(ControlFlow::Break(never)) | Err(never) => match never {},
    }
}

/// Number of nonterminal heads plus terminals; structural nodes are not counted.
pub fn count_symbol_nodes<'t, T: NodeView<'t>>(root: T) -> usize {
    count(root).symbols
}

/// Number of nodes of every kind.
pub fn count_all_nodes<'t, T: NodeView<'t>>(root: T) -> usize {
    count(root).all
}

/// Height in nodes; a single leaf has height 1.
pub fn tree_height<'t, T: NodeView<'t>>(root: T) -> usize {
    count(root).height
}

/// Paths of all nodes whose descriptor satisfies `predicate`, in pre-order.
pub fn collect_paths<'t, T: NodeView<'t>>(
    root: T,
    mut predicate: impl FnMut(NodeId, NodeDef<'t>) -> bool,
) -> Vec<NodePath> {
    let mut out = Vec::new();
    for_each_node(root, |node, path| {
        if predicate(node.node_id(), node.definition()) {
            out.push(path.clone());
        }
    });
    out
}

/// The node at `path`.
pub fn resolve_path<'t, T: NodeView<'t>>(root: T, path: &NodePath) -> Result<T, PathError> {
    resolve(root, path)
}

/// Paths of all nodes of graph node type `id`, in pre-order.
pub fn find_same_type_subtrees<'t, T: NodeView<'t>>(root: T, id: NodeId) -> Vec<NodePath> {
    collect_paths(root, |n, _| n == id)
}

/// Pre-order paths of every node.
pub fn all_paths<'t, T: NodeView<'t>>(root: T) -> Vec<NodePath> {
    collect_paths(root, |_, _| true)
}

/// Counts symbol nodes of the subtree at `path`.
pub fn count_symbol_nodes_at<'t, T: NodeView<'t>>(
    root: T,
    path: &NodePath,
) -> Result<usize, PathError> {
    resolve(root, path).map(count_symbol_nodes)
}

/// The answers that reproduce this tree when replayed through a
/// [`ScriptedSampler`](crate::generation::ScriptedSampler) without generators:
/// variant indices and repetition counts in generation order. Repetitions
/// with a single legal count are skipped, as generation does not ask.
pub fn choice_script<'t, T: NodeView<'t>>(root: T) -> Vec<usize> {
    let mut out = Vec::new();
    for_each_node(root, |node, _| match node.definition() {
        NodeDef::Alternation(_) => out.extend(node.children().first().map(|(i, _)| *i)),
        def => {
            if let Some((lo, hi)) = def.repetition_bounds() {
                if hi != Some(lo + 1) {
                    out.push(node.children().len());
                }
            }
        }
    });
    out
}
