//! The merged grammar graph: one subgraph per rule, joined at nonterminal heads.
//!
//! Every expression node of every rule becomes a graph node, except references,
//! which become edges into the referenced rule's head. Edges out of
//! concatenations and alternations carry the child index; edges out of
//! repetitions carry the repetition bound.

use std::collections::HashSet;
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use crate::grammar::{quote_terminal, Expr, GrammarAst, GrammarError, Span};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// What a graph node stands for.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    NonterminalHead(String),
    Alternation(usize),
    Concatenation(usize),
    Star,
    Plus,
    Range { lo: usize, hi: usize },
    OptionNode,
    Terminal(Vec<u8>),
}

/// A borrowed, copyable node descriptor. Generated code exposes one of these as
/// a compile-time constant per node type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeDef<'a> {
    NonterminalHead(&'a str),
    Alternation(usize),
    Concatenation(usize),
    Star,
    Plus,
    Range { lo: usize, hi: usize },
    Option,
    Terminal(&'a [u8]),
}

impl NodeDef<'_> {
    pub fn is_head(&self) -> bool {
        matches!(self, NodeDef::NonterminalHead(_))
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, NodeDef::Terminal(_))
    }

    /// Whether the node is one of the repetition operators.
    pub fn is_repetition(&self) -> bool {
        matches!(
            self,
            NodeDef::Star | NodeDef::Plus | NodeDef::Range { .. } | NodeDef::Option
        )
    }

    /// Repetition bounds as `(lo, hi)` with `hi` exclusive.
    pub fn repetition_bounds(&self) -> Option<(usize, Option<usize>)> {
        match *self {
            NodeDef::Star => Some((0, None)),
            NodeDef::Plus => Some((1, None)),
            NodeDef::Range { lo, hi } => Some((lo, Some(hi))),
            NodeDef::Option => Some((0, Some(2))),
            _ => None,
        }
    }

    /// Short kind name used in generated type names.
    pub fn kind_name(&self) -> &'static str {
        match self {
            NodeDef::NonterminalHead(_) => "Head",
            NodeDef::Alternation(_) => "Alt",
            NodeDef::Concatenation(_) => "Concat",
            NodeDef::Star => "Star",
            NodeDef::Plus => "Plus",
            NodeDef::Range { .. } => "Range",
            NodeDef::Option => "Option",
            NodeDef::Terminal(_) => "Terminal",
        }
    }
}

impl NodeKind {
    pub fn def(&self) -> NodeDef<'_> {
        match self {
            NodeKind::NonterminalHead(n) => NodeDef::NonterminalHead(n),
            NodeKind::Alternation(a) => NodeDef::Alternation(*a),
            NodeKind::Concatenation(a) => NodeDef::Concatenation(*a),
            NodeKind::Star => NodeDef::Star,
            NodeKind::Plus => NodeDef::Plus,
            NodeKind::Range { lo, hi } => NodeDef::Range { lo: *lo, hi: *hi },
            NodeKind::OptionNode => NodeDef::Option,
            NodeKind::Terminal(b) => NodeDef::Terminal(b),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphNode {
    pub kind: NodeKind,
    /// Name of the rule this node was expanded from.
    pub rule: String,
    pub span: Span,
    /// The grammar text this node corresponds to.
    pub text: String,
}

impl GraphNode {
    pub fn def(&self) -> NodeDef<'_> {
        self.kind.def()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    Child(usize),
    Repetition { lo: usize, hi: Option<usize> },
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeLabel::Child(i) => write!(f, "{i}"),
            EdgeLabel::Repetition { lo, hi: None } => write!(f, "{lo}.."),
            EdgeLabel::Repetition { lo, hi: Some(hi) } => write!(f, "{lo}..{hi}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub label: EdgeLabel,
    pub indirect: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrammarGraph {
    nodes: Vec<GraphNode>,
    edges: Vec<Edge>,
    /// Outgoing edge ids per node, in child-index order.
    out: Vec<Vec<usize>>,
    start: NodeId,
    heads: Vec<(String, NodeId)>,
}

enum Target {
    Node(NodeId),
    Rule(String),
}

struct Builder {
    nodes: Vec<GraphNode>,
    edges: Vec<(NodeId, Target, EdgeLabel)>,
}

impl Builder {
    fn push(&mut self, kind: NodeKind, rule: &str, span: Span, text: String) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(GraphNode {
            kind,
            rule: rule.to_string(),
            span,
            text,
        });
        id
    }

    fn expr(&mut self, e: &Expr, rule: &str, spans: &mut std::slice::Iter<'_, Span>) -> Target {
        let span = spans.next().copied().unwrap_or_default();
        let text = e.to_string();
        let (kind, children): (NodeKind, &[Expr]) = match e {
            Expr::Reference(name) => return Target::Rule(name.clone()),
            Expr::Terminal(b) => (NodeKind::Terminal(b.clone()), &[]),
            Expr::Concat(c) => (NodeKind::Concatenation(c.len()), c),
            Expr::Alt(c) => (NodeKind::Alternation(c.len()), c),
            Expr::Star(_) => (NodeKind::Star, e.children()),
            Expr::Plus(_) => (NodeKind::Plus, e.children()),
            Expr::Range { lo, hi, .. } => (NodeKind::Range { lo: *lo, hi: *hi }, e.children()),
            Expr::Option(_) => (NodeKind::OptionNode, e.children()),
        };
        let repetition = kind.def().repetition_bounds();
        let id = self.push(kind, rule, span, text);
        for (i, child) in children.iter().enumerate() {
            let target = self.expr(child, rule, spans);
            let label = match repetition {
                Some((lo, hi)) => EdgeLabel::Repetition { lo, hi },
                None => EdgeLabel::Child(i),
            };
            self.edges.push((id, target, label));
        }
        Target::Node(id)
    }
}

impl GrammarGraph {
    /// Builds the merged graph without marking indirection.
    pub fn build(ast: &GrammarAst) -> GrammarGraph {
        let mut b = Builder {
            nodes: Vec::new(),
            edges: Vec::new(),
        };
        let mut heads = Vec::with_capacity(ast.len());
        for rule in ast.rules() {
            let text = format!("<{}> ::= {}", rule.name, rule.expr);
            let head = b.push(
                NodeKind::NonterminalHead(rule.name.clone()),
                &rule.name,
                rule.span,
                text,
            );
            heads.push((rule.name.clone(), head));
            let mut spans = rule.expr_spans.iter();
            let body = b.expr(&rule.expr, &rule.name, &mut spans);
            b.edges.push((head, body, EdgeLabel::Child(0)));
        }
        let lookup = |name: &str| heads.iter().find(|(n, _)| n == name).map(|(_, id)| *id);
        let mut edges: Vec<Edge> = b
            .edges
            .into_iter()
            .map(|(src, target, label)| {
                let dst = match target {
                    Target::Node(id) => id,
                    Target::Rule(name) => {
                        lookup(&name).expect("references validated by the grammar")
                    }
                };
                Edge {
                    src,
                    dst,
                    label,
                    indirect: false,
                }
            })
            .collect();
        // stable order: by source, then by child index
        edges.sort_by_key(|e| {
            (
                e.src,
                match e.label {
                    EdgeLabel::Child(i) => i,
                    EdgeLabel::Repetition { .. } => 0,
                },
            )
        });
        let mut out = vec![Vec::new(); b.nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            out[e.src.index()].push(i);
        }
        let start = lookup(ast.start()).expect("start validated by the grammar");
        GrammarGraph {
            nodes: b.nodes,
            edges,
            out,
            start,
            heads,
        }
    }

    /// Builds the graph and marks its indirection edges.
    pub fn from_ast(ast: &GrammarAst) -> GrammarGraph {
        mark_indirection(Self::build(ast))
    }

    pub fn from_text(text: &[u8]) -> Result<GrammarGraph, GrammarError> {
        Ok(Self::from_ast(&crate::grammar::parse_grammar(text)?))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn start(&self) -> NodeId {
        self.start
    }

    pub fn node(&self, id: NodeId) -> &GraphNode {
        &self.nodes[id.index()]
    }

    pub fn def(&self, id: NodeId) -> NodeDef<'_> {
        self.nodes[id.index()].def()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = (NodeId, &GraphNode)> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Outgoing edges of `id`, in child-index order.
    pub fn out_edges(&self, id: NodeId) -> impl ExactSizeIterator<Item = &Edge> + '_ {
        self.out[id.index()].iter().map(move |&e| &self.edges[e])
    }

    /// The `index`-th child of `id`.
    pub fn child(&self, id: NodeId, index: usize) -> NodeId {
        self.edges[self.out[id.index()][index]].dst
    }

    pub fn children(&self, id: NodeId) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        self.out_edges(id).map(|e| e.dst)
    }

    /// The edge from `id` to its `index`-th child.
    pub fn child_edge(&self, id: NodeId, index: usize) -> &Edge {
        &self.edges[self.out[id.index()][index]]
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId) -> bool {
        self.out_edges(src).any(|e| e.dst == dst)
    }

    /// Head node of the named rule.
    pub fn head(&self, rule: &str) -> Option<NodeId> {
        self.heads
            .iter()
            .find(|(n, _)| n == rule)
            .map(|(_, id)| *id)
    }

    /// Rule heads in rule order.
    pub fn heads(&self) -> impl ExactSizeIterator<Item = (&str, NodeId)> {
        self.heads.iter().map(|(n, id)| (n.as_str(), *id))
    }

    pub fn indirect_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.indirect)
    }

    /// Topological order over the non-indirect edges, or `None` if they contain a cycle.
    pub fn direct_topological_order(&self) -> Option<Vec<NodeId>> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for e in self.edges.iter().filter(|e| !e.indirect) {
            indeg[e.dst.index()] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = ready.pop() {
            order.push(NodeId(u as u32));
            for &ei in &self.out[u] {
                let e = &self.edges[ei];
                if !e.indirect {
                    let d = e.dst.index();
                    indeg[d] -= 1;
                    if indeg[d] == 0 {
                        ready.push(d);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Minimum derivation height of each node, counted in nodes (a terminal is 1).
    /// `None` marks nodes with no finite derivation.
    pub fn min_heights(&self) -> Vec<Option<usize>> {
        let mut h: Vec<Option<usize>> = vec![None; self.nodes.len()];
        loop {
            let mut changed = false;
            for (i, node) in self.nodes.iter().enumerate() {
                let id = NodeId(i as u32);
                let kids = || self.children(id).map(|c| h[c.index()]);
                let value = match node.def() {
                    NodeDef::Terminal(_) | NodeDef::Star | NodeDef::Option => Some(1),
                    NodeDef::Range { lo: 0, .. } => Some(1),
                    NodeDef::NonterminalHead(_) | NodeDef::Plus | NodeDef::Range { .. } => {
                        kids().next().flatten().map(|c| c + 1)
                    }
                    NodeDef::Alternation(_) => kids().flatten().min().map(|c| c + 1),
                    NodeDef::Concatenation(_) => kids()
                        .try_fold(0, |acc, c| c.map(|c| acc.max(c)))
                        .map(|c| c + 1),
                };
                if value.is_some() && (h[i].is_none() || value < h[i]) {
                    h[i] = value;
                    changed = true;
                }
            }
            if !changed {
                return h;
            }
        }
    }

    /// Graphviz rendering; indirect edges are dashed.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph grammar {\n  node [shape=circle];\n");
        for (id, node) in self.nodes() {
            let label = match node.def() {
                NodeDef::NonterminalHead(n) => format!("<{n}>"),
                NodeDef::Alternation(_) => "|".into(),
                NodeDef::Concatenation(_) => "~".into(),
                NodeDef::Star => "*".into(),
                NodeDef::Plus => "+".into(),
                NodeDef::Option => "?".into(),
                NodeDef::Range { lo, hi } => format!("{{{lo},{hi}}}"),
                NodeDef::Terminal(b) => quote_terminal(b),
            };
            let _ = writeln!(s, "  {} [label={}];", id.0, dot_string(&label));
        }
        for e in &self.edges {
            let style = if e.indirect { ", style=dashed" } else { "" };
            let _ = writeln!(
                s,
                "  {} -> {} [label=\"{}\"{}];",
                e.src.0, e.dst.0, e.label, style
            );
        }
        s.push_str("}\n");
        s
    }
}

fn dot_string(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Free-function form of [`GrammarGraph::build`].
pub fn build_graph(ast: &GrammarAst) -> GrammarGraph {
    GrammarGraph::build(ast)
}

/// Marks every repetition edge indirect, then a feedback arc set of what
/// remains, so that the direct edges form a DAG.
///
/// The arc set comes from the Eades-Lin-Smyth ordering heuristic with ties
/// broken by lowest node id.
pub fn mark_indirection(mut graph: GrammarGraph) -> GrammarGraph {
    let n = graph.nodes.len();
    for e in graph.edges.iter_mut() {
        let forced = matches!(
            graph.nodes[e.src.index()].def(),
            NodeDef::Star | NodeDef::Plus | NodeDef::Range { .. }
        );
        e.indirect = forced || e.src == e.dst;
    }
    let considered: Vec<usize> = (0..graph.edges.len())
        .filter(|&i| !graph.edges[i].indirect)
        .collect();

    let mut indeg = vec![0isize; n];
    let mut outdeg = vec![0isize; n];
    let mut incoming = vec![Vec::new(); n];
    let mut outgoing = vec![Vec::new(); n];
    for &i in &considered {
        let e = graph.edges[i];
        outdeg[e.src.index()] += 1;
        indeg[e.dst.index()] += 1;
        outgoing[e.src.index()].push(e.dst.index());
        incoming[e.dst.index()].push(e.src.index());
    }
    let mut alive = vec![true; n];
    let mut remaining = n;
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::new();

    let remove =
        |u: usize, alive: &mut Vec<bool>, indeg: &mut Vec<isize>, outdeg: &mut Vec<isize>| {
            alive[u] = false;
            for &v in &outgoing[u] {
                indeg[v] -= 1;
            }
            for &v in &incoming[u] {
                outdeg[v] -= 1;
            }
        };

    while remaining > 0 {
        let mut progressed = true;
        while progressed {
            progressed = false;
            for u in 0..n {
                if alive[u] && outdeg[u] == 0 {
                    remove(u, &mut alive, &mut indeg, &mut outdeg);
                    right.push(u);
                    remaining -= 1;
                    progressed = true;
                }
            }
        }
        progressed = true;
        while progressed {
            progressed = false;
            for u in 0..n {
                if alive[u] && indeg[u] == 0 {
                    remove(u, &mut alive, &mut indeg, &mut outdeg);
                    left.push(u);
                    remaining -= 1;
                    progressed = true;
                }
            }
        }
        if remaining > 0 {
            let pick = (0..n)
                .filter(|&u| alive[u])
                .max_by_key(|&u| (outdeg[u] - indeg[u], std::cmp::Reverse(u)))
                .expect("remaining > 0");
            remove(pick, &mut alive, &mut indeg, &mut outdeg);
            left.push(pick);
            remaining -= 1;
        }
    }
    left.extend(right.into_iter().rev());
    let mut position = vec![0usize; n];
    for (p, &u) in left.iter().enumerate() {
        position[u] = p;
    }
    for i in considered {
        let e = &mut graph.edges[i];
        if position[e.src.index()] > position[e.dst.index()] {
            e.indirect = true;
        }
    }
    debug_assert!(graph.direct_topological_order().is_some());
    graph
}

/// All simple directed walks of at most `k` nodes.
pub fn enumerate_k_paths(graph: &GrammarGraph, k: usize) -> HashSet<Vec<NodeId>> {
    let mut out = HashSet::new();
    if k == 0 {
        return out;
    }
    let mut on_path = vec![false; graph.len()];
    let mut path = Vec::with_capacity(k);
    fn extend(
        graph: &GrammarGraph,
        k: usize,
        path: &mut Vec<NodeId>,
        on_path: &mut [bool],
        out: &mut HashSet<Vec<NodeId>>,
    ) {
        out.insert(path.clone());
        if path.len() == k {
            return;
        }
        let last = *path.last().unwrap();
        let mut seen: smallvec::SmallVec<[NodeId; 8]> = smallvec::SmallVec::new();
        for next in graph.children(last) {
            if on_path[next.index()] || seen.contains(&next) {
                continue;
            }
            seen.push(next);
            on_path[next.index()] = true;
            path.push(next);
            extend(graph, k, path, on_path, out);
            path.pop();
            on_path[next.index()] = false;
        }
    }
    for (id, _) in graph.nodes() {
        on_path[id.index()] = true;
        path.push(id);
        extend(graph, k, &mut path, &mut on_path, &mut out);
        path.pop();
        on_path[id.index()] = false;
    }
    out
}
