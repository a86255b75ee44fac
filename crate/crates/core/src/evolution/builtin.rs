use std::collections::HashMap;

use super::{Constraint, ConstraintError, Evaluation};
use crate::graph::{GrammarGraph, NodeDef, NodeId};
use crate::runtime::{Backend, NodePath, NodeView};
use crate::visitors::count_symbol_nodes;

/// A set of graph node types, named either by rule (`raw_field` or
/// `<raw_field>`) or by terminal literal (`"a"`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selector {
    text: String,
    member: Vec<bool>,
}

impl Selector {
    pub fn new(graph: &GrammarGraph, text: &str) -> Result<Self, ConstraintError> {
        let trimmed = text.trim();
        let mut member = vec![false; graph.len()];
        if let Some(lit) = trimmed.strip_prefix('"').and_then(|s| s.strip_suffix('"')) {
            let bytes =
                unescape(lit).ok_or_else(|| ConstraintError::UnknownSelector(text.to_string()))?;
            for (id, node) in graph.nodes() {
                if node.def() == NodeDef::Terminal(&bytes) {
                    member[id.index()] = true;
                }
            }
        } else {
            let name = trimmed
                .strip_prefix('<')
                .and_then(|s| s.strip_suffix('>'))
                .unwrap_or(trimmed);
            if let Some(head) = graph.head(name) {
                member[head.index()] = true;
            }
        }
        if !member.contains(&true) {
            return Err(ConstraintError::UnknownSelector(text.to_string()));
        }
        Ok(Selector {
            text: trimmed.to_string(),
            member,
        })
    }

    #[inline]
    pub fn matches(&self, id: NodeId) -> bool {
        self.member.get(id.index()).copied().unwrap_or(false)
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

fn unescape(s: &str) -> Option<Vec<u8>> {
    let mut out = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            let c = *bytes.get(i + 1)?;
            match c {
                b'n' => out.push(b'\n'),
                b't' => out.push(b'\t'),
                b'r' => out.push(b'\r'),
                b'\\' | b'"' => out.push(c),
                b'x' => {
                    let hex = s.get(i + 2..i + 4)?;
                    out.push(u8::from_str_radix(hex, 16).ok()?);
                    i += 2;
                }
                _ => return None,
            }
            i += 2;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    Some(out)
}

/// For every node matched by `scope`, in pre-order: its path and the number
/// of `selector` nodes strictly below it.
pub fn scoped_counts<'t, V: NodeView<'t>>(
    root: V,
    scope: &Selector,
    selector: &Selector,
) -> Vec<(NodePath, usize)> {
    fn go<'t, V: NodeView<'t>>(
        node: V,
        path: &mut NodePath,
        open: &mut Vec<usize>,
        out: &mut Vec<(NodePath, usize)>,
        scope: &Selector,
        selector: &Selector,
    ) {
        let id = node.node_id();
        if selector.matches(id) {
            for &o in open.iter() {
                out[o].1 += 1;
            }
        }
        let opened = scope.matches(id);
        if opened {
            open.push(out.len());
            out.push((path.clone(), 0));
        }
        for (i, c) in node.children() {
            path.push(i);
            go(c, path, open, out, scope, selector);
            path.pop();
        }
        if opened {
            open.pop();
        }
    }
    let mut out = Vec::new();
    go(
        root,
        &mut NodePath::root(),
        &mut Vec::new(),
        &mut out,
        scope,
        selector,
    );
    out
}

/// Score of a boolean predicate.
pub fn boolean_score(holds: bool) -> f64 {
    if holds {
        1.0
    } else {
        0.0
    }
}

fn closeness(a: usize, b: usize) -> f64 {
    1.0 / (1.0 + a.abs_diff(b) as f64)
}

/// All `scope` instances contain the same number of `selector` nodes.
#[derive(Clone, Debug)]
pub struct CardinalityEqual {
    name: String,
    scope: Selector,
    selector: Selector,
}

pub fn cardinality_equal(
    graph: &GrammarGraph,
    scope: &str,
    selector: &str,
) -> Result<CardinalityEqual, ConstraintError> {
    Ok(CardinalityEqual {
        name: format!("cardinality_equal({scope}, {selector})"),
        scope: Selector::new(graph, scope)?,
        selector: Selector::new(graph, selector)?,
    })
}

impl<B: Backend> Constraint<B> for CardinalityEqual {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, backend: &B, tree: &B::Tree) -> Result<Evaluation, ConstraintError> {
        let counts = scoped_counts(backend.root(tree), &self.scope, &self.selector);
        if counts.len() < 2 {
            return Ok(Evaluation::satisfied());
        }
        let mut total = 0.0;
        let mut pairs = 0usize;
        for (i, (_, a)) in counts.iter().enumerate() {
            for (_, b) in &counts[i + 1..] {
                total += closeness(*a, *b);
                pairs += 1;
            }
        }
        let score = total / pairs as f64;
        if score >= 1.0 {
            return Ok(Evaluation::satisfied());
        }
        // the most frequent count wins; ties go to the count seen first
        let mut freq: HashMap<usize, (usize, usize)> = HashMap::new();
        for (order, (_, c)) in counts.iter().enumerate() {
            freq.entry(*c).or_insert((0, order)).0 += 1;
        }
        let mode = freq
            .iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
            .map(|(c, _)| *c)
            .expect("at least two instances");
        let violations = counts
            .into_iter()
            .filter(|(_, c)| *c != mode)
            .map(|(p, _)| p)
            .collect();
        Ok(Evaluation { score, violations })
    }
}

/// Every `scope` instance contains exactly `k` `selector` nodes.
#[derive(Clone, Debug)]
pub struct CardinalityEqK {
    name: String,
    scope: Selector,
    selector: Selector,
    k: usize,
}

pub fn cardinality_eq_k(
    graph: &GrammarGraph,
    scope: &str,
    selector: &str,
    k: usize,
) -> Result<CardinalityEqK, ConstraintError> {
    Ok(CardinalityEqK {
        name: format!("cardinality_eq_k({scope}, {selector}, {k})"),
        scope: Selector::new(graph, scope)?,
        selector: Selector::new(graph, selector)?,
        k,
    })
}

impl<B: Backend> Constraint<B> for CardinalityEqK {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, backend: &B, tree: &B::Tree) -> Result<Evaluation, ConstraintError> {
        let counts = scoped_counts(backend.root(tree), &self.scope, &self.selector);
        if counts.is_empty() {
            return Ok(Evaluation::satisfied());
        }
        let score = counts
            .iter()
            .map(|(_, c)| closeness(*c, self.k))
            .sum::<f64>()
            / counts.len() as f64;
        let violations: Vec<NodePath> = counts
            .into_iter()
            .filter(|(_, c)| *c != self.k)
            .map(|(p, _)| p)
            .collect();
        if violations.is_empty() {
            return Ok(Evaluation::satisfied());
        }
        Ok(Evaluation { score, violations })
    }
}

/// The tree has at least `target` symbol nodes.
#[derive(Clone, Debug)]
pub struct NodeGoal {
    name: String,
    target: usize,
}

pub fn node_goal(target: usize) -> NodeGoal {
    NodeGoal {
        name: format!("node_goal({target})"),
        target: target.max(1),
    }
}

impl<B: Backend> Constraint<B> for NodeGoal {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, backend: &B, tree: &B::Tree) -> Result<Evaluation, ConstraintError> {
        let n = count_symbol_nodes(backend.root(tree));
        if n >= self.target {
            return Ok(Evaluation::satisfied());
        }
        Ok(Evaluation {
            score: n as f64 / self.target as f64,
            violations: vec![NodePath::root()],
        })
    }
}

/// The whole tree contains between `min` and `max` (inclusive) `selector` nodes.
#[derive(Clone, Debug)]
pub struct CountBound {
    name: String,
    selector: Selector,
    min: usize,
    max: usize,
}

pub fn count_bound(
    graph: &GrammarGraph,
    selector: &str,
    min: usize,
    max: usize,
) -> Result<CountBound, ConstraintError> {
    if min > max {
        return Err(ConstraintError::Invalid(format!(
            "count_bound: min {min} exceeds max {max}"
        )));
    }
    Ok(CountBound {
        name: format!("count_bound({selector}, {min}, {max})"),
        selector: Selector::new(graph, selector)?,
        min,
        max,
    })
}

impl<B: Backend> Constraint<B> for CountBound {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, backend: &B, tree: &B::Tree) -> Result<Evaluation, ConstraintError> {
        let root = backend.root(tree);
        let paths = crate::visitors::collect_paths(root, |id, _| self.selector.matches(id));
        let n = paths.len();
        if (self.min..=self.max).contains(&n) {
            return Ok(Evaluation::satisfied());
        }
        let target = if n < self.min { self.min } else { self.max };
        // too many: the surplus occurrences are to blame; too few: the root is
        let violations = if n > self.max {
            paths
        } else {
            vec![NodePath::root()]
        };
        Ok(Evaluation {
            score: closeness(n, target),
            violations,
        })
    }
}
