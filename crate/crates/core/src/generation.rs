//! The choice protocol.
//!
//! Trees are generated top-down. At every alternation the engine asks which
//! variant to expand and at every repetition how many elements to produce.
//! A [`Sampler`] answers those questions; [`Generator`]s decide which answers
//! are allowed for the nodes they offer. Both backends drive the same
//! [`GenCtx`] calls in the same order, so equal seeds give equal trees.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use smallvec::SmallVec;

use crate::graph::{GrammarGraph, NodeDef, NodeId};

/// Nesting beyond this many nodes fails with [`GenError::DepthExceeded`] even
/// without a depth limiter, so that runaway recursion cannot exhaust the stack.
pub const HARD_DEPTH_CAP: usize = 512;

/// Cap on unbounded repetition counts.
pub const MAX_UNBOUNDED_REPETITIONS: usize = 64;

pub const DEFAULT_RETRY_BUDGET: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("no derivation of {node} fits within depth {limit}")]
    DepthExceeded { node: NodeId, limit: usize },
    #[error("generator for {node} failed {attempts} times")]
    RetryExhausted { node: NodeId, attempts: usize },
    /// Returned by a generator to ask for another attempt.
    #[error("generation attempt rejected")]
    Rejected,
    #[error("alternation closure of {0} is cyclic")]
    CyclicAlternation(NodeId),
}

/// Source of choices.
pub trait Sampler {
    /// A variant index in `0..arity`.
    fn sample_alt(&mut self, arity: usize, node: NodeId) -> usize;

    /// A count `>= lo`, and `< hi` when bounded.
    fn sample_rep(&mut self, lo: usize, hi: Option<usize>, node: NodeId) -> usize;

    /// Told by generators that reinterpret `node` as a choice among `arity` options.
    fn effective_arity(&mut self, _node: NodeId, _arity: usize) {}

    /// A uniform draw from `[0, 1)`, used by selection in the evolution loop.
    fn sample_unit(&mut self) -> f64;
}

/// The default sampler: uniform variants, uniform bounded counts and
/// geometric unbounded counts with continue-probability 0.5.
#[derive(Clone, Debug)]
pub struct RandomSampler {
    rng: Xoshiro256PlusPlus,
}

impl RandomSampler {
    pub fn new(seed: u64) -> Self {
        RandomSampler {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }
}

impl Sampler for RandomSampler {
    #[inline]
    fn sample_alt(&mut self, arity: usize, _node: NodeId) -> usize {
        self.rng.random_range(0..arity)
    }

    #[inline]
    fn sample_rep(&mut self, lo: usize, hi: Option<usize>, _node: NodeId) -> usize {
        match hi {
            Some(hi) => self.rng.random_range(lo..hi),
            None => {
                // each trailing one bit is a fair coin coming up "continue"
                let extra = self.rng.next_u64().trailing_ones() as usize;
                lo + extra.min(MAX_UNBOUNDED_REPETITIONS.saturating_sub(lo))
            }
        }
    }

    fn sample_unit(&mut self) -> f64 {
        self.rng.random()
    }
}

/// Replays a fixed sequence of answers, clamped into range. Once exhausted it
/// answers with the smallest legal value.
#[derive(Clone, Debug, Default)]
pub struct ScriptedSampler {
    answers: VecDeque<usize>,
}

impl ScriptedSampler {
    pub fn new(answers: impl IntoIterator<Item = usize>) -> Self {
        ScriptedSampler {
            answers: answers.into_iter().collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.answers.len()
    }
}

impl Sampler for ScriptedSampler {
    fn sample_alt(&mut self, arity: usize, _node: NodeId) -> usize {
        self.answers.pop_front().unwrap_or(0).min(arity - 1)
    }

    fn sample_rep(&mut self, lo: usize, hi: Option<usize>, _node: NodeId) -> usize {
        let n = self.answers.pop_front().unwrap_or(lo).max(lo);
        match hi {
            Some(hi) => n.min(hi - 1),
            None => n,
        }
    }

    fn sample_unit(&mut self) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Choice {
    Alt {
        node: NodeId,
        arity: usize,
        index: usize,
    },
    Rep {
        node: NodeId,
        count: usize,
    },
}

impl Choice {
    pub fn value(self) -> usize {
        match self {
            Choice::Alt { index, .. } => index,
            Choice::Rep { count, .. } => count,
        }
    }
}

/// Records every answer of an inner sampler. Feeding the values of the
/// recording to a [`ScriptedSampler`] reproduces the same tree.
#[derive(Clone, Debug)]
pub struct RecordingSampler<S> {
    inner: S,
    log: Vec<Choice>,
}

impl<S: Sampler> RecordingSampler<S> {
    pub fn new(inner: S) -> Self {
        RecordingSampler {
            inner,
            log: Vec::new(),
        }
    }

    pub fn choices(&self) -> &[Choice] {
        &self.log
    }

    pub fn replay(&self) -> ScriptedSampler {
        ScriptedSampler::new(self.log.iter().map(|c| c.value()))
    }
}

impl<S: Sampler> Sampler for RecordingSampler<S> {
    fn sample_alt(&mut self, arity: usize, node: NodeId) -> usize {
        let index = self.inner.sample_alt(arity, node);
        self.log.push(Choice::Alt { node, arity, index });
        index
    }

    fn sample_rep(&mut self, lo: usize, hi: Option<usize>, node: NodeId) -> usize {
        let count = self.inner.sample_rep(lo, hi, node);
        self.log.push(Choice::Rep { node, count });
        count
    }

    fn effective_arity(&mut self, node: NodeId, arity: usize) {
        self.inner.effective_arity(node, arity);
    }

    fn sample_unit(&mut self) -> f64 {
        self.inner.sample_unit()
    }
}

/// A one-shot restriction on the next choice made at a node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Steer {
    /// Only these variants may be chosen.
    Variants(SmallVec<[usize; 4]>),
    /// At most this many repetitions.
    MaxCount(usize),
}

/// The continuation a generator calls to run default generation of its node.
pub type Expand<'e, 'c> = dyn FnMut(&mut GenCtx<'c>) -> Result<(), GenError> + 'e;

/// A pluggable override for the nodes it offers. A generator shapes the tree
/// by restricting choices ([`GenCtx::steer`], [`GenCtx::push_script`]) and
/// then calling `expand`; it may return [`GenError::Rejected`] to be retried.
pub trait Generator: fmt::Debug + Send + Sync {
    fn offers(&self, node: NodeId) -> bool;

    fn generate<'c>(
        &self,
        _node: NodeId,
        ctx: &mut GenCtx<'c>,
        expand: &mut Expand<'_, 'c>,
    ) -> Result<(), GenError> {
        expand(ctx)
    }

    /// A global bound on tree height, in nodes.
    fn depth_limit(&self) -> Option<usize> {
        None
    }
}

/// Generators in priority order, with the per-node routing precomputed.
#[derive(Debug)]
pub struct GeneratorList {
    generators: Vec<Box<dyn Generator>>,
    limit: Option<DepthTable>,
    /// Per-node routing and height data read on every generated node.
    gates: Vec<Gate>,
    /// `max_depth + 1` under a depth limit, otherwise unbounded.
    budget: usize,
    retry_budget: usize,
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Gate {
    /// Index of the generator that offers the node, or `NONE`.
    route: u32,
    /// Minimum height of the node, `NONE` if it has no finite derivation.
    height: u32,
    /// Tallest minimum height among the children, `NONE` if any is infinite.
    tallest: u32,
}

#[derive(Debug)]
struct DepthTable {
    max_depth: usize,
    heights: Vec<Option<usize>>,
    /// Heights of each node's children, by child index.
    child_heights: Vec<SmallVec<[Option<usize>; 4]>>,
    /// The tallest child height when every child has one.
    tallest_child: Vec<Option<usize>>,
}

impl GeneratorList {
    pub fn new(graph: &GrammarGraph, generators: Vec<Box<dyn Generator>>) -> Self {
        let route: Vec<u32> = graph
            .nodes()
            .map(|(id, _)| {
                generators
                    .iter()
                    .position(|g| g.offers(id))
                    .map_or(NONE, |i| i as u32)
            })
            .collect();
        let limit = generators
            .iter()
            .filter_map(|g| g.depth_limit())
            .min()
            .map(|max_depth| {
                let heights = graph.min_heights();
                let child_heights: Vec<SmallVec<[Option<usize>; 4]>> = graph
                    .nodes()
                    .map(|(id, _)| graph.children(id).map(|c| heights[c.index()]).collect())
                    .collect();
                let tallest_child = child_heights
                    .iter()
                    .map(|hs| hs.iter().try_fold(0, |m, h| h.map(|h| h.max(m))))
                    .collect();
                DepthTable {
                    max_depth,
                    heights,
                    child_heights,
                    tallest_child,
                }
            });
        let narrow = |h: Option<usize>| h.map_or(NONE, |h| h.min(NONE as usize - 1) as u32);
        let gates = route
            .iter()
            .enumerate()
            .map(|(i, &route)| match &limit {
                Some(l) => Gate {
                    route,
                    height: narrow(l.heights[i]),
                    tallest: narrow(l.tallest_child[i]),
                },
                None => Gate {
                    route,
                    height: 0,
                    tallest: 0,
                },
            })
            .collect();
        let budget = limit
            .as_ref()
            .map_or(usize::MAX, |l| l.max_depth.saturating_add(1));
        GeneratorList {
            generators,
            limit,
            gates,
            budget,
            retry_budget: DEFAULT_RETRY_BUDGET,
        }
    }

    /// No generators: plain default generation.
    pub fn empty(graph: &GrammarGraph) -> Self {
        Self::new(graph, Vec::new())
    }

    pub fn with_retry_budget(mut self, attempts: usize) -> Self {
        self.retry_budget = attempts.max(1);
        self
    }

    pub fn max_depth(&self) -> Option<usize> {
        self.limit.as_ref().map(|l| l.max_depth)
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }
}

/// State threaded through one generation run.
pub struct GenCtx<'a> {
    sampler: &'a mut dyn Sampler,
    generators: &'a GeneratorList,
    depth: usize,
    /// Pending alternation answers, last one on top.
    script: Vec<usize>,
    steer: Option<(NodeId, Steer)>,
}

impl<'a> GenCtx<'a> {
    pub fn new(sampler: &'a mut dyn Sampler, generators: &'a GeneratorList) -> Self {
        GenCtx {
            sampler,
            generators,
            depth: 0,
            script: Vec::new(),
            steer: None,
        }
    }

    /// Number of nodes above the next node to be generated.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn reset_depth(&mut self, depth: usize) {
        self.depth = depth;
        self.script.clear();
        self.steer = None;
    }

    pub fn sampler(&mut self) -> &mut dyn Sampler {
        &mut *self.sampler
    }

    /// Levels still available at the current depth, including the current node.
    pub fn remaining(&self) -> Option<usize> {
        self.generators
            .limit
            .as_ref()
            .map(|l| (l.max_depth + 1).saturating_sub(self.depth))
    }

    /// Minimum derivation height of `node`, if a depth limit is installed.
    pub fn min_height(&self, node: NodeId) -> Option<Option<usize>> {
        self.generators
            .limit
            .as_ref()
            .map(|l| l.heights[node.index()])
    }

    /// Queues alternation answers; they are consumed before anything else is
    /// asked and generators are bypassed while any remain.
    pub fn push_script(&mut self, answers: &[usize]) {
        self.script.extend(answers.iter().rev());
    }

    pub fn script_active(&self) -> bool {
        !self.script.is_empty()
    }

    /// Restricts the next choice made at `node`.
    pub fn steer(&mut self, node: NodeId, steer: Steer) {
        self.steer = Some((node, steer));
    }

    /// Generates one node: checks depth, routes to a generator if one offers
    /// the node, and otherwise runs `default`.
    #[inline]
    pub fn node<T>(
        &mut self,
        id: NodeId,
        mut default: impl FnMut(&mut GenCtx<'a>) -> Result<T, GenError>,
    ) -> Result<T, GenError> {
        self.depth += 1;
        let gate = self.generators.gates[id.index()];
        let remaining = self.generators.budget.saturating_sub(self.depth);
        let result = if gate.height as usize > remaining || self.depth > HARD_DEPTH_CAP {
            Err(self.depth_error(id))
        } else if gate.route != NONE && self.script.is_empty() {
            self.run_generator(gate.route as usize, id, &mut default)
        } else {
            default(self)
        };
        self.depth -= 1;
        result
    }

    #[cold]
    fn depth_error(&self, id: NodeId) -> GenError {
        let limit = match &self.generators.limit {
            Some(l) if self.depth <= HARD_DEPTH_CAP => l.max_depth,
            _ => HARD_DEPTH_CAP,
        };
        GenError::DepthExceeded { node: id, limit }
    }

    #[cold]
    fn run_generator<T>(
        &mut self,
        g: usize,
        id: NodeId,
        default: &mut impl FnMut(&mut GenCtx<'a>) -> Result<T, GenError>,
    ) -> Result<T, GenError> {
        let generators = self.generators;
        let generator = &generators.generators[g];
        let depth = self.depth;
        for _ in 0..generators.retry_budget {
            let mut out = None;
            let result = generator.generate(id, self, &mut |ctx| {
                out = Some(default(ctx)?);
                Ok(())
            });
            self.depth = depth;
            match (result, out) {
                (Ok(()), Some(value)) => return Ok(value),
                (Ok(()), None) | (Err(GenError::Rejected), _) => {
                    self.script.clear();
                    self.steer = None;
                }
                (Err(e), _) => return Err(e),
            }
        }
        Err(GenError::RetryExhausted {
            node: id,
            attempts: generators.retry_budget,
        })
    }

    /// Picks a variant of the alternation `id` with `arity` variants.
    #[inline]
    pub fn choose_alt(&mut self, id: NodeId, arity: usize) -> Result<usize, GenError> {
        if self.script.is_empty() && self.steer.is_none() {
            let remaining = self.generators.budget.saturating_sub(self.depth);
            if (self.generators.gates[id.index()].tallest as usize) < remaining {
                return Ok(self.sampler.sample_alt(arity, id));
            }
        }
        self.choose_alt_constrained(id, arity)
    }

    #[inline(never)]
    fn choose_alt_constrained(&mut self, id: NodeId, arity: usize) -> Result<usize, GenError> {
        if let Some(i) = self.script.pop() {
            return Ok(i.min(arity - 1));
        }
        let steer = match &self.steer {
            Some((n, _)) if *n == id => match self.steer.take() {
                Some((_, Steer::Variants(v))) => Some(v),
                _ => None,
            },
            _ => None,
        };
        let limit = self.generators.limit.as_ref();
        if steer.is_none() {
            let remaining = self.generators.budget.saturating_sub(self.depth);
            if (self.generators.gates[id.index()].tallest as usize) < remaining {
                return Ok(self.sampler.sample_alt(arity, id));
            }
        }
        let mut allowed: SmallVec<[usize; 16]> = match steer {
            Some(v) => v.into_iter().filter(|&i| i < arity).collect(),
            None => (0..arity).collect(),
        };
        if let Some(l) = limit {
            let remaining = (l.max_depth + 1).saturating_sub(self.depth);
            let heights = &l.child_heights[id.index()];
            allowed.retain(|i| matches!(heights[*i], Some(h) if h < remaining));
        }
        match allowed.len() {
            0 => Err(GenError::DepthExceeded {
                node: id,
                limit: limit.map_or(HARD_DEPTH_CAP, |l| l.max_depth),
            }),
            n if n == arity => Ok(self.sampler.sample_alt(arity, id)),
            n => Ok(allowed[self.sampler.sample_alt(n, id)]),
        }
    }

    /// Picks a repetition count for `id` within `[lo, hi)`.
    #[inline]
    pub fn choose_rep(
        &mut self,
        id: NodeId,
        lo: usize,
        hi: Option<usize>,
    ) -> Result<usize, GenError> {
        let mut hi = hi;
        if let Some((n, Steer::MaxCount(max))) = &self.steer {
            if *n == id {
                let bound = (max + 1).max(lo + 1);
                hi = Some(hi.map_or(bound, |h| h.min(bound)));
                self.steer = None;
            }
        }
        let remaining = self.generators.budget.saturating_sub(self.depth);
        if self.generators.gates[id.index()].tallest as usize >= remaining {
            hi = Some(lo + 1);
        }
        if hi == Some(lo + 1) {
            return Ok(lo);
        }
        Ok(self.sampler.sample_rep(lo, hi, id))
    }
}

/// Installs a bound on tree height. Alternations only pick variants with a
/// completion inside the bound and repetitions stay at their minimum when the
/// element cannot fit.
#[derive(Clone, Copy, Debug)]
pub struct DepthLimiter {
    max_depth: usize,
}

impl DepthLimiter {
    pub fn new(max_depth: usize) -> Self {
        DepthLimiter {
            max_depth: max_depth.max(1),
        }
    }
}

impl Generator for DepthLimiter {
    fn offers(&self, _node: NodeId) -> bool {
        false
    }

    fn depth_limit(&self) -> Option<usize> {
        Some(self.max_depth)
    }
}

/// Free-function form of [`DepthLimiter::new`].
pub fn depth_limiter(max_depth: usize) -> DepthLimiter {
    DepthLimiter::new(max_depth)
}

/// A precomputed sequence of alternation answers from a flattened node down
/// to the first node that is neither a head nor an alternation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChoiceStack {
    pub choices: Vec<usize>,
    pub leaf: NodeId,
    /// Height from the flattened node to the bottom of the leaf's shallowest
    /// completion; `None` if the leaf has no finite derivation.
    pub height: Option<usize>,
}

/// Makes every leaf reachable through chained alternations (across
/// references) equally likely.
#[derive(Clone, Debug)]
pub struct Flattener {
    node: NodeId,
    stacks: Vec<ChoiceStack>,
}

impl Flattener {
    pub fn new(graph: &GrammarGraph, node: NodeId) -> Result<Self, GenError> {
        let heights = graph.min_heights();
        let mut stacks = Vec::new();
        let mut on_path = vec![false; graph.len()];
        let mut choices = Vec::new();
        Self::walk(
            graph,
            &heights,
            node,
            1,
            &mut choices,
            &mut on_path,
            &mut stacks,
        )?;
        Ok(Flattener { node, stacks })
    }

    fn walk(
        graph: &GrammarGraph,
        heights: &[Option<usize>],
        id: NodeId,
        level: usize,
        choices: &mut Vec<usize>,
        on_path: &mut [bool],
        out: &mut Vec<ChoiceStack>,
    ) -> Result<(), GenError> {
        if on_path[id.index()] {
            return Err(GenError::CyclicAlternation(id));
        }
        on_path[id.index()] = true;
        match graph.def(id) {
            NodeDef::NonterminalHead(_) => Self::walk(
                graph,
                heights,
                graph.child(id, 0),
                level + 1,
                choices,
                on_path,
                out,
            )?,
            NodeDef::Alternation(arity) => {
                for i in 0..arity {
                    choices.push(i);
                    Self::walk(
                        graph,
                        heights,
                        graph.child(id, i),
                        level + 1,
                        choices,
                        on_path,
                        out,
                    )?;
                    choices.pop();
                }
            }
            _ => out.push(ChoiceStack {
                choices: choices.clone(),
                leaf: id,
                height: heights[id.index()].map(|h| h + level - 1),
            }),
        }
        on_path[id.index()] = false;
        Ok(())
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn stacks(&self) -> &[ChoiceStack] {
        &self.stacks
    }
}

impl Generator for Flattener {
    fn offers(&self, node: NodeId) -> bool {
        node == self.node
    }

    fn generate<'c>(
        &self,
        node: NodeId,
        ctx: &mut GenCtx<'c>,
        expand: &mut Expand<'_, 'c>,
    ) -> Result<(), GenError> {
        let stack = match ctx.remaining() {
            None => {
                ctx.sampler().effective_arity(node, self.stacks.len());
                &self.stacks[ctx.sampler().sample_alt(self.stacks.len(), node)]
            }
            Some(remaining) => {
                let feasible: SmallVec<[&ChoiceStack; 16]> = self
                    .stacks
                    .iter()
                    .filter(|s| matches!(s.height, Some(h) if h <= remaining))
                    .collect();
                if feasible.is_empty() {
                    return Err(GenError::DepthExceeded {
                        node,
                        limit: ctx.depth() + remaining - 1,
                    });
                }
                ctx.sampler().effective_arity(node, feasible.len());
                feasible[ctx.sampler().sample_alt(feasible.len(), node)]
            }
        };
        ctx.push_script(&stack.choices);
        expand(ctx)
    }
}

/// Free-function form of [`Flattener::new`].
pub fn flattener_for(graph: &GrammarGraph, node: NodeId) -> Result<Flattener, GenError> {
    Flattener::new(graph, node)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXPR: &str = r#"
<start> ::= <expr>
<expr> ::= <number> "+" <expr> | <number>
<number> ::= "0" | <non_zero> <digit>*
<non_zero> ::= "1" | "2" | "3" | "4" | "5" | "6" | "7" | "8" | "9"
<digit> ::= "0" | <non_zero>
"#;

    #[test]
    fn digit_flattener_has_ten_stacks() {
        let g = GrammarGraph::from_text(EXPR.as_bytes()).unwrap();
        let f = Flattener::new(&g, g.head("digit").unwrap()).unwrap();
        assert_eq!(f.stacks().len(), 10);
        assert_eq!(f.stacks()[0].choices, vec![0]);
        assert_eq!(f.stacks()[7].choices, vec![1, 6]);
        assert_eq!(g.def(f.stacks()[7].leaf), NodeDef::Terminal(b"7"));
        // digit -> alt -> non_zero -> alt -> terminal
        assert_eq!(f.stacks()[7].height, Some(5));
    }

    #[test]
    fn cyclic_alternation_is_rejected() {
        let g = GrammarGraph::from_text(b"<a> ::= <b> | \"x\"\n<b> ::= <a> | \"y\"").unwrap();
        assert!(matches!(
            Flattener::new(&g, g.head("a").unwrap()),
            Err(GenError::CyclicAlternation(_))
        ));
    }

    #[test]
    fn single_variant_flattener() {
        let g = GrammarGraph::from_text(b"<a> ::= \"x\" \"y\"").unwrap();
        let f = Flattener::new(&g, g.head("a").unwrap()).unwrap();
        assert_eq!(f.stacks().len(), 1);
        assert!(f.stacks()[0].choices.is_empty());
    }

    #[test]
    fn scripted_sampler_clamps() {
        let mut s = ScriptedSampler::new([5, 9, 0]);
        assert_eq!(s.sample_alt(3, NodeId(0)), 2);
        assert_eq!(s.sample_rep(1, Some(4), NodeId(0)), 3);
        assert_eq!(s.sample_rep(1, None, NodeId(0)), 1);
        assert_eq!(s.sample_alt(3, NodeId(0)), 0);
    }

    #[test]
    fn random_sampler_ranges() {
        let mut s = RandomSampler::new(3);
        for _ in 0..1000 {
            assert!(s.sample_alt(7, NodeId(0)) < 7);
            let n = s.sample_rep(2, Some(5), NodeId(0));
            assert!((2..5).contains(&n));
            let n = s.sample_rep(1, None, NodeId(0));
            assert!((1..=MAX_UNBOUNDED_REPETITIONS).contains(&n));
        }
    }

    #[test]
    fn random_sampler_is_deterministic() {
        let mut a = RandomSampler::new(42);
        let mut b = RandomSampler::new(42);
        let xs: Vec<_> = (0..100).map(|_| a.sample_alt(10, NodeId(0))).collect();
        let ys: Vec<_> = (0..100).map(|_| b.sample_alt(10, NodeId(0))).collect();
        assert_eq!(xs, ys);
    }
}
