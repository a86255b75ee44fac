//! Constraints over derivation trees and the evolutionary search that
//! satisfies them.

mod builtin;
mod engine;
mod sort;
mod spec;

use crate::generation::GenCtx;
use crate::generation::Sampler;
use crate::runtime::{resolve, Backend, NodePath, NodeView, PathError, TreeError};
use crate::visitors::find_same_type_subtrees;

pub use builtin::{
    boolean_score, cardinality_eq_k, cardinality_equal, count_bound, node_goal, scoped_counts,
    CardinalityEqK, CardinalityEqual, CountBound, NodeGoal, Selector,
};
pub use engine::{
    elitist_ga, nsga2, nsga2_select, EvolutionError, GaParams, GenerationStats, Member, Outcome,
    Problem, StopReason,
};
pub use sort::{
    brute_force_fronts, crowding_distance, dominates, nondominated_sort, CrowdingDistance,
    DimensionMismatch, Niching,
};
pub use spec::{ConstraintFactory, ConstraintRegistry, ConstraintSpec, ConstraintSpecFile};

/// Result of evaluating one constraint on one tree.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// Degree of satisfaction in `[0, 1]`; 1 means satisfied.
    pub score: f64,
    /// Paths of the nodes responsible for any shortfall.
    pub violations: Vec<NodePath>,
}

impl Evaluation {
    pub fn satisfied() -> Self {
        Evaluation {
            score: 1.0,
            violations: Vec::new(),
        }
    }

    pub fn is_satisfied(&self) -> bool {
        self.score >= 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstraintError {
    #[error("unknown selector {0:?}")]
    UnknownSelector(String),
    #[error("unknown constraint kind {0:?}")]
    UnknownKind(String),
    #[error("constraint {kind} needs parameter {param}")]
    MissingParameter { kind: String, param: &'static str },
    #[error("{0}")]
    Invalid(String),
}

/// A pure evaluation over a tree.
pub trait Constraint<B: Backend>: Send + Sync {
    fn name(&self) -> &str;

    fn evaluate(&self, backend: &B, tree: &B::Tree) -> Result<Evaluation, ConstraintError>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("constraint {index} ({name}) failed: {source}")]
pub struct CheckError {
    pub index: usize,
    pub name: String,
    pub source: ConstraintError,
}

/// Scores and violations of every constraint, in constraint order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckResult {
    pub scores: Vec<f64>,
    pub violations: Vec<Vec<NodePath>>,
}

impl CheckResult {
    pub fn fitness(&self) -> f64 {
        self.scores.iter().sum()
    }

    pub fn all_satisfied(&self) -> bool {
        self.scores.iter().all(|&s| s >= 1.0)
    }
}

/// Evaluates each constraint independently.
pub fn check<B: Backend>(
    backend: &B,
    tree: &B::Tree,
    constraints: &[Box<dyn Constraint<B>>],
) -> Result<CheckResult, CheckError> {
    let mut out = CheckResult {
        scores: Vec::with_capacity(constraints.len()),
        violations: Vec::with_capacity(constraints.len()),
    };
    for (index, c) in constraints.iter().enumerate() {
        let e = c.evaluate(backend, tree).map_err(|source| CheckError {
            index,
            name: c.name().to_string(),
            source,
        })?;
        debug_assert!(
            (0.0..=1.0).contains(&e.score),
            "score out of range from {}",
            c.name()
        );
        out.scores.push(e.score);
        out.violations.push(e.violations);
    }
    Ok(out)
}

/// Replaces the subtree at `path` with a freshly generated one of the same type.
pub fn mutate<B: Backend>(
    backend: &B,
    tree: &mut B::Tree,
    path: &NodePath,
    ctx: &mut GenCtx<'_>,
) -> Result<(), TreeError> {
    backend.regenerate_at(tree, path, ctx)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CrossoverOutcome {
    /// The subtrees at `path1` in the first parent and `path2` in the second were exchanged.
    Swapped { path2: NodePath },
    /// The second parent has no node of the required type; nothing changed.
    NoCandidate,
}

/// Swaps the subtree at `path1` in `parent1` with a uniformly chosen subtree
/// of the same type in `parent2`. Both parents become the children.
pub fn crossover<B: Backend>(
    backend: &B,
    parent1: &mut B::Tree,
    path1: &NodePath,
    parent2: &mut B::Tree,
    sampler: &mut dyn Sampler,
) -> Result<CrossoverOutcome, PathError> {
    let id = resolve(backend.root(parent1), path1)?.node_id();
    let candidates = find_same_type_subtrees(backend.root(parent2), id);
    if candidates.is_empty() {
        return Ok(CrossoverOutcome::NoCandidate);
    }
    let path2 = candidates[sampler.sample_alt(candidates.len(), id)].clone();
    let swapped = backend.swap_subtrees(parent1, path1, parent2, &path2)?;
    debug_assert!(swapped, "candidates have the same type");
    Ok(CrossoverOutcome::Swapped { path2 })
}
