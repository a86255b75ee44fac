//! Per-operation timing and per-node cost models.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::evolution::{check, crossover, Constraint, CrossoverOutcome};
use crate::generation::{depth_limiter, GenCtx, GenError, GeneratorList, RandomSampler, Sampler};
use crate::runtime::Backend;
use crate::visitors::{all_paths, count_symbol_nodes, count_symbol_nodes_at};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Generate,
    Check,
    Mutate,
    Crossover,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Generate, Op::Check, Op::Mutate, Op::Crossover];

    pub fn predictor_names(self) -> &'static [&'static str] {
        match self {
            Op::Generate | Op::Check => &["n"],
            Op::Mutate => &["n", "m"],
            Op::Crossover => &["n1", "n2", "m1", "m2"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::Generate => "generate",
            Op::Check => "check",
            Op::Mutate => "mutate",
            Op::Crossover => "crossover",
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown operation {0:?} (expected generate, check, mutate or crossover)")]
pub struct UnknownOp(pub String);

impl FromStr for Op {
    type Err = UnknownOp;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Op::ALL
            .into_iter()
            .find(|o| o.name() == s.trim())
            .ok_or_else(|| UnknownOp(s.to_string()))
    }
}

/// One timed call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub op: Op,
    pub predictors: Vec<f64>,
    pub ns: u64,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub ops: Vec<Op>,
    /// Total wall time, split evenly across `ops`.
    pub budget: Duration,
    pub seed: u64,
    /// Depth limit of the workload generator.
    pub max_depth: usize,
    /// Trees generated up front for check, mutate and crossover.
    pub pool_size: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            ops: Op::ALL.to_vec(),
            budget: Duration::from_secs(30),
            seed: 0,
            max_depth: 24,
            pool_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("budget must be positive")]
    ZeroBudget,
    #[error("workload generation failed: {0}")]
    Generation(#[from] GenError),
}

/// Median cost of reading the clock twice with nothing in between.
fn clock_overhead() -> u64 {
    let mut v: Vec<u64> = (0..10_000)
        .map(|_| {
            let t0 = Instant::now();
            t0.elapsed().as_nanos() as u64
        })
        .collect();
    v.sort_unstable();
    v[v.len() / 2]
}

/// Times the requested operations on `backend`. Recorded times have the
/// clock's own overhead subtracted. The first 1% of each
/// operation's share of the budget is warmup and is not recorded.
pub fn run_bench<B: Backend>(
    backend: &B,
    constraints: &[Box<dyn Constraint<B>>],
    config: &BenchConfig,
) -> Result<Vec<Sample>, BenchError> {
    if config.budget.is_zero() {
        return Err(BenchError::ZeroBudget);
    }
    let graph = backend.graph();
    let generators = GeneratorList::new(graph, vec![Box::new(depth_limiter(config.max_depth))]);
    let mut sampler = RandomSampler::new(config.seed);
    let mut pool = Vec::with_capacity(config.pool_size.max(2));
    while pool.len() < config.pool_size.max(2) {
        let mut ctx = GenCtx::new(&mut sampler, &generators);
        pool.push(backend.generate_root(&mut ctx)?);
    }
    let overhead = clock_overhead();
    let slice = config.budget / config.ops.len().max(1) as u32;
    let warmup = slice / 100;
    let mut out = Vec::new();
    for &op in &config.ops {
        let start = Instant::now();
        let mut k = 0usize;
        while start.elapsed() < slice {
            let recorded = start.elapsed() >= warmup;
            let sample = match op {
                Op::Generate => {
                    let mut ctx = GenCtx::new(&mut sampler, &generators);
                    let t0 = Instant::now();
                    let r = backend.generate_root(&mut ctx);
                    let ns = (t0.elapsed().as_nanos() as u64).saturating_sub(overhead);
                    r.ok().map(|t| Sample {
                        op,
                        predictors: vec![count_symbol_nodes(backend.root(&t)) as f64],
                        ns,
                    })
                }
                Op::Check => {
                    let t = &pool[k % pool.len()];
                    let t0 = Instant::now();
                    let r = check(backend, t, constraints);
                    let ns = (t0.elapsed().as_nanos() as u64).saturating_sub(overhead);
                    drop(r);
                    Some(Sample {
                        op,
                        predictors: vec![count_symbol_nodes(backend.root(t)) as f64],
                        ns,
                    })
                }
                Op::Mutate => {
                    let mut t = pool[k % pool.len()].clone();
                    let n = count_symbol_nodes(backend.root(&t));
                    let paths = all_paths(backend.root(&t));
                    let path = &paths[sampler.sample_alt(paths.len(), crate::graph::NodeId(0))];
                    let mut ctx = GenCtx::new(&mut sampler, &generators);
                    let t0 = Instant::now();
                    let r = backend.regenerate_at(&mut t, path, &mut ctx);
                    let ns = (t0.elapsed().as_nanos() as u64).saturating_sub(overhead);
                    r.ok().map(|_| {
                        let m = count_symbol_nodes_at(backend.root(&t), path).unwrap_or(0);
                        Sample {
                            op,
                            predictors: vec![n as f64, m as f64],
                            ns,
                        }
                    })
                }
                Op::Crossover => {
                    let i = k % pool.len();
                    let j = sampler.sample_alt(pool.len(), crate::graph::NodeId(0));
                    let mut a = pool[i].clone();
                    let mut b = pool[j].clone();
                    let n1 = count_symbol_nodes(backend.root(&a));
                    let n2 = count_symbol_nodes(backend.root(&b));
                    let paths = all_paths(backend.root(&a));
                    let p1 = &paths[sampler.sample_alt(paths.len(), crate::graph::NodeId(0))];
                    let m1 = count_symbol_nodes_at(backend.root(&a), p1).unwrap_or(0);
                    let t0 = Instant::now();
                    let r = crossover(backend, &mut a, p1, &mut b, &mut sampler);
                    let ns = (t0.elapsed().as_nanos() as u64).saturating_sub(overhead);
                    match r {
                        Ok(CrossoverOutcome::Swapped { .. }) => {
                            let m2 = count_symbol_nodes_at(backend.root(&a), p1).unwrap_or(0);
                            Some(Sample {
                                op,
                                predictors: vec![n1 as f64, n2 as f64, m1 as f64, m2 as f64],
                                ns,
                            })
                        }
                        _ => None,
                    }
                }
            };
            k += 1;
            if recorded {
                out.extend(sample);
            }
        }
    }
    Ok(out)
}

/// Per-operation linear cost model without intercept.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostModel {
    pub op: Op,
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub samples: usize,
    /// Samples dropped as outliers before fitting.
    pub discarded: usize,
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coefficients
            .iter()
            .zip(self.op.predictor_names())
            .map(|(c, n)| format!("{c:.2}{n}"))
            .collect();
        write!(f, "{}", terms.join(" + ").replace("+ -", "- "))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("no samples")]
    Empty,
    #[error("samples mix operations or predictor counts")]
    Inconsistent,
    #[error("{have} samples for {coefficients} coefficients; need at least {need}")]
    InsufficientSamples {
        have: usize,
        need: usize,
        coefficients: usize,
    },
    #[error("predictors are collinear or constant; mean time per node is {mean_per_node:.3} ns")]
    SingularDesign { mean_per_node: f64 },
}

/// Samples slower than this multiple of the median time per node are
/// treated as interrupted (preemption, page faults) and left out of the fit.
pub const OUTLIER_FACTOR: f64 = 20.0;

fn trim_outliers(samples: &[Sample]) -> Vec<&Sample> {
    let rate = |s: &Sample| s.ns as f64 / s.predictors.iter().sum::<f64>().max(1.0);
    let mut rates: Vec<f64> = samples.iter().map(rate).collect();
    rates.sort_by(f64::total_cmp);
    let median = rates[rates.len() / 2];
    if median <= 0.0 {
        return samples.iter().collect();
    }
    samples
        .iter()
        .filter(|s| rate(s) <= median * OUTLIER_FACTOR)
        .collect()
}

/// Ordinary least squares of `ns` on the predictors, no intercept, after
/// dropping samples more than [`OUTLIER_FACTOR`] times slower per node than
/// the median.
pub fn fit_model(samples: &[Sample]) -> Result<CostModel, FitError> {
    let first = samples.first().ok_or(FitError::Empty)?;
    let p = first.predictors.len();
    if p == 0
        || samples
            .iter()
            .any(|s| s.op != first.op || s.predictors.len() != p)
    {
        return Err(FitError::Inconsistent);
    }
    let need = 10 * p;
    if samples.len() < need {
        return Err(FitError::InsufficientSamples {
            have: samples.len(),
            need,
            coefficients: p,
        });
    }
    let kept = trim_outliers(samples);
    let discarded = samples.len() - kept.len();
    let samples = &kept[..];
    let n = samples.len();
    let x = DMatrix::from_fn(n, p, |r, c| samples[r].predictors[c]);
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.ns as f64));

    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax <= 0.0 || smin <= smax * 1e-10 {
        let per: Vec<f64> = samples
            .iter()
            .filter_map(|s| {
                let total: f64 = s.predictors.iter().sum();
                (total > 0.0).then(|| s.ns as f64 / total)
            })
            .collect();
        let mean_per_node = if per.is_empty() {
            0.0
        } else {
            per.iter().sum::<f64>() / per.len() as f64
        };
        return Err(FitError::SingularDesign { mean_per_node });
    }
    let beta = svd.solve(&y, 0.0).expect("svd has both factors");
    let resid = &y - &x * &beta;
    let ss_res = resid.norm_squared();
    let mean = y.mean();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= f64::EPSILON * y.norm_squared().max(1.0) {
        1.0
    } else {
        0.0
    };
    Ok(CostModel {
        op: first.op,
        coefficients: beta.iter().copied().collect(),
        r_squared,
        samples: n,
        discarded,
    })
}

/// Fits every operation present in `samples`, in [`Op::ALL`] order.
pub fn fit_all(samples: &[Sample]) -> Vec<(Op, Result<CostModel, FitError>)> {
    Op::ALL
        .into_iter()
        .filter_map(|op| {
            let mine: Vec<Sample> = samples.iter().filter(|s| s.op == op).cloned().collect();
            (!mine.is_empty()).then(|| (op, fit_model(&mine)))
        })
        .collect()
}

/// A table with one row per operation: the fitted per-node cost in
/// nanoseconds, R² and sample count.
pub fn report(title: &str, samples: &[Sample]) -> String {
    let mut out = format!(
        "{title}\n{:<10} {:<44} {:>7} {:>9}\n",
        "operation", "time (ns)", "R²", "samples"
    );
    for (op, fit) in fit_all(samples) {
        match fit {
            Ok(m) => out.push_str(&format!(
                "{:<10} {:<44} {:>7.3} {:>9}\n",
                op,
                m.to_string(),
                m.r_squared,
                m.samples
            )),
            Err(e) => out.push_str(&format!("{op:<10} {e}\n")),
        }
    }
    out
}
