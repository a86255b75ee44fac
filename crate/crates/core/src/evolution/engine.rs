use std::time::{Duration, Instant};

use serde::Serialize;

use super::sort::{
    crowding_distance, nondominated_sort, CrowdingDistance, DimensionMismatch, Niching,
};
use super::{check, crossover, mutate, CheckError, Constraint, CrossoverOutcome};
use crate::generation::{GenCtx, GenError, GeneratorList, RandomSampler, Sampler};
use crate::runtime::{Backend, NodePath};
use crate::visitors::{all_paths, tree_height};

/// Attempts at generating one initial member before giving up.
const INIT_ATTEMPTS: usize = 16;
/// Paths tried per mutation before the candidate is dropped.
const MUTATION_ATTEMPTS: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvolutionError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("initial population: {0}")]
    Generation(#[from] GenError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

#[derive(Clone, Debug)]
pub struct GaParams {
    pub population: usize,
    pub elites: usize,
    pub candidates: usize,
    pub iterations: usize,
    /// Probability that a candidate comes from crossover rather than mutation.
    pub crossover_rate: f64,
    pub time_budget: Option<Duration>,
    /// Worker threads for constraint evaluation; 1 keeps everything on the caller's thread.
    pub jobs: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population: 100,
            elites: 10,
            candidates: 200,
            iterations: 500,
            crossover_rate: 0.7,
            time_budget: None,
            jobs: 1,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |m: String| Err(EvolutionError::InvalidParams(m));
        if self.population == 0 {
            return bad("population must be positive".into());
        }
        if self.elites > self.population {
            return bad(format!(
                "elites {} exceed population {}",
                self.elites, self.population
            ));
        }
        if self.candidates < self.population - self.elites {
            return bad(format!(
                "candidates {} fewer than population minus elites {}",
                self.candidates,
                self.population - self.elites
            ));
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return bad(format!(
                "crossover rate {} outside [0, 1]",
                self.crossover_rate
            ));
        }
        Ok(())
    }
}

/// What the search runs over.
pub struct Problem<'a, B: Backend> {
    pub backend: &'a B,
    pub constraints: &'a [Box<dyn Constraint<B>>],
    pub generators: &'a GeneratorList,
}

/// An evaluated individual.
#[derive(Clone, Debug)]
pub struct Member<T> {
    pub tree: T,
    pub scores: Vec<f64>,
    pub violations: Vec<Vec<NodePath>>,
    /// Sum of scores.
    pub fitness: f64,
}

impl<T> Member<T> {
    pub fn satisfied(&self) -> bool {
        self.scores.iter().all(|&s| s >= 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub front_sizes: Vec<usize>,
    pub satisfied: usize,
    pub elapsed_ms: f64,
}

impl GenerationStats {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("stats serialize")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    AllSatisfied,
    Iterations,
    TimeBudget,
}

#[derive(Clone, Debug)]
pub struct Outcome<T> {
    pub population: Vec<Member<T>>,
    pub stats: Vec<GenerationStats>,
    pub stop: StopReason,
}

impl<T> Outcome<T> {
    pub fn generations(&self) -> usize {
        self.stats.len()
    }

    pub fn satisfying(&self) -> impl Iterator<Item = &Member<T>> {
        self.population.iter().filter(|m| m.satisfied())
    }
}

struct Evaluator {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Evaluator {
    fn new(jobs: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            let pool = (jobs > 1).then(|| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build()
                    .expect("thread pool")
            });
            Evaluator { pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = jobs;
            Evaluator {}
        }
    }

    fn evaluate<B: Backend>(
        &self,
        problem: &Problem<'_, B>,
        trees: Vec<B::Tree>,
    ) -> Result<Vec<Member<B::Tree>>, CheckError> {
        let one = |tree: B::Tree| {
            let r = check(problem.backend, &tree, problem.constraints)?;
            let fitness = r.fitness();
            Ok(Member {
                tree,
                scores: r.scores,
                violations: r.violations,
                fitness,
            })
        };
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| trees.into_par_iter().map(one).collect());
        }
        trees.into_iter().map(one).collect()
    }
}

/// Selection preference: lower rank first, then larger `spread`, then lower index.
struct Preference {
    rank: Vec<usize>,
    spread: Vec<f64>,
}

impl Preference {
    fn better(&self, a: usize, b: usize) -> usize {
        let key = |i: usize| (self.rank[i], -self.spread[i]);
        let (ka, kb) = (key(a), key(b));
        if ka.0 < kb.0 || (ka.0 == kb.0 && ka.1 < kb.1) || (ka == kb && a <= b) {
            a
        } else {
            b
        }
    }

    fn by_fitness<T>(pop: &[Member<T>]) -> Self {
        Preference {
            rank: vec![0; pop.len()],
            spread: pop.iter().map(|m| m.fitness).collect(),
        }
    }

    fn by_fronts<T>(pop: &[Member<T>]) -> Result<Self, DimensionMismatch> {
        let scores: Vec<Vec<f64>> = pop.iter().map(|m| m.scores.clone()).collect();
        let mut rank = vec![0; pop.len()];
        let mut spread = vec![0.0; pop.len()];
        for (r, front) in nondominated_sort(&scores)?.iter().enumerate() {
            for (&i, d) in front.iter().zip(crowding_distance(front, &scores)) {
                rank[i] = r;
                spread[i] = d;
            }
        }
        Ok(Preference { rank, spread })
    }
}

struct Run<'p, 'a, B: Backend, O> {
    problem: &'p Problem<'a, B>,
    params: &'p GaParams,
    sampler: RandomSampler,
    evaluator: Evaluator,
    observer: O,
    stats: Vec<GenerationStats>,
    start: Instant,
}

impl<'p, 'a, B, O> Run<'p, 'a, B, O>
where
    B: Backend,
    O: FnMut(&GenerationStats, &[Member<B::Tree>]),
{
    fn new(
        problem: &'p Problem<'a, B>,
        params: &'p GaParams,
        seed: u64,
        observer: O,
    ) -> Result<Self, EvolutionError> {
        params.validate()?;
        Ok(Run {
            problem,
            params,
            sampler: RandomSampler::new(seed),
            evaluator: Evaluator::new(params.jobs),
            observer,
            stats: Vec::new(),
            start: Instant::now(),
        })
    }

    fn initial(&mut self) -> Result<Vec<Member<B::Tree>>, EvolutionError> {
        let mut trees = Vec::with_capacity(self.params.population);
        for _ in 0..self.params.population {
            let mut last = None;
            for _ in 0..INIT_ATTEMPTS {
                let mut ctx = GenCtx::new(&mut self.sampler, self.problem.generators);
                match self.problem.backend.generate_root(&mut ctx) {
                    Ok(t) => {
                        last = None;
                        trees.push(t);
                        break;
                    }
                    Err(e) => last = Some(e),
                }
            }
            if let Some(e) = last {
                return Err(e.into());
            }
        }
        Ok(self.evaluator.evaluate(self.problem, trees)?)
    }

    /// Records stats for `pop` and reports whether the loop should stop.
    fn record(&mut self, pop: &[Member<B::Tree>]) -> Result<Option<StopReason>, EvolutionError> {
        let scores: Vec<Vec<f64>> = pop.iter().map(|m| m.scores.clone()).collect();
        let front_sizes = nondominated_sort(&scores)?.iter().map(Vec::len).collect();
        let satisfied = pop.iter().filter(|m| m.satisfied()).count();
        let s = GenerationStats {
            generation: self.stats.len() + 1,
            best_fitness: pop
                .iter()
                .map(|m| m.fitness)
                .fold(f64::NEG_INFINITY, f64::max),
            mean_fitness: pop.iter().map(|m| m.fitness).sum::<f64>() / pop.len() as f64,
            front_sizes,
            satisfied,
            elapsed_ms: self.start.elapsed().as_secs_f64() * 1e3,
        };
        (self.observer)(&s, pop);
        self.stats.push(s);
        Ok(if satisfied == pop.len() {
            Some(StopReason::AllSatisfied)
        } else if self.stats.len() >= self.params.iterations {
            Some(StopReason::Iterations)
        } else if self
            .params
            .time_budget
            .is_some_and(|b| self.start.elapsed() >= b)
        {
            Some(StopReason::TimeBudget)
        } else {
            None
        })
    }

    fn tournament(&mut self, pref: &Preference) -> usize {
        let n = pref.rank.len();
        let a = self.sampler.sample_alt(n, crate::graph::NodeId(0));
        let b = self.sampler.sample_alt(n, crate::graph::NodeId(0));
        pref.better(a, b)
    }

    fn pick(&mut self, paths: &[NodePath]) -> NodePath {
        paths[self
            .sampler
            .sample_alt(paths.len(), crate::graph::NodeId(0))]
        .clone()
    }

    /// Produces up to `c` new trees by crossover and mutation. Unmodified
    /// parents never enter the pool.
    fn breed(&mut self, pop: &[Member<B::Tree>], pref: &Preference) -> Vec<B::Tree> {
        let backend = self.problem.backend;
        let want = self.params.candidates;
        let limit = self.problem.generators.max_depth();
        let mut out = Vec::with_capacity(want + 1);
        let mut stalls = 0;
        while out.len() < want && stalls < want.max(16) * 4 {
            let before = out.len();
            if self.sampler.sample_unit() < self.params.crossover_rate {
                let i = self.tournament(pref);
                let j = self.tournament(pref);
                let mut a = pop[i].tree.clone();
                let mut b = pop[j].tree.clone();
                let mut paths = all_paths(backend.root(&a));
                if paths.len() > 1 {
                    paths.remove(0);
                }
                let p1 = self.pick(&paths);
                let swapped = matches!(
                    crossover(backend, &mut a, &p1, &mut b, &mut self.sampler),
                    Ok(CrossoverOutcome::Swapped { .. })
                );
                // offspring taller than the depth limit are dropped, so trees cannot grow without bound
                let fits = |t: &B::Tree| limit.is_none_or(|d| tree_height(backend.root(t)) <= d);
                let (keep_a, keep_b) = (swapped && fits(&a), swapped && fits(&b));
                if keep_a {
                    out.push(a);
                }
                if keep_b && out.len() < want {
                    out.push(b);
                }
                if !(keep_a || keep_b) {
                    if let Some(t) = self.mutant(&pop[i]) {
                        out.push(t);
                    }
                }
            } else {
                let i = self.tournament(pref);
                if let Some(t) = self.mutant(&pop[i]) {
                    out.push(t);
                }
            }
            if out.len() == before {
                stalls += 1;
            }
        }
        out
    }

    fn mutant(&mut self, parent: &Member<B::Tree>) -> Option<B::Tree> {
        let backend = self.problem.backend;
        let mut targets: Vec<NodePath> = parent.violations.iter().flatten().cloned().collect();
        targets.sort();
        targets.dedup();
        if targets.is_empty() {
            targets = all_paths(backend.root(&parent.tree));
        }
        for _ in 0..MUTATION_ATTEMPTS {
            let path = self.pick(&targets);
            let mut tree = parent.tree.clone();
            let mut ctx = GenCtx::new(&mut self.sampler, self.problem.generators);
            if mutate(backend, &mut tree, &path, &mut ctx).is_ok() {
                return Some(tree);
            }
        }
        None
    }
}

/// Indices of the `p` best members in descending fitness, ties by index.
fn top_by_fitness<T>(pop: &[Member<T>], p: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| pop[b].fitness.total_cmp(&pop[a].fitness).then(a.cmp(&b)));
    order.truncate(p);
    order
}

fn take<T>(pool: Vec<Member<T>>, picks: &[usize]) -> Vec<Member<T>> {
    let mut slots: Vec<Option<Member<T>>> = pool.into_iter().map(Some).collect();
    picks
        .iter()
        .map(|&i| slots[i].take().expect("index picked once"))
        .collect()
}

/// Single-objective search: fitness is the sum of scores, the top `e`
/// members survive unchanged and the rest of the next population are the
/// best `p - e` candidates.
pub fn elitist_ga<B, O>(
    problem: &Problem<'_, B>,
    params: &GaParams,
    seed: u64,
    observer: O,
) -> Result<Outcome<B::Tree>, EvolutionError>
where
    B: Backend,
    O: FnMut(&GenerationStats, &[Member<B::Tree>]),
{
    let mut run = Run::new(problem, params, seed, observer)?;
    let mut pop = run.initial()?;
    loop {
        if let Some(stop) = run.record(&pop)? {
            return Ok(Outcome {
                population: pop,
                stats: run.stats,
                stop,
            });
        }
        let pref = Preference::by_fitness(&pop);
        let children = run.breed(&pop, &pref);
        let candidates = run.evaluator.evaluate(problem, children)?;

        let elites = top_by_fitness(&pop, params.elites);
        let cand_order = top_by_fitness(&candidates, params.population - params.elites);
        let fill = params.population - elites.len() - cand_order.len();
        let mut rest: Vec<usize> = Vec::new();
        if fill > 0 {
            // too few viable candidates: top up with the best remaining parents
            rest = top_by_fitness(&pop, pop.len())
                .into_iter()
                .filter(|i| !elites.contains(i))
                .take(fill)
                .collect();
        }
        let mut old: Vec<usize> = elites;
        old.extend(rest);
        let mut next = take(pop, &old);
        next.extend(take(candidates, &cand_order));
        pop = next;
    }
}

/// Environmental selection: fronts in order until the next would overflow,
/// then the niching order of that front. Indices in the order taken.
pub fn nsga2_select(
    scores: &[Vec<f64>],
    p: usize,
    niching: &dyn Niching,
) -> Result<Vec<usize>, DimensionMismatch> {
    let mut out = Vec::with_capacity(p);
    for front in nondominated_sort(scores)? {
        if out.len() + front.len() <= p {
            out.extend(front);
        } else {
            let room = p - out.len();
            out.extend(niching.rank(&front, scores).into_iter().take(room));
        }
        if out.len() == p {
            break;
        }
    }
    Ok(out)
}

/// Multi-objective search: parents and candidates compete together and the
/// next population is filled front by front.
pub fn nsga2<B, O>(
    problem: &Problem<'_, B>,
    params: &GaParams,
    seed: u64,
    niching: Option<&dyn Niching>,
    observer: O,
) -> Result<Outcome<B::Tree>, EvolutionError>
where
    B: Backend,
    O: FnMut(&GenerationStats, &[Member<B::Tree>]),
{
    let niching = niching.unwrap_or(&CrowdingDistance);
    let mut run = Run::new(problem, params, seed, observer)?;
    let mut pop = run.initial()?;
    loop {
        if let Some(stop) = run.record(&pop)? {
            return Ok(Outcome {
                population: pop,
                stats: run.stats,
                stop,
            });
        }
        let pref = Preference::by_fronts(&pop)?;
        let children = run.breed(&pop, &pref);
        let candidates = run.evaluator.evaluate(problem, children)?;
        pop.extend(candidates);
        let scores: Vec<Vec<f64>> = pop.iter().map(|m| m.scores.clone()).collect();
        let picks = nsga2_select(&scores, params.population, niching)?;
        pop = take(pop, &picks);
    }
}
