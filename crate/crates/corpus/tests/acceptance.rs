//! End-to-end acceptance checks. Runs sequentially and prints one line per
//! criterion; pass criterion numbers as arguments to run a subset.

use std::collections::HashSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use treeforge::bench::{fit_all, fit_model, run_bench, BenchConfig, Op, Sample};
use treeforge::coverage::kpath_cover;
use treeforge::dynamic::DynamicBackend;
use treeforge::evolution::{
    elitist_ga, node_goal, nondominated_sort, nsga2, GaParams, Problem, StopReason,
};
use treeforge::generation::{depth_limiter, flattener_for, GenCtx, GeneratorList, RandomSampler};
use treeforge::graph::{GrammarGraph, NodeId};
use treeforge::parser::EarleyParser;
use treeforge::runtime::{Backend, NodePath, NodeView};
use treeforge::visitors::{all_paths, resolve_path, serialize};
use treeforge_corpus::constraints::{scope_report, C_KEYWORDS};
use treeforge_corpus::{csv, expr, minic, xml, BackendTask, Entry, CSV, EXPR, MINIC, XML};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn workload_depth(entry: Entry) -> usize {
    match entry.name {
        "csv" => 40,
        "minic" => 30,
        _ => 20,
    }
}

fn outputs<B: Backend>(
    b: &B,
    gens: &GeneratorList,
    seeds: std::ops::Range<u64>,
) -> Vec<Result<Vec<u8>, String>> {
    seeds
        .map(|seed| {
            let mut s = RandomSampler::new(seed);
            b.generate_root(&mut GenCtx::new(&mut s, gens))
                .map(|t| serialize(b.root(&t)))
                .map_err(|e| e.to_string())
        })
        .collect()
}

// 1

#[derive(Clone)]
struct Differential(Entry);

impl BackendTask for Differential {
    type Output = (usize, usize);

    fn run<B: Backend + 'static>(self, stat: &B) -> (usize, usize) {
        let dynamic = DynamicBackend::new(self.0.graph());
        let gens = GeneratorList::new(
            dynamic.graph(),
            vec![Box::new(depth_limiter(workload_depth(self.0)))],
        );
        let a = outputs(stat, &gens, 0..10_000);
        let b = outputs(&dynamic, &gens, 0..10_000);
        (a.iter().zip(&b).filter(|(x, y)| x != y).count(), a.len())
    }
}

fn differential() -> Verdict {
    let mut mismatches = 0;
    let mut total = 0;
    let mut parts = Vec::new();
    for entry in [EXPR, CSV, XML, MINIC] {
        let (bad, n) = match entry.name {
            "expr" => Differential(entry).run(&expr::Grammar::new()),
            "csv" => Differential(entry).run(&csv::Grammar::new()),
            "xml" => Differential(entry).run(&xml::Grammar::new()),
            _ => Differential(entry).run(&minic::Grammar::new()),
        };
        mismatches += bad;
        total += n;
        parts.push(format!("{} {bad}", entry.name));
    }
    verdict(
        mismatches == 0,
        format!("{total} seeds, mismatches: {}", parts.join(", ")),
    )
}

// 2

struct Coefficients {
    generate_n: f64,
    mutate_n: f64,
    mutate_m: f64,
}

fn coefficients<B: Backend>(b: &B) -> Result<Coefficients, String> {
    let config = BenchConfig {
        ops: vec![Op::Generate, Op::Mutate],
        budget: Duration::from_secs(60),
        ..Default::default()
    };
    let samples = run_bench(b, &[], &config).map_err(|e| e.to_string())?;
    let mut c = Coefficients {
        generate_n: f64::NAN,
        mutate_n: f64::NAN,
        mutate_m: f64::NAN,
    };
    for (op, fit) in fit_all(&samples) {
        let m = fit.map_err(|e| format!("{op}: {e}"))?;
        match op {
            Op::Generate => c.generate_n = m.coefficients[0],
            Op::Mutate => (c.mutate_n, c.mutate_m) = (m.coefficients[0], m.coefficients[1]),
            _ => {}
        }
    }
    Ok(c)
}

fn static_speed() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    let runs: [(&str, fn() -> Result<(Coefficients, Coefficients), String>); 2] = [
        ("csv", || {
            Ok((
                coefficients(&csv::Grammar::new())?,
                coefficients(&DynamicBackend::new(CSV.graph()))?,
            ))
        }),
        ("expr", || {
            Ok((
                coefficients(&expr::Grammar::new())?,
                coefficients(&DynamicBackend::new(EXPR.graph()))?,
            ))
        }),
    ];
    for (name, run) in runs {
        match run() {
            Ok((s, d)) => {
                let gen = s.generate_n / d.generate_n;
                let mm = s.mutate_m / d.mutate_m;
                let mn = s.mutate_n / d.mutate_n;
                pass &= gen <= 0.5 && mm <= 0.5;
                parts.push(format!(
                    "{name}: generate n {:.2}/{:.2} = {gen:.2}, mutate m {:.2}/{:.2} = {mm:.2} (mutate n {:.2}/{:.2} = {mn:.2}, not gated)",
                    s.generate_n, d.generate_n, s.mutate_m, d.mutate_m, s.mutate_n, d.mutate_n
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    verdict(
        pass,
        format!(
            "static/dynamic ns per node, limit 0.50; {}",
            parts.join("; ")
        ),
    )
}

// 3

const DIGITS: &str = r#"
<start> ::= <digit>
<digit> ::= "0" | <non_zero>
<non_zero> ::= "1" | "2" | "3" | "4" | "5" | "6" | "7" | "8" | "9"
"#;

/// Upper 0.1% point of χ² with 9 degrees of freedom.
const CHI2_9_CRITICAL: f64 = 27.877;

/// Survival function of χ² with `df` degrees of freedom, by Simpson's rule
/// on the density; `df` must be odd and at least 3.
fn chi2_survival(x: f64, df: u32) -> f64 {
    let half = f64::from(df) / 2.0;
    let mut gamma = std::f64::consts::PI.sqrt();
    let mut a = 0.5;
    while a < half {
        gamma *= a;
        a += 1.0;
    }
    let pdf = |t: f64| t.powf(half - 1.0) * (-t / 2.0).exp() / (2f64.powf(half) * gamma);
    let steps = 200_000;
    let h = x / f64::from(steps);
    let mut sum = pdf(0.0) + pdf(x);
    for i in 1..steps {
        sum += pdf(f64::from(i) * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - sum * h / 3.0
}

fn digit_counts(flattened: bool) -> Result<[u64; 10], String> {
    let b =
        DynamicBackend::new(GrammarGraph::from_text(DIGITS.as_bytes()).map_err(|e| e.to_string())?);
    let g = b.graph();
    let gens = if flattened {
        let digit = g.head("digit").ok_or("no digit rule")?;
        GeneratorList::new(
            g,
            vec![Box::new(
                flattener_for(g, digit).map_err(|e| e.to_string())?,
            )],
        )
    } else {
        GeneratorList::empty(g)
    };
    let mut s = RandomSampler::new(3);
    let mut counts = [0u64; 10];
    for _ in 0..100_000 {
        let t = b
            .generate_root(&mut GenCtx::new(&mut s, &gens))
            .map_err(|e| e.to_string())?;
        match serialize(b.root(&t))[..] {
            [d @ b'0'..=b'9'] => counts[usize::from(d - b'0')] += 1,
            ref other => return Err(format!("unexpected output {other:?}")),
        }
    }
    Ok(counts)
}

fn flattener() -> Verdict {
    let p = chi2_survival(CHI2_9_CRITICAL, 9);
    if (p - 0.001).abs() > 1e-6 {
        return verdict(
            false,
            format!("critical value check: P(χ² > {CHI2_9_CRITICAL}) = {p}"),
        );
    }
    let (flat, plain) = match (digit_counts(true), digit_counts(false)) {
        (Ok(f), Ok(p)) => (f, p),
        (Err(e), _) | (_, Err(e)) => return verdict(false, e),
    };
    let expected = 10_000.0;
    let chi2: f64 = flat
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let zero = plain[0] as f64 / 100_000.0;
    verdict(
        chi2 < CHI2_9_CRITICAL && (zero - 0.5).abs() <= 0.02,
        format!(
            "flattened χ² = {chi2:.2} (critical {CHI2_9_CRITICAL}); unflattened \"0\" share {:.2}%",
            zero * 100.0
        ),
    )
}

// 4

fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Peels fronts by counting, for every member, how many members dominate it.
fn oracle_fronts(scores: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = scores.len();
    let mut left: Vec<usize> = (0..n).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let (front, rest): (Vec<usize>, Vec<usize>) = left
            .iter()
            .partition(|&&i| left.iter().all(|&j| !dominates(&scores[j], &scores[i])));
        fronts.push(front);
        left = rest;
    }
    fronts
}

fn sorting() -> Verdict {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(4);
    let mut bad = 0;
    for case in 0..1000 {
        let n = rng.random_range(0..=64);
        let d = rng.random_range(1..=4);
        let grid = case % 2 == 0;
        let scores: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        if grid {
                            f64::from(rng.random_range(0..5u8)) / 4.0
                        } else {
                            rng.random::<f64>()
                        }
                    })
                    .collect()
            })
            .collect();
        match nondominated_sort(&scores) {
            Ok(f) if f == oracle_fronts(&scores) => {}
            _ => bad += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        bad == 0 && secs < 30.0,
        format!("1000 populations, {bad} mismatches, {secs:.2} s"),
    )
}

// 5

#[derive(Clone, Copy)]
enum Algo {
    Elitist,
    Nsga2,
}

#[derive(Clone)]
struct Closure(Entry, Algo, bool);

impl BackendTask for Closure {
    type Output = Result<(usize, usize, usize), String>;

    fn run<B: Backend + 'static>(self, b: &B) -> Self::Output {
        let Closure(entry, algo, unreachable) = self;
        let graph = entry.graph();
        let mut constraints = treeforge_corpus::registry::<B>()
            .build_all(&entry.constraint_spec(), &graph)
            .map_err(|e| e.to_string())?;
        if unreachable {
            // keeps the run going for every generation
            constraints.push(Box::new(node_goal(1_000_000)));
        }
        let gens = GeneratorList::new(&graph, vec![Box::new(depth_limiter(workload_depth(entry)))]);
        let problem = Problem {
            backend: b,
            constraints: &constraints,
            generators: &gens,
        };
        let params = GaParams {
            population: 100,
            iterations: 200,
            ..GaParams::default()
        };
        let parser = EarleyParser::new(&graph);
        let mut seen: HashSet<Vec<u8>> = HashSet::new();
        let mut members = 0;
        let mut rejected = 0;
        let observe = |_: &_, pop: &[treeforge::evolution::Member<B::Tree>]| {
            for m in pop {
                members += 1;
                let text = serialize(b.root(&m.tree));
                if !seen.contains(&text) {
                    rejected += usize::from(!parser.recognize(&text));
                    seen.insert(text);
                }
            }
        };
        match algo {
            Algo::Elitist => elitist_ga(&problem, &params, 5, observe).map(drop),
            Algo::Nsga2 => nsga2(&problem, &params, 5, None, observe).map(drop),
        }
        .map_err(|e| e.to_string())?;
        Ok((members, seen.len(), rejected))
    }
}

fn closure() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    let runs = [
        (Algo::Elitist, "elitist", false),
        (Algo::Nsga2, "nsga2", false),
        (Algo::Elitist, "elitist+goal", true),
        (Algo::Nsga2, "nsga2+goal", true),
    ];
    for (algo, label, unreachable) in runs {
        for entry in [EXPR, CSV, XML, MINIC] {
            let task = Closure(entry, algo, unreachable);
            let r = match entry.name {
                "expr" => task.run(&expr::Grammar::new()),
                "csv" => task.run(&csv::Grammar::new()),
                "xml" => task.run(&xml::Grammar::new()),
                _ => task.run(&minic::Grammar::new()),
            };
            match r {
                Ok((members, distinct, rejected)) => {
                    pass &= rejected == 0;
                    parts.push(format!(
                        "{label}/{}: {members} members, {distinct} distinct, {rejected} rejected",
                        entry.name
                    ));
                }
                Err(e) => {
                    pass = false;
                    parts.push(format!("{label}/{}: {e}", entry.name));
                }
            }
        }
    }
    verdict(pass, parts.join("; "))
}

// 6

fn csv_solve() -> Verdict {
    let b = csv::Grammar::new();
    let graph = CSV.graph();
    let constraints = match treeforge_corpus::registry().build_all(&CSV.constraint_spec(), &graph) {
        Ok(c) => c,
        Err(e) => return verdict(false, e.to_string()),
    };
    let gens = GeneratorList::new(&graph, vec![Box::new(depth_limiter(workload_depth(CSV)))]);
    let problem = Problem {
        backend: &b,
        constraints: &constraints,
        generators: &gens,
    };
    let params = GaParams {
        population: 100,
        iterations: 100_000,
        time_budget: Some(Duration::from_secs(10)),
        ..GaParams::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in 0..5 {
        let start = Instant::now();
        match nsga2(&problem, &params, seed, None, |_, _| {}) {
            Ok(out) => {
                let secs = start.elapsed().as_secs_f64();
                let ok = out.stop == StopReason::AllSatisfied
                    && out.population.iter().all(|m| m.satisfied())
                    && secs < 10.0;
                pass &= ok;
                parts.push(format!(
                    "seed {seed}: {:?} after {} generations, {secs:.2} s",
                    out.stop,
                    out.generations()
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("seed {seed}: {e}"));
            }
        }
    }
    verdict(pass, parts.join("; "))
}

// 7

/// Re-derives the mini-C rules from the scope report and the grammar.
fn valid_minic<B: Backend>(b: &B, parser: &EarleyParser, tree: &B::Tree) -> bool {
    let Ok(r) = scope_report(b.graph(), b.root(tree)) else {
        return false;
    };
    parser.recognize(&serialize(b.root(tree)))
        && r.uses.iter().all(|u| u.2)
        && r.decls.iter().all(|d| !d.2)
        && r.identifiers().all(|(_, n)| !C_KEYWORDS.contains(&n))
}

fn minic_per_minute(algo: Algo) -> Result<(usize, usize), String> {
    let b = minic::Grammar::new();
    let graph = MINIC.graph();
    let constraints = treeforge_corpus::registry()
        .build_all(&MINIC.constraint_spec(), &graph)
        .map_err(|e| e.to_string())?;
    let gens = GeneratorList::new(&graph, vec![Box::new(depth_limiter(workload_depth(MINIC)))]);
    let problem = Problem {
        backend: &b,
        constraints: &constraints,
        generators: &gens,
    };
    let parser = EarleyParser::new(&graph);
    let mut found: HashSet<Vec<u8>> = HashSet::new();
    let mut invalid = 0;
    let start = Instant::now();
    let minute = Duration::from_secs(60);
    let mut seed = 0;
    while start.elapsed() < minute {
        let params = GaParams {
            population: 100,
            iterations: 1_000_000,
            time_budget: Some(minute - start.elapsed()),
            ..GaParams::default()
        };
        let observe = |_: &_, pop: &[treeforge::evolution::Member<minic::Start>]| {
            for m in pop.iter().filter(|m| m.satisfied()) {
                let text = serialize(b.root(&m.tree));
                if !found.contains(&text) {
                    invalid += usize::from(!valid_minic(&b, &parser, &m.tree));
                    found.insert(text);
                }
            }
        };
        match algo {
            Algo::Elitist => elitist_ga(&problem, &params, seed, observe).map(drop),
            Algo::Nsga2 => nsga2(&problem, &params, seed, None, observe).map(drop),
        }
        .map_err(|e| e.to_string())?;
        seed += 1;
    }
    Ok((found.len(), invalid))
}

fn minic_solve() -> Verdict {
    match (minic_per_minute(Algo::Nsga2), minic_per_minute(Algo::Elitist)) {
        (Ok((n, bad)), Ok((e, ebad))) => verdict(
            n >= 50 && bad == 0,
            format!("nsga2 {n} distinct satisfying programs/min ({bad} failed re-check); elitist {e} ({ebad} failed re-check, not gated)"),
        ),
        (Err(e), _) | (_, Err(e)) => verdict(false, e),
    }
}

// 8

fn expr_forest(b: &expr::Grammar, seed: u64, size: usize) -> Vec<expr::Start> {
    let gens = GeneratorList::new(b.graph(), vec![Box::new(depth_limiter(20))]);
    let mut s = RandomSampler::new(seed);
    (0..size)
        .map(|_| {
            b.generate_root(&mut GenCtx::new(&mut s, &gens))
                .expect("expr generates")
        })
        .collect()
}

/// Every simple chain of at most `k` graph nodes, grown one edge at a time.
fn graph_chains(g: &GrammarGraph, k: usize) -> HashSet<Vec<NodeId>> {
    let ids: Vec<NodeId> = g.nodes().map(|(id, _)| id).collect();
    let mut layer: Vec<Vec<NodeId>> = ids.iter().map(|&i| vec![i]).collect();
    let mut out: HashSet<Vec<NodeId>> = layer.iter().cloned().collect();
    for _ in 1..k {
        let mut next = Vec::new();
        for c in &layer {
            for &n in &ids {
                if !c.contains(&n) && g.has_edge(*c.last().unwrap(), n) {
                    let mut longer = c.clone();
                    longer.push(n);
                    next.push(longer);
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Chains along root paths: the node ids of each suffix of length at most `k`.
fn tree_chains<B: Backend>(b: &B, t: &B::Tree, k: usize) -> HashSet<Vec<NodeId>> {
    let root = b.root(t);
    let mut out = HashSet::new();
    for p in all_paths(root) {
        let steps = p.as_slice();
        let ids: Vec<NodeId> = (0..=steps.len())
            .map(|d| {
                resolve_path(root, &NodePath::from(steps[..d].to_vec()))
                    .unwrap()
                    .node_id()
            })
            .collect();
        for len in 1..=k.min(ids.len()) {
            out.insert(ids[ids.len() - len..].to_vec());
        }
    }
    out
}

fn kpath() -> Verdict {
    let b = expr::Grammar::new();
    let universes: Vec<HashSet<Vec<NodeId>>> =
        (0..=3).map(|k| graph_chains(b.graph(), k)).collect();
    let mut rng = StdRng::seed_from_u64(8);
    let mut mismatches = 0;
    for _ in 0..100 {
        let trees = expr_forest(&b, rng.random(), rng.random_range(0..12));
        for k in 1..=3 {
            let seen: HashSet<Vec<NodeId>> = trees
                .iter()
                .flat_map(|t| tree_chains(&b, t, k))
                .filter(|c| universes[k].contains(c))
                .collect();
            match kpath_cover(&b, &trees, k) {
                Ok(r) if (r.covered, r.total) == (seen.len(), universes[k].len()) => {}
                _ => mismatches += 1,
            }
        }
    }
    let mut drops = 0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=3);
        let trees = expr_forest(&b, rng.random(), rng.random_range(1..10));
        let mut last = 0;
        for n in 0..=trees.len() {
            let covered = kpath_cover(&b, &trees[..n], k)
                .map(|r| r.covered)
                .unwrap_or(0);
            drops += usize::from(covered < last);
            last = covered;
        }
    }
    verdict(
        mismatches == 0 && drops == 0,
        format!("100 forests x k=1..3: {mismatches} oracle mismatches; 1000 growth cases: {drops} decreases"),
    )
}

// 9

fn cost_model() -> Verdict {
    let mut synthetic = Vec::new();
    for n in 1..60u64 {
        for m in (1..=n).step_by(3) {
            synthetic.push(Sample {
                op: Op::Mutate,
                predictors: vec![n as f64, m as f64],
                ns: 2 * n + 7 * m,
            });
        }
    }
    let fit = match fit_model(&synthetic) {
        Ok(f) => f,
        Err(e) => return verdict(false, format!("synthetic fit: {e}")),
    };
    let err = ((fit.coefficients[0] - 2.0) / 2.0)
        .abs()
        .max(((fit.coefficients[1] - 7.0) / 7.0).abs());

    let b = csv::Grammar::new();
    let config = BenchConfig {
        ops: vec![Op::Crossover],
        budget: Duration::from_secs(15),
        ..Default::default()
    };
    let real = match run_bench(&b, &[], &config)
        .map_err(|e| e.to_string())
        .and_then(|s| fit_model(&s).map_err(|e| e.to_string()))
    {
        Ok(m) => m,
        Err(e) => return verdict(false, format!("csv crossover: {e}")),
    };
    let c = &real.coefficients;
    let n2_dominant = c[1] > 0.0 && c.iter().enumerate().all(|(i, &v)| i == 1 || v < c[1]);
    verdict(
        err <= 1e-6 && n2_dominant,
        format!(
            "synthetic relative error {err:.1e}; csv crossover {real} (R² {:.3})",
            real.r_squared
        ),
    )
}

// 10

#[derive(Clone)]
struct Accepted(Entry);

impl BackendTask for Accepted {
    type Output = usize;

    fn run<B: Backend + 'static>(self, b: &B) -> usize {
        let graph = self.0.graph();
        let parser = EarleyParser::new(&graph);
        let gens = GeneratorList::new(
            &graph,
            vec![Box::new(depth_limiter(workload_depth(self.0)))],
        );
        outputs(b, &gens, 0..10_000)
            .iter()
            .filter(|r| r.as_ref().map_or(true, |text| !parser.recognize(text)))
            .count()
    }
}

fn codegen_validity() -> Verdict {
    let mut failures = 0;
    let mut parts = Vec::new();
    for entry in [EXPR, CSV, XML, MINIC] {
        let bad = match entry.name {
            "expr" => Accepted(entry).run(&expr::Grammar::new()),
            "csv" => Accepted(entry).run(&csv::Grammar::new()),
            "xml" => Accepted(entry).run(&xml::Grammar::new()),
            _ => Accepted(entry).run(&minic::Grammar::new()),
        };
        failures += bad;
        parts.push(format!("{} {bad}", entry.name));
    }
    verdict(
        failures == 0,
        format!(
            "4 generated modules compiled; 10000 trees each, failures: {}",
            parts.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("differential equivalence", differential),
        ("static speed advantage", static_speed),
        ("flattener uniformity", flattener),
        ("non-dominated sorting oracle", sorting),
        ("evolution closure", closure),
        ("csv solve", csv_solve),
        ("mini-c solve", minic_solve),
        ("k-path oracle", kpath),
        ("cost-model recovery", cost_model),
        ("codegen validity", codegen_validity),
    ];
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !only.is_empty() && !only.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let v = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        failed += usize::from(!v.pass);
        println!(
            "{} {number:>2} {name}: {} ({:.1} s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
