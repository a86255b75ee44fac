//! Static vs dynamic backends, and sequential vs parallel evaluation.
//!
//! `cargo bench -p treeforge-corpus` measures the parallel build;
//! add `--no-default-features` for the sequential fallback.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use treeforge::coverage::kpath_cover;
use treeforge::dynamic::DynamicBackend;
use treeforge::evolution::{node_goal, nsga2, Constraint, GaParams, Problem};
use treeforge::generation::{depth_limiter, GenCtx, GeneratorList, RandomSampler};
use treeforge::runtime::Backend;
use treeforge_corpus::{csv, expr, minic, Entry, CSV, EXPR, MINIC};

const MODE: &str = if cfg!(feature = "parallel") {
    "parallel"
} else {
    "sequential"
};

fn forest<B: Backend>(b: &B, n: usize, depth: usize) -> Vec<B::Tree> {
    let gens = GeneratorList::new(b.graph(), vec![Box::new(depth_limiter(depth))]);
    let mut s = RandomSampler::new(7);
    (0..n)
        .map(|_| b.generate_root(&mut GenCtx::new(&mut s, &gens)).unwrap())
        .collect()
}

fn generate_pair<S: Backend>(c: &mut Criterion, entry: Entry, stat: &S, depth: usize) {
    let dynamic = DynamicBackend::new(entry.graph());
    let mut group = c.benchmark_group(format!("generate/{}", entry.name));
    group.bench_function("static", |b| b.iter(|| black_box(forest(stat, 100, depth))));
    group.bench_function("dynamic", |b| {
        b.iter(|| black_box(forest(&dynamic, 100, depth)))
    });
    group.finish();
}

fn generation(c: &mut Criterion) {
    generate_pair(c, EXPR, &expr::Grammar::new(), 24);
    generate_pair(c, CSV, &csv::Grammar::new(), 40);
}

fn mutation(c: &mut Criterion) {
    let stat = csv::Grammar::new();
    let dynamic = DynamicBackend::new(CSV.graph());
    let mut group = c.benchmark_group("mutate/csv");
    fn run<B: Backend>(b: &B, pool: &[B::Tree]) {
        let gens = GeneratorList::new(b.graph(), vec![Box::new(depth_limiter(40))]);
        let mut s = RandomSampler::new(3);
        for t in pool {
            let mut t = t.clone();
            let path = treeforge::visitors::all_paths(b.root(&t)).swap_remove(1);
            let _ = b.regenerate_at(&mut t, &path, &mut GenCtx::new(&mut s, &gens));
            black_box(&t);
        }
    }
    let sp = forest(&stat, 100, 40);
    let dp = forest(&dynamic, 100, 40);
    group.bench_function("static", |b| b.iter(|| run(&stat, &sp)));
    group.bench_function("dynamic", |b| b.iter(|| run(&dynamic, &dp)));
    group.finish();
}

fn coverage(c: &mut Criterion) {
    let b = expr::Grammar::new();
    let trees = forest(&b, 500, 24);
    let mut group = c.benchmark_group("kpath/expr");
    for k in [2, 4] {
        group.bench_with_input(BenchmarkId::new(MODE, k), &k, |bench, &k| {
            bench.iter(|| black_box(kpath_cover(&b, &trees, k).unwrap()))
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let b = minic::Grammar::new();
    let graph = MINIC.graph();
    let mut constraints = treeforge_corpus::registry()
        .build_all(&MINIC.constraint_spec(), &graph)
        .unwrap();
    // unreachable, so every run lasts all its generations
    constraints.push(Box::new(node_goal(1_000_000)) as Box<dyn Constraint<minic::Grammar>>);
    let gens = GeneratorList::new(&graph, vec![Box::new(depth_limiter(30))]);
    let problem = Problem {
        backend: &b,
        constraints: &constraints,
        generators: &gens,
    };
    let mut group = c.benchmark_group("nsga2/minic");
    group.sample_size(10);
    let jobs = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .max(2);
    for j in [1, jobs] {
        let params = GaParams {
            population: 50,
            candidates: 100,
            iterations: 5,
            jobs: j,
            ..GaParams::default()
        };
        group.bench_with_input(
            BenchmarkId::new(format!("{MODE}/jobs"), j),
            &params,
            |bench, params| {
                bench.iter(|| {
                    black_box(
                        nsga2(&problem, params, 1, None, |_, _| {})
                            .unwrap()
                            .generations(),
                    )
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, generation, mutation, coverage, evaluation);
criterion_main!(benches);
