use std::collections::BTreeSet;

use proptest::prelude::*;

use treeforge::dynamic::{DynNode, DynamicBackend};
use treeforge::evolution::{
    check, count_bound, dominates, elitist_ga, nondominated_sort, nsga2, nsga2_select, Constraint,
    EvolutionError, GaParams, Member, Niching, Problem,
};
use treeforge::generation::{depth_limiter, GeneratorList};
use treeforge::graph::GrammarGraph;
use treeforge::parser::EarleyParser;
use treeforge::runtime::Backend;
use treeforge::visitors::serialize;

const FIELDS: &str = r#"
<file> ::= <field>{1,9}
<field> ::= "a" | "b" | "c"
"#;

fn backend() -> DynamicBackend {
    DynamicBackend::new(GrammarGraph::from_text(FIELDS.as_bytes()).unwrap())
}

fn tradeoff(b: &DynamicBackend) -> Vec<Box<dyn Constraint<DynamicBackend>>> {
    vec![
        Box::new(count_bound(b.graph(), "\"a\"", 8, 8).unwrap()),
        Box::new(count_bound(b.graph(), "\"b\"", 8, 8).unwrap()),
    ]
}

fn small() -> GaParams {
    GaParams {
        population: 20,
        elites: 4,
        candidates: 40,
        iterations: 15,
        ..GaParams::default()
    }
}

fn objective_vectors(pop: &[Member<DynNode>]) -> Vec<Vec<f64>> {
    pop.iter().map(|m| m.scores.clone()).collect()
}

#[test]
fn invalid_parameters_are_rejected() {
    let b = backend();
    let c = tradeoff(&b);
    let gens = GeneratorList::empty(b.graph());
    let problem = Problem {
        backend: &b,
        constraints: &c,
        generators: &gens,
    };
    for bad in [
        GaParams {
            population: 0,
            ..small()
        },
        GaParams {
            elites: 21,
            ..small()
        },
        GaParams {
            candidates: 10,
            ..small()
        },
        GaParams {
            iterations: 0,
            ..small()
        },
        GaParams {
            crossover_rate: 1.5,
            ..small()
        },
    ] {
        assert!(matches!(
            elitist_ga(&problem, &bad, 0, |_, _| {}),
            Err(EvolutionError::InvalidParams(_))
        ));
    }
}

#[test]
fn conflicting_objectives_keep_a_spread_front() {
    let b = backend();
    let c = tradeoff(&b);
    let gens = GeneratorList::new(b.graph(), vec![Box::new(depth_limiter(10))]);
    let problem = Problem {
        backend: &b,
        constraints: &c,
        generators: &gens,
    };
    let params = GaParams {
        population: 100,
        iterations: 40,
        ..GaParams::default()
    };
    let out = nsga2(&problem, &params, 7, None, |_, _| {}).unwrap();
    let scores = objective_vectors(&out.population);
    let front = &nondominated_sort(&scores).unwrap()[0];
    let points: BTreeSet<(u64, u64)> = front
        .iter()
        .map(|&i| (scores[i][0].to_bits(), scores[i][1].to_bits()))
        .collect();
    assert!(points.len() >= 3, "front points: {points:?}");
}

#[derive(Debug)]
struct Reversed;

impl Niching for Reversed {
    fn rank(&self, front: &[usize], _: &[Vec<f64>]) -> Vec<usize> {
        front.iter().rev().copied().collect()
    }
}

#[test]
fn niching_override_decides_the_last_front() {
    // front 0 = {0}, front 1 = {1, 2, 3, 4}; room for two of the second front
    let scores = vec![
        vec![1.0, 1.0],
        vec![0.9, 0.1],
        vec![0.1, 0.9],
        vec![0.5, 0.5],
        vec![0.6, 0.4],
    ];
    assert_eq!(nsga2_select(&scores, 3, &Reversed).unwrap(), vec![0, 4, 3]);
}

#[test]
fn one_objective_selects_like_an_elitist_cut() {
    let scores: Vec<Vec<f64>> = [0.3, 0.9, 0.1, 0.9, 0.5, 0.7]
        .iter()
        .map(|&v| vec![v])
        .collect();
    let mut picked = nsga2_select(&scores, 3, &treeforge::evolution::CrowdingDistance).unwrap();
    picked.sort_unstable();
    assert_eq!(picked, vec![1, 3, 5]);
}

#[test]
fn stats_are_json_lines() {
    let b = backend();
    let c = tradeoff(&b);
    let gens = GeneratorList::empty(b.graph());
    let problem = Problem {
        backend: &b,
        constraints: &c,
        generators: &gens,
    };
    let out = elitist_ga(
        &problem,
        &GaParams {
            iterations: 3,
            ..small()
        },
        1,
        |_, _| {},
    )
    .unwrap();
    assert_eq!(out.generations(), 3);
    let v: serde_json::Value = serde_json::from_str(&out.stats[0].to_json_line()).unwrap();
    assert_eq!(v["generation"], 1);
    assert!(v["front_sizes"].is_array());
    assert!(v["best_fitness"].is_number());
    assert!(v["satisfied"].is_number());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn elitist_best_fitness_never_drops(seed in any::<u64>()) {
        let b = backend();
        let c = tradeoff(&b);
        let gens = GeneratorList::empty(b.graph());
        let problem = Problem { backend: &b, constraints: &c, generators: &gens };
        let out = elitist_ga(&problem, &small(), seed, |_, _| {}).unwrap();
        for w in out.stats.windows(2) {
            prop_assert!(w[1].best_fitness >= w[0].best_fitness);
        }
    }

    #[test]
    fn nsga2_first_front_is_never_overtaken(seed in any::<u64>()) {
        let b = backend();
        let c = tradeoff(&b);
        let gens = GeneratorList::empty(b.graph());
        let problem = Problem { backend: &b, constraints: &c, generators: &gens };
        let mut fronts: Vec<Vec<Vec<f64>>> = Vec::new();
        nsga2(&problem, &small(), seed, None, |_, pop| {
            let scores = objective_vectors(pop);
            let f0 = nondominated_sort(&scores).unwrap()[0].iter().map(|&i| scores[i].clone()).collect();
            fronts.push(f0);
        })
        .unwrap();
        for w in fronts.windows(2) {
            for old in &w[0] {
                prop_assert!(w[1].iter().all(|new| !dominates(old, new)));
            }
        }
    }

    #[test]
    fn members_stay_in_the_language_and_checks_are_pure(seed in any::<u64>()) {
        let b = backend();
        let c = tradeoff(&b);
        let gens = GeneratorList::empty(b.graph());
        let problem = Problem { backend: &b, constraints: &c, generators: &gens };
        let parser = EarleyParser::new(b.graph());
        let mut bad = 0;
        let mut impure = 0;
        elitist_ga(&problem, &small(), seed, |_, pop| {
            for m in pop {
                let before = serialize(b.root(&m.tree));
                bad += usize::from(!parser.recognize(&before));
                let again = check(&b, &m.tree, &c).unwrap();
                impure += usize::from(
                    serialize(b.root(&m.tree)) != before || again.scores != m.scores || again.fitness() != m.fitness,
                );
            }
        })
        .unwrap();
        prop_assert_eq!(bad, 0);
        prop_assert_eq!(impure, 0);
    }
}
