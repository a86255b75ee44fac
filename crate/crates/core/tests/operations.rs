use treeforge::dynamic::{DynNode, DynamicBackend};
use treeforge::evolution::{
    check, crossover, elitist_ga, mutate, CrossoverOutcome, GaParams, Problem, StopReason,
};
use treeforge::generation::{
    depth_limiter, flattener_for, GenCtx, GenError, GeneratorList, RandomSampler, RecordingSampler,
    ScriptedSampler,
};
use treeforge::graph::GrammarGraph;
use treeforge::parser::EarleyParser;
use treeforge::runtime::{Backend, NodePath};
use treeforge::visitors::{find_same_type_subtrees, serialize};

const EXPR: &str = r#"
<start> ::= <expr>
<expr> ::= <number> "+" <expr> | <number>
<number> ::= "0" | <non_zero> <digit>*
<non_zero> ::= "1" | "2" | "3" | "4" | "5" | "6" | "7" | "8" | "9"
<digit> ::= "0" | <non_zero>
"#;

fn expr() -> DynamicBackend {
    DynamicBackend::new(GrammarGraph::from_text(EXPR.as_bytes()).unwrap())
}

fn parse(b: &DynamicBackend, text: &str) -> DynNode {
    EarleyParser::new(b.graph())
        .parse_into(b, text.as_bytes())
        .unwrap()
}

fn text(b: &DynamicBackend, t: &DynNode) -> String {
    String::from_utf8(serialize(b.root(t))).unwrap()
}

#[test]
fn scripted_choices_give_zero() {
    let b = expr();
    let gens = GeneratorList::empty(b.graph());
    let t = b
        .generate_root(&mut GenCtx::new(&mut ScriptedSampler::new([1, 0]), &gens))
        .unwrap();
    assert_eq!(text(&b, &t), "0");
}

#[test]
fn tightest_depth_limit_forces_zero() {
    let b = expr();
    let g = b.graph();
    // start -> expr -> alt -> number -> alt -> "0"
    let min = g.min_heights()[g.start().index()].unwrap();
    assert_eq!(min, 6);
    let gens = GeneratorList::new(g, vec![Box::new(depth_limiter(min))]);
    let mut s = RandomSampler::new(5);
    for _ in 0..200 {
        let t = b.generate_root(&mut GenCtx::new(&mut s, &gens)).unwrap();
        assert_eq!(text(&b, &t), "0");
    }
}

#[test]
fn bottomless_rule_exceeds_any_limit() {
    let b = DynamicBackend::new(GrammarGraph::from_text(b"<a> ::= <a>").unwrap());
    for limit in [1, 10, 100] {
        let gens = GeneratorList::new(b.graph(), vec![Box::new(depth_limiter(limit))]);
        let r = b.generate_root(&mut GenCtx::new(&mut RandomSampler::new(0), &gens));
        assert!(matches!(r, Err(GenError::DepthExceeded { .. })));
    }
    let gens = GeneratorList::empty(b.graph());
    let r = b.generate_root(&mut GenCtx::new(&mut RandomSampler::new(0), &gens));
    assert!(matches!(r, Err(GenError::DepthExceeded { .. })));
}

#[test]
fn no_choices_means_no_sampler_calls() {
    let b = DynamicBackend::new(GrammarGraph::from_text(b"<a> ::= \"x\"").unwrap());
    let gens = GeneratorList::empty(b.graph());
    let mut rec = RecordingSampler::new(RandomSampler::new(1));
    let t = b.generate_root(&mut GenCtx::new(&mut rec, &gens)).unwrap();
    assert_eq!(text(&b, &t), "x");
    assert!(rec.choices().is_empty());
}

#[test]
fn flattened_digit_follows_its_stack() {
    let b = expr();
    let g = b.graph();
    let digit = g.head("digit").unwrap();
    let gens = GeneratorList::new(g, vec![Box::new(flattener_for(g, digit).unwrap())]);
    // expr -> number, number -> non_zero digit*, non_zero "1", one digit, stack 7 ("7")
    let t = b
        .generate_root(&mut GenCtx::new(
            &mut ScriptedSampler::new([1, 1, 0, 1, 7]),
            &gens,
        ))
        .unwrap();
    assert_eq!(text(&b, &t), "17");
}

#[test]
fn mutation_replays_a_script_at_a_path() {
    let b = expr();
    let mut t = parse(&b, "12+3");
    let numbers = find_same_type_subtrees(b.root(&t), b.graph().head("number").unwrap());
    assert_eq!(numbers.len(), 2);
    let gens = GeneratorList::empty(b.graph());
    // number -> non_zero digit*, non_zero "7", no digits
    let mut s = ScriptedSampler::new([1, 6, 0]);
    mutate(&b, &mut t, &numbers[1], &mut GenCtx::new(&mut s, &gens)).unwrap();
    assert_eq!(text(&b, &t), "12+7");

    let mut s = ScriptedSampler::new([1, 0]);
    mutate(
        &b,
        &mut t,
        &NodePath::root(),
        &mut GenCtx::new(&mut s, &gens),
    )
    .unwrap();
    assert_eq!(text(&b, &t), "0");
    assert!(mutate(
        &b,
        &mut t,
        &vec![0, 5].into(),
        &mut GenCtx::new(&mut s, &gens)
    )
    .is_err());
}

#[test]
fn crossover_swaps_numbers() {
    let b = expr();
    let mut p1 = parse(&b, "1+2");
    let mut p2 = parse(&b, "3");
    let first = find_same_type_subtrees(b.root(&p1), b.graph().head("number").unwrap())[0].clone();
    let out = crossover(&b, &mut p1, &first, &mut p2, &mut RandomSampler::new(0)).unwrap();
    assert!(matches!(out, CrossoverOutcome::Swapped { .. }));
    assert_eq!(
        (text(&b, &p1), text(&b, &p2)),
        ("3+2".to_string(), "1".to_string())
    );

    let mut a = parse(&b, "4+5");
    let mut c = parse(&b, "6");
    let out = crossover(
        &b,
        &mut a,
        &NodePath::root(),
        &mut c,
        &mut RandomSampler::new(0),
    )
    .unwrap();
    assert!(matches!(out, CrossoverOutcome::Swapped { .. }));
    assert_eq!(
        (text(&b, &a), text(&b, &c)),
        ("6".to_string(), "4+5".to_string())
    );
}

#[test]
fn crossover_without_a_partner_changes_nothing() {
    let b = expr();
    let mut p1 = parse(&b, "12");
    let mut p2 = parse(&b, "3");
    let digit = find_same_type_subtrees(b.root(&p1), b.graph().head("digit").unwrap())[0].clone();
    let out = crossover(&b, &mut p1, &digit, &mut p2, &mut RandomSampler::new(0)).unwrap();
    assert_eq!(out, CrossoverOutcome::NoCandidate);
    assert_eq!(
        (text(&b, &p1), text(&b, &p2)),
        ("12".to_string(), "3".to_string())
    );
}

#[test]
fn empty_constraint_list() {
    let b = expr();
    let t = parse(&b, "1+1");
    let r = check(&b, &t, &[]).unwrap();
    assert!(r.scores.is_empty());
    assert!(r.all_satisfied());

    let gens = GeneratorList::new(b.graph(), vec![Box::new(depth_limiter(20))]);
    let problem = Problem {
        backend: &b,
        constraints: &[],
        generators: &gens,
    };
    let out = elitist_ga(&problem, &GaParams::default(), 3, |_, _| {}).unwrap();
    assert_eq!(out.generations(), 1);
    assert_eq!(out.stop, StopReason::AllSatisfied);
    assert_eq!(out.population.len(), 100);
}

#[test]
fn equal_seeds_give_equal_trees() {
    let b = expr();
    let gens = GeneratorList::new(b.graph(), vec![Box::new(depth_limiter(16))]);
    let run = |seed| {
        let mut s = RandomSampler::new(seed);
        (0..20)
            .map(|_| b.generate_root(&mut GenCtx::new(&mut s, &gens)).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}
