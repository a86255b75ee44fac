use treeforge::dynamic::DynamicBackend;
use treeforge::generation::{depth_limiter, GenCtx, GeneratorList, RandomSampler};
use treeforge::runtime::Backend;
use treeforge::visitors::serialize;
use treeforge_corpus::{csv, expr, minic, xml, Entry, CSV, EXPR, MINIC, XML};

fn outputs<B: Backend>(
    b: &B,
    gens: &GeneratorList,
    seeds: std::ops::Range<u64>,
) -> Vec<Result<Vec<u8>, String>> {
    seeds
        .map(|seed| {
            let mut s = RandomSampler::new(seed);
            let mut ctx = GenCtx::new(&mut s, gens);
            b.generate_root(&mut ctx)
                .map(|t| serialize(b.root(&t)))
                .map_err(|e| e.to_string())
        })
        .collect()
}

fn same<B: Backend>(entry: Entry, stat: &B, seeds: u64) {
    let dynamic = DynamicBackend::new(entry.graph());
    for gens in [
        GeneratorList::empty(dynamic.graph()),
        GeneratorList::new(dynamic.graph(), vec![Box::new(depth_limiter(30))]),
    ] {
        let a = outputs(stat, &gens, 0..seeds);
        let b = outputs(&dynamic, &gens, 0..seeds);
        for (i, (x, y)) in a.iter().zip(&b).enumerate() {
            assert_eq!(x, y, "{} seed {i}", entry.name);
        }
    }
}

#[test]
fn expr_backends_agree() {
    same(EXPR, &expr::Grammar::new(), 500);
}

#[test]
fn csv_backends_agree() {
    same(CSV, &csv::Grammar::new(), 500);
}

#[test]
fn xml_backends_agree() {
    same(XML, &xml::Grammar::new(), 500);
}

#[test]
fn minic_backends_agree() {
    same(MINIC, &minic::Grammar::new(), 500);
}

fn regenerated<B: Backend>(
    b: &B,
    gens: &GeneratorList,
    seed: u64,
    pick: usize,
) -> Result<Vec<u8>, String> {
    let mut s = RandomSampler::new(seed);
    let mut t = b
        .generate_root(&mut GenCtx::new(&mut s, gens))
        .map_err(|e| e.to_string())?;
    let paths = treeforge::visitors::all_paths(b.root(&t));
    let path = &paths[pick % paths.len()];
    b.regenerate_at(&mut t, path, &mut GenCtx::new(&mut s, gens))
        .map_err(|e| e.to_string())?;
    Ok(serialize(b.root(&t)))
}

proptest::proptest! {
    #[test]
    fn regeneration_agrees_across_backends(seed in proptest::prelude::any::<u64>(), pick in 0usize..10_000) {
        let stat = csv::Grammar::new();
        let dynamic = DynamicBackend::new(CSV.graph());
        let gens = GeneratorList::new(dynamic.graph(), vec![Box::new(depth_limiter(30))]);
        proptest::prop_assert_eq!(regenerated(&stat, &gens, seed, pick), regenerated(&dynamic, &gens, seed, pick));
    }
}
