use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use treeforge::bench::{self, BenchConfig, Sample};
use treeforge::codegen::{emit_module, manifest, EmitOptions};
use treeforge::coverage::kpath_cover;
use treeforge::dynamic::DynamicBackend;
use treeforge::evolution::{elitist_ga, nsga2, ConstraintSpecFile, GaParams, Problem};
use treeforge::generation::{
    depth_limiter, flattener_for, GenCtx, Generator, GeneratorList, RandomSampler,
};
use treeforge::graph::GrammarGraph;
use treeforge::parser::EarleyParser;
use treeforge::runtime::Backend;
use treeforge::visitors::serialize;
use treeforge_corpus::{registry, with_static_backend, BackendTask};

use crate::{Algo, BackendKind, Command, Common};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Transpile { grammar, out } => transpile(&grammar, &out),
        Command::Generate {
            grammar,
            count,
            common,
            flatten,
            out_dir,
        } => {
            let graph = load_grammar(&grammar)?;
            let task = GenerateTask {
                count,
                seed: seed(&common),
                max_depth: common.max_depth,
                flatten,
                out_dir,
            };
            dispatch(&graph, common.backend, task)
        }
        Command::Solve {
            grammar,
            constraints,
            common,
            population,
            elites,
            candidates,
            iterations,
            algo,
            time_budget,
            jobs,
            out_dir,
        } => {
            let graph = load_grammar(&grammar)?;
            let spec = load_constraints(&constraints)?;
            let params = GaParams {
                population,
                elites,
                candidates,
                iterations,
                time_budget,
                jobs,
                ..GaParams::default()
            };
            params.validate()?;
            let task = SolveTask {
                spec,
                params,
                algo,
                seed: seed(&common),
                max_depth: common.max_depth,
                out_dir,
            };
            dispatch(&graph, common.backend, task)
        }
        Command::Coverage {
            grammar,
            input_dir,
            k,
            json,
        } => coverage(&grammar, &input_dir, k, json),
        Command::Bench {
            grammar,
            ops,
            budget,
            constraints,
            common,
            json,
        } => {
            let graph = load_grammar(&grammar)?;
            let spec = constraints
                .as_deref()
                .map(load_constraints)
                .transpose()?
                .unwrap_or_default();
            let config = BenchConfig {
                ops,
                budget,
                seed: seed(&common),
                max_depth: common.max_depth,
                ..Default::default()
            };
            let title = format!("{} ({})", grammar.display(), backend_label(common.backend));
            dispatch(
                &graph,
                common.backend,
                BenchTask {
                    spec,
                    config,
                    json,
                    title,
                },
            )
        }
        Command::Report { samples } => report(&samples),
        Command::Graph { grammar, dot } => graph(&grammar, dot),
    }
}

fn load_grammar(path: &Path) -> Result<GrammarGraph> {
    let text = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    GrammarGraph::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_constraints(path: &Path) -> Result<ConstraintSpecFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ConstraintSpecFile::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

fn seed(common: &Common) -> u64 {
    common.seed.unwrap_or_else(|| {
        let s = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

fn backend_label(kind: BackendKind) -> &'static str {
    match kind {
        BackendKind::Static => "static",
        BackendKind::Dynamic => "dynamic",
    }
}

fn dispatch<T: BackendTask<Output = Result<()>>>(
    graph: &GrammarGraph,
    kind: BackendKind,
    task: T,
) -> Result<()> {
    match kind {
        BackendKind::Dynamic => task.run(&DynamicBackend::new(graph.clone())),
        BackendKind::Static => match with_static_backend(graph, task) {
            Ok(r) => r,
            Err(_) => {
                bail!("no generated types are built in for this grammar; use --backend dynamic")
            }
        },
    }
}

fn generators(graph: &GrammarGraph, max_depth: usize, flatten: &[String]) -> Result<GeneratorList> {
    if max_depth == 0 {
        bail!("--max-depth must be at least 1");
    }
    let mut list: Vec<Box<dyn Generator>> = Vec::new();
    for rule in flatten {
        let id = graph
            .head(rule)
            .with_context(|| format!("no rule <{rule}>"))?;
        list.push(Box::new(flattener_for(graph, id)?));
    }
    list.push(Box::new(depth_limiter(max_depth)));
    Ok(GeneratorList::new(graph, list))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_inputs<'a>(dir: &Path, inputs: impl IntoIterator<Item = &'a [u8]>) -> Result<()> {
    create_dir(dir)?;
    for (i, bytes) in inputs.into_iter().enumerate() {
        let path = dir.join(format!("{i:06}.txt"));
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn transpile(grammar: &Path, out: &Path) -> Result<()> {
    let graph = load_grammar(grammar)?;
    let stem = grammar
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("grammar");
    let code = emit_module(&graph, &EmitOptions::default())?;
    let json = serde_json::to_string_pretty(&manifest(&graph)?)?;
    create_dir(out)?;
    let module = out.join(format!("{stem}.rs"));
    let listing = out.join(format!("{stem}.manifest.json"));
    fs::write(&module, code).with_context(|| format!("writing {}", module.display()))?;
    fs::write(&listing, json + "\n").with_context(|| format!("writing {}", listing.display()))?;
    println!("{}\n{}", module.display(), listing.display());
    Ok(())
}

struct GenerateTask {
    count: usize,
    seed: u64,
    max_depth: usize,
    flatten: Vec<String>,
    out_dir: Option<PathBuf>,
}

impl BackendTask for GenerateTask {
    type Output = Result<()>;

    fn run<B: Backend + 'static>(self, backend: &B) -> Result<()> {
        let gens = generators(backend.graph(), self.max_depth, &self.flatten)?;
        let mut sampler = RandomSampler::new(self.seed);
        let mut inputs = Vec::with_capacity(self.count);
        for _ in 0..self.count {
            let tree = backend.generate_root(&mut GenCtx::new(&mut sampler, &gens))?;
            inputs.push(serialize(backend.root(&tree)));
        }
        match &self.out_dir {
            Some(dir) => write_inputs(dir, inputs.iter().map(Vec::as_slice)),
            None => {
                let mut out = BufWriter::new(io::stdout().lock());
                for i in &inputs {
                    writeln!(out, "{}", i.escape_ascii())?;
                }
                Ok(out.flush()?)
            }
        }
    }
}

struct SolveTask {
    spec: ConstraintSpecFile,
    params: GaParams,
    algo: Algo,
    seed: u64,
    max_depth: usize,
    out_dir: Option<PathBuf>,
}

impl BackendTask for SolveTask {
    type Output = Result<()>;

    fn run<B: Backend + 'static>(self, backend: &B) -> Result<()> {
        let graph = backend.graph();
        let constraints = registry::<B>().build_all(&self.spec, graph)?;
        let gens = generators(graph, self.max_depth, &[])?;
        let problem = Problem {
            backend,
            constraints: &constraints,
            generators: &gens,
        };
        let mut out = BufWriter::new(io::stdout().lock());
        let mut failed = None;
        let observe = |s: &treeforge::evolution::GenerationStats, _: &[_]| {
            if failed.is_none() {
                failed = writeln!(out, "{}", s.to_json_line()).err();
            }
        };
        let outcome = match self.algo {
            Algo::Elitist => elitist_ga(&problem, &self.params, self.seed, observe)?,
            Algo::Nsga2 => nsga2(&problem, &self.params, self.seed, None, observe)?,
        };
        if let Some(e) = failed {
            return Err(e.into());
        }
        let mut inputs: Vec<Vec<u8>> = outcome
            .satisfying()
            .map(|m| serialize(backend.root(&m.tree)))
            .collect();
        inputs.sort();
        inputs.dedup();
        for i in &inputs {
            let line = serde_json::json!({ "input": String::from_utf8_lossy(i) });
            writeln!(out, "{line}")?;
        }
        out.flush()?;
        eprintln!(
            "{} distinct satisfying inputs after {} generations ({:?})",
            inputs.len(),
            outcome.generations(),
            outcome.stop
        );
        if let Some(dir) = &self.out_dir {
            write_inputs(dir, inputs.iter().map(Vec::as_slice))?;
        }
        Ok(())
    }
}

fn coverage(grammar: &Path, input_dir: &Path, k: usize, json: bool) -> Result<()> {
    let graph = load_grammar(grammar)?;
    let parser = EarleyParser::new(&graph);
    let backend = DynamicBackend::new(graph);
    let mut files: Vec<PathBuf> = fs::read_dir(input_dir)
        .with_context(|| format!("reading {}", input_dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<_>>()?;
    files.retain(|p| p.is_file());
    files.sort();
    let mut forest = Vec::with_capacity(files.len());
    for f in &files {
        let bytes = fs::read(f).with_context(|| format!("reading {}", f.display()))?;
        forest.push(
            parser
                .parse(&bytes)
                .with_context(|| format!("parsing {}", f.display()))?,
        );
    }
    let r = kpath_cover(&backend, &forest, k)?;
    if json {
        let v = serde_json::json!({ "k": r.k, "covered": r.covered, "total": r.total, "percent": r.percent, "inputs": files.len() });
        println!("{v}");
    } else {
        println!("{r}");
    }
    Ok(())
}

struct BenchTask {
    spec: ConstraintSpecFile,
    config: BenchConfig,
    json: Option<PathBuf>,
    title: String,
}

impl BackendTask for BenchTask {
    type Output = Result<()>;

    fn run<B: Backend + 'static>(self, backend: &B) -> Result<()> {
        let constraints = registry::<B>().build_all(&self.spec, backend.graph())?;
        let samples = bench::run_bench(backend, &constraints, &self.config)?;
        if let Some(path) = &self.json {
            let file =
                fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            for s in &samples {
                serde_json::to_writer(&mut w, s)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        print!("{}", bench::report(&self.title, &samples));
        Ok(())
    }
}

fn report(paths: &[PathBuf]) -> Result<()> {
    if paths.is_empty() {
        bail!("no sample files given");
    }
    for path in paths {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let mut samples = Vec::new();
        for (n, line) in io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let s: Sample = serde_json::from_str(&line)
                .with_context(|| format!("{}:{}", path.display(), n + 1))?;
            samples.push(s);
        }
        print!("{}", bench::report(&path.display().to_string(), &samples));
    }
    Ok(())
}

fn graph(grammar: &Path, dot: bool) -> Result<()> {
    let graph = load_grammar(grammar)?;
    if dot {
        print!("{}", graph.to_dot());
        return Ok(());
    }
    println!(
        "{} nodes, {} edges ({} indirect), {} rules",
        graph.len(),
        graph.edges().len(),
        graph.indirect_edges().count(),
        graph.heads().len()
    );
    for (rule, id) in graph.heads() {
        println!("  <{rule}> {id}");
    }
    Ok(())
}
