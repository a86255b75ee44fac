//! Example grammars with their generated types and constraints.

pub mod constraints;

use treeforge::evolution::{ConstraintRegistry, ConstraintSpecFile};
use treeforge::graph::GrammarGraph;
use treeforge::runtime::Backend;

pub mod expr {
    include!(concat!(env!("OUT_DIR"), "/expr.rs"));
}

pub mod csv {
    include!(concat!(env!("OUT_DIR"), "/csv.rs"));
}

pub mod xml {
    include!(concat!(env!("OUT_DIR"), "/xml.rs"));
}

pub mod minic {
    include!(concat!(env!("OUT_DIR"), "/minic.rs"));
}

/// A grammar shipped with the corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Entry {
    pub name: &'static str,
    pub grammar: &'static str,
    pub constraints: &'static str,
}

impl Entry {
    pub fn graph(&self) -> GrammarGraph {
        GrammarGraph::from_text(self.grammar.as_bytes()).expect("corpus grammar parses")
    }

    pub fn constraint_spec(&self) -> ConstraintSpecFile {
        ConstraintSpecFile::parse(self.constraints).expect("corpus constraints parse")
    }
}

pub const EXPR: Entry = Entry {
    name: "expr",
    grammar: include_str!("../grammars/expr.gbnf"),
    constraints: include_str!("../constraints/expr.toml"),
};
pub const CSV: Entry = Entry {
    name: "csv",
    grammar: include_str!("../grammars/csv.gbnf"),
    constraints: include_str!("../constraints/csv.toml"),
};
pub const XML: Entry = Entry {
    name: "xml",
    grammar: include_str!("../grammars/xml.gbnf"),
    constraints: include_str!("../constraints/xml.toml"),
};
pub const MINIC: Entry = Entry {
    name: "minic",
    grammar: include_str!("../grammars/minic.gbnf"),
    constraints: include_str!("../constraints/minic.toml"),
};

pub const ALL: [Entry; 4] = [EXPR, CSV, XML, MINIC];

pub fn entry(name: &str) -> Option<Entry> {
    ALL.into_iter().find(|e| e.name == name)
}

/// Built-in constraint kinds plus the corpus's own checkers.
pub fn registry<B: Backend + 'static>() -> ConstraintRegistry<B> {
    let mut r = ConstraintRegistry::with_builtins();
    constraints::register(&mut r);
    r
}

/// Work that runs against any backend.
pub trait BackendTask {
    type Output;

    fn run<B: Backend + 'static>(self, backend: &B) -> Self::Output;
}

/// Runs `task` on the generated backend of the corpus grammar whose graph
/// matches `graph`, if there is one.
pub fn with_static_backend<T: BackendTask>(graph: &GrammarGraph, task: T) -> Result<T::Output, T> {
    let same = |e: &Entry| graph.to_dot() == e.graph().to_dot();
    if same(&EXPR) {
        Ok(task.run(&expr::Grammar::new()))
    } else if same(&CSV) {
        Ok(task.run(&csv::Grammar::new()))
    } else if same(&XML) {
        Ok(task.run(&xml::Grammar::new()))
    } else if same(&MINIC) {
        Ok(task.run(&minic::Grammar::new()))
    } else {
        Err(task)
    }
}
