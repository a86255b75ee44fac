//! Grammar-to-types transpiler and evolutionary input generation over derivation trees.

pub mod bench;
pub mod codegen;
pub mod coverage;
pub mod dynamic;
pub mod evolution;
pub mod generation;
pub mod grammar;
pub mod graph;
pub mod parser;
pub mod runtime;
pub mod visitors;
