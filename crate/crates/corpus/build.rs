use std::path::Path;
use std::{env, fs};

use treeforge::codegen::{emit_module, EmitOptions};
use treeforge::graph::GrammarGraph;

fn main() {
    let out = env::var("OUT_DIR").unwrap();
    println!("cargo:rerun-if-changed=grammars");
    for name in ["expr", "csv", "xml", "minic"] {
        let src = format!("grammars/{name}.gbnf");
        println!("cargo:rerun-if-changed={src}");
        let text = fs::read(&src).unwrap();
        let graph = GrammarGraph::from_text(&text).unwrap_or_else(|e| panic!("{src}: {e}"));
        let code =
            emit_module(&graph, &EmitOptions::default()).unwrap_or_else(|e| panic!("{src}: {e}"));
        fs::write(Path::new(&out).join(format!("{name}.rs")), code).unwrap();
    }
}
