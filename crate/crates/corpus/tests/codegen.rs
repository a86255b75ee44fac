use treeforge::codegen::{emit_module, manifest, EmitOptions};
use treeforge_corpus::{ALL, CSV, EXPR};

fn generated(name: &str) -> &'static str {
    match name {
        "expr" => include_str!(concat!(env!("OUT_DIR"), "/expr.rs")),
        "csv" => include_str!(concat!(env!("OUT_DIR"), "/csv.rs")),
        "xml" => include_str!(concat!(env!("OUT_DIR"), "/xml.rs")),
        "minic" => include_str!(concat!(env!("OUT_DIR"), "/minic.rs")),
        _ => unreachable!(),
    }
}

#[test]
fn build_output_matches_fresh_emission() {
    for e in ALL {
        let code = emit_module(&e.graph(), &EmitOptions::default()).unwrap();
        assert_eq!(code, generated(e.name), "{}", e.name);
        assert_eq!(
            code,
            emit_module(&e.graph(), &EmitOptions::default()).unwrap()
        );
    }
}

#[test]
fn manifest_covers_every_node() {
    for e in ALL {
        let g = e.graph();
        let m = manifest(&g).unwrap();
        assert_eq!(m.nodes.len(), g.nodes().count());
        assert_eq!(m.start, "start");
        for (i, n) in m.nodes.iter().enumerate() {
            assert_eq!(n.id as usize, i);
            assert!(n.line >= 1);
            assert!(
                generated(e.name).contains(&n.type_name),
                "{}: {}",
                e.name,
                n.type_name
            );
        }
    }
}

#[test]
fn expr_types() {
    let m = manifest(&EXPR.graph()).unwrap();
    let names: Vec<&str> = m.nodes.iter().map(|n| n.type_name.as_str()).collect();
    for t in ["Start", "Expr", "Number", "NonZero", "Digit"] {
        assert!(names.contains(&t), "{t}");
    }
    let json = serde_json::to_value(manifest(&CSV.graph()).unwrap()).unwrap();
    assert_eq!(json["nodes"][0]["type"], "Start");
    assert_eq!(json["root_type"], "Start");
}
