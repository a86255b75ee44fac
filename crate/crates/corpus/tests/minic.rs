use treeforge::dynamic::DynamicBackend;
use treeforge::evolution::{check, Constraint};
use treeforge::parser::EarleyParser;
use treeforge::runtime::Backend;
use treeforge_corpus::constraints::{scope_report, ScopeCheck, ScopeRule, TagMatch};
use treeforge_corpus::{minic, xml, MINIC, XML};

fn report(src: &str) -> (Vec<(String, bool)>, Vec<(String, bool)>) {
    let b = minic::Grammar::new();
    let t = EarleyParser::new(b.graph())
        .parse_into(&b, src.as_bytes())
        .unwrap();
    let r = scope_report(b.graph(), b.root(&t)).unwrap();
    let uses = r.uses.into_iter().map(|(_, n, ok)| (n, ok)).collect();
    let decls = r
        .decls
        .into_iter()
        .map(|(_, n, again)| (n, again))
        .collect();
    (uses, decls)
}

fn score(check: ScopeCheck, src: &str) -> f64 {
    let b = minic::Grammar::new();
    let t = EarleyParser::new(b.graph())
        .parse_into(&b, src.as_bytes())
        .unwrap();
    ScopeRule::new(b.graph(), check)
        .unwrap()
        .evaluate(&b, &t)
        .unwrap()
        .score
}

fn s(n: &str, flag: bool) -> (String, bool) {
    (n.to_string(), flag)
}

#[test]
fn declared_before_use() {
    let (uses, decls) = report("int x;\nint main() {\nx = 1;\nreturn a;\n}\n");
    assert_eq!(decls, vec![s("x", false)]);
    assert_eq!(uses, vec![s("x", true), s("a", false)]);
    assert_eq!(
        score(
            ScopeCheck::DeclaredBeforeUse,
            "int x;\nint main() {\nx = 1;\nreturn a;\n}\n"
        ),
        0.5
    );

    let later = "int main() {\nx = 1;\nint x;\n}\n";
    assert_eq!(report(later).0, vec![s("x", false)]);
}

#[test]
fn initializer_sees_only_earlier_names() {
    let (uses, _) = report("int main() {\nint a = a;\n}\n");
    assert_eq!(uses, vec![s("a", false)]);
    let (uses, _) = report("int main() {\nint a = 1;\nint d = a + 2;\n}\n");
    assert_eq!(uses, vec![s("a", true)]);
}

#[test]
fn blocks_scope_their_declarations() {
    let src = "int main() {\n{\nint t;\n}\nreturn t;\n}\n";
    assert_eq!(report(src).0, vec![s("t", false)]);
    let inner = "int main() {\nint t;\nif (t) {\nt = t;\n}\n}\n";
    assert!(report(inner).0.iter().all(|u| u.1));
}

#[test]
fn redeclaration() {
    let (_, decls) = report("int x;\nint x;\nint main() {\nint x;\n{\nint x;\nint x;\n}\n}\n");
    assert_eq!(
        decls,
        vec![
            s("x", false),
            s("x", true),
            s("x", false),
            s("x", false),
            s("x", true)
        ]
    );
    assert_eq!(
        score(
            ScopeCheck::NoRedeclaration,
            "int x;\nint x;\nint main() {\n}\n"
        ),
        0.5
    );
}

#[test]
fn reserved_keywords() {
    assert_eq!(
        score(
            ScopeCheck::NoReservedKeywords,
            "int int;\nint main() {\nint x;\n}\n"
        ),
        0.5
    );
    assert_eq!(
        score(
            ScopeCheck::NoReservedKeywords,
            "int main() {\nreturn 0;\n}\n"
        ),
        1.0
    );
    assert_eq!(
        score(
            ScopeCheck::NoReservedKeywords,
            "int do;\nint main() {\nreturn do;\n}\n"
        ),
        0.0
    );
}

#[test]
fn corpus_rules_accept_a_valid_program() {
    let b = minic::Grammar::new();
    let src = "int a;\nint main() {\nint x = a + 1;\nif (x < 3) {\nx = x * 2;\n}\nreturn x;\n}\n";
    let t = EarleyParser::new(b.graph())
        .parse_into(&b, src.as_bytes())
        .unwrap();
    let constraints = treeforge_corpus::registry()
        .build_all(&MINIC.constraint_spec(), b.graph())
        .unwrap();
    let r = check(&b, &t, &constraints).unwrap();
    assert_eq!(&r.scores[..3], &[1.0, 1.0, 1.0]);
}

#[test]
fn tag_names_must_match() {
    let b = xml::Grammar::new();
    let c = TagMatch::new(b.graph()).unwrap();
    let eval = |src: &str| {
        let t = EarleyParser::new(b.graph())
            .parse_into(&b, src.as_bytes())
            .unwrap();
        c.evaluate(&b, &t).unwrap()
    };
    assert_eq!(eval("<ab>x<c/></ab>").score, 1.0);
    assert_eq!(eval("<a/>").score, 1.0);
    let bad = eval("<a><b>y</c></a>");
    assert_eq!(bad.score, 0.5);
    assert_eq!(bad.violations.len(), 1);
    assert_eq!(eval("<a><b>y</b></a>").score, 1.0);

    // the dynamic backend agrees
    let d = DynamicBackend::new(XML.graph());
    let t = EarleyParser::new(d.graph())
        .parse_into(&d, b"<a><b>y</c></a>")
        .unwrap();
    assert_eq!(
        TagMatch::new(d.graph()).unwrap().evaluate(&d, &t).unwrap(),
        bad
    );
}
