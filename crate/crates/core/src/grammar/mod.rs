//! Textual grammar format and its abstract syntax tree.
//!
//! A grammar file is a sequence of rules `<name> ::= body`. Bodies use `|` for
//! alternation, juxtaposition for concatenation, the suffixes `*`, `+`, `?` and
//! `{lo,hi}` for repetition (`hi` exclusive, `{n}` meaning exactly `n`), and
//! parentheses for grouping. Terminals are double-quoted byte strings with the
//! escapes `\n \t \r \\ \" \xNN`. `#` starts a line comment. The first rule is
//! the start symbol unless a `start = <name>` directive says otherwise.

mod parse;
mod print;

use std::collections::{HashSet, VecDeque};
use std::fmt;

use indexmap::IndexMap;

pub use parse::parse_grammar;
pub use print::quote_terminal;

/// A source region, 1-based and inclusive of the start, exclusive of the end column.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Span {
    pub line: usize,
    pub column: usize,
    pub end_line: usize,
    pub end_column: usize,
}

impl Span {
    pub(crate) fn join(self, other: Span) -> Span {
        Span {
            line: self.line,
            column: self.column,
            end_line: other.end_line,
            end_column: other.end_column,
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == self.end_line {
            write!(
                f,
                "line {}, columns {}-{}",
                self.line, self.column, self.end_column
            )
        } else {
            write!(
                f,
                "lines {}:{} to {}:{}",
                self.line, self.column, self.end_line, self.end_column
            )
        }
    }
}

/// A grammar expression.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Reference(String),
    Terminal(Vec<u8>),
    Concat(Vec<Expr>),
    Alt(Vec<Expr>),
    Star(Box<Expr>),
    Plus(Box<Expr>),
    /// Between `lo` (inclusive) and `hi` (exclusive) repetitions.
    Range {
        inner: Box<Expr>,
        lo: usize,
        hi: usize,
    },
    Option(Box<Expr>),
}

impl Expr {
    /// Children in order.
    pub fn children(&self) -> &[Expr] {
        match self {
            Expr::Reference(_) | Expr::Terminal(_) => &[],
            Expr::Concat(c) | Expr::Alt(c) => c,
            Expr::Star(i) | Expr::Plus(i) | Expr::Option(i) | Expr::Range { inner: i, .. } => {
                std::slice::from_ref(i)
            }
        }
    }

    /// Pre-order walk over this expression and its descendants.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    fn references<'a>(&'a self, out: &mut Vec<&'a str>) {
        self.walk(&mut |e| {
            if let Expr::Reference(n) = e {
                out.push(n);
            }
        });
    }
}

/// One grammar rule. Spans are kept beside the expression, in pre-order, so
/// that structural equality ignores source positions.
#[derive(Clone, Debug)]
pub struct Rule {
    pub name: String,
    pub expr: Expr,
    pub span: Span,
    /// Span of each expression node, in pre-order of `expr`.
    pub expr_spans: Vec<Span>,
}

impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.expr == other.expr
    }
}

impl Eq for Rule {}

/// A parsed and validated grammar.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrammarAst {
    rules: IndexMap<String, Rule>,
    start: String,
}

/// A non-fatal diagnostic about a grammar.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Warning {
    pub rule: String,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>: {}", self.rule, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("syntax error at {line}:{column}: {message}")]
    SyntaxError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("undefined nonterminal <{0}>")]
    UndefinedNonterminal(String),
    #[error("duplicate rule <{0}>")]
    DuplicateRule(String),
    #[error("empty alternative at {line}:{column}")]
    EmptyAlternation { line: usize, column: usize },
    #[error("empty expression at {line}:{column}")]
    EmptyConcat { line: usize, column: usize },
}

pub(crate) fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl GrammarAst {
    /// Builds a grammar from rules, checking every invariant the parser checks.
    pub fn new(rules: Vec<Rule>, start: Option<String>) -> Result<Self, GrammarError> {
        let mut map = IndexMap::with_capacity(rules.len());
        for rule in rules {
            if !is_identifier(&rule.name) {
                return Err(GrammarError::SyntaxError {
                    line: rule.span.line,
                    column: rule.span.column,
                    message: format!("invalid rule name {:?}", rule.name),
                });
            }
            if map.contains_key(&rule.name) {
                return Err(GrammarError::DuplicateRule(rule.name));
            }
            map.insert(rule.name.clone(), rule);
        }
        let start = match start {
            Some(s) => s,
            None => match map.keys().next() {
                Some(first) => first.clone(),
                None => {
                    return Err(GrammarError::SyntaxError {
                        line: 1,
                        column: 1,
                        message: "grammar has no rules".into(),
                    })
                }
            },
        };
        if !map.contains_key(&start) {
            return Err(GrammarError::UndefinedNonterminal(start));
        }
        for rule in map.values() {
            let mut refs = Vec::new();
            rule.expr.references(&mut refs);
            if let Some(missing) = refs.into_iter().find(|r| !map.contains_key(*r)) {
                return Err(GrammarError::UndefinedNonterminal(missing.to_string()));
            }
        }
        Ok(GrammarAst { rules: map, start })
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.get(name)
    }

    /// Rules in source order.
    pub fn rules(&self) -> impl ExactSizeIterator<Item = &Rule> {
        self.rules.values()
    }

    pub fn rule_index(&self, name: &str) -> Option<usize> {
        self.rules.get_index_of(name)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Warns about rules that cannot be reached from the start symbol.
    pub fn validate_reachability(&self) -> Vec<Warning> {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([self.start.as_str()]);
        seen.insert(self.start.as_str());
        while let Some(name) = queue.pop_front() {
            let mut refs = Vec::new();
            self.rules[name].expr.references(&mut refs);
            for r in refs {
                if seen.insert(r) {
                    queue.push_back(r);
                }
            }
        }
        self.rules
            .keys()
            .filter(|name| !seen.contains(name.as_str()))
            .map(|name| Warning {
                rule: name.clone(),
                message: format!("rule is unreachable from <{}>", self.start),
            })
            .collect()
    }
}

/// Free-function form of [`GrammarAst::validate_reachability`].
pub fn validate_reachability(ast: &GrammarAst) -> Vec<Warning> {
    ast.validate_reachability()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const EXPR: &str = r#"
<start> ::= <expr>
<expr> ::= <number> "+" <expr> | <number>
<number> ::= "0" | <non_zero> <digit>*
<non_zero> ::= "1" | "2" | "3" | "4" | "5" | "6" | "7" | "8" | "9"
<digit> ::= "0" | <non_zero>
"#;

    #[test]
    fn expr_grammar_has_five_rules() {
        let ast = parse_grammar(EXPR.as_bytes()).unwrap();
        assert_eq!(ast.len(), 5);
        assert_eq!(ast.start(), "start");
        let expr = &ast.rule("expr").unwrap().expr;
        let Expr::Alt(variants) = expr else {
            panic!("expected alternation, got {expr:?}")
        };
        assert_eq!(variants.len(), 2);
        assert_eq!(
            variants[0],
            Expr::Concat(vec![
                Expr::Reference("number".into()),
                Expr::Terminal(b"+".to_vec()),
                Expr::Reference("expr".into()),
            ])
        );
    }

    #[test]
    fn empty_terminal() {
        let ast = parse_grammar(br#"<a> ::= """#).unwrap();
        assert_eq!(ast.rule("a").unwrap().expr, Expr::Terminal(vec![]));
    }

    #[test]
    fn undefined_reference() {
        assert_eq!(
            parse_grammar(b"<a> ::= <b>"),
            Err(GrammarError::UndefinedNonterminal("b".into()))
        );
    }

    #[test]
    fn duplicate_rule() {
        assert_eq!(
            parse_grammar(b"<a> ::= \"x\"\n<a> ::= \"y\""),
            Err(GrammarError::DuplicateRule("a".into()))
        );
    }

    #[test]
    fn reachability() {
        let ast = parse_grammar(EXPR.as_bytes()).unwrap();
        assert!(ast.validate_reachability().is_empty());

        let extended = format!("{EXPR}\n<x> ::= \"q\"\n");
        let ast = parse_grammar(extended.as_bytes()).unwrap();
        let warnings = validate_reachability(&ast);
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].rule, "x");

        let single = parse_grammar(b"<a> ::= \"x\"").unwrap();
        assert!(single.validate_reachability().is_empty());
    }

    #[test]
    fn start_directive() {
        let ast = parse_grammar(b"start = <b>\n<a> ::= \"x\"\n<b> ::= <a>").unwrap();
        assert_eq!(ast.start(), "b");
        let printed = ast.to_string();
        assert_eq!(parse_grammar(printed.as_bytes()).unwrap(), ast);
    }
}
