use std::fmt::{self, Write};

use super::{Expr, GrammarAst};

/// Quotes terminal bytes in the grammar's string syntax.
pub fn quote_terminal(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() + 2);
    out.push('"');
    for &b in bytes {
        match b {
            b'"' => out.push_str("\\\""),
            b'\\' => out.push_str("\\\\"),
            b'\n' => out.push_str("\\n"),
            b'\t' => out.push_str("\\t"),
            b'\r' => out.push_str("\\r"),
            0x20..=0x7e => out.push(char::from(b)),
            _ => {
                let _ = write!(out, "\\x{b:02x}");
            }
        }
    }
    out.push('"');
    out
}

// Binding levels: 0 rule body, 1 alternative, 2 concatenation item, 3 postfix operand.
fn write_expr(f: &mut impl Write, e: &Expr, level: u8) -> fmt::Result {
    match e {
        Expr::Reference(name) => write!(f, "<{name}>"),
        Expr::Terminal(bytes) => f.write_str(&quote_terminal(bytes)),
        Expr::Alt(branches) => {
            if level > 0 {
                f.write_char('(')?;
            }
            for (i, b) in branches.iter().enumerate() {
                if i > 0 {
                    f.write_str(" | ")?;
                }
                write_expr(f, b, 1)?;
            }
            if level > 0 {
                f.write_char(')')?;
            }
            Ok(())
        }
        Expr::Concat(items) => {
            if level > 1 {
                f.write_char('(')?;
            }
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    f.write_char(' ')?;
                }
                write_expr(f, item, 2)?;
            }
            if level > 1 {
                f.write_char(')')?;
            }
            Ok(())
        }
        Expr::Star(inner) => {
            write_expr(f, inner, 3)?;
            f.write_char('*')
        }
        Expr::Plus(inner) => {
            write_expr(f, inner, 3)?;
            f.write_char('+')
        }
        Expr::Option(inner) => {
            write_expr(f, inner, 3)?;
            f.write_char('?')
        }
        Expr::Range { inner, lo, hi } => {
            write_expr(f, inner, 3)?;
            write!(f, "{{{lo},{hi}}}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, 0)
    }
}

impl fmt::Display for GrammarAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let first = self.rules.keys().next().map(String::as_str);
        if first != Some(self.start.as_str()) {
            writeln!(f, "start = <{}>", self.start)?;
        }
        for rule in self.rules.values() {
            writeln!(f, "<{}> ::= {}", rule.name, rule.expr)?;
        }
        Ok(())
    }
}
