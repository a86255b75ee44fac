use super::{is_identifier, Expr, GrammarAst, GrammarError, Rule, Span};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Nonterminal(String),
    Str(Vec<u8>),
    Define,
    Pipe,
    Star,
    Plus,
    Question,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Eq,
    Int(usize),
    Ident(String),
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn error(&self, message: impl Into<String>) -> GrammarError {
        GrammarError::SyntaxError {
            line: self.line,
            column: self.col,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else if c & 0xC0 != 0x80 {
            // count characters, not UTF-8 continuation bytes
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    self.bump();
                }
                b'#' => {
                    while !matches!(self.peek(), None | Some(b'\n')) {
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Span)>, GrammarError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let (line, column) = (self.line, self.col);
            let Some(c) = self.peek() else {
                let span = Span {
                    line,
                    column,
                    end_line: line,
                    end_column: column,
                };
                out.push((Tok::Eof, span));
                return Ok(out);
            };
            let tok = match c {
                b'<' => self.nonterminal()?,
                b'"' => self.string()?,
                b':' => {
                    if self.src[self.pos..].starts_with(b"::=") {
                        for _ in 0..3 {
                            self.bump();
                        }
                        Tok::Define
                    } else {
                        return Err(self.error("expected `::=`"));
                    }
                }
                b'0'..=b'9' => {
                    let mut value: usize = 0;
                    while let Some(d @ b'0'..=b'9') = self.peek() {
                        value = value
                            .checked_mul(10)
                            .and_then(|v| v.checked_add(usize::from(d - b'0')))
                            .ok_or_else(|| self.error("repetition bound too large"))?;
                        self.bump();
                    }
                    Tok::Int(value)
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let start = self.pos;
                    while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                        self.bump();
                    }
                    Tok::Ident(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
                }
                _ => {
                    let tok = match c {
                        b'|' => Tok::Pipe,
                        b'*' => Tok::Star,
                        b'+' => Tok::Plus,
                        b'?' => Tok::Question,
                        b'(' => Tok::LParen,
                        b')' => Tok::RParen,
                        b'{' => Tok::LBrace,
                        b'}' => Tok::RBrace,
                        b',' => Tok::Comma,
                        b'=' => Tok::Eq,
                        _ => {
                            let shown = std::str::from_utf8(&self.src[self.pos..])
                                .ok()
                                .and_then(|s| s.chars().next())
                                .map_or_else(|| format!("byte 0x{c:02x}"), |ch| format!("{ch:?}"));
                            return Err(self.error(format!("unexpected character {shown}")));
                        }
                    };
                    self.bump();
                    tok
                }
            };
            let span = Span {
                line,
                column,
                end_line: self.line,
                end_column: self.col,
            };
            out.push((tok, span));
        }
    }

    fn nonterminal(&mut self) -> Result<Tok, GrammarError> {
        self.bump();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c != b'>' && c != b'\n') {
            self.bump();
        }
        if self.peek() != Some(b'>') {
            return Err(self.error("unterminated nonterminal, expected `>`"));
        }
        let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
        if !is_identifier(&name) {
            return Err(self.error(format!("invalid nonterminal name {name:?}")));
        }
        self.bump();
        Ok(Tok::Nonterminal(name))
    }

    fn string(&mut self) -> Result<Tok, GrammarError> {
        self.bump();
        let mut bytes = Vec::new();
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated string")),
                Some(b'"') => return Ok(Tok::Str(bytes)),
                Some(b'\\') => {
                    let escaped = match self.bump() {
                        Some(b'n') => b'\n',
                        Some(b't') => b'\t',
                        Some(b'r') => b'\r',
                        Some(b'\\') => b'\\',
                        Some(b'"') => b'"',
                        Some(b'x') => {
                            let hi = self.bump().and_then(hex_value);
                            let lo = self.bump().and_then(hex_value);
                            match (hi, lo) {
                                (Some(hi), Some(lo)) => hi << 4 | lo,
                                _ => return Err(self.error("`\\x` needs two hex digits")),
                            }
                        }
                        Some(other) => {
                            return Err(self.error(format!(
                                "unknown escape `\\{}`",
                                char::from(other).escape_default()
                            )))
                        }
                        None => return Err(self.error("unterminated string")),
                    };
                    bytes.push(escaped);
                }
                Some(c) => bytes.push(c),
            }
        }
    }
}

fn hex_value(c: u8) -> Option<u8> {
    char::from(c).to_digit(16).map(|d| d as u8)
}

/// An expression together with the spans of its nodes in pre-order.
struct Parsed {
    expr: Expr,
    spans: Vec<Span>,
}

impl Parsed {
    fn span(&self) -> Span {
        self.spans[0]
    }

    fn wrap(self, span: Span, build: impl FnOnce(Box<Expr>) -> Expr) -> Parsed {
        let mut spans = Vec::with_capacity(self.spans.len() + 1);
        spans.push(span);
        spans.extend(self.spans);
        Parsed {
            expr: build(Box::new(self.expr)),
            spans,
        }
    }

    fn group(items: Vec<Parsed>, build: impl FnOnce(Vec<Expr>) -> Expr) -> Parsed {
        let span = items[0].span().join(items[items.len() - 1].span());
        let mut spans = vec![span];
        let mut exprs = Vec::with_capacity(items.len());
        for item in items {
            spans.extend(item.spans);
            exprs.push(item.expr);
        }
        Parsed {
            expr: build(exprs),
            spans,
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek2(&self) -> &Tok {
        let i = (self.pos + 1).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> GrammarError {
        let span = self.span();
        GrammarError::SyntaxError {
            line: span.line,
            column: span.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Span, GrammarError> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(self.error(format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    fn file(&mut self) -> Result<GrammarAst, GrammarError> {
        let mut rules = Vec::new();
        let mut start = None;
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(word) if word == "start" => {
                    self.bump();
                    self.expect(Tok::Eq, "`=`")?;
                    match self.bump() {
                        (Tok::Nonterminal(name), _) => start = Some(name),
                        (other, span) => {
                            return Err(GrammarError::SyntaxError {
                                line: span.line,
                                column: span.column,
                                message: format!(
                                    "expected nonterminal, found {}",
                                    describe(&other)
                                ),
                            })
                        }
                    }
                }
                Tok::Nonterminal(name) => {
                    let (_, head) = self.bump();
                    self.expect(Tok::Define, "`::=`")?;
                    let body = self.alternation()?;
                    let span = head.join(body.span());
                    if rules.iter().any(|r: &Rule| r.name == name) {
                        return Err(GrammarError::DuplicateRule(name));
                    }
                    rules.push(Rule {
                        name,
                        expr: body.expr,
                        span,
                        expr_spans: body.spans,
                    });
                }
                other => {
                    return Err(self.error(format!("expected a rule, found {}", describe(&other))))
                }
            }
        }
        GrammarAst::new(rules, start)
    }

    fn alternation(&mut self) -> Result<Parsed, GrammarError> {
        let first_span = self.span();
        let mut branches = Vec::new();
        let mut saw_pipe = false;
        loop {
            let here = self.span();
            match self.concatenation()? {
                Some(p) => branches.push(p),
                None if saw_pipe || *self.peek() == Tok::Pipe => {
                    return Err(GrammarError::EmptyAlternation {
                        line: here.line,
                        column: here.column,
                    })
                }
                None => {
                    return Err(GrammarError::EmptyConcat {
                        line: first_span.line,
                        column: first_span.column,
                    })
                }
            }
            if *self.peek() == Tok::Pipe {
                self.bump();
                saw_pipe = true;
            } else {
                break;
            }
        }
        Ok(if branches.len() == 1 {
            branches.pop().unwrap()
        } else {
            Parsed::group(branches, Expr::Alt)
        })
    }

    fn starts_item(&self) -> bool {
        match self.peek() {
            Tok::Nonterminal(_) => *self.peek2() != Tok::Define,
            Tok::Str(_) | Tok::LParen => true,
            _ => false,
        }
    }

    fn concatenation(&mut self) -> Result<Option<Parsed>, GrammarError> {
        let mut items = Vec::new();
        while self.starts_item() {
            items.push(self.postfix()?);
        }
        if let Tok::Ident(word) = self.peek() {
            if !(word == "start" && *self.peek2() == Tok::Eq) {
                return Err(self.error(format!("unexpected word `{word}`")));
            }
        }
        Ok(match items.len() {
            0 => None,
            1 => items.pop(),
            _ => Some(Parsed::group(items, Expr::Concat)),
        })
    }

    fn postfix(&mut self) -> Result<Parsed, GrammarError> {
        let mut item = self.primary()?;
        loop {
            let start = item.span();
            match self.peek() {
                Tok::Star => {
                    let (_, s) = self.bump();
                    item = item.wrap(start.join(s), Expr::Star);
                }
                Tok::Plus => {
                    let (_, s) = self.bump();
                    item = item.wrap(start.join(s), Expr::Plus);
                }
                Tok::Question => {
                    let (_, s) = self.bump();
                    item = item.wrap(start.join(s), Expr::Option);
                }
                Tok::LBrace => {
                    self.bump();
                    let lo = self.int()?;
                    let hi = if *self.peek() == Tok::Comma {
                        self.bump();
                        self.int()?
                    } else {
                        lo + 1
                    };
                    let close = self.expect(Tok::RBrace, "`}`")?;
                    if hi <= lo {
                        return Err(GrammarError::SyntaxError {
                            line: close.line,
                            column: close.column,
                            message: format!("empty repetition range {{{lo},{hi}}}"),
                        });
                    }
                    item = item.wrap(start.join(close), |inner| Expr::Range { inner, lo, hi });
                }
                _ => return Ok(item),
            }
        }
    }

    fn int(&mut self) -> Result<usize, GrammarError> {
        match self.peek() {
            Tok::Int(v) => {
                let v = *v;
                self.bump();
                Ok(v)
            }
            other => Err(self.error(format!("expected a number, found {}", describe(other)))),
        }
    }

    fn primary(&mut self) -> Result<Parsed, GrammarError> {
        match self.bump() {
            (Tok::Nonterminal(name), span) => Ok(Parsed {
                expr: Expr::Reference(name),
                spans: vec![span],
            }),
            (Tok::Str(bytes), span) => Ok(Parsed {
                expr: Expr::Terminal(bytes),
                spans: vec![span],
            }),
            (Tok::LParen, open) => {
                if *self.peek() == Tok::RParen {
                    return Err(GrammarError::EmptyConcat {
                        line: open.line,
                        column: open.column,
                    });
                }
                let inner = self.alternation()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            (other, span) => Err(GrammarError::SyntaxError {
                line: span.line,
                column: span.column,
                message: format!("expected an expression, found {}", describe(&other)),
            }),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Nonterminal(n) => format!("<{n}>"),
        Tok::Str(_) => "a string".into(),
        Tok::Define => "`::=`".into(),
        Tok::Pipe => "`|`".into(),
        Tok::Star => "`*`".into(),
        Tok::Plus => "`+`".into(),
        Tok::Question => "`?`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBrace => "`{`".into(),
        Tok::RBrace => "`}`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Eq => "`=`".into(),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Ident(w) => format!("`{w}`"),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses grammar text into a validated [`GrammarAst`].
pub fn parse_grammar(text: &[u8]) -> Result<GrammarAst, GrammarError> {
    if let Err(e) = std::str::from_utf8(text) {
        let before = &text[..e.valid_up_to()];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        return Err(GrammarError::SyntaxError {
            line,
            column: 1,
            message: "grammar is not valid UTF-8".into(),
        });
    }
    let lexer = Lexer {
        src: text,
        pos: 0,
        line: 1,
        col: 1,
    };
    let toks = lexer.tokens()?;
    Parser { toks, pos: 0 }.file()
}
