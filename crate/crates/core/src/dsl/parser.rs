//! Lexer and recursive-descent parser for reward programs.
//!
//! ```text
//! program     = { declaration } ;
//! declaration = "component" ident "weight" weight ":=" expr ;
//! weight      = [ "+" | "-" ] number ;
//! expr        = additive [ ( "<" | "<=" | ">" | ">=" ) additive ] ;
//! additive    = term { ( "+" | "-" ) term } ;
//! term        = unary { ( "*" | "/" ) unary } ;
//! unary       = "-" unary | primary ;
//! primary     = number | string | "action" "(" integer ")"
//!             | ident "(" [ expr { "," expr } ] ")" | "(" expr ")" ;
//! ident       = letter { letter | digit | "_" } ;
//! number      = digit { digit } [ "." { digit } ] [ ( "e" | "E" ) [ "+" | "-" ] digit { digit } ] ;
//! string      = '"' { char | '\"' | '\\' | '\n' } '"' ;
//! ```
//!
//! `#` starts a comment running to the end of the line. A declaration's
//! expression ends at the next `component` keyword or the end of input.

use super::ast::{BinOp, CmpOp, Expr};
use super::{Component, RewardProgram};
use std::collections::HashSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DslParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for DslParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, DslParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| DslParseError { line, column, message };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(1, &mut i, &mut col),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                col += i - start;
                out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: tl, column: tc });
            }
            c if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                let v: f64 = s.parse().map_err(|_| err(tl, tc, format!("malformed number `{s}`")))?;
                out.push(Token { tok: Tok::Num(v), line: tl, column: tc });
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                col += 1;
                loop {
                    match chars.get(i) {
                        None | Some('\n') => return Err(err(tl, tc, "unterminated string literal".into())),
                        Some('"') => {
                            i += 1;
                            col += 1;
                            break;
                        }
                        Some('\\') => {
                            let e = match chars.get(i + 1) {
                                Some('"') => '"',
                                Some('\\') => '\\',
                                Some('n') => '\n',
                                _ => return Err(err(line, col, "unknown escape in string literal".into())),
                            };
                            s.push(e);
                            i += 2;
                            col += 2;
                        }
                        Some(&c) => {
                            s.push(c);
                            i += 1;
                            col += 1;
                        }
                    }
                }
                out.push(Token { tok: Tok::Str(s), line: tl, column: tc });
            }
            _ => {
                let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
                let sym = match two.as_str() {
                    ":=" => Some(":="),
                    "<=" => Some("<="),
                    ">=" => Some(">="),
                    _ => None,
                };
                if let Some(s) = sym {
                    out.push(Token { tok: Tok::Sym(s), line: tl, column: tc });
                    advance(2, &mut i, &mut col);
                    continue;
                }
                let sym = match c {
                    '+' => "+",
                    '-' | '−' => "-",
                    '*' | '×' => "*",
                    '/' | '÷' => "/",
                    '<' => "<",
                    '>' => ">",
                    '≤' => "<=",
                    '≥' => ">=",
                    '(' => "(",
                    ')' => ")",
                    ',' => ",",
                    other => return Err(err(tl, tc, format!("unexpected character `{other}`"))),
                };
                out.push(Token { tok: Tok::Sym(sym), line: tl, column: tc });
                advance(1, &mut i, &mut col);
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, DslParseError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if !matches!(t.tok, Tok::Eof) {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> DslParseError {
        let t = self.peek();
        DslParseError { line: t.line, column: t.column, message: message.into() }
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(x) if *x == s)
    }

    fn at_keyword(&self, k: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(x) if x == k)
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.at_sym(s) {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!("expected `{s}`, found {}", describe(&self.peek().tok))))
        }
    }

    fn expect_keyword(&mut self, k: &str) -> PResult<()> {
        if self.at_keyword(k) {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!("expected `{k}`, found {}", describe(&self.peek().tok))))
        }
    }

    fn declaration(&mut self) -> PResult<(Component, usize, usize)> {
        let start = self.peek().clone();
        self.expect_keyword("component")?;
        let name = match self.bump() {
            Token { tok: Tok::Ident(n), .. } if !is_reserved(&n) => n,
            t => {
                return Err(DslParseError {
                    line: t.line,
                    column: t.column,
                    message: format!("expected a component name, found {}", describe(&t.tok)),
                })
            }
        };
        self.expect_keyword("weight")?;
        let weight = self.weight()?;
        self.expect_sym(":=")?;
        let expr = self.expr()?;
        if !matches!(self.peek().tok, Tok::Eof) && !self.at_keyword("component") {
            return Err(
                self.error_here(format!("unexpected {} after the expression of `{name}`", describe(&self.peek().tok)))
            );
        }
        Ok((Component { name, weight, expr }, start.line, start.column))
    }

    fn weight(&mut self) -> PResult<f64> {
        let sign = if self.at_sym("-") {
            self.bump();
            -1.0
        } else {
            if self.at_sym("+") {
                self.bump();
            }
            1.0
        };
        let t = self.bump();
        let v = match &t.tok {
            Tok::Num(v) => *v,
            Tok::Ident(s) if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity" | "nan") => f64::NAN,
            other => {
                return Err(DslParseError {
                    line: t.line,
                    column: t.column,
                    message: format!("expected a weight literal, found {}", describe(other)),
                })
            }
        };
        let w = sign * v;
        if !w.is_finite() {
            return Err(DslParseError { line: t.line, column: t.column, message: "weight must be finite".into() });
        }
        Ok(w)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let lhs = self.additive()?;
        let op = match &self.peek().tok {
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.additive()?;
        if matches!(&self.peek().tok, Tok::Sym("<" | "<=" | ">" | ">=")) {
            return Err(self.error_here("comparisons do not chain; add parentheses"));
        }
        Ok(Expr::Cmp(op, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match &self.peek().tok {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::bin(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match &self.peek().tok {
                Tok::Sym("*") => BinOp::Mul,
                Tok::Sym("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::bin(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.at_sym("-") {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        if self.at_keyword("component") || self.at_keyword("weight") {
            return Err(
                self.error_here(format!("keyword {} cannot appear in an expression", describe(&self.peek().tok)))
            );
        }
        let t = self.bump();
        match t.tok {
            Tok::Num(v) if v.is_finite() => Ok(Expr::Num(v)),
            Tok::Num(_) => {
                Err(DslParseError { line: t.line, column: t.column, message: "literal is not finite".into() })
            }
            Tok::Str(s) => Ok(Expr::Str(s)),
            Tok::Sym("(") => {
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "action" => {
                self.expect_sym("(")?;
                let it = self.bump();
                let idx = match it.tok {
                    Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v < 1e6 => v as usize,
                    other => {
                        return Err(DslParseError {
                            line: it.line,
                            column: it.column,
                            message: format!("action index must be a non-negative integer, found {}", describe(&other)),
                        })
                    }
                };
                self.expect_sym(")")?;
                Ok(Expr::Action(idx))
            }
            Tok::Ident(name) => {
                if !self.at_sym("(") {
                    return Err(self.error_here(format!(
                        "`{name}` must be called with parentheses (bare identifiers are not values)"
                    )));
                }
                self.bump();
                let mut args = Vec::new();
                if !self.at_sym(")") {
                    loop {
                        args.push(self.expr()?);
                        if self.at_sym(",") {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect_sym(")")?;
                Ok(Expr::Call(name, args))
            }
            other => Err(DslParseError {
                line: t.line,
                column: t.column,
                message: format!("expected an expression, found {}", describe(&other)),
            }),
        }
    }

    /// Skips to the next `component` keyword after an error in the
    /// declaration that started at token `start`.
    fn recover(&mut self, start: usize) {
        if self.pos == start {
            self.bump();
        }
        while !matches!(self.peek().tok, Tok::Eof) && !self.at_keyword("component") {
            self.bump();
        }
    }
}

fn is_reserved(name: &str) -> bool {
    matches!(name, "component" | "weight" | "action")
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Num(v) => format!("number {v}"),
        Tok::Str(s) => format!("string \"{s}\""),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses program text, collecting every error it can find.
pub fn parse_program(text: &str) -> Result<RewardProgram, Vec<DslParseError>> {
    let toks = lex(text).map_err(|e| vec![e])?;
    let mut p = Parser { toks, pos: 0 };
    let mut errors = Vec::new();
    let mut components = Vec::new();
    let mut names = HashSet::new();
    while !matches!(p.peek().tok, Tok::Eof) {
        let start = p.pos;
        match p.declaration() {
            Ok((c, line, column)) => {
                if !names.insert(c.name.clone()) {
                    errors.push(DslParseError {
                        line,
                        column,
                        message: format!("duplicate component name `{}`", c.name),
                    });
                }
                components.push(c);
            }
            Err(e) => {
                errors.push(e);
                p.recover(start);
            }
        }
    }
    if errors.is_empty() {
        Ok(RewardProgram { components, source_text: text.to_string() })
    } else {
        Err(errors)
    }
}
