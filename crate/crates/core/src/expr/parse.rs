//! Tokenizer and recursive-descent parser for the system DSL.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::model::{ModelError, Region, SystemModel};
use super::{Expr, Func, Interval};
use crate::poly::vars;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: undeclared variable `{name}`")]
    Undeclared { line: usize, col: usize, name: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: &[&str] = &[
    "<=", "'", "=", ";", ",", "[", "]", "(", ")", "+", "-", "*", "/", "^",
];

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (sl, sc) = (line, col);
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
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
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                line: sl,
                col: sc,
                msg: format!("bad number `{text}`"),
            })?;
            col += i - start;
            out.push(Token { tok: Tok::Num(v), line: sl, col: sc });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: sl,
                col: sc,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Token { tok: Tok::Sym(s), line: sl, col: sc });
            }
            None => {
                return Err(ParseError::Syntax {
                    line: sl,
                    col: sc,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    names: &'a [String],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError::Syntax { line, col, msg: msg.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(x) if *x == s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => self.err(format!("expected `{kw}`")),
        }
    }

    fn signed_number(&mut self) -> Result<f64, ParseError> {
        let neg = self.eat("-");
        if !neg {
            self.eat("+");
        }
        match self.bump() {
            Tok::Num(v) => Ok(if neg { -v } else { v }),
            _ => {
                self.pos -= 1;
                self.err("expected number")
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat("+") {
                let rhs = self.term()?;
                lhs = Expr::Add(Arc::new(lhs), Arc::new(rhs));
            } else if self.eat("-") {
                let rhs = self.term()?;
                lhs = Expr::Sub(Arc::new(lhs), Arc::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat("*") {
                let rhs = self.unary()?;
                lhs = Expr::Mul(Arc::new(lhs), Arc::new(rhs));
            } else if self.eat("/") {
                let rhs = self.unary()?;
                lhs = Expr::Div(Arc::new(lhs), Arc::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat("-") {
            let a = self.unary()?;
            return Ok(match a {
                Expr::Const(c) => Expr::Const(-c),
                a => Expr::Neg(Arc::new(a)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat("^") {
            let neg = self.eat("-");
            let k = match self.bump() {
                Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
                _ => {
                    self.pos -= 1;
                    return self.err("exponent must be an integer literal");
                }
            };
            return Ok(Expr::Pow(Arc::new(base), if neg { -k } else { k }));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(f) = Func::from_name(&name) {
                    if self.eat("(") {
                        let a = self.expr()?;
                        self.expect(")")?;
                        return Ok(Expr::Func(f, Arc::new(a)));
                    }
                }
                match self.names.iter().position(|n| *n == name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(ParseError::Undeclared { line, col, name }),
                }
            }
            _ => self.err("expected expression"),
        }
    }
}

/// Parse a bare expression over the given variable names.
pub fn parse_expr(src: &str, names: &[String]) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0, names };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.err("trailing input");
    }
    Ok(e)
}

fn namelist(p: &mut Parser<'_>) -> Result<Vec<String>, ParseError> {
    let mut out = Vec::new();
    loop {
        match p.peek().clone() {
            Tok::Ident(s) => {
                p.bump();
                if out.contains(&s) {
                    return p.err(format!("duplicate name `{s}`"));
                }
                out.push(s);
                p.eat(",");
            }
            Tok::Sym(";") => {
                p.bump();
                return Ok(out);
            }
            _ => return p.err("expected name or `;`"),
        }
    }
}

fn output_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('y')?;
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Parse a system description into a validated [`SystemModel`].
pub fn parse_system(src: &str) -> Result<SystemModel, ParseError> {
    let toks = tokenize(src)?;
    let empty: Vec<String> = Vec::new();
    let mut p = Parser { toks, pos: 0, names: &empty };
    p.keyword("states")?;
    let states = namelist(&mut p)?;
    let inputs = if matches!(p.peek(), Tok::Ident(s) if s == "inputs") {
        p.keyword("inputs")?;
        namelist(&mut p)?
    } else {
        Vec::new()
    };
    if states.is_empty() {
        return p.err("at least one state is required");
    }
    let names: Vec<String> = states.iter().chain(inputs.iter()).cloned().collect();
    if let Some(d) = names.iter().find(|n| inputs.contains(n) && states.contains(n)) {
        return p.err(format!("`{d}` declared as both state and input"));
    }
    let (toks, pos) = (std::mem::take(&mut p.toks), p.pos);
    let mut p = Parser { toks, pos, names: &names };

    let nv = names.len();
    let mut f: Vec<Option<Expr>> = vec![None; states.len()];
    let mut h: BTreeMap<usize, Expr> = BTreeMap::new();
    let mut boxes: Vec<Option<Interval>> = vec![None; nv];
    let mut ineqs = Vec::new();
    let mut options = BTreeMap::new();
    let vlist = vars(&names);

    while *p.peek() != Tok::Eof {
        let (line, col) = p.here();
        let head = p.ident()?;
        match head.as_str() {
            "region" => {
                if matches!(p.peek(), Tok::Ident(s) if s == "ineq") {
                    p.bump();
                    let e = p.expr()?;
                    p.expect("<=")?;
                    let z = p.signed_number()?;
                    if z != 0.0 {
                        return p.err("inequality right-hand side must be 0");
                    }
                    let g = e.to_polynomial(&vlist).ok_or(ParseError::Syntax {
                        line,
                        col,
                        msg: "region inequality must be polynomial".into(),
                    })?;
                    ineqs.push(g);
                } else {
                    let v = p.ident()?;
                    let idx = match names.iter().position(|n| *n == v) {
                        Some(i) => i,
                        None => return Err(ParseError::Undeclared { line, col, name: v }),
                    };
                    p.keyword("in")?;
                    p.expect("[")?;
                    let lo = p.signed_number()?;
                    p.expect(",")?;
                    let hi = p.signed_number()?;
                    p.expect("]")?;
                    if lo > hi {
                        return p.err("empty interval");
                    }
                    boxes[idx] = Some(Interval::new(lo, hi));
                }
                p.expect(";")?;
            }
            "option" => {
                let key = p.ident()?;
                p.expect("=")?;
                let mut val = String::new();
                loop {
                    match p.bump() {
                        Tok::Sym(";") => break,
                        Tok::Eof => return p.err("unterminated option"),
                        Tok::Num(v) => val.push_str(&v.to_string()),
                        Tok::Ident(s) => val.push_str(&s),
                        Tok::Sym(s) => val.push_str(s),
                    }
                }
                options.insert(key, val);
            }
            _ if matches!(p.peek(), Tok::Sym("'")) => {
                p.bump();
                let i = match states.iter().position(|s| *s == head) {
                    Some(i) => i,
                    None => return Err(ParseError::Undeclared { line, col, name: head }),
                };
                p.expect("=")?;
                let e = p.expr()?;
                p.expect(";")?;
                if f[i].is_some() {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        msg: format!("duplicate equation for `{head}`"),
                    });
                }
                f[i] = Some(e);
            }
            _ => match output_index(&head) {
                Some(k) if k >= 1 && *p.peek() == Tok::Sym("=") => {
                    p.bump();
                    let e = p.expr()?;
                    p.expect(";")?;
                    if h.insert(k, e).is_some() {
                        return Err(ParseError::Syntax {
                            line,
                            col,
                            msg: format!("duplicate output `{head}`"),
                        });
                    }
                }
                _ => {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        msg: format!("unexpected `{head}`"),
                    })
                }
            },
        }
    }

    let mut fs = Vec::with_capacity(states.len());
    for (i, e) in f.into_iter().enumerate() {
        match e {
            Some(e) => fs.push(e),
            None => return Err(ModelError::MissingEquation(states[i].clone()).into()),
        }
    }
    let p_out = h.len();
    if let Some((&k, _)) = h.iter().next_back() {
        if k != p_out {
            return Err(ModelError::OutputNumbering.into());
        }
    }
    let hs: Vec<Expr> = h.into_values().collect();
    let region = Region::new(boxes, ineqs)?;
    Ok(SystemModel::new(states, inputs, fs, hs, region, options)?)
}
