//! Expression trees for system dynamics, with a small DSL parser,
//! symbolic differentiation and interval enclosures.
//!
//! Variables are positions into the owning model's variable list
//! (states first, then inputs); names are only needed for printing.

mod diff;
mod interval;
mod model;
mod parse;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::poly::{MultiIndex, Polynomial, Vars};

pub use diff::diff_expr;
pub use interval::{bound_sup_abs, eval_interval, lipschitz_bound, Interval, IntervalError};
pub use model::{ModelError, Region, SystemModel};
pub use parse::{parse_expr, parse_system, ParseError};

/// Unary elementary functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Tanh => x.tanh(),
        }
    }
}

/// Expression node. Children are shared, so cloning is cheap.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Func(Func, Arc<Expr>),
}

impl Expr {
    pub fn is_const(&self, c: f64) -> bool {
        matches!(self, Expr::Const(v) if *v == c)
    }

    /// Point evaluation; domain violations yield NaN.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, k) => a.eval(x).powi(*k),
            Expr::Func(f, a) => f.apply(a.eval(x)),
        }
    }

    /// Variable positions the expression mentions.
    pub fn vars_used(&self) -> BTreeSet<usize> {
        let mut s = BTreeSet::new();
        self.collect_vars(&mut s);
        s
    }

    fn collect_vars(&self, s: &mut BTreeSet<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(i) => {
                s.insert(*i);
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => a.collect_vars(s),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(s);
                b.collect_vars(s);
            }
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => 1 + a.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    /// Convert to a polynomial if the tree is polynomial (division only by
    /// nonzero constants, transcendental functions only of constants).
    pub fn to_polynomial(&self, vars: &Vars) -> Option<Polynomial> {
        let n = vars.len();
        Some(match self {
            Expr::Const(c) => Polynomial::constant(vars.clone(), *c),
            Expr::Var(i) => {
                if *i >= n {
                    return None;
                }
                Polynomial::monomial(vars.clone(), MultiIndex::unit(n, *i), 1.0)
            }
            Expr::Neg(a) => -&a.to_polynomial(vars)?,
            Expr::Add(a, b) => &a.to_polynomial(vars)? + &b.to_polynomial(vars)?,
            Expr::Sub(a, b) => &a.to_polynomial(vars)? - &b.to_polynomial(vars)?,
            Expr::Mul(a, b) => &a.to_polynomial(vars)? * &b.to_polynomial(vars)?,
            Expr::Div(a, b) => {
                let d = b.to_polynomial(vars)?;
                if d.degree().unwrap_or(0) > 0 {
                    return None;
                }
                let c = d.coeff(&MultiIndex::zero(n));
                if c == 0.0 {
                    return None;
                }
                a.to_polynomial(vars)?.scale(1.0 / c)
            }
            Expr::Pow(a, k) => {
                if *k < 0 {
                    return None;
                }
                a.to_polynomial(vars)?.pow(*k as u32)
            }
            Expr::Func(f, a) => {
                let p = a.to_polynomial(vars)?;
                if p.degree().unwrap_or(0) > 0 {
                    return None;
                }
                let v = f.apply(p.coeff(&MultiIndex::zero(n)));
                if !v.is_finite() {
                    return None;
                }
                Polynomial::constant(vars.clone(), v)
            }
        })
    }

    /// Expression equal to a polynomial.
    pub fn from_polynomial(p: &Polynomial) -> Expr {
        let mut acc = Expr::Const(0.0);
        for (a, c) in p.terms().rev() {
            let mut term = Expr::Const(*c);
            for (i, &e) in a.0.iter().enumerate() {
                if e > 0 {
                    term = mul(term, pow(Expr::Var(i), e as i32));
                }
            }
            acc = add(acc, term);
        }
        acc
    }

    /// Printable view using the given variable names.
    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { e: self, names }
    }
}

// Smart constructors with light simplification.

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(x) => (*x).clone(),
        a => Expr::Neg(Arc::new(a)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (Expr::Const(x), _) if *x == 0.0 => b,
        (_, Expr::Const(y)) if *y == 0.0 => a,
        (_, Expr::Neg(y)) => sub(a, (**y).clone()),
        _ => Expr::Add(Arc::new(a), Arc::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (_, Expr::Const(y)) if *y == 0.0 => a,
        (Expr::Const(x), _) if *x == 0.0 => neg(b),
        (_, Expr::Neg(y)) => add(a, (**y).clone()),
        _ if a == b => Expr::Const(0.0),
        _ => Expr::Sub(Arc::new(a), Arc::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (Expr::Const(x), _) | (_, Expr::Const(x)) if *x == 0.0 => Expr::Const(0.0),
        (Expr::Const(x), _) if *x == 1.0 => b,
        (_, Expr::Const(y)) if *y == 1.0 => a,
        (Expr::Const(x), _) if *x == -1.0 => neg(b),
        (_, Expr::Const(_)) => mul(b, a),
        (Expr::Const(x), Expr::Mul(p, q)) => match &**p {
            Expr::Const(y) => mul(Expr::Const(x * y), (**q).clone()),
            _ => Expr::Mul(Arc::new(a), Arc::new(b)),
        },
        (Expr::Const(x), Expr::Neg(q)) => mul(Expr::Const(-x), (**q).clone()),
        (Expr::Neg(p), _) => neg(mul((**p).clone(), b)),
        (_, Expr::Neg(q)) => neg(mul(a, (**q).clone())),
        _ => Expr::Mul(Arc::new(a), Arc::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => Expr::Const(x / y),
        (Expr::Const(x), _) if *x == 0.0 => Expr::Const(0.0),
        (_, Expr::Const(y)) if *y == 1.0 => a,
        _ => Expr::Div(Arc::new(a), Arc::new(b)),
    }
}

pub fn pow(a: Expr, k: i32) -> Expr {
    match (&a, k) {
        (_, 0) => Expr::Const(1.0),
        (_, 1) => a,
        (Expr::Const(c), _) => Expr::Const(c.powi(k)),
        (Expr::Pow(b, j), _) => pow((**b).clone(), j * k),
        _ => Expr::Pow(Arc::new(a), k),
    }
}

pub fn func(f: Func, a: Expr) -> Expr {
    Expr::Func(f, Arc::new(a))
}

/// Printer producing text the parser maps back to the same tree.
pub struct ExprDisplay<'a> {
    e: &'a Expr,
    names: &'a [String],
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => PREC_NEG,
        Expr::Const(_) | Expr::Var(_) | Expr::Func(..) => PREC_ATOM,
        Expr::Neg(_) => PREC_NEG,
        Expr::Add(..) | Expr::Sub(..) => PREC_ADD,
        Expr::Mul(..) | Expr::Div(..) => PREC_MUL,
        Expr::Pow(..) => PREC_POW,
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, names: &[String], min: u8) -> fmt::Result {
    if prec(e) < min {
        write!(f, "(")?;
        write_expr(f, e, names, 0)?;
        return write!(f, ")");
    }
    match e {
        Expr::Const(c) => write!(f, "{c}"),
        Expr::Var(i) => match names.get(*i) {
            Some(n) => write!(f, "{n}"),
            None => write!(f, "v{i}"),
        },
        Expr::Neg(a) => {
            write!(f, "-")?;
            write_expr(f, a, names, PREC_NEG)
        }
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            write_expr(f, a, names, PREC_ADD)?;
            write!(f, "{}", if matches!(e, Expr::Add(..)) { " + " } else { " - " })?;
            write_expr(f, b, names, PREC_MUL)
        }
        Expr::Mul(a, b) | Expr::Div(a, b) => {
            write_expr(f, a, names, PREC_MUL)?;
            write!(f, "{}", if matches!(e, Expr::Mul(..)) { "*" } else { "/" })?;
            write_expr(f, b, names, PREC_NEG)
        }
        Expr::Pow(a, k) => {
            write_expr(f, a, names, PREC_ATOM)?;
            write!(f, "^{k}")
        }
        Expr::Func(g, a) => {
            write!(f, "{}(", g.name())?;
            write_expr(f, a, names, 0)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self.e, self.names, 0)
    }
}
