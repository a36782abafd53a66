//! Polynomials whose coefficients are affine in decision variables.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::poly::{MultiIndex, Polynomial, Vars};

/// A scalar decision variable: a free scalar or an entry of a Gram block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DecVar {
    Free(usize),
    /// Entry `(i, j)`, `i <= j`, of Gram block `block`.
    Gram { block: usize, i: usize, j: usize },
}

/// Values for every decision variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub free: Vec<f64>,
    pub grams: Vec<DMatrix<f64>>,
}

impl Assignment {
    pub fn value(&self, v: DecVar) -> f64 {
        match v {
            DecVar::Free(k) => self.free[k],
            DecVar::Gram { block, i, j } => self.grams[block][(i, j)],
        }
    }
}

/// `constant + Σ c_v v`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub constant: f64,
    pub terms: BTreeMap<DecVar, f64>,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr { constant: c, terms: BTreeMap::new() }
    }

    pub fn var(v: DecVar, c: f64) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(v, c);
        LinExpr { constant: 0.0, terms }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.is_empty()
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &LinExpr, s: f64) {
        self.constant += s * other.constant;
        for (v, c) in &other.terms {
            let e = self.terms.entry(*v).or_insert(0.0);
            *e += s * c;
            if *e == 0.0 {
                self.terms.remove(v);
            }
        }
    }

    pub fn scaled(&self, s: f64) -> LinExpr {
        let mut out = LinExpr::default();
        out.add_scaled(self, s);
        out
    }

    pub fn eval(&self, a: &Assignment) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * a.value(*v)).sum::<f64>()
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        if self.constant != 0.0 || self.terms.is_empty() {
            write!(f, "{}", self.constant)?;
            first = false;
        }
        for (v, c) in &self.terms {
            let sign = if *c < 0.0 { "-" } else { "+" };
            if first {
                if *c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            match v {
                DecVar::Free(k) => write!(f, "{}*c{}", c.abs(), k)?,
                DecVar::Gram { block, i, j } => write!(f, "{}*Q{}[{},{}]", c.abs(), block, i, j)?,
            }
        }
        Ok(())
    }
}

/// Polynomial in the indeterminates with [`LinExpr`] coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamPoly {
    vars: Vars,
    terms: BTreeMap<MultiIndex, LinExpr>,
}

impl ParamPoly {
    pub fn zero(vars: Vars) -> Self {
        ParamPoly { vars, terms: BTreeMap::new() }
    }

    pub fn from_poly(p: &Polynomial) -> Self {
        ParamPoly {
            vars: p.vars().clone(),
            terms: p.terms().map(|(a, c)| (a.clone(), LinExpr::constant(*c))).collect(),
        }
    }

    /// `Σ_k v_k x^{basis_k}` with fresh free variables `first..`.
    pub fn free_combination(vars: Vars, basis: &[MultiIndex], first: usize) -> Self {
        let mut p = ParamPoly::zero(vars);
        for (k, b) in basis.iter().enumerate() {
            p.add_term(b.clone(), &LinExpr::var(DecVar::Free(first + k), 1.0));
        }
        p
    }

    /// `z' Q z` for the Gram block `block` over `basis`.
    pub fn gram(vars: Vars, basis: &[MultiIndex], block: usize) -> Self {
        let mut p = ParamPoly::zero(vars);
        for i in 0..basis.len() {
            for j in i..basis.len() {
                let c = if i == j { 1.0 } else { 2.0 };
                p.add_term(basis[i].add(&basis[j]), &LinExpr::var(DecVar::Gram { block, i, j }, c));
            }
        }
        p
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &LinExpr)> {
        self.terms.iter()
    }

    pub fn coeff(&self, a: &MultiIndex) -> Option<&LinExpr> {
        self.terms.get(a)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn add_term(&mut self, a: MultiIndex, c: &LinExpr) {
        let e = self.terms.entry(a.clone()).or_default();
        e.add_scaled(c, 1.0);
        if e.is_zero() {
            self.terms.remove(&a);
        }
    }

    fn check(&self, other_vars: &Vars) {
        assert!(self.vars == *other_vars, "indeterminate lists differ");
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &ParamPoly, s: f64) {
        self.check(&other.vars);
        for (a, c) in &other.terms {
            self.add_term(a.clone(), &c.scaled(s));
        }
    }

    pub fn add_poly(&mut self, p: &Polynomial, s: f64) {
        self.check(p.vars());
        for (a, c) in p.terms() {
            self.add_term(a.clone(), &LinExpr::constant(s * c));
        }
    }

    /// `self += v * p` for a single decision variable.
    pub fn add_var_times(&mut self, v: DecVar, p: &Polynomial) {
        self.check(p.vars());
        for (a, c) in p.terms() {
            self.add_term(a.clone(), &LinExpr::var(v, *c));
        }
    }

    pub fn mul_poly(&self, p: &Polynomial) -> ParamPoly {
        self.check(p.vars());
        let mut out = ParamPoly::zero(self.vars.clone());
        for (a, la) in &self.terms {
            for (b, cb) in p.terms() {
                out.add_term(a.add(b), &la.scaled(*cb));
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> ParamPoly {
        let mut out = ParamPoly::zero(self.vars.clone());
        out.add_scaled(self, s);
        out
    }

    pub fn diff_index(&self, i: usize) -> ParamPoly {
        let mut out = ParamPoly::zero(self.vars.clone());
        for (a, c) in &self.terms {
            if a[i] > 0 {
                let mut b = a.clone();
                b.0[i] -= 1;
                out.add_term(b, &c.scaled(a[i] as f64));
            }
        }
        out
    }

    /// Substitute decision values.
    pub fn eval(&self, asg: &Assignment) -> Polynomial {
        Polynomial::from_terms(
            self.vars.clone(),
            self.terms.iter().map(|(a, c)| (a.clone(), c.eval(asg))),
        )
    }

    /// Monomials with a nonzero coefficient expression.
    pub fn support(&self) -> Vec<MultiIndex> {
        self.terms.keys().cloned().collect()
    }

    /// Every decision variable that appears.
    pub fn decision_vars(&self) -> std::collections::BTreeSet<DecVar> {
        self.terms.values().flat_map(|l| l.terms.keys().copied()).collect()
    }

    /// Degree restricted to the variables in `idx`.
    pub fn max_degree_over(&self, idx: &[usize]) -> u32 {
        self.terms
            .keys()
            .map(|a| idx.iter().map(|&i| a[i]).sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn min_degree_over(&self, idx: &[usize]) -> u32 {
        self.terms
            .keys()
            .map(|a| idx.iter().map(|&i| a[i]).sum::<u32>())
            .min()
            .unwrap_or(0)
    }

    /// Part of `self` whose exponent on variable `v` equals `e`, with that
    /// exponent cleared.
    pub fn coefficient_of(&self, v: usize, e: u32) -> ParamPoly {
        let mut out = ParamPoly::zero(self.vars.clone());
        for (a, c) in &self.terms {
            if a[v] == e {
                let mut b = a.clone();
                b.0[v] = 0;
                out.add_term(b, c);
            }
        }
        out
    }
}

impl fmt::Display for ParamPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (a, c)) in self.terms.iter().rev().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for (i, &e) in a.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*{}", self.vars[i])?,
                    _ => write!(f, "*{}^{}", self.vars[i], e)?,
                }
            }
        }
        Ok(())
    }
}
