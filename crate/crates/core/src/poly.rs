//! Sparse multivariate polynomials with `f64` coefficients over an ordered
//! list of named indeterminates.
//!
//! Terms are kept in a `BTreeMap` keyed by [`MultiIndex`], whose ordering is
//! graded-lexicographic, so iteration order is deterministic everywhere.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coefficients below this magnitude are dropped after every operation.
pub const PURGE_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("variable lists differ: {0:?} vs {1:?}")]
    VarMismatch(Vec<String>, Vec<String>),
    #[error("unknown variable `{0}`")]
    UnknownVar(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("affine map has zero scale for variable {0}")]
    ZeroScale(usize),
}

/// Exponent vector of a monomial.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// Unit index `e_i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total degree.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `β!` as a float.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| factorial(a)).product()
    }

    /// Evaluate `z^α`.
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(z)
            .map(|(&a, &x)| x.powi(a as i32))
            .product()
    }

    /// True when every exponent is even.
    pub fn is_even(&self) -> bool {
        self.0.iter().all(|a| a % 2 == 0)
    }
}

impl std::ops::Index<usize> for MultiIndex {
    type Output = u32;
    fn index(&self, i: usize) -> &u32 {
        &self.0[i]
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// All multi-indices in `n` variables with total degree `<= max_degree`.
///
/// Ordered by ascending degree; within a degree the `x1`-heaviest index
/// comes first. The count is `C(n + d, d)`.
pub fn monomial_basis(n: usize, max_degree: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for d in 0..=max_degree {
        let mut cur = vec![0u32; n];
        exact_degree(n, d, 0, &mut cur, &mut out);
    }
    out
}

/// All multi-indices of total degree exactly `d`, `x1`-heaviest first.
pub fn exact_degree_indices(n: usize, d: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    exact_degree(n, d, 0, &mut cur, &mut out);
    out
}

fn exact_degree(n: usize, d: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if n == 0 {
        if d == 0 {
            out.push(MultiIndex(vec![]));
        }
        return;
    }
    if pos == n - 1 {
        cur[pos] = d;
        out.push(MultiIndex(cur.clone()));
        cur[pos] = 0;
        return;
    }
    for a in (0..=d).rev() {
        cur[pos] = a;
        exact_degree(n, d - a, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// Shared, ordered list of indeterminate names.
pub type Vars = Arc<[String]>;

pub fn vars<S: AsRef<str>>(names: &[S]) -> Vars {
    names.iter().map(|s| s.as_ref().to_string()).collect()
}

/// Sparse polynomial.
#[derive(Clone, PartialEq, Debug)]
pub struct Polynomial {
    vars: Vars,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn zero(vars: Vars) -> Self {
        Polynomial {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: Vars, c: f64) -> Self {
        let n = vars.len();
        Self::monomial(vars, MultiIndex::zero(n), c)
    }

    /// The indeterminate with position `i`.
    pub fn var(vars: Vars, i: usize) -> Self {
        let n = vars.len();
        Self::monomial(vars, MultiIndex::unit(n, i), 1.0)
    }

    pub fn monomial(vars: Vars, alpha: MultiIndex, c: f64) -> Self {
        assert_eq!(alpha.len(), vars.len(), "multi-index length");
        let mut p = Self::zero(vars);
        if c.abs() >= PURGE_TOL {
            p.terms.insert(alpha, c);
        }
        p
    }

    /// Build from `(index, coefficient)` pairs; duplicates are summed.
    pub fn from_terms<I: IntoIterator<Item = (MultiIndex, f64)>>(vars: Vars, terms: I) -> Self {
        let mut p = Self::zero(vars);
        for (a, c) in terms {
            assert_eq!(a.len(), p.vars.len(), "multi-index length");
            *p.terms.entry(a).or_insert(0.0) += c;
        }
        p.purge();
        p
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&MultiIndex, &f64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(MultiIndex::degree).max()
    }

    /// Degree in a single variable, `None` for the zero polynomial.
    pub fn degree_in(&self, i: usize) -> Option<u32> {
        self.terms.keys().map(|a| a[i]).max()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn var_index(&self, name: &str) -> Result<usize, PolyError> {
        self.vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| PolyError::UnknownVar(name.to_string()))
    }

    fn purge(&mut self) {
        self.terms.retain(|_, c| c.abs() >= PURGE_TOL);
    }

    fn check_vars(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.vars == other.vars {
            Ok(())
        } else {
            Err(PolyError::VarMismatch(
                self.vars.to_vec(),
                other.vars.to_vec(),
            ))
        }
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (a, c) in &other.terms {
            *out.terms.entry(a.clone()).or_insert(0.0) += c;
        }
        out.purge();
        Ok(out)
    }

    pub fn try_sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.try_add(&other.scale(-1.0))
    }

    pub fn try_mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_vars(other)?;
        let mut terms: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                *terms.entry(a.add(b)).or_insert(0.0) += ca * cb;
            }
        }
        let mut out = Polynomial {
            vars: self.vars.clone(),
            terms,
        };
        out.purge();
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        let mut out = Polynomial {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(a, v)| (a.clone(), v * c)).collect(),
        };
        out.purge();
        out
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut acc = Polynomial::constant(self.vars.clone(), 1.0);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Formal partial derivative with respect to the named variable.
    pub fn diff(&self, var: &str) -> Result<Polynomial, PolyError> {
        let i = self.var_index(var)?;
        Ok(self.diff_index(i))
    }

    /// Formal partial derivative with respect to variable position `i`.
    pub fn diff_index(&self, i: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.vars.clone());
        for (a, c) in &self.terms {
            if a[i] > 0 {
                let mut b = a.clone();
                b.0[i] -= 1;
                *out.terms.entry(b).or_insert(0.0) += c * f64::from(a[i]);
            }
        }
        out.purge();
        out
    }

    /// Evaluate at a point; errors on dimension mismatch.
    pub fn eval(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.vars.len() {
            return Err(PolyError::Dimension {
                expected: self.vars.len(),
                got: point.len(),
            });
        }
        Ok(self.eval_unchecked(point))
    }

    /// Evaluate at a point of the right length.
    pub fn eval_unchecked(&self, point: &[f64]) -> f64 {
        let n = self.vars.len();
        let mut powers: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let d = self.degree_in(i).unwrap_or(0) as usize;
            let mut pw = Vec::with_capacity(d + 1);
            let mut acc = 1.0;
            for _ in 0..=d {
                pw.push(acc);
                acc *= point[i];
            }
            powers.push(pw);
        }
        self.terms
            .iter()
            .map(|(a, c)| {
                a.0.iter()
                    .enumerate()
                    .fold(*c, |acc, (i, &e)| acc * powers[i][e as usize])
            })
            .sum()
    }

    /// Substitute `x_i = scale_i * z_i + offset_i`.
    pub fn compose_affine(&self, map: &AffineMap) -> Result<Polynomial, PolyError> {
        let n = self.vars.len();
        if map.scale.len() != n || map.offset.len() != n {
            return Err(PolyError::Dimension {
                expected: n,
                got: map.scale.len(),
            });
        }
        if let Some(i) = map.scale.iter().position(|&s| s == 0.0) {
            return Err(PolyError::ZeroScale(i));
        }
        // Powers of each univariate factor, as dense coefficient lists.
        let mut factor_pows: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
        for i in 0..n {
            let d = self.degree_in(i).unwrap_or(0) as usize;
            let mut pw = vec![vec![1.0]];
            for k in 1..=d {
                let prev: &Vec<f64> = &pw[k - 1];
                let mut next = vec![0.0; k + 1];
                for (j, c) in prev.iter().enumerate() {
                    next[j] += c * map.offset[i];
                    next[j + 1] += c * map.scale[i];
                }
                pw.push(next);
            }
            factor_pows.push(pw);
        }
        let mut out: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        for (a, c) in &self.terms {
            let mut partial: Vec<(Vec<u32>, f64)> = vec![(Vec::with_capacity(n), *c)];
            for i in 0..n {
                let f = &factor_pows[i][a[i] as usize];
                let mut next = Vec::with_capacity(partial.len() * f.len());
                for (e, v) in &partial {
                    for (j, fj) in f.iter().enumerate() {
                        if *fj != 0.0 {
                            let mut e2 = e.clone();
                            e2.push(j as u32);
                            next.push((e2, v * fj));
                        }
                    }
                }
                partial = next;
            }
            for (e, v) in partial {
                *out.entry(MultiIndex(e)).or_insert(0.0) += v;
            }
        }
        let mut p = Polynomial {
            vars: self.vars.clone(),
            terms: out,
        };
        p.purge();
        Ok(p)
    }

    /// Re-express over a different variable list, matching by name.
    /// Every variable actually used must exist in the target list.
    pub fn embed(&self, target: &Vars) -> Result<Polynomial, PolyError> {
        let mut map = Vec::with_capacity(self.vars.len());
        for v in self.vars.iter() {
            map.push(target.iter().position(|t| t == v));
        }
        let mut out = Polynomial::zero(target.clone());
        for (a, c) in &self.terms {
            let mut b = vec![0u32; target.len()];
            for (i, &e) in a.0.iter().enumerate() {
                if e > 0 {
                    match map[i] {
                        Some(j) => b[j] += e,
                        None => return Err(PolyError::UnknownVar(self.vars[i].clone())),
                    }
                }
            }
            *out.terms.entry(MultiIndex(b)).or_insert(0.0) += c;
        }
        out.purge();
        Ok(out)
    }

    /// Replace variable `i` by the polynomial `q` (over the same variables).
    pub fn substitute(&self, i: usize, q: &Polynomial) -> Polynomial {
        let d = self.degree_in(i).unwrap_or(0);
        let mut qpow = vec![Polynomial::constant(self.vars.clone(), 1.0)];
        for k in 1..=d as usize {
            let next = &qpow[k - 1] * q;
            qpow.push(next);
        }
        let mut out = Polynomial::zero(self.vars.clone());
        for (a, c) in &self.terms {
            let mut rest = a.clone();
            let e = rest.0[i];
            rest.0[i] = 0;
            let m = Polynomial::monomial(self.vars.clone(), rest, *c);
            out = &out + &(&m * &qpow[e as usize]);
        }
        out
    }

    /// Drop every term whose index has a nonzero exponent on any variable in `idx`.
    pub fn zero_vars(&self, idx: &[usize]) -> Polynomial {
        let mut out = self.clone();
        out.terms.retain(|a, _| idx.iter().all(|&i| a[i] == 0));
        out
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Polynomial) -> f64 {
        let d = self - other;
        d.max_abs_coeff()
    }
}

impl<'a> std::ops::Add<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.try_add(rhs).expect("polynomial variable lists must match")
    }
}

impl<'a> std::ops::Sub<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.try_sub(rhs).expect("polynomial variable lists must match")
    }
}

impl<'a> std::ops::Mul<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.try_mul(rhs).expect("polynomial variable lists must match")
    }
}

impl std::ops::Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

fn fmt_monomial(vars: &[String], a: &MultiIndex) -> String {
    let mut parts = Vec::new();
    for (i, &e) in a.0.iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(vars[i].clone()),
            _ => parts.push(format!("{}^{}", vars[i], e)),
        }
    }
    parts.join("*")
}

/// Terms in descending graded-lex order, `{:.6}` coefficients.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (a, c)) in self.terms.iter().rev().enumerate() {
            let mono = fmt_monomial(&self.vars, a);
            let body = if mono.is_empty() {
                format!("{:.6}", c.abs())
            } else {
                format!("{:.6}*{}", c.abs(), mono)
            };
            match (k, *c < 0.0) {
                (0, true) => write!(f, "-{body}")?,
                (0, false) => write!(f, "{body}")?,
                (_, true) => write!(f, " - {body}")?,
                (_, false) => write!(f, " + {body}")?,
            }
        }
        Ok(())
    }
}

/// Serialized form: parallel arrays of exponent vectors and coefficients,
/// in ascending graded-lex order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyDoc {
    pub monomials: Vec<Vec<u32>>,
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn to_doc(&self) -> PolyDoc {
        PolyDoc {
            monomials: self.terms.keys().map(|a| a.0.clone()).collect(),
            coeffs: self.terms.values().copied().collect(),
        }
    }

    pub fn from_doc(vars: Vars, doc: &PolyDoc) -> Result<Polynomial, PolyError> {
        if doc.monomials.len() != doc.coeffs.len() {
            return Err(PolyError::Dimension {
                expected: doc.monomials.len(),
                got: doc.coeffs.len(),
            });
        }
        for m in &doc.monomials {
            if m.len() != vars.len() {
                return Err(PolyError::Dimension { expected: vars.len(), got: m.len() });
            }
        }
        Ok(Polynomial::from_terms(
            vars,
            doc.monomials
                .iter()
                .zip(&doc.coeffs)
                .map(|(m, c)| (MultiIndex(m.clone()), *c)),
        ))
    }
}

/// Per-variable affine change of coordinates `x = scale * z + offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
}

impl AffineMap {
    pub fn new(scale: Vec<f64>, offset: Vec<f64>) -> Result<Self, PolyError> {
        if scale.len() != offset.len() {
            return Err(PolyError::Dimension {
                expected: scale.len(),
                got: offset.len(),
            });
        }
        if let Some(i) = scale.iter().position(|&s| s == 0.0) {
            return Err(PolyError::ZeroScale(i));
        }
        Ok(AffineMap { scale, offset })
    }

    pub fn identity(n: usize) -> Self {
        AffineMap {
            scale: vec![1.0; n],
            offset: vec![0.0; n],
        }
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.scale.iter().zip(&self.offset))
            .map(|(z, (s, o))| s * z + o)
            .collect()
    }

    pub fn inverse(&self) -> AffineMap {
        AffineMap {
            scale: self.scale.iter().map(|s| 1.0 / s).collect(),
            offset: self
                .scale
                .iter()
                .zip(&self.offset)
                .map(|(s, o)| -o / s)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grlex_basis_order() {
        let b = monomial_basis(2, 1);
        assert_eq!(
            b,
            vec![
                MultiIndex(vec![0, 0]),
                MultiIndex(vec![1, 0]),
                MultiIndex(vec![0, 1])
            ]
        );
    }

    #[test]
    fn display_matches_reference_style() {
        let v = vars(&["x1"]);
        let p = Polynomial::from_terms(
            v,
            [
                (MultiIndex(vec![4]), -0.4581),
                (MultiIndex(vec![2]), 1.416),
            ],
        );
        assert_eq!(p.to_string(), "-0.458100*x1^4 + 1.416000*x1^2");
    }
}
