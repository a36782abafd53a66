//! Truncated Taylor expansion at the origin with per-monomial remainder bounds.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ApproxError;
use crate::expr::{bound_sup_abs, diff_expr, Expr, Interval, SystemModel};
use crate::poly::{exact_degree_indices, monomial_basis, MultiIndex, Polynomial, Vars};

/// How `sup |R_β|` is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemainderMode {
    /// `sup |D^β f| / β!`, one bound per remainder monomial.
    PerBeta,
    /// `max_{|α| = k} sup |D^α f| / β!`.
    Uniform,
}

/// One expanded component: `f = poly + Σ_β R_β x^β` with `|R_β| <= bound_β`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorComponent {
    pub poly: Polynomial,
    pub remainder_monomials: Vec<MultiIndex>,
    pub remainder_bounds: Vec<f64>,
}

impl TaylorComponent {
    /// `Σ_β bound_β |z^β|`, the remainder envelope at `z`.
    pub fn remainder_envelope(&self, z: &[f64]) -> f64 {
        self.remainder_monomials
            .iter()
            .zip(&self.remainder_bounds)
            .map(|(b, r)| r * b.eval(z).abs())
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaylorSurrogate {
    pub order: u32,
    pub vars: Vars,
    pub n: usize,
    pub m: usize,
    pub f: Vec<TaylorComponent>,
    pub h: Vec<TaylorComponent>,
    pub mode: RemainderMode,
    /// Box the remainder bounds hold on (one interval per variable).
    pub bounds_box: Vec<Interval>,
}

struct DerivCache<'a> {
    base: &'a Expr,
    memo: HashMap<Vec<u32>, Expr>,
}

impl<'a> DerivCache<'a> {
    fn new(base: &'a Expr) -> Self {
        DerivCache { base, memo: HashMap::new() }
    }

    fn get(&mut self, alpha: &[u32]) -> Expr {
        if let Some(e) = self.memo.get(alpha) {
            return e.clone();
        }
        let e = match alpha.iter().rposition(|&a| a > 0) {
            None => self.base.clone(),
            Some(j) => {
                let mut prev = alpha.to_vec();
                prev[j] -= 1;
                let p = self.get(&prev);
                diff_expr(&p, j)
            }
        };
        self.memo.insert(alpha.to_vec(), e.clone());
        e
    }
}

fn expand_component(e: &Expr, vars: &Vars, k: u32) -> Result<(Polynomial, DerivCacheOut), ApproxError> {
    let nv = vars.len();
    let mut cache = DerivCache::new(e);
    let zero = vec![0.0; nv];
    let mut terms = Vec::new();
    for alpha in monomial_basis(nv, k.saturating_sub(1)) {
        let d = cache.get(&alpha.0);
        let v = d.eval(&zero);
        if !v.is_finite() {
            return Err(ApproxError::NotDifferentiable(format!(
                "derivative {:?} undefined at the origin",
                alpha.0
            )));
        }
        terms.push((alpha.clone(), v / alpha.factorial()));
    }
    let betas = exact_degree_indices(nv, k);
    let derivs = betas.iter().map(|b| cache.get(&b.0)).collect();
    Ok((Polynomial::from_terms(vars.clone(), terms), DerivCacheOut { betas, derivs }))
}

struct DerivCacheOut {
    betas: Vec<MultiIndex>,
    derivs: Vec<Expr>,
}

/// Remainder bounds for one component from its order-`k` derivatives.
fn component_bounds(
    out: &DerivCacheOut,
    bx: &[Option<Interval>],
    names: &[String],
    mode: RemainderMode,
    subdivisions: usize,
) -> Result<Vec<f64>, ApproxError> {
    let full_box = |d: &Expr| -> Result<Vec<Interval>, ApproxError> {
        let mut b = Vec::with_capacity(bx.len());
        for (i, iv) in bx.iter().enumerate() {
            match iv {
                Some(iv) => b.push(*iv),
                None if d.vars_used().contains(&i) => {
                    return Err(ApproxError::Unbounded(names[i].clone()))
                }
                None => b.push(Interval::point(0.0)),
            }
        }
        Ok(b)
    };
    let mut sups = Vec::with_capacity(out.derivs.len());
    for d in &out.derivs {
        if d.is_const(0.0) {
            sups.push(0.0);
            continue;
        }
        let b = full_box(d)?;
        sups.push(bound_sup_abs(d, &b, subdivisions).map_err(ApproxError::Interval)?);
    }
    let max_sup = sups.iter().copied().fold(0.0, f64::max);
    Ok(out
        .betas
        .iter()
        .zip(&sups)
        .map(|(b, s)| match mode {
            RemainderMode::PerBeta => s / b.factorial(),
            RemainderMode::Uniform => max_sup / b.factorial(),
        })
        .collect())
}

/// Polynomial part of the order-`k` expansion (terms of degree `< k`) and
/// the remainder monomial sets, with remainder bounds left at zero.
pub fn taylor_expand(model: &SystemModel, k: u32) -> Result<TaylorSurrogate, ApproxError> {
    taylor_with_bounds(model, k, None, RemainderMode::PerBeta, 1)
}

/// Remainder bounds `(r̄, t̄)` for every component on the region box.
pub fn taylor_remainder_bounds(
    model: &SystemModel,
    k: u32,
    mode: RemainderMode,
    subdivisions: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), ApproxError> {
    let s = taylor_surrogate(model, k, mode, subdivisions)?;
    Ok((
        s.f.into_iter().map(|c| c.remainder_bounds).collect(),
        s.h.into_iter().map(|c| c.remainder_bounds).collect(),
    ))
}

/// Expansion plus remainder bounds on the region's bounding box.
pub fn taylor_surrogate(
    model: &SystemModel,
    k: u32,
    mode: RemainderMode,
    subdivisions: usize,
) -> Result<TaylorSurrogate, ApproxError> {
    let nv = model.n() + model.m();
    let bx: Vec<Option<Interval>> = (0..nv).map(|i| model.region.implied_bounds(i)).collect();
    taylor_with_bounds(model, k, Some(bx), mode, subdivisions)
}

fn taylor_with_bounds(
    model: &SystemModel,
    k: u32,
    bx: Option<Vec<Option<Interval>>>,
    mode: RemainderMode,
    subdivisions: usize,
) -> Result<TaylorSurrogate, ApproxError> {
    if k == 0 {
        return Err(ApproxError::BadOrder(0));
    }
    let vars = model.vars();
    let names = model.var_names();
    let build = |e: &Expr| -> Result<TaylorComponent, ApproxError> {
        let (poly, out) = expand_component(e, &vars, k)?;
        let bounds = match &bx {
            Some(b) => component_bounds(&out, b, &names, mode, subdivisions)?,
            None => vec![0.0; out.betas.len()],
        };
        Ok(TaylorComponent {
            poly,
            remainder_monomials: out.betas,
            remainder_bounds: bounds,
        })
    };
    let f = model.f.iter().map(build).collect::<Result<Vec<_>, _>>()?;
    let h = model.h.iter().map(build).collect::<Result<Vec<_>, _>>()?;
    let bounds_box = match &bx {
        Some(b) => b.iter().map(|i| i.unwrap_or(Interval::point(0.0))).collect(),
        None => vec![Interval::point(0.0); vars.len()],
    };
    Ok(TaylorSurrogate {
        order: k,
        vars,
        n: model.n(),
        m: model.m(),
        f,
        h,
        mode,
        bounds_box,
    })
}
