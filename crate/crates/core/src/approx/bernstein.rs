//! Tensor-product Bernstein operators on the canonical box `[-1/2, 1/2]^d`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::ApproxError;
use crate::expr::{bound_sup_abs, diff_expr, mul, sub, Expr, Interval, SystemModel};
use crate::poly::{AffineMap, MultiIndex, Polynomial, Vars};

const GRID_CAP: usize = 1_000_000;

/// Error-bound estimator for `sup |f - B(f)|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BernsteinErrorMode {
    /// `(L/2) sqrt(Σ_j 1/μ_j)` with `L` from interval gradient bounds.
    Lipschitz,
    /// `1.1 × ` the maximum error over a dense grid.
    Empirical,
}

/// One component in canonical coordinates `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct BernsteinComponent {
    /// Operator degree per variable, as requested.
    pub degrees: Vec<u32>,
    /// Degree actually used per variable: 0 where the component does not
    /// depend on the variable, 1 where it is affine in it (same polynomial).
    pub effective_degrees: Vec<u32>,
    pub poly: Polynomial,
    pub error_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BernsteinSurrogate {
    pub vars: Vars,
    pub n: usize,
    pub m: usize,
    /// Approximations of `f_i(x(z))`, in the units of `f`.
    pub f: Vec<BernsteinComponent>,
    pub h: Vec<BernsteinComponent>,
    /// Original box.
    pub bounds_box: Vec<Interval>,
    /// `z = to_canonical(x)`.
    pub to_canonical: AffineMap,
    pub error_mode: BernsteinErrorMode,
}

impl BernsteinSurrogate {
    /// `x = from_canonical(z)`.
    pub fn from_canonical(&self) -> AffineMap {
        self.to_canonical.inverse()
    }

    /// Components re-expressed on `[0, 1]^d` via `t = z + 1/2`.
    pub fn to_unit_box(&self) -> (Vec<Polynomial>, Vec<Polynomial>) {
        let d = self.vars.len();
        let map = AffineMap { scale: vec![1.0; d], offset: vec![-0.5; d] };
        let conv = |c: &BernsteinComponent| c.poly.compose_affine(&map).expect("valid map");
        (self.f.iter().map(conv).collect(), self.h.iter().map(conv).collect())
    }
}

/// `C(n, k)`: exact integer arithmetic up to `n = 50`, log-gamma above.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= 50 {
        let k = k.min(n - k) as u64;
        let mut acc: u64 = 1;
        for i in 0..k {
            acc = acc * (n as u64 - i) / (i + 1);
        }
        acc as f64
    } else {
        let (n, k) = (n as f64, k as f64);
        (ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0))
            .exp()
            .round()
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Monomial coefficients of `C(μ,k) (z+1/2)^k (1/2-z)^(μ-k)`, rows `k`.
fn basis_matrix(mu: u32) -> Vec<Vec<f64>> {
    (0..=mu)
        .map(|k| {
            let mut p = vec![binomial(mu, k)];
            for _ in 0..k {
                p = poly_mul(&p, &[0.5, 1.0]);
            }
            for _ in k..mu {
                p = poly_mul(&p, &[0.5, -1.0]);
            }
            p
        })
        .collect()
}

fn depends_affinely(e: &Expr, v: usize) -> bool {
    diff_expr(&diff_expr(e, v), v).is_const(0.0)
}

fn expand_component(
    e: &Expr,
    vars: &Vars,
    degrees: &[u32],
    from_canon: &AffineMap,
) -> Result<BernsteinComponent, ApproxError> {
    let nv = vars.len();
    let used = e.vars_used();
    let eff: Vec<u32> = (0..nv)
        .map(|j| {
            if !used.contains(&j) {
                0
            } else if degrees[j] >= 1 && depends_affinely(e, j) {
                1
            } else {
                degrees[j]
            }
        })
        .collect();
    if let Some(j) = (0..nv).find(|&j| used.contains(&j) && degrees[j] == 0) {
        return Err(ApproxError::ZeroDegree(vars[j].clone()));
    }
    let active: Vec<usize> = (0..nv).filter(|&j| eff[j] > 0).collect();
    let dims: Vec<usize> = active.iter().map(|&j| eff[j] as usize + 1).collect();
    let total: usize = dims.iter().product();

    // Samples on the tensor grid k_j / μ_j - 1/2, first active axis fastest.
    let mut vals = vec![0.0; total];
    let mut z = vec![0.0; nv];
    for (flat, v) in vals.iter_mut().enumerate() {
        let mut r = flat;
        for (a, &j) in active.iter().enumerate() {
            let k = r % dims[a];
            r /= dims[a];
            z[j] = k as f64 / eff[j] as f64 - 0.5;
        }
        *v = e.eval(&from_canon.apply(&z));
        if !v.is_finite() {
            return Err(ApproxError::NotContinuous(format!("non-finite sample at {z:?}")));
        }
    }

    // Mode-by-mode contraction with the univariate basis matrices.
    let mut shape = dims.clone();
    let mut data = vals;
    for (a, &j) in active.iter().enumerate() {
        let mat = basis_matrix(eff[j]);
        let stride: usize = shape[..a].iter().product();
        let len = shape[a];
        let outer: usize = shape[a + 1..].iter().product();
        let mut next = vec![0.0; data.len()];
        for o in 0..outer {
            for s in 0..stride {
                for p in 0..len {
                    let mut acc = 0.0;
                    for (k, row) in mat.iter().enumerate() {
                        acc += data[s + stride * (k + len * o)] * row[p];
                    }
                    next[s + stride * (p + len * o)] = acc;
                }
            }
        }
        data = next;
        shape[a] = len;
    }

    let mut terms = Vec::with_capacity(total);
    for (flat, c) in data.iter().enumerate() {
        let mut r = flat;
        let mut exps = vec![0u32; nv];
        for (a, &j) in active.iter().enumerate() {
            exps[j] = (r % dims[a]) as u32;
            r /= dims[a];
        }
        terms.push((MultiIndex(exps), *c));
    }
    Ok(BernsteinComponent {
        degrees: degrees.to_vec(),
        effective_degrees: eff,
        poly: Polynomial::from_terms(vars.clone(), terms),
        error_bound: 0.0,
    })
}

/// Bernstein surrogate of `f` (degrees `mu`) and `h` (degrees `eta`), one
/// degree per variable, with error bounds from `mode`.
pub fn bernstein_expand(
    model: &SystemModel,
    mu: &[u32],
    eta: &[u32],
    mode: BernsteinErrorMode,
) -> Result<BernsteinSurrogate, ApproxError> {
    let nv = model.n() + model.m();
    if mu.len() != nv || eta.len() != nv {
        return Err(ApproxError::Dimension { expected: nv, got: mu.len().min(eta.len()) });
    }
    if !model.region.ineqs.is_empty() {
        return Err(ApproxError::NonBox);
    }
    let names = model.var_names();
    let mut bx = Vec::with_capacity(nv);
    for (i, b) in model.region.boxes.iter().enumerate() {
        bx.push(b.ok_or_else(|| ApproxError::Unbounded(names[i].clone()))?);
    }
    let scale: Vec<f64> = bx.iter().map(|b| b.width()).collect();
    let mid: Vec<f64> = bx.iter().map(|b| b.mid()).collect();
    let from_canon = AffineMap::new(scale.clone(), mid.clone()).map_err(|_| ApproxError::NonBox)?;
    let vars = model.vars();
    let mut f = Vec::with_capacity(model.n());
    for e in &model.f {
        f.push(expand_component(e, &vars, mu, &from_canon)?);
    }
    let mut h = Vec::with_capacity(model.p());
    for e in &model.h {
        h.push(expand_component(e, &vars, eta, &from_canon)?);
    }
    let mut s = BernsteinSurrogate {
        vars,
        n: model.n(),
        m: model.m(),
        f,
        h,
        bounds_box: bx,
        to_canonical: from_canon.inverse(),
        error_mode: mode,
    };
    let (ef, eh) = bernstein_error_bound(model, &s, mode)?;
    for (c, e) in s.f.iter_mut().zip(ef) {
        c.error_bound = e;
    }
    for (c, e) in s.h.iter_mut().zip(eh) {
        c.error_bound = e;
    }
    Ok(s)
}

fn component_error(
    e: &Expr,
    c: &BernsteinComponent,
    s: &BernsteinSurrogate,
    mode: BernsteinErrorMode,
) -> Result<f64, ApproxError> {
    let nv = s.vars.len();
    let active: Vec<usize> = (0..nv).filter(|&j| c.effective_degrees[j] > 0).collect();
    if active.is_empty() {
        return Ok(0.0);
    }
    // Affine in each active variable separately: the operator is exact.
    if active.iter().all(|&j| c.effective_degrees[j] == 1) {
        return Ok(0.0);
    }
    match mode {
        BernsteinErrorMode::Lipschitz => {
            let plain = lipschitz_error(e, c, s)?;
            let detrended = lipschitz_error(&detrend(e, &s.bounds_box), c, s)?;
            Ok(plain.min(detrended))
        }
        BernsteinErrorMode::Empirical => {
            let d = active.len() as u32;
            let per_axis = if 64usize.saturating_pow(d) <= GRID_CAP {
                64
            } else {
                (GRID_CAP as f64).powf(1.0 / d as f64).floor() as usize
            };
            let from = s.from_canonical();
            let total = per_axis.pow(d);
            let mut z = vec![0.0; nv];
            let mut worst = 0.0f64;
            for flat in 0..total {
                let mut r = flat;
                for &j in &active {
                    z[j] = (r % per_axis) as f64 / (per_axis - 1) as f64 - 0.5;
                    r /= per_axis;
                }
                let err = (e.eval(&from.apply(&z)) - c.poly.eval_unchecked(&z)).abs();
                worst = worst.max(err);
            }
            Ok(1.1 * worst)
        }
    }
}

/// `e` minus its linearization at the box centre. The operator reproduces
/// affine functions, so `|f - B f| = |g - B g|` for the detrended `g`.
fn detrend(e: &Expr, bx: &[Interval]) -> Expr {
    let centre: Vec<f64> = bx.iter().map(|b| b.mid()).collect();
    let mut g = e.clone();
    for j in e.vars_used() {
        let slope = diff_expr(e, j).eval(&centre);
        if slope != 0.0 && slope.is_finite() {
            let lin = mul(Expr::Const(slope), sub(Expr::Var(j), Expr::Const(centre[j])));
            g = sub(g, lin);
        }
    }
    g
}

/// `(L/2) sqrt(Σ_j 1/μ_j)` over the variables `e` actually varies in.
fn lipschitz_error(e: &Expr, c: &BernsteinComponent, s: &BernsteinSurrogate) -> Result<f64, ApproxError> {
    let mut l2 = 0.0;
    let mut inv = 0.0;
    for j in e.vars_used() {
        let g = diff_expr(e, j);
        if g.is_const(0.0) {
            continue;
        }
        let b = bound_sup_abs(&g, &s.bounds_box, 8).map_err(ApproxError::Interval)?;
        let w = s.bounds_box[j].width();
        l2 += (b * w) * (b * w);
        inv += 1.0 / c.degrees[j].max(1) as f64;
    }
    Ok(0.5 * l2.sqrt() * inv.sqrt())
}

/// Error bounds `(ε̄, ε̄')` for an expanded surrogate.
pub fn bernstein_error_bound(
    model: &SystemModel,
    s: &BernsteinSurrogate,
    mode: BernsteinErrorMode,
) -> Result<(Vec<f64>, Vec<f64>), ApproxError> {
    let ef = model
        .f
        .iter()
        .zip(&s.f)
        .map(|(e, c)| component_error(e, c, s, mode))
        .collect::<Result<Vec<_>, _>>()?;
    let eh = model
        .h
        .iter()
        .zip(&s.h)
        .map(|(e, c)| component_error(e, c, s, mode))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((ef, eh))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_and_large() {
        assert_eq!(binomial(6, 3), 20.0);
        assert_eq!(binomial(50, 25), 126410606437752.0);
        let rel = (binomial(60, 30) - 1.1826458156486142e17).abs() / 1.18e17;
        assert!(rel < 1e-10);
    }
}
