//! Interval enclosures of expressions over boxes.
//!
//! Rounding is handled by inflating every result outward by a relative
//! `1e-15`, not by directed hardware rounding.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{diff_expr, Expr, Func};

const INFLATE: f64 = 1e-15;
const MAX_CELLS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntervalError {
    #[error("division by an interval containing zero")]
    DivisionByZero,
    #[error("{0} of an interval touching its domain boundary")]
    Domain(&'static str),
    #[error("non-finite enclosure")]
    NonFinite,
    #[error("box has {got} intervals, expression needs variable {need}")]
    Dimension { need: usize, got: usize },
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && self.hi >= 0.0
    }

    /// `max |x|` over the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    fn inflate(self) -> Self {
        Interval {
            lo: self.lo - self.lo.abs() * INFLATE,
            hi: self.hi + self.hi.abs() * INFLATE,
        }
    }

    fn hull(a: f64, b: f64) -> Self {
        Interval { lo: a.min(b), hi: a.max(b) }
    }

    pub fn add(self, o: Self) -> Self {
        Interval { lo: self.lo + o.lo, hi: self.hi + o.hi }.inflate()
    }

    pub fn sub(self, o: Self) -> Self {
        Interval { lo: self.lo - o.hi, hi: self.hi - o.lo }.inflate()
    }

    pub fn neg(self) -> Self {
        Interval { lo: -self.hi, hi: -self.lo }
    }

    pub fn mul(self, o: Self) -> Self {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }.inflate()
    }

    pub fn div(self, o: Self) -> Result<Self, IntervalError> {
        if o.contains_zero() {
            return Err(IntervalError::DivisionByZero);
        }
        let inv = Interval { lo: 1.0 / o.hi, hi: 1.0 / o.lo }.inflate();
        Ok(self.mul(inv))
    }

    pub fn powi(self, k: i32) -> Result<Self, IntervalError> {
        if k < 0 {
            return Interval::point(1.0).div(self.powi(-k)?);
        }
        if k == 0 {
            return Ok(Interval::point(1.0));
        }
        let (a, b) = (self.lo.powi(k), self.hi.powi(k));
        let r = if k % 2 == 1 {
            Interval { lo: a, hi: b }
        } else if self.contains_zero() {
            Interval { lo: 0.0, hi: a.max(b) }
        } else {
            Interval::hull(a, b)
        };
        Ok(r.inflate())
    }

    fn sin(self) -> Self {
        if self.width() >= 2.0 * PI {
            return Interval { lo: -1.0, hi: 1.0 };
        }
        let mut r = Interval::hull(self.lo.sin(), self.hi.sin());
        if spans(self, FRAC_PI_2) {
            r.hi = 1.0;
        }
        if spans(self, -FRAC_PI_2) {
            r.lo = -1.0;
        }
        clamp_unit(r.inflate())
    }

    fn cos(self) -> Self {
        if self.width() >= 2.0 * PI {
            return Interval { lo: -1.0, hi: 1.0 };
        }
        let mut r = Interval::hull(self.lo.cos(), self.hi.cos());
        if spans(self, 0.0) {
            r.hi = 1.0;
        }
        if spans(self, PI) {
            r.lo = -1.0;
        }
        clamp_unit(r.inflate())
    }

    fn apply(self, f: Func) -> Result<Self, IntervalError> {
        let r = match f {
            Func::Sin => return Ok(self.sin()),
            Func::Cos => return Ok(self.cos()),
            Func::Exp => Interval { lo: self.lo.exp(), hi: self.hi.exp() },
            Func::Tanh => Interval { lo: self.lo.tanh(), hi: self.hi.tanh() },
            Func::Log => {
                if self.lo <= 0.0 {
                    return Err(IntervalError::Domain("log"));
                }
                Interval { lo: self.lo.ln(), hi: self.hi.ln() }
            }
            Func::Sqrt => {
                if self.lo < 0.0 {
                    return Err(IntervalError::Domain("sqrt"));
                }
                Interval { lo: self.lo.sqrt(), hi: self.hi.sqrt() }
            }
        };
        Ok(r.inflate())
    }
}

fn clamp_unit(r: Interval) -> Interval {
    Interval { lo: r.lo.max(-1.0), hi: r.hi.min(1.0) }
}

/// Whether `[lo, hi]` contains `c + 2πk` for some integer `k`.
/// Errs on the side of reporting a hit near the endpoints.
fn spans(x: Interval, c: f64) -> bool {
    let slack = 1e-12 * (1.0 + x.lo.abs().max(x.hi.abs()));
    let k = ((x.lo - slack - c) / (2.0 * PI)).ceil();
    c + 2.0 * PI * k <= x.hi + slack
}

/// Sound enclosure of `e` over `bx` (indexed by variable position).
pub fn eval_interval(e: &Expr, bx: &[Interval]) -> Result<Interval, IntervalError> {
    let r = match e {
        Expr::Const(c) => Interval::point(*c),
        Expr::Var(i) => *bx.get(*i).ok_or(IntervalError::Dimension {
            need: *i,
            got: bx.len(),
        })?,
        Expr::Neg(a) => eval_interval(a, bx)?.neg(),
        Expr::Add(a, b) => eval_interval(a, bx)?.add(eval_interval(b, bx)?),
        Expr::Sub(a, b) => eval_interval(a, bx)?.sub(eval_interval(b, bx)?),
        Expr::Mul(a, b) => {
            // Same subtree on both sides: use the square rule.
            if a == b {
                eval_interval(a, bx)?.powi(2)?
            } else {
                eval_interval(a, bx)?.mul(eval_interval(b, bx)?)
            }
        }
        Expr::Div(a, b) => eval_interval(a, bx)?.div(eval_interval(b, bx)?)?,
        Expr::Pow(a, k) => eval_interval(a, bx)?.powi(*k)?,
        Expr::Func(f, a) => eval_interval(a, bx)?.apply(*f)?,
    };
    if r.lo.is_finite() && r.hi.is_finite() {
        Ok(r)
    } else {
        Err(IntervalError::NonFinite)
    }
}

fn raw_sup_abs(e: &Expr, bx: &[Interval], active: &[usize], s: usize) -> Result<f64, IntervalError> {
    let d = active.len();
    let mut cell = bx.to_vec();
    let mut idx = vec![0usize; d];
    let mut best = 0.0f64;
    loop {
        for (k, &v) in active.iter().enumerate() {
            let b = bx[v];
            let h = b.width() / s as f64;
            let lo = b.lo + h * idx[k] as f64;
            let hi = if idx[k] + 1 == s { b.hi } else { b.lo + h * (idx[k] + 1) as f64 };
            cell[v] = Interval { lo, hi };
        }
        best = best.max(eval_interval(e, &cell)?.mag());
        let mut k = 0;
        loop {
            if k == d {
                return Ok(best);
            }
            idx[k] += 1;
            if idx[k] < s {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Upper bound on `sup |e|` over `bx` from `subdivisions` pieces per axis
/// (only axes of variables `e` depends on are split).
///
/// Total cells are capped at `10^6`. The result is the smallest bound over
/// all grids with at most `subdivisions` pieces per axis, so it never
/// increases with `subdivisions`.
pub fn bound_sup_abs(e: &Expr, bx: &[Interval], subdivisions: usize) -> Result<f64, IntervalError> {
    let subdivisions = subdivisions.max(1);
    let active: Vec<usize> = e.vars_used().into_iter().collect();
    let d = active.len() as u32;
    if d == 0 {
        return Ok(eval_interval(e, bx)?.mag());
    }
    let cap = (MAX_CELLS as f64).powf(1.0 / d as f64).floor() as usize;
    let s_max = subdivisions.min(cap.max(1));
    let total: usize = (1..=s_max).map(|s| s.saturating_pow(d)).sum();
    let grids: Vec<usize> = if total <= 4 * MAX_CELLS {
        (1..=s_max).collect()
    } else {
        (1..=s_max).filter(|s| s_max % s == 0).collect()
    };
    let mut best = f64::INFINITY;
    for s in grids {
        best = best.min(raw_sup_abs(e, bx, &active, s)?);
    }
    Ok(best)
}

/// 2-norm Lipschitz constant of `e` over `bx` from gradient bounds.
pub fn lipschitz_bound(e: &Expr, bx: &[Interval], subdivisions: usize) -> Result<f64, IntervalError> {
    let mut acc = 0.0;
    for v in e.vars_used() {
        let g = diff_expr(e, v);
        let b = bound_sup_abs(&g, bx, subdivisions)?;
        acc += b * b;
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cos_spans_zero() {
        let r = Interval::new(-2.0, 2.0).cos();
        assert_eq!(r.hi, 1.0);
        assert!((r.lo - 2f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn sin_critical_points() {
        let r = Interval::new(0.0, 3.0).sin();
        assert_eq!(r.hi, 1.0);
        assert!(r.lo <= 0.0);
        let r = Interval::new(-1.0, 1.0).sin();
        assert!(r.hi < 0.85 && r.hi >= 1f64.sin());
    }
}
