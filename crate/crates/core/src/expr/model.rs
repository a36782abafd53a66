//! System models and operating regions.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{Expr, Interval};
use crate::poly::{vars, MultiIndex, Polynomial, Vars};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("no equation for state `{0}`")]
    MissingEquation(String),
    #[error("outputs must be numbered y1..yp without gaps")]
    OutputNumbering,
    #[error("origin is not an equilibrium: {0} = {1:e} at the origin")]
    NotEquilibrium(String, f64),
    #[error("box for `{0}` does not contain the origin in its interior")]
    OriginOutsideBox(String),
    #[error("region inequality {0} is violated at the origin")]
    OriginOutsideIneq(usize),
    #[error("variable `{0}` has no bounded range in the region")]
    Unbounded(String),
}

/// Operating region: optional per-variable boxes plus `g <= 0` constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    /// One slot per model variable (states, then inputs).
    pub boxes: Vec<Option<Interval>>,
    /// Polynomials over the model variables, each required to be `<= 0`.
    pub ineqs: Vec<Polynomial>,
}

impl Region {
    pub fn new(boxes: Vec<Option<Interval>>, ineqs: Vec<Polynomial>) -> Result<Self, ModelError> {
        Ok(Region { boxes, ineqs })
    }

    fn check(&self, names: &[String]) -> Result<(), ModelError> {
        for (i, b) in self.boxes.iter().enumerate() {
            if let Some(b) = b {
                if !(b.lo < 0.0 && b.hi > 0.0) {
                    return Err(ModelError::OriginOutsideBox(names[i].clone()));
                }
            }
        }
        for (k, g) in self.ineqs.iter().enumerate() {
            let z = vec![0.0; g.nvars()];
            if g.eval_unchecked(&z) > 0.0 {
                return Err(ModelError::OriginOutsideIneq(k));
            }
        }
        Ok(())
    }

    /// Bounds for variable `i`: its declared box, or one implied by an
    /// inequality of the form `sum a_j v_j^2 - c <= 0` with `a_i > 0`.
    pub fn implied_bounds(&self, i: usize) -> Option<Interval> {
        if let Some(b) = self.boxes[i] {
            return Some(b);
        }
        let mut best: Option<f64> = None;
        for g in &self.ineqs {
            let mut c0 = 0.0;
            let mut ai = None;
            let mut ok = true;
            for (a, c) in g.terms() {
                match a.degree() {
                    0 => c0 = *c,
                    2 if a.0.iter().any(|&e| e == 2) => {
                        if *c <= 0.0 {
                            ok = false;
                        }
                        if a[i] == 2 {
                            ai = Some(*c);
                        }
                    }
                    _ => ok = false,
                }
            }
            if let (true, Some(a)) = (ok && c0 < 0.0, ai) {
                let r = (-c0 / a).sqrt();
                best = Some(best.map_or(r, |b: f64| b.min(r)));
            }
        }
        best.map(|r| Interval::new(-r, r))
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.boxes
            .iter()
            .zip(point)
            .all(|(b, x)| b.map_or(true, |b| b.lo <= *x && *x <= b.hi))
            && self.ineqs.iter().all(|g| g.eval_unchecked(point) <= 0.0)
    }

    /// True when every constraint is a box (no extra inequalities) and every
    /// variable in `idx` is boxed.
    pub fn is_box_over(&self, idx: &[usize]) -> bool {
        self.ineqs.is_empty() && idx.iter().all(|&i| self.boxes[i].is_some())
    }
}

/// Input-affine-or-not nonlinear system `x' = f(x,u)`, `y = h(x,u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    pub states: Vec<String>,
    pub inputs: Vec<String>,
    pub f: Vec<Expr>,
    pub h: Vec<Expr>,
    pub region: Region,
    /// `option key = value;` entries from the source file.
    pub options: BTreeMap<String, String>,
}

impl SystemModel {
    pub fn new(
        states: Vec<String>,
        inputs: Vec<String>,
        f: Vec<Expr>,
        h: Vec<Expr>,
        region: Region,
        options: BTreeMap<String, String>,
    ) -> Result<Self, ModelError> {
        let m = SystemModel { states, inputs, f, h, region, options };
        let names = m.var_names();
        m.region.check(&names)?;
        let z = vec![0.0; names.len()];
        for (i, e) in m.f.iter().enumerate() {
            let v = e.eval(&z);
            if !(v.abs() <= 1e-9) {
                return Err(ModelError::NotEquilibrium(format!("{}'", m.states[i]), v));
            }
        }
        for (j, e) in m.h.iter().enumerate() {
            let v = e.eval(&z);
            if !(v.abs() <= 1e-9) {
                return Err(ModelError::NotEquilibrium(format!("y{}", j + 1), v));
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn m(&self) -> usize {
        self.inputs.len()
    }

    pub fn p(&self) -> usize {
        self.h.len()
    }

    /// States followed by inputs.
    pub fn var_names(&self) -> Vec<String> {
        self.states.iter().chain(&self.inputs).cloned().collect()
    }

    pub fn vars(&self) -> Vars {
        vars(&self.var_names())
    }

    /// Bounded box over all variables, or the first unbounded variable.
    pub fn bounding_box(&self) -> Result<Vec<Interval>, ModelError> {
        let names = self.var_names();
        (0..names.len())
            .map(|i| {
                self.region
                    .implied_bounds(i)
                    .ok_or_else(|| ModelError::Unbounded(names[i].clone()))
            })
            .collect()
    }

    /// Copy with the state part of the region replaced by `|x|_2 <= r`.
    /// Input boxes are kept; inequalities that involve only inputs are kept.
    pub fn with_state_ball(&self, r: f64) -> SystemModel {
        let n = self.n();
        let nv = n + self.m();
        let v = self.vars();
        let mut boxes = self.region.boxes.clone();
        for b in boxes.iter_mut().take(n) {
            *b = None;
        }
        let mut ineqs: Vec<Polynomial> = self
            .region
            .ineqs
            .iter()
            .filter(|g| g.terms().all(|(a, _)| a.0[..n].iter().all(|&e| e == 0)))
            .cloned()
            .collect();
        let mut ball = Polynomial::constant(v.clone(), -r * r);
        for i in 0..n {
            let mut e = vec![0; nv];
            e[i] = 2;
            ball = &ball + &Polynomial::monomial(v.clone(), MultiIndex(e), 1.0);
        }
        ineqs.insert(0, ball);
        SystemModel {
            states: self.states.clone(),
            inputs: self.inputs.clone(),
            f: self.f.clone(),
            h: self.h.clone(),
            region: Region { boxes, ineqs },
            options: self.options.clone(),
        }
    }

    pub fn eval_f(&self, point: &[f64]) -> Vec<f64> {
        self.f.iter().map(|e| e.eval(point)).collect()
    }

    pub fn eval_h(&self, point: &[f64]) -> Vec<f64> {
        self.h.iter().map(|e| e.eval(point)).collect()
    }
}
