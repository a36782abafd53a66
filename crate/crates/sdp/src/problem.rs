//! Problem and solution containers.
//!
//! The primal form is
//!
//! ```text
//! maximize   <C, X> + c'f
//! subject to <A_i, X> + g_i'f = b_i,   i = 1..m
//!            X = diag(X_1, ..., X_B) with every X_k PSD (or diagonal, >= 0)
//! ```
//!
//! where `f` is a vector of free variables.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("problem too large: {what} = {got} exceeds cap {cap}")]
    TooLarge { what: &'static str, got: usize, cap: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Psd,
    Diagonal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub size: usize,
    pub kind: BlockKind,
}

/// Symmetric matrix stored as upper-triangle entries `(i, j, v)`, `i <= j`,
/// zero-based. An off-diagonal entry stands for both `(i, j)` and `(j, i)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseSym {
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new() -> Self {
        SparseSym::default()
    }

    /// Add `v` at `(i, j)` (and `(j, i)`); order of the indices is irrelevant.
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push((i, j, v));
    }

    /// Merge duplicate positions and drop exact zeros; sorts entries.
    pub fn normalize(&mut self) {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(i, j, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        self.entries = out;
    }

    /// `<A, X>` for a dense symmetric `X`.
    pub fn dot(&self, x: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * x[(i, i)] } else { 2.0 * v * x[(i, j)] })
            .sum()
    }

    /// `<A, diag(d)>`.
    pub fn dot_diag(&self, d: &[f64]) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.0 == e.1)
            .map(|&(i, _, v)| v * d[i])
            .sum()
    }

    /// `out += s * A`.
    pub fn add_to(&self, out: &mut DMatrix<f64>, s: f64) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += s * v;
            if i != j {
                out[(j, i)] += s * v;
            }
        }
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        self.add_to(&mut m, 1.0);
        m
    }

    pub fn frobenius(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }
}

/// Linear functional on `(X, f)`: per-block matrices and free-variable weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    pub blocks: Vec<(usize, SparseSym)>,
    pub free: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub form: LinearForm,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub blocks: Vec<Block>,
    pub num_free: usize,
    pub constraints: Vec<Constraint>,
    /// Maximized.
    pub objective: LinearForm,
}

impl SdpProblem {
    /// Sum of PSD block sizes.
    pub fn gram_dimension(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.kind == BlockKind::Psd)
            .map(|b| b.size)
            .sum()
    }

    /// Structural checks: indices in range, diagonal blocks diagonal, sizes positive.
    pub fn validate(&self) -> Result<(), SdpError> {
        if self.constraints.is_empty() {
            return Err(SdpError::Invalid("no constraints".into()));
        }
        for (k, b) in self.blocks.iter().enumerate() {
            if b.size == 0 {
                return Err(SdpError::Invalid(format!("block {k} has size 0")));
            }
        }
        let check = |f: &LinearForm, what: &str| -> Result<(), SdpError> {
            for (bk, m) in &f.blocks {
                let b = self
                    .blocks
                    .get(*bk)
                    .ok_or_else(|| SdpError::Invalid(format!("{what}: block {bk} out of range")))?;
                for &(i, j, v) in &m.entries {
                    if i > j || j >= b.size {
                        return Err(SdpError::Invalid(format!("{what}: entry ({i},{j}) in block {bk}")));
                    }
                    if b.kind == BlockKind::Diagonal && i != j {
                        return Err(SdpError::Invalid(format!(
                            "{what}: off-diagonal entry in diagonal block {bk}"
                        )));
                    }
                    if !v.is_finite() {
                        return Err(SdpError::Invalid(format!("{what}: non-finite value")));
                    }
                }
            }
            for &(k, v) in &f.free {
                if k >= self.num_free || !v.is_finite() {
                    return Err(SdpError::Invalid(format!("{what}: free variable {k}")));
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            check(&c.form, &format!("constraint {i}"))?;
            if !c.rhs.is_finite() {
                return Err(SdpError::Invalid(format!("constraint {i}: non-finite rhs")));
            }
        }
        Ok(())
    }

    /// Evaluate a linear form at `(X, f)`.
    pub fn eval_form(form: &LinearForm, x: &[DMatrix<f64>], f: &[f64]) -> f64 {
        let mut s: f64 = form.blocks.iter().map(|(k, m)| m.dot(&x[*k])).sum();
        s += form.free.iter().map(|&(k, v)| v * f[k]).sum::<f64>();
        s
    }

    /// Residuals `(primal, dual, gap)` for a candidate primal-dual pair,
    /// computed from scratch. Primal and dual are relative 2-norms; the gap
    /// is relative to `1 + |pobj| + |dobj|`.
    pub fn residuals(&self, sol: &SdpSolution) -> Residuals {
        let b: Vec<f64> = self.constraints.iter().map(|c| c.rhs).collect();
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut rp = 0.0;
        for c in &self.constraints {
            let r = c.rhs - Self::eval_form(&c.form, &sol.x, &sol.free);
            rp += r * r;
        }
        // Dual: A*(y) - Z = C (maximize sense), G'y = c.
        let mut dual_mats: Vec<DMatrix<f64>> = sol.z.iter().map(|z| -z.clone()).collect();
        let mut gy = vec![0.0; self.num_free];
        for (c, &yi) in self.constraints.iter().zip(&sol.y) {
            for (k, m) in &c.form.blocks {
                m.add_to(&mut dual_mats[*k], yi);
            }
            for &(k, v) in &c.form.free {
                gy[k] += v * yi;
            }
        }
        for (k, m) in &self.objective.blocks {
            m.add_to(&mut dual_mats[*k], -1.0);
        }
        for &(k, v) in &self.objective.free {
            gy[k] -= v;
        }
        let mut rd: f64 = dual_mats.iter().map(|m| m.norm_squared()).sum();
        rd += gy.iter().map(|v| v * v).sum::<f64>();
        let cnorm = (self
            .objective
            .blocks
            .iter()
            .map(|(_, m)| m.frobenius().powi(2))
            .sum::<f64>()
            + self.objective.free.iter().map(|(_, v)| v * v).sum::<f64>())
        .sqrt();
        let pobj = Self::eval_form(&self.objective, &sol.x, &sol.free);
        let dobj: f64 = b.iter().zip(&sol.y).map(|(b, y)| b * y).sum();
        let xz: f64 = sol.x.iter().zip(&sol.z).map(|(x, z)| x.dot(z)).sum();
        Residuals {
            primal: rp.sqrt() / (1.0 + bnorm),
            dual: rd.sqrt() / (1.0 + cnorm),
            gap: (dobj - pobj).abs().max(xz.abs()) / (1.0 + pobj.abs() + dobj.abs()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Stalled,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

/// Primal-dual pair. Diagonal blocks are stored as diagonal matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution {
    pub x: Vec<DMatrix<f64>>,
    pub free: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl SdpSolution {
    /// Smallest eigenvalue over all primal blocks.
    pub fn min_primal_eig(&self) -> f64 {
        self.x
            .iter()
            .map(|m| m.clone().symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min)
    }
}
