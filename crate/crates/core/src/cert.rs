//! Certificates and their independent validation.
//!
//! Validation never looks at the solver: it rebuilds every stored SOS
//! constraint from its Gram data, and samples the true (nonlinear) model to
//! check `V >= 0` and `V_x f <= w` pointwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approx::SurrogateDoc;
use crate::expr::{Interval, Region, SystemModel};
use crate::poly::{vars as make_vars, MultiIndex, PolyDoc, PolyError, Polynomial};
use crate::sos::{gram_polynomial, IndexSymbol, SosProblem, SupplyRate};
use locpass_sdp::{SdpSolution, SolveStatus};
use nalgebra::DMatrix;

pub const SCHEMA_VERSION: u32 = 1;
/// Default number of validation samples.
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 42;

const VALID_TOL: f64 = 1e-6;
const MARGINAL_TOL: f64 = 1e-4;
const GRAM_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertError {
    #[error("certificate has {cert} variables, model has {model}")]
    Dimension { cert: usize, model: usize },
    #[error("certificate variable `{cert}` does not match model variable `{model}`")]
    VariableMismatch { cert: String, model: String },
    #[error("malformed certificate: {0}")]
    Malformed(String),
    #[error("solver status {0:?} carries no index")]
    NotOptimal(SolveStatus),
    #[error("problem has no index objective")]
    NoIndex,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertKind {
    Stability,
    Dissipativity,
    Passivity,
    Ofp,
    Ifp,
    Qsr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Valid,
    Marginal,
    Invalid,
}

/// One SOS constraint with its Gram certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintDoc {
    pub name: String,
    pub variables: Vec<String>,
    pub poly: PolyDoc,
    pub basis: Vec<Vec<u32>>,
    pub gram: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierDoc {
    pub name: String,
    pub family: String,
    pub constraint: String,
    pub factor: PolyDoc,
    pub basis: Vec<Vec<u32>>,
    pub gram: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionDoc {
    /// `[lo, hi]` per model variable, `null` where unconstrained.
    pub boxes: Vec<Option<[f64; 2]>>,
    /// `g(x, u) <= 0`.
    pub ineqs: Vec<PolyDoc>,
}

impl RegionDoc {
    pub fn from_region(r: &Region) -> Self {
        RegionDoc {
            boxes: r.boxes.iter().map(|b| b.map(|i| [i.lo, i.hi])).collect(),
            ineqs: r.ineqs.iter().map(|g| g.to_doc()).collect(),
        }
    }

    pub fn to_region(&self, names: &[String]) -> Result<Region, CertError> {
        let v = make_vars(names);
        let ineqs = self
            .ineqs
            .iter()
            .map(|d| Polynomial::from_doc(v.clone(), d))
            .collect::<Result<Vec<_>, _>>()?;
        Region::new(self.boxes.iter().map(|b| b.map(|[lo, hi]| Interval::new(lo, hi))).collect(), ineqs)
            .map_err(|e| CertError::Malformed(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexDoc {
    pub symbol: IndexSymbol,
    pub value: f64,
    /// Final bracket width when found by bisection.
    pub bracket_width: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSymbolDoc {
    pub name: String,
    pub component: String,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverDoc {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Smallest eigenvalue of each stored Gram matrix (multipliers, then constraints).
    pub gram_min_eigs: Vec<f64>,
    /// Largest coefficient mismatch between a constraint and its Gram form.
    pub coefficient_residual: f64,
    /// `min(storage_margin, dissipation_margin)`.
    pub sampled_margin: f64,
    pub storage_margin: f64,
    pub dissipation_margin: f64,
    pub samples: usize,
    pub seed: u64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema_version: u32,
    pub kind: CertKind,
    /// Model states followed by inputs.
    pub variables: Vec<String>,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    /// Storage or Lyapunov function over `variables` (states only).
    #[serde(rename = "V")]
    pub storage: PolyDoc,
    pub multipliers: Vec<MultiplierDoc>,
    pub constraints: Vec<ConstraintDoc>,
    pub index: Option<IndexDoc>,
    pub supply: Option<SupplyRate>,
    pub region: RegionDoc,
    pub approx: Option<SurrogateDoc>,
    pub error_symbols: Vec<ErrorSymbolDoc>,
    pub solver: Option<SolverDoc>,
    pub report: Option<ValidationReport>,
}

impl Certificate {
    /// A bare claim: a storage function with no SOS data, checked by sampling only.
    pub fn from_storage(
        kind: CertKind,
        model: &SystemModel,
        storage: &Polynomial,
        supply: Option<SupplyRate>,
        region: &Region,
    ) -> Result<Certificate, CertError> {
        let v = storage.embed(&model.vars())?;
        Ok(Certificate {
            schema_version: SCHEMA_VERSION,
            kind,
            variables: model.var_names(),
            n: model.n(),
            m: model.m(),
            p: model.p(),
            storage: v.to_doc(),
            multipliers: vec![],
            constraints: vec![],
            index: None,
            supply,
            region: RegionDoc::from_region(region),
            approx: None,
            error_symbols: vec![],
            solver: None,
            report: None,
        })
    }

    pub fn storage_poly(&self) -> Result<Polynomial, CertError> {
        Ok(Polynomial::from_doc(make_vars(&self.variables), &self.storage)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Certificate, CertError> {
        let c: Certificate = serde_json::from_str(s).map_err(|e| CertError::Malformed(e.to_string()))?;
        if c.schema_version != SCHEMA_VERSION {
            return Err(CertError::Malformed(format!("unsupported schema_version {}", c.schema_version)));
        }
        Ok(c)
    }
}

fn gram_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CertError> {
    let k = rows.len();
    if rows.iter().any(|r| r.len() != k) {
        return Err(CertError::Malformed("Gram matrix is not square".into()));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

fn min_eig(g: &DMatrix<f64>) -> f64 {
    if g.nrows() == 0 {
        return 0.0;
    }
    let sym = (g + g.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

fn basis_of(rows: &[Vec<u32>], nv: usize) -> Result<Vec<MultiIndex>, CertError> {
    rows.iter()
        .map(|b| {
            if b.len() != nv {
                Err(CertError::Malformed("basis monomial has the wrong length".into()))
            } else {
                Ok(MultiIndex(b.clone()))
            }
        })
        .collect()
}

const PRIMES: [u8; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Halton points in the region's bounding box (unbounded coordinates use
/// `[-1, 1]`), keeping those inside the region. Starts at index `seed + 1`.
pub fn region_samples(region: &Region, nv: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let bx: Vec<Interval> = (0..nv)
        .map(|i| region.implied_bounds(i).unwrap_or(Interval::new(-1.0, 1.0)))
        .collect();
    assert!(nv <= PRIMES.len(), "too many dimensions for the sampler");
    let mut out = Vec::with_capacity(count);
    let mut idx = seed as usize + 1;
    let cap = idx + 200 * count.max(1);
    while out.len() < count && idx < cap {
        let pt: Vec<f64> = (0..nv)
            .map(|d| bx[d].lo + bx[d].width() * halton::number(PRIMES[d], idx))
            .collect();
        idx += 1;
        if region.contains(&pt) {
            out.push(pt);
        }
    }
    out
}

/// Re-check the stored SOS data and sample the true dynamics.
pub fn validate(
    cert: &Certificate,
    model: &SystemModel,
    samples: usize,
    seed: u64,
) -> Result<ValidationReport, CertError> {
    let names = model.var_names();
    if cert.variables.len() != names.len() {
        return Err(CertError::Dimension { cert: cert.variables.len(), model: names.len() });
    }
    for (c, m) in cert.variables.iter().zip(&names) {
        if c != m {
            return Err(CertError::VariableMismatch { cert: c.clone(), model: m.clone() });
        }
    }
    if cert.n != model.n() || cert.m != model.m() || cert.p != model.p() {
        return Err(CertError::Dimension { cert: cert.n + cert.m, model: model.n() + model.m() });
    }

    // (a) algebraic re-check.
    let mut eigs = Vec::new();
    let mut residual: f64 = 0.0;
    for md in &cert.multipliers {
        let g = gram_matrix(&md.gram)?;
        if g.nrows() != md.basis.len() {
            return Err(CertError::Malformed(format!("multiplier {}: Gram size", md.name)));
        }
        eigs.push(min_eig(&g));
    }
    for c in &cert.constraints {
        let v = make_vars(&c.variables);
        let p = Polynomial::from_doc(v.clone(), &c.poly)?;
        let basis = basis_of(&c.basis, v.len())?;
        let g = gram_matrix(&c.gram)?;
        if g.nrows() != basis.len() {
            return Err(CertError::Malformed(format!("constraint {}: Gram size", c.name)));
        }
        let sym = (&g + g.transpose()) * 0.5;
        let q = gram_polynomial(&v, &basis, &sym);
        residual = residual.max(p.max_abs_diff(&q));
        eigs.push(min_eig(&g));
    }

    // (b) sampled dissipation inequality with the true model.
    let region = cert.region.to_region(&names)?;
    let vpoly = cert.storage_poly()?;
    let grad: Vec<Polynomial> = (0..model.n()).map(|i| vpoly.diff_index(i)).collect();
    let index = cert.index.as_ref().map(|i| i.value).unwrap_or(0.0);
    let pts = region_samples(&region, names.len(), samples, seed);
    let mut storage_margin = f64::INFINITY;
    let mut diss_margin = f64::INFINITY;
    let n = model.n();
    for pt in &pts {
        let mut pt = pt.clone();
        if cert.kind == CertKind::Stability {
            for v in pt.iter_mut().skip(n) {
                *v = 0.0;
            }
        }
        storage_margin = storage_margin.min(vpoly.eval_unchecked(&pt));
        let f = model.eval_f(&pt);
        let vdot: f64 = grad.iter().zip(&f).map(|(g, fi)| g.eval_unchecked(&pt) * fi).sum();
        let w = match &cert.supply {
            Some(s) if cert.kind != CertKind::Stability => {
                let y = model.eval_h(&pt);
                s.eval_numeric(&pt[n..], &y, index)
            }
            _ => 0.0,
        };
        diss_margin = diss_margin.min(w - vdot);
    }
    if pts.is_empty() {
        storage_margin = f64::NAN;
        diss_margin = f64::NAN;
    }
    let v0 = vpoly.eval_unchecked(&vec![0.0; names.len()]).abs();
    let margin = storage_margin.min(diss_margin);
    let gram_min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let verdict = if pts.is_empty() || margin.is_nan() || !residual.is_finite() {
        Verdict::Invalid
    } else if residual <= VALID_TOL && margin >= -VALID_TOL && gram_min >= -GRAM_TOL && v0 <= 1e-9 {
        Verdict::Valid
    } else if residual <= MARGINAL_TOL && margin > -MARGINAL_TOL && gram_min > -MARGINAL_TOL && v0 <= VALID_TOL {
        Verdict::Marginal
    } else {
        Verdict::Invalid
    };
    Ok(ValidationReport {
        gram_min_eigs: eigs,
        coefficient_residual: residual,
        sampled_margin: margin,
        storage_margin,
        dissipation_margin: diss_margin,
        samples: pts.len(),
        seed,
        verdict,
    })
}

/// The optimized index (ρ or ν) of a solved program.
pub fn extract_index(sol: &SdpSolution, prob: &SosProblem) -> Result<f64, CertError> {
    let (_, k) = prob.index.ok_or(CertError::NoIndex)?;
    if sol.status != SolveStatus::Optimal {
        return Err(CertError::NotOptimal(sol.status));
    }
    Ok(sol.free[k])
}
