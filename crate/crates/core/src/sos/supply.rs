//! Supply rates `w(u, y)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::program::IndexSymbol;
use super::SosError;
use crate::poly::{MultiIndex, Polynomial, PolyDoc};

const SYM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupplyKind {
    Passivity,
    Ofp,
    Ifp,
    IfOfp,
    Qsr,
    L2Gain,
    Custom,
}

impl std::str::FromStr for SupplyKind {
    type Err = SosError;
    fn from_str(s: &str) -> Result<Self, SosError> {
        Ok(match s {
            "passivity" => SupplyKind::Passivity,
            "ofp" => SupplyKind::Ofp,
            "ifp" => SupplyKind::Ifp,
            "if-ofp" => SupplyKind::IfOfp,
            "qsr" => SupplyKind::Qsr,
            "l2gain" | "l2-gain" => SupplyKind::L2Gain,
            "custom" => SupplyKind::Custom,
            other => return Err(SosError::Supply(format!("unknown supply kind `{other}`"))),
        })
    }
}

/// A passivity index: fixed, or left as the quantity to maximize.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Index {
    Fixed(f64),
    Decision,
}

/// Parameters for [`make_supply`]; only those relevant to the kind are read.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SupplyParams {
    pub m: usize,
    pub p: usize,
    pub rho: Option<Index>,
    pub nu: Option<Index>,
    pub gamma: Option<f64>,
    pub q: Option<DMatrix<f64>>,
    pub s: Option<DMatrix<f64>>,
    pub r: Option<DMatrix<f64>>,
    /// Over variables `u1..um, y1..yp` in that order.
    pub custom: Option<Polynomial>,
}

/// `w = u'Ru + 2y'Su + y'Qy (+ custom)`, with an optional decision index
/// whose coefficient is `-y'y` (for ρ) or `-u'u` (for ν).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupplyRate {
    pub kind: SupplyKind,
    pub m: usize,
    pub p: usize,
    /// Row-major `p × p`.
    pub q: Vec<Vec<f64>>,
    /// Row-major `p × m`.
    pub s: Vec<Vec<f64>>,
    /// Row-major `m × m`.
    pub r: Vec<Vec<f64>>,
    pub custom: Option<PolyDoc>,
    /// Index left as a decision variable.
    pub decision: Option<IndexSymbol>,
    /// Fixed index values, for reporting.
    pub rho: Option<f64>,
    pub nu: Option<f64>,
    pub gamma: Option<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn check_shape(name: &str, m: &DMatrix<f64>, r: usize, c: usize) -> Result<(), SosError> {
    if m.nrows() != r || m.ncols() != c {
        return Err(SosError::Supply(format!(
            "{name} is {}x{}, expected {r}x{c}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_sym(name: &str, m: &DMatrix<f64>) -> Result<(), SosError> {
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYM_TOL {
                return Err(SosError::AsymmetricSupply(name.to_string()));
            }
        }
    }
    Ok(())
}

/// Build a supply rate of the given kind.
pub fn make_supply(kind: SupplyKind, params: &SupplyParams) -> Result<SupplyRate, SosError> {
    let (m, p) = (params.m, params.p);
    let square = || -> Result<(), SosError> {
        if m != p {
            return Err(SosError::Supply(format!(
                "{kind:?} needs as many outputs as inputs (m = {m}, p = {p})"
            )));
        }
        Ok(())
    };
    let eye = |k: usize, s: f64| DMatrix::<f64>::identity(k, k) * s;
    let mut q = DMatrix::zeros(p, p);
    let mut s = DMatrix::zeros(p, m);
    let mut r = DMatrix::zeros(m, m);
    let mut decision = None;
    let mut rho = None;
    let mut nu = None;
    let mut gamma = None;
    let mut take = |ix: Option<Index>, sym: IndexSymbol, what: &str| -> Result<f64, SosError> {
        match ix {
            Some(Index::Fixed(v)) => Ok(v),
            Some(Index::Decision) => {
                if decision.is_some() {
                    return Err(SosError::Supply("only one index can be a decision".into()));
                }
                decision = Some(sym);
                Ok(0.0)
            }
            None => Err(SosError::Supply(format!("{kind:?} needs {what}"))),
        }
    };
    match kind {
        SupplyKind::Passivity => {
            square()?;
            s = eye(p, 0.5);
        }
        SupplyKind::Ofp => {
            square()?;
            let v = take(params.rho, IndexSymbol::Rho, "rho")?;
            s = eye(p, 0.5);
            q = eye(p, -v);
            rho = Some(v).filter(|_| decision.is_none());
        }
        SupplyKind::Ifp => {
            square()?;
            let v = take(params.nu, IndexSymbol::Nu, "nu")?;
            s = eye(p, 0.5);
            r = eye(m, -v);
            nu = Some(v).filter(|_| decision.is_none());
        }
        SupplyKind::IfOfp => {
            square()?;
            let vr = take(params.rho, IndexSymbol::Rho, "rho")?;
            let vn = take(params.nu, IndexSymbol::Nu, "nu")?;
            s = eye(p, 0.5);
            q = eye(p, -vr);
            r = eye(m, -vn);
            if decision != Some(IndexSymbol::Rho) {
                rho = Some(vr);
            }
            if decision != Some(IndexSymbol::Nu) {
                nu = Some(vn);
            }
        }
        SupplyKind::Qsr => {
            let (mq, ms, mr) = match (&params.q, &params.s, &params.r) {
                (Some(q), Some(s), Some(r)) => (q.clone(), s.clone(), r.clone()),
                _ => return Err(SosError::Supply("qsr needs Q, S and R".into())),
            };
            check_shape("Q", &mq, p, p)?;
            check_shape("S", &ms, p, m)?;
            check_shape("R", &mr, m, m)?;
            check_sym("Q", &mq)?;
            check_sym("R", &mr)?;
            q = mq;
            s = ms;
            r = mr;
        }
        SupplyKind::L2Gain => {
            let g = params
                .gamma
                .ok_or_else(|| SosError::Supply("l2gain needs gamma".into()))?;
            q = eye(p, -1.0);
            r = eye(m, g * g);
            gamma = Some(g);
        }
        SupplyKind::Custom => {
            let c = params
                .custom
                .as_ref()
                .ok_or_else(|| SosError::Supply("custom supply needs a polynomial".into()))?;
            if c.nvars() != m + p {
                return Err(SosError::Supply(format!(
                    "custom supply has {} variables, expected {}",
                    c.nvars(),
                    m + p
                )));
            }
        }
    }
    Ok(SupplyRate {
        kind,
        m,
        p,
        q: rows(&q),
        s: rows(&s),
        r: rows(&r),
        custom: params.custom.as_ref().filter(|_| kind == SupplyKind::Custom).map(|c| c.to_doc()),
        decision,
        rho,
        nu,
        gamma,
    })
}

/// Supply rate expanded for given argument polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct SupplyPoly {
    pub known: Polynomial,
    /// Coefficient of the decision index, if any.
    pub index_coeff: Option<Polynomial>,
}

impl SupplyRate {
    pub fn passivity(m: usize) -> SupplyRate {
        make_supply(SupplyKind::Passivity, &SupplyParams { m, p: m, ..Default::default() })
            .expect("square passivity supply")
    }

    /// Reconstruct `(Q, S, R)` as matrices.
    pub fn matrices(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let mat = |v: &Vec<Vec<f64>>, r: usize, c: usize| {
            DMatrix::from_fn(r, c, |i, j| v[i][j])
        };
        (mat(&self.q, self.p, self.p), mat(&self.s, self.p, self.m), mat(&self.r, self.m, self.m))
    }

    /// Whether `w` involves the outputs at all.
    pub fn uses_outputs(&self) -> bool {
        let (q, s, _) = self.matrices();
        let custom_y = self.custom.as_ref().is_some_and(|c| {
            c.monomials.iter().any(|mi| mi[self.m..].iter().any(|&e| e > 0))
        });
        q.iter().any(|v| *v != 0.0)
            || s.iter().any(|v| *v != 0.0)
            || custom_y
            || self.decision == Some(IndexSymbol::Rho)
    }

    /// `w(u, y)` with polynomial arguments (all over the same variables).
    pub fn evaluate(&self, u: &[Polynomial], y: &[Polynomial]) -> Result<SupplyPoly, SosError> {
        assert_eq!(u.len(), self.m);
        assert_eq!(y.len(), self.p);
        let vars = u
            .first()
            .or_else(|| y.first())
            .map(|p| p.vars().clone())
            .ok_or_else(|| SosError::Supply("supply rate with no arguments".into()))?;
        let (q, s, r) = self.matrices();
        let mut w = Polynomial::zero(vars.clone());
        for i in 0..self.m {
            for j in 0..self.m {
                if r[(i, j)] != 0.0 {
                    w = &w + &(&u[i] * &u[j]).scale(r[(i, j)]);
                }
            }
        }
        for i in 0..self.p {
            for j in 0..self.m {
                if s[(i, j)] != 0.0 {
                    w = &w + &(&y[i] * &u[j]).scale(2.0 * s[(i, j)]);
                }
            }
            for j in 0..self.p {
                if q[(i, j)] != 0.0 {
                    w = &w + &(&y[i] * &y[j]).scale(q[(i, j)]);
                }
            }
        }
        if let Some(doc) = &self.custom {
            let args: Vec<&Polynomial> = u.iter().chain(y).collect();
            for (mi, c) in doc.monomials.iter().zip(&doc.coeffs) {
                let mut t = Polynomial::constant(vars.clone(), *c);
                for (k, &e) in mi.iter().enumerate() {
                    if e > 0 {
                        t = &t * &args[k].pow(e);
                    }
                }
                w = &w + &t;
            }
        }
        let sq = |v: &[Polynomial]| {
            v.iter().fold(Polynomial::zero(vars.clone()), |acc, p| &acc + &(p * p))
        };
        let index_coeff = match self.decision {
            Some(IndexSymbol::Rho) => Some(-&sq(y)),
            Some(IndexSymbol::Nu) => Some(-&sq(u)),
            None => None,
        };
        Ok(SupplyPoly { known: w, index_coeff })
    }

    /// Numeric `w(u, y)`, with `index` substituted for a decision index.
    pub fn eval_numeric(&self, u: &[f64], y: &[f64], index: f64) -> f64 {
        let (q, s, r) = self.matrices();
        let mut w = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                w += r[(i, j)] * u[i] * u[j];
            }
        }
        for i in 0..self.p {
            for j in 0..self.m {
                w += 2.0 * s[(i, j)] * y[i] * u[j];
            }
            for j in 0..self.p {
                w += q[(i, j)] * y[i] * y[j];
            }
        }
        if let Some(doc) = &self.custom {
            let args: Vec<f64> = u.iter().chain(y).copied().collect();
            for (mi, c) in doc.monomials.iter().zip(&doc.coeffs) {
                w += c * MultiIndex(mi.clone()).eval(&args);
            }
        }
        match self.decision {
            Some(IndexSymbol::Rho) => w - index * y.iter().map(|v| v * v).sum::<f64>(),
            Some(IndexSymbol::Nu) => w - index * u.iter().map(|v| v * v).sum::<f64>(),
            None => w,
        }
    }

    /// Same supply with the decision index fixed to `v`.
    pub fn with_index(&self, v: f64) -> SupplyRate {
        let mut out = self.clone();
        let eye = |k: usize| -> Vec<Vec<f64>> {
            (0..k).map(|i| (0..k).map(|j| if i == j { -v } else { 0.0 }).collect()).collect()
        };
        match self.decision {
            Some(IndexSymbol::Rho) => {
                let add = eye(self.p);
                for i in 0..self.p {
                    out.q[i][i] += add[i][i];
                }
                out.rho = Some(v);
            }
            Some(IndexSymbol::Nu) => {
                let add = eye(self.m);
                for i in 0..self.m {
                    out.r[i][i] += add[i][i];
                }
                out.nu = Some(v);
            }
            None => {}
        }
        out.decision = None;
        out
    }
}
