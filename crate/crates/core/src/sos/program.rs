//! SOS programs and their compilation to a single SDP.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use locpass_sdp::{Block, BlockKind, Constraint, LinearForm, SdpProblem, SdpSolution, SparseSym};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::param::{Assignment, DecVar, LinExpr, ParamPoly};
use super::SosError;
use crate::poly::{MultiIndex, Polynomial, Vars};

/// Role of an indeterminate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarRole {
    State,
    Input,
    /// Error symbol standing for an unknown remainder value.
    Error,
}

/// An error symbol with its magnitude bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSymbol {
    pub var: usize,
    pub bound: f64,
    /// Component it belongs to, e.g. `f2` or `h1`.
    pub component: String,
}

/// An SOS multiplier `s` attached to a factor `g` inside a constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct Multiplier {
    /// Family label such as `s1` or `s4`.
    pub family: String,
    pub label: String,
    pub block: usize,
    pub basis: Vec<MultiIndex>,
    pub factor: Polynomial,
    pub constraint: usize,
}

/// `poly` must be a sum of squares.
#[derive(Clone, Debug, PartialEq)]
pub struct SosConstraint {
    pub name: String,
    pub poly: ParamPoly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexSymbol {
    Rho,
    Nu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    Feasibility,
    /// Maximize a free scalar.
    Maximize(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SosProblem {
    pub vars: Vars,
    pub roles: Vec<VarRole>,
    pub free_names: Vec<String>,
    pub multipliers: Vec<Multiplier>,
    pub constraints: Vec<SosConstraint>,
    pub objective: Objective,
    /// The storage / Lyapunov function.
    pub storage: ParamPoly,
    pub index: Option<(IndexSymbol, usize)>,
    pub error_symbols: Vec<ErrorSymbol>,
    /// Problem coordinates are `x / scale` per state and input.
    pub coord_scale: Vec<f64>,
    pub lambda: f64,
}

impl SosProblem {
    pub fn new(vars: Vars, roles: Vec<VarRole>) -> Self {
        assert_eq!(vars.len(), roles.len());
        let nbase = roles.iter().filter(|r| **r != VarRole::Error).count();
        SosProblem {
            storage: ParamPoly::zero(vars.clone()),
            vars,
            roles,
            free_names: Vec::new(),
            multipliers: Vec::new(),
            constraints: Vec::new(),
            objective: Objective::Feasibility,
            index: None,
            error_symbols: Vec::new(),
            coord_scale: vec![1.0; nbase],
            lambda: 0.0,
        }
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> usize {
        self.free_names.push(name.into());
        self.free_names.len() - 1
    }

    /// `Σ c_k x^{basis_k}` with fresh free coefficients.
    pub fn add_free_poly(&mut self, prefix: &str, basis: &[MultiIndex]) -> ParamPoly {
        let first = self.free_names.len();
        for k in 0..basis.len() {
            self.free_names.push(format!("{prefix}{k}"));
        }
        ParamPoly::free_combination(self.vars.clone(), basis, first)
    }

    /// Fresh SOS multiplier over `basis`; the caller adds `s * factor` to
    /// constraint `constraint`.
    pub fn add_multiplier(
        &mut self,
        family: &str,
        label: String,
        basis: Vec<MultiIndex>,
        factor: Polynomial,
        constraint: usize,
    ) -> ParamPoly {
        let block = self.multipliers.len();
        let p = ParamPoly::gram(self.vars.clone(), &basis, block);
        self.multipliers.push(Multiplier {
            family: family.to_string(),
            label,
            block,
            basis,
            factor,
            constraint,
        });
        p
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, poly: ParamPoly) -> usize {
        self.constraints.push(SosConstraint { name: name.into(), poly });
        self.constraints.len() - 1
    }

    /// Indices of states and inputs.
    pub fn base_vars(&self) -> Vec<usize> {
        (0..self.vars.len()).filter(|&i| self.roles[i] != VarRole::Error).collect()
    }

    pub fn state_vars(&self) -> Vec<usize> {
        (0..self.vars.len()).filter(|&i| self.roles[i] == VarRole::State).collect()
    }

    /// Multipliers per family label.
    pub fn family_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for m in &self.multipliers {
            *out.entry(m.family.clone()).or_insert(0) += 1;
        }
        out
    }

    /// Multipliers attached to constraint `c`.
    pub fn multipliers_in(&self, c: usize) -> usize {
        self.multipliers.iter().filter(|m| m.constraint == c).count()
    }

    /// Human-readable listing of the program.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "indeterminates: {}", self.vars.join(", "));
        let _ = writeln!(out, "free scalars: {}", self.free_names.len());
        for m in &self.multipliers {
            let _ = writeln!(
                out,
                "multiplier {} ({}): Q{} over {} monomials, factor {}",
                m.label,
                m.family,
                m.block,
                m.basis.len(),
                m.factor
            );
        }
        match self.objective {
            Objective::Feasibility => {
                let _ = writeln!(out, "objective: feasibility");
            }
            Objective::Maximize(k) => {
                let _ = writeln!(out, "objective: maximize c{k} ({})", self.free_names[k]);
            }
        }
        for c in &self.constraints {
            let _ = writeln!(out, "constraint {} is SOS:\n  {}", c.name, c.poly);
        }
        out
    }
}

/// Round `d` up to an even number.
pub(crate) fn even_up(d: u32) -> u32 {
    d + d % 2
}

/// Monomials over `over` (other exponents zero) with per-variable caps and
/// total degree in `[lo, hi]`.
pub(crate) fn enumerate_monomials(
    nvars: usize,
    over: &[usize],
    caps: &[u32],
    lo: u32,
    hi: u32,
) -> Vec<MultiIndex> {
    fn rec(
        k: usize,
        over: &[usize],
        caps: &[u32],
        left: u32,
        cur: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if k == over.len() {
            out.push(cur.clone());
            return;
        }
        for e in 0..=caps[k].min(left) {
            cur[over[k]] = e;
            rec(k + 1, over, caps, left - e, cur, out);
        }
        cur[over[k]] = 0;
    }
    let mut raw = Vec::new();
    let mut cur = vec![0u32; nvars];
    rec(0, over, caps, hi, &mut cur, &mut raw);
    let mut out: Vec<MultiIndex> = raw
        .into_iter()
        .map(MultiIndex)
        .filter(|m| m.degree() >= lo)
        .collect();
    out.sort();
    out
}

/// Gram basis for a polynomial with the given support: monomials inside
/// half the Newton polytope's bounding faces (per variable, per group, and
/// total degree), then iterated removal of monomials whose square cannot
/// be matched.
pub fn gram_basis(support: &[MultiIndex], nvars: usize, groups: &[Vec<usize>]) -> Vec<MultiIndex> {
    if support.is_empty() {
        return Vec::new();
    }
    let wdeg = |a: &MultiIndex, g: &[usize]| g.iter().map(|&i| a[i]).sum::<u32>();
    let all: Vec<usize> = (0..nvars).collect();
    let bound = |g: &[usize]| {
        let ds: Vec<u32> = support.iter().map(|a| wdeg(a, g)).collect();
        let mx = *ds.iter().max().unwrap();
        let mn = *ds.iter().min().unwrap();
        ((mn + 1) / 2, mx / 2)
    };
    let (lo_all, hi_all) = bound(&all);
    if lo_all > hi_all {
        return Vec::new();
    }
    let mut caps = Vec::with_capacity(nvars);
    let mut mins = Vec::with_capacity(nvars);
    for v in 0..nvars {
        let (lo, hi) = bound(&[v]);
        caps.push(hi);
        mins.push(lo);
    }
    if mins.iter().zip(&caps).any(|(l, h)| l > h) {
        return Vec::new();
    }
    let gb: Vec<(Vec<usize>, u32, u32)> = groups
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            let (lo, hi) = bound(g);
            (g.clone(), lo, hi)
        })
        .collect();
    let mut basis: Vec<MultiIndex> = enumerate_monomials(nvars, &all, &caps, lo_all, hi_all)
        .into_iter()
        .filter(|m| (0..nvars).all(|v| m[v] >= mins[v]))
        .filter(|m| gb.iter().all(|(g, lo, hi)| {
            let d = wdeg(m, g);
            d >= *lo && d <= *hi
        }))
        .collect();

    let supp: BTreeSet<&MultiIndex> = support.iter().collect();
    loop {
        let set: BTreeSet<MultiIndex> = basis.iter().cloned().collect();
        let mut keep = Vec::with_capacity(basis.len());
        for m in &basis {
            let sq = m.add(m);
            if supp.contains(&sq) {
                keep.push(m.clone());
                continue;
            }
            // Can 2m be written as b_i + b_j with b_i != b_j?
            let cross = basis.iter().any(|b| {
                b != m
                    && (0..nvars).all(|v| b[v] <= sq[v])
                    && set.contains(&MultiIndex((0..nvars).map(|v| sq[v] - b[v]).collect()))
            });
            if cross {
                keep.push(m.clone());
            }
        }
        if keep.len() == basis.len() {
            break;
        }
        basis = keep;
    }
    basis
}

/// A compiled program: the SDP plus the bookkeeping to map a solution back.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledSos {
    pub sdp: SdpProblem,
    /// Gram basis per constraint.
    pub constraint_bases: Vec<Vec<MultiIndex>>,
    /// SDP block of each constraint's Gram matrix (`None` if the basis is empty).
    pub constraint_blocks: Vec<Option<usize>>,
    /// Equality rows as `(constraint, monomial)`.
    pub rows: Vec<(usize, MultiIndex)>,
}

/// Constant-only rows smaller than this are treated as satisfied.
const TRIVIAL_ROW_TOL: f64 = 1e-12;

/// Gram parameterization: each SOS constraint gets a PSD block over
/// [`gram_basis`] and one coefficient-matching equality per monomial.
pub fn compile_to_sdp(prob: &SosProblem) -> Result<CompiledSos, SosError> {
    let nvars = prob.vars.len();
    let base = prob.base_vars();
    let errs: Vec<usize> = (0..nvars).filter(|&i| prob.roles[i] == VarRole::Error).collect();
    let groups = vec![base, errs];
    let nm = prob.multipliers.len();
    let mut blocks: Vec<Block> = prob
        .multipliers
        .iter()
        .map(|m| Block { size: m.basis.len().max(1), kind: BlockKind::Psd })
        .collect();
    for m in &prob.multipliers {
        if m.basis.is_empty() {
            return Err(SosError::EmptyBasis(m.label.clone()));
        }
    }
    let mut constraint_bases = Vec::new();
    let mut constraint_blocks = Vec::new();
    let mut rows = Vec::new();
    let mut sdp_rows: Vec<Constraint> = Vec::new();

    for (ci, c) in prob.constraints.iter().enumerate() {
        let support = c.poly.support();
        let basis = gram_basis(&support, nvars, &groups);
        let block = if basis.is_empty() {
            None
        } else {
            blocks.push(Block { size: basis.len(), kind: BlockKind::Psd });
            Some(blocks.len() - 1)
        };
        // p(d) - z'Gz = 0, coefficientwise.
        let mut eq: BTreeMap<MultiIndex, LinExpr> =
            c.poly.terms().map(|(a, l)| (a.clone(), l.clone())).collect();
        if let Some(b) = block {
            for i in 0..basis.len() {
                for j in i..basis.len() {
                    let w = if i == j { -1.0 } else { -2.0 };
                    eq.entry(basis[i].add(&basis[j]))
                        .or_default()
                        .add_scaled(&LinExpr::var(DecVar::Gram { block: b, i, j }, w), 1.0);
                }
            }
        }
        for (a, l) in eq {
            if l.terms.is_empty() {
                if l.constant.abs() > TRIVIAL_ROW_TOL {
                    return Err(SosError::InfeasibleEqualities {
                        constraint: c.name.clone(),
                        monomial: a.0.clone(),
                        value: l.constant,
                    });
                }
                continue;
            }
            let mut per_block: BTreeMap<usize, SparseSym> = BTreeMap::new();
            let mut free = Vec::new();
            for (v, coef) in &l.terms {
                match *v {
                    DecVar::Free(k) => free.push((k, *coef)),
                    DecVar::Gram { block, i, j } => {
                        let val = if i == j { *coef } else { coef / 2.0 };
                        per_block.entry(block).or_default().push(i, j, val);
                    }
                }
            }
            let form = LinearForm {
                blocks: per_block
                    .into_iter()
                    .map(|(k, mut s)| {
                        s.normalize();
                        (k, s)
                    })
                    .filter(|(_, s)| !s.entries.is_empty())
                    .collect(),
                free,
            };
            sdp_rows.push(Constraint { form, rhs: -l.constant });
            rows.push((ci, a));
        }
        constraint_bases.push(basis);
        constraint_blocks.push(block);
    }
    debug_assert!(blocks.len() >= nm);
    let objective = match prob.objective {
        Objective::Feasibility => LinearForm::default(),
        Objective::Maximize(k) => LinearForm { blocks: vec![], free: vec![(k, 1.0)] },
    };
    if sdp_rows.is_empty() {
        return Err(SosError::Trivial);
    }
    Ok(CompiledSos {
        sdp: SdpProblem {
            blocks,
            num_free: prob.free_names.len(),
            constraints: sdp_rows,
            objective,
        },
        constraint_bases,
        constraint_blocks,
        rows,
    })
}

impl CompiledSos {
    /// Decision values from an SDP solution (multiplier blocks only).
    pub fn assignment(&self, prob: &SosProblem, sol: &SdpSolution) -> Assignment {
        Assignment {
            free: sol.free.clone(),
            grams: sol.x[..prob.multipliers.len()].to_vec(),
        }
    }

    /// Gram matrix of constraint `c` in `sol` (empty if it has no block).
    pub fn constraint_gram(&self, c: usize, sol: &SdpSolution) -> DMatrix<f64> {
        match self.constraint_blocks[c] {
            Some(b) => sol.x[b].clone(),
            None => DMatrix::zeros(0, 0),
        }
    }
}

/// `z' G z` as a plain polynomial.
pub fn gram_polynomial(vars: &Vars, basis: &[MultiIndex], g: &DMatrix<f64>) -> Polynomial {
    let mut terms = Vec::new();
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            terms.push((basis[i].add(&basis[j]), g[(i, j)]));
        }
    }
    Polynomial::from_terms(vars.clone(), terms)
}
