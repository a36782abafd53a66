//! Builders for the stability and dissipativity programs.
//!
//! Every builder reduces its surrogate to the same shape: polynomial
//! dynamics `f_i + Σ_k e_{ik} E_{ik}` and outputs `h_j + Σ_k e'_{jk} E'_{jk}`
//! where each error symbol `e` is a fresh indeterminate with `|e| <= bound`.
//! The program then asks for
//!
//! ```text
//! V - φ₁ + Σ s g                                     SOS  (state constraints)
//! -Σ V_{x_i} f̃_i + w(u, ỹ) - φ₂ - error terms + Σ s g  SOS  (all constraints)
//! ```
//!
//! with `g <= 0` describing the region.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::param::{DecVar, ParamPoly};
use super::program::{enumerate_monomials, even_up, ErrorSymbol, IndexSymbol, Objective, SosProblem, VarRole};
use super::supply::SupplyRate;
use super::SosError;
use crate::approx::{BernsteinSurrogate, ExactSurrogate, TaylorSurrogate};
use crate::expr::Region;
use crate::poly::{vars as make_vars, AffineMap, MultiIndex, Polynomial, Vars};

/// How Taylor remainder symbols are confined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaylorVariant {
    /// `|r_{i;β}| <= r̄_{i;β}` per symbol, two multipliers each.
    Box,
    /// `Σ_β r_{i;β}² <= Σ_β r̄_{i;β}²` per component, one multiplier each.
    Ellipsoid,
}

impl std::str::FromStr for TaylorVariant {
    type Err = SosError;
    fn from_str(s: &str) -> Result<Self, SosError> {
        match s {
            "box" => Ok(TaylorVariant::Box),
            "ellipsoid" => Ok(TaylorVariant::Ellipsoid),
            other => Err(SosError::Options(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Maximum degree of `V`.
    pub v_degree: u32,
    /// Minimum degree of the monomials in `V`.
    pub v_min_degree: u32,
    /// Margin weight in `φ = λ Σ x_i²`.
    pub lambda: f64,
    /// Degree of the region multipliers; automatic when `None`.
    pub region_mult_degree: Option<u32>,
    /// Degree of the error multipliers; automatic when `None`.
    pub error_mult_degree: Option<u32>,
    /// Keep error symbols whose bound is exactly zero.
    pub keep_zero_bounds: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            v_degree: 4,
            v_min_degree: 2,
            lambda: 1e-6,
            region_mult_degree: None,
            error_mult_degree: None,
            keep_zero_bounds: false,
        }
    }
}

struct ErrTerm {
    /// Factor multiplying the symbol, over the base variables.
    factor: Polynomial,
    bound: f64,
}

#[derive(Clone, Copy)]
enum ErrStyle {
    Box,
    Ellipsoid,
}

/// Family labels used by one program.
struct Families {
    v_region: &'static [&'static str],
    f_err: &'static [&'static str],
    h_err: &'static [&'static str],
    state_region: &'static [&'static str],
    input_region: &'static [&'static str],
    product: &'static str,
}

struct RegionCon {
    label: String,
    g: Polynomial,
    /// Index into the family list (0 for upper / single, 1 for lower).
    side: usize,
    state_only: bool,
}

struct Assembly {
    base: Vec<String>,
    n: usize,
    f: Vec<Polynomial>,
    f_err: Vec<Vec<ErrTerm>>,
    h: Vec<Polynomial>,
    h_err: Vec<Vec<ErrTerm>>,
    /// Inputs as they enter the supply rate.
    u_sup: Vec<Polynomial>,
    region: Vec<RegionCon>,
    coord_scale: Vec<f64>,
    names: (&'static str, &'static str),
    per_symbol_names: bool,
}

fn phi(vars: &Vars, states: &[usize], lambda: f64) -> Polynomial {
    let terms = states.iter().map(|&i| {
        let mut a = MultiIndex::zero(vars.len());
        a.0[i] = 2;
        (a, lambda)
    });
    Polynomial::from_terms(vars.clone(), terms)
}

/// Basis for a multiplier `s` on factor `g` over `mv`, sized so that `s g`
/// does not exceed the (even-rounded) degrees `core` already has.
fn multiplier_basis(
    core: &ParamPoly,
    base: &[usize],
    mv: &[usize],
    factor: &Polynomial,
    min_half: u32,
    override_deg: Option<u32>,
) -> Vec<MultiIndex> {
    let nv = core.vars().len();
    let fdeg = |idx: &[usize]| -> u32 {
        factor
            .terms()
            .map(|(a, _)| idx.iter().map(|&i| a[i]).sum::<u32>())
            .max()
            .unwrap_or(0)
    };
    let (caps, total) = match override_deg {
        Some(d) => (vec![d / 2; mv.len()], d / 2),
        None => {
            let caps = mv
                .iter()
                .map(|&v| even_up(core.max_degree_over(&[v])).saturating_sub(fdeg(&[v])) / 2)
                .collect();
            let total = even_up(core.max_degree_over(base)).saturating_sub(fdeg(base)) / 2;
            (caps, total)
        }
    };
    enumerate_monomials(nv, mv, &caps, min_half.min(total), total)
}

fn vars_of(p: &ParamPoly, among: &[usize]) -> Vec<usize> {
    let used: BTreeSet<usize> = p
        .terms()
        .flat_map(|(a, _)| among.iter().copied().filter(move |&i| a[i] > 0))
        .collect();
    used.into_iter().collect()
}

impl Assembly {
    fn assemble(
        &self,
        supply: Option<&SupplyRate>,
        opts: &BuildOptions,
        style: ErrStyle,
        phi1: bool,
        phi2: bool,
        fam: &Families,
    ) -> Result<SosProblem, SosError> {
        let n = self.n;
        let nb = self.base.len();
        let mut names = self.base.clone();
        let mut roles: Vec<VarRole> = (0..nb)
            .map(|i| if i < n { VarRole::State } else { VarRole::Input })
            .collect();
        // Error symbols, in component order.
        let mut symbols: Vec<(bool, usize, usize, f64)> = Vec::new(); // (is_h, comp, var, bound)
        let mut sym_factor: Vec<Polynomial> = Vec::new();
        for (is_h, errs) in [(false, &self.f_err), (true, &self.h_err)] {
            for (i, terms) in errs.iter().enumerate() {
                for (k, t) in terms.iter().enumerate() {
                    if t.bound == 0.0 && !opts.keep_zero_bounds {
                        continue;
                    }
                    let stem = if is_h { self.names.1 } else { self.names.0 };
                    names.push(if self.per_symbol_names {
                        format!("{stem}[{},{}]", i + 1, k + 1)
                    } else {
                        format!("{stem}[{}]", i + 1)
                    });
                    roles.push(VarRole::Error);
                    symbols.push((is_h, i, names.len() - 1, t.bound));
                    sym_factor.push(t.factor.clone());
                }
            }
        }
        let vars = make_vars(&names);
        let emb = |p: &Polynomial| p.embed(&vars).expect("base variables embed");
        let mut prob = SosProblem::new(vars.clone(), roles);
        prob.coord_scale = self.coord_scale.clone();
        prob.lambda = opts.lambda;
        let base: Vec<usize> = (0..nb).collect();
        let states: Vec<usize> = (0..n).collect();
        for &(is_h, i, var, bound) in &symbols {
            prob.error_symbols.push(ErrorSymbol {
                var,
                bound,
                component: format!("{}{}", if is_h { "h" } else { "f" }, i + 1),
            });
        }

        // Storage function over the states.
        let vbasis: Vec<MultiIndex> = enumerate_monomials(
            vars.len(),
            &states,
            &vec![opts.v_degree; n],
            opts.v_min_degree,
            opts.v_degree,
        );
        let v = prob.add_free_poly("v", &vbasis);
        prob.storage = v.clone();

        // Perturbed dynamics and outputs.
        let sym_poly = |s: usize| Polynomial::var(vars.clone(), symbols[s].2);
        let mut ft: Vec<Polynomial> = self.f.iter().map(emb).collect();
        let mut ht: Vec<Polynomial> = self.h.iter().map(emb).collect();
        for (s, &(is_h, i, _, _)) in symbols.iter().enumerate() {
            let t = &sym_poly(s) * &emb(&sym_factor[s]);
            if is_h {
                ht[i] = &ht[i] + &t;
            } else {
                ft[i] = &ft[i] + &t;
            }
        }

        // Constraint 1: V - φ₁ + Σ s g.
        let mut c1 = v.clone();
        if phi1 {
            c1.add_poly(&phi(&vars, &states, opts.lambda), -1.0);
        }
        let state_cons: Vec<&RegionCon> = self.region.iter().filter(|r| r.state_only).collect();
        if !vbasis.is_empty() {
            let core = c1.clone();
            let idx = prob.constraints.len();
            let mut mults = Vec::new();
            for r in &state_cons {
                let g = emb(&r.g);
                let b = multiplier_basis(&core, &states, &states, &g, 0, opts.region_mult_degree);
                mults.push((fam.v_region[r.side.min(fam.v_region.len() - 1)], r.label.clone(), b, g));
            }
            for (family, label, b, g) in mults {
                let s = prob.add_multiplier(family, format!("{family}[{label}]"), b, g.clone(), idx);
                c1.add_scaled(&s.mul_poly(&g), 1.0);
            }
            prob.add_constraint("storage", c1);
        }

        // Constraint 2: dissipation inequality.
        let mut c2 = ParamPoly::zero(vars.clone());
        for (i, fi) in ft.iter().enumerate() {
            c2.add_scaled(&v.diff_index(i).mul_poly(fi), -1.0);
        }
        if let Some(w) = supply {
            if w.uses_outputs() && ht.is_empty() {
                return Err(SosError::Supply("supply rate uses outputs but the model has none".into()));
            }
            if w.m != self.u_sup.len() || w.p != ht.len() {
                return Err(SosError::Supply(format!(
                    "supply is {}x{} but the model has {} inputs and {} outputs",
                    w.m,
                    w.p,
                    self.u_sup.len(),
                    ht.len()
                )));
            }
            let u: Vec<Polynomial> = self.u_sup.iter().map(emb).collect();
            let sp = if u.is_empty() && ht.is_empty() {
                None
            } else {
                Some(w.evaluate(&u, &ht)?)
            };
            if let Some(sp) = sp {
                c2.add_poly(&sp.known, 1.0);
                if let (Some(coef), Some(sym)) = (sp.index_coeff, w.decision) {
                    let k = prob.add_free(match sym {
                        IndexSymbol::Rho => "rho",
                        IndexSymbol::Nu => "nu",
                    });
                    c2.add_var_times(DecVar::Free(k), &coef);
                    prob.index = Some((sym, k));
                    prob.objective = Objective::Maximize(k);
                }
            }
        }
        if phi2 {
            c2.add_poly(&phi(&vars, &states, opts.lambda), -1.0);
        }
        let core = c2.clone();
        let idx = prob.constraints.len();
        let mut pending: Vec<(String, String, Vec<MultiIndex>, Polynomial, f64)> = Vec::new();
        let sym_vars: Vec<usize> = symbols.iter().map(|s| s.2).collect();
        match style {
            ErrStyle::Box => {
                for (s, &(is_h, _, var, bound)) in symbols.iter().enumerate() {
                    let fams = if is_h { fam.h_err } else { fam.f_err };
                    let q = core.coefficient_of(var, 1);
                    let q = strip_vars(&q, &sym_vars);
                    let mv = vars_of(&q, &base);
                    let min_half = q.min_degree_over(&base) / 2;
                    let b = multiplier_basis(&core, &base, &mv, &Polynomial::constant(vars.clone(), 1.0), min_half, opts.error_mult_degree);
                    let name = &vars[var];
                    let sp = sym_poly(s);
                    let upper = &Polynomial::constant(vars.clone(), bound) - &sp;
                    let lower = &Polynomial::constant(vars.clone(), bound) + &sp;
                    pending.push((fams[0].into(), format!("{}[{name}<=]", fams[0]), b.clone(), upper, -1.0));
                    pending.push((fams[1].into(), format!("{}[{name}>=]", fams[1]), b, lower, -1.0));
                    let q2 = core.coefficient_of(var, 2);
                    if q2.num_terms() > 0 {
                        let q2 = strip_vars(&q2, &sym_vars);
                        let mv2 = vars_of(&q2, &base);
                        let min2 = q2.min_degree_over(&base) / 2;
                        let b2 = multiplier_basis(&core, &base, &mv2, &Polynomial::constant(vars.clone(), 1.0), min2, opts.error_mult_degree);
                        let g = &Polynomial::constant(vars.clone(), bound * bound) - &(&sp * &sp);
                        pending.push((fam.product.into(), format!("{}[{name}^2]", fam.product), b2, g, -1.0));
                    }
                }
            }
            ErrStyle::Ellipsoid => {
                let comps: BTreeSet<(bool, usize)> = symbols.iter().map(|s| (s.0, s.1)).collect();
                for (is_h, i) in comps {
                    let members: Vec<usize> =
                        (0..symbols.len()).filter(|&s| symbols[s].0 == is_h && symbols[s].1 == i).collect();
                    let rbar: f64 = members.iter().map(|&s| symbols[s].3 * symbols[s].3).sum();
                    let mut g = Polynomial::constant(vars.clone(), rbar);
                    let mut mv = BTreeSet::new();
                    let mut min_half = u32::MAX;
                    for &s in &members {
                        let sp = sym_poly(s);
                        g = &g - &(&sp * &sp);
                        let q = strip_vars(&core.coefficient_of(symbols[s].2, 1), &sym_vars);
                        mv.extend(vars_of(&q, &base));
                        min_half = min_half.min(q.min_degree_over(&base) / 2);
                    }
                    let mv: Vec<usize> = mv.into_iter().collect();
                    let fams = if is_h { fam.h_err } else { fam.f_err };
                    let b = multiplier_basis(
                        &core,
                        &base,
                        &mv,
                        &Polynomial::constant(vars.clone(), 1.0),
                        if min_half == u32::MAX { 0 } else { min_half },
                        opts.error_mult_degree,
                    );
                    let comp = if is_h { format!("h{}", i + 1) } else { format!("f{}", i + 1) };
                    pending.push((fams[0].into(), format!("{}[{comp}]", fams[0]), b, g, -1.0));
                }
            }
        }
        for r in &self.region {
            let g = emb(&r.g);
            let fams = if r.state_only { fam.state_region } else { fam.input_region };
            let family = fams[r.side.min(fams.len() - 1)];
            let b = multiplier_basis(&core, &base, &base, &g, 0, opts.region_mult_degree);
            pending.push((family.into(), format!("{family}[{}]", r.label), b, g, 1.0));
        }
        for (family, label, b, g, sign) in pending {
            let s = prob.add_multiplier(&family, label, b, g.clone(), idx);
            c2.add_scaled(&s.mul_poly(&g), sign);
        }
        prob.add_constraint("dissipation", c2);
        Ok(prob)
    }
}

/// Keep only terms free of the listed variables.
fn strip_vars(p: &ParamPoly, idx: &[usize]) -> ParamPoly {
    let mut out = ParamPoly::zero(p.vars().clone());
    for (a, c) in p.terms() {
        if idx.iter().all(|&i| a[i] == 0) {
            out.add_term(a.clone(), c);
        }
    }
    out
}

fn label_of(names: &[String], i: usize) -> String {
    names[i].clone()
}

/// `g <= 0` constraints of a region: `(v - lo)(v - hi)` per box plus the
/// inequalities, each marked state-only or not.
fn region_constraints(vars: &Vars, n: usize, region: &Region) -> Vec<RegionCon> {
    let mut out = Vec::new();
    for (i, b) in region.boxes.iter().enumerate() {
        if let Some(b) = b {
            let x = Polynomial::var(vars.clone(), i);
            let g = &(&x - &Polynomial::constant(vars.clone(), b.lo))
                * &(&x - &Polynomial::constant(vars.clone(), b.hi));
            out.push(RegionCon { label: vars[i].clone(), g, side: 0, state_only: i < n });
        }
    }
    for (k, g) in region.ineqs.iter().enumerate() {
        let g = g.embed(vars).expect("region over model variables");
        let state_only = g.terms().all(|(a, _)| (n..vars.len()).all(|i| a[i] == 0));
        out.push(RegionCon { label: format!("g{}", k + 1), g, side: 0, state_only });
    }
    out
}

const COR4: Families = Families {
    v_region: &["s1"],
    f_err: &["s2", "s3"],
    h_err: &["s2", "s3"],
    state_region: &["s4"],
    input_region: &["s4"],
    product: "sq",
};

const THM2: Families = Families {
    v_region: &["s1"],
    f_err: &["s2", "s3"],
    h_err: &["s4", "s5"],
    state_region: &["s6"],
    input_region: &["s7"],
    product: "sq",
};

const THM3: Families = Families {
    v_region: &["s1"],
    f_err: &["s2"],
    h_err: &["s3"],
    state_region: &["s4"],
    input_region: &["s5"],
    product: "sq",
};

const THM5: Families = Families {
    v_region: &["s1", "s2"],
    f_err: &["s3", "s4"],
    h_err: &["s9", "s10"],
    state_region: &["s5", "s6"],
    input_region: &["s7", "s8"],
    product: "sq",
};

const COR6: Families = Families {
    v_region: &["s1", "s2"],
    f_err: &["s3", "s4"],
    h_err: &["s3", "s4"],
    state_region: &["s5", "s6"],
    input_region: &["s5", "s6"],
    product: "sq",
};

fn taylor_terms(c: &crate::approx::TaylorComponent, vars: &Vars) -> Vec<ErrTerm> {
    c.remainder_monomials
        .iter()
        .zip(&c.remainder_bounds)
        .map(|(b, r)| ErrTerm { factor: Polynomial::monomial(vars.clone(), b.clone(), 1.0), bound: *r })
        .collect()
}

/// Restrict polynomials over `(x, u)` to `u = 0`, re-expressed over `x`.
fn drop_inputs(p: &Polynomial, n: usize, xvars: &Vars) -> Polynomial {
    let idx: Vec<usize> = (n..p.nvars()).collect();
    p.zero_vars(&idx).embed(xvars).expect("state-only after dropping inputs")
}

fn taylor_assembly(sur: &TaylorSurrogate, region: &Region, with_inputs: bool) -> Assembly {
    let n = sur.n;
    let names: Vec<String> = sur.vars.iter().cloned().collect();
    if with_inputs {
        Assembly {
            base: names.clone(),
            n,
            f: sur.f.iter().map(|c| c.poly.clone()).collect(),
            f_err: sur.f.iter().map(|c| taylor_terms(c, &sur.vars)).collect(),
            h: sur.h.iter().map(|c| c.poly.clone()).collect(),
            h_err: sur.h.iter().map(|c| taylor_terms(c, &sur.vars)).collect(),
            u_sup: (n..names.len()).map(|i| Polynomial::var(sur.vars.clone(), i)).collect(),
            region: region_constraints(&sur.vars, n, region),
            coord_scale: vec![1.0; names.len()],
            names: ("r", "t"),
            per_symbol_names: true,
        }
    } else {
        let xv = make_vars(&names[..n]);
        let f_err = sur
            .f
            .iter()
            .map(|c| {
                taylor_terms(c, &sur.vars)
                    .into_iter()
                    .filter(|t| t.factor.terms().all(|(a, _)| (n..names.len()).all(|i| a[i] == 0)))
                    .map(|t| ErrTerm { factor: drop_inputs(&t.factor, n, &xv), bound: t.bound })
                    .collect()
            })
            .collect();
        Assembly {
            base: names[..n].to_vec(),
            n,
            f: sur.f.iter().map(|c| drop_inputs(&c.poly, n, &xv)).collect(),
            f_err,
            h: vec![],
            h_err: vec![],
            u_sup: vec![],
            region: region_constraints(&sur.vars, n, region)
                .into_iter()
                .filter(|r| r.state_only)
                .map(|r| RegionCon { g: drop_inputs(&r.g, n, &xv), ..r })
                .collect(),
            coord_scale: vec![1.0; n],
            names: ("r", "t"),
            per_symbol_names: true,
        }
    }
}

/// Local stability from a Taylor surrogate: box-confined remainder symbols
/// and margins on both constraints. Inputs, if any, are fixed to zero.
pub fn build_stability_taylor(
    sur: &TaylorSurrogate,
    region: &Region,
    opts: &BuildOptions,
) -> Result<SosProblem, SosError> {
    check_opts(opts)?;
    taylor_assembly(sur, region, false).assemble(None, opts, ErrStyle::Box, true, true, &COR4)
}

/// Local dissipativity from a Taylor surrogate.
pub fn build_dissipativity_taylor(
    sur: &TaylorSurrogate,
    region: &Region,
    supply: &SupplyRate,
    opts: &BuildOptions,
    variant: TaylorVariant,
) -> Result<SosProblem, SosError> {
    check_opts(opts)?;
    let asm = taylor_assembly(sur, region, true);
    match variant {
        TaylorVariant::Box => asm.assemble(Some(supply), opts, ErrStyle::Box, false, false, &THM2),
        TaylorVariant::Ellipsoid => {
            asm.assemble(Some(supply), opts, ErrStyle::Ellipsoid, false, false, &THM3)
        }
    }
}

fn exact_assembly(sur: &ExactSurrogate, region: &Region, with_inputs: bool) -> Assembly {
    let n = sur.n;
    let names: Vec<String> = sur.vars.iter().cloned().collect();
    let none = |k: usize| (0..k).map(|_| Vec::new()).collect::<Vec<_>>();
    if with_inputs {
        Assembly {
            base: names.clone(),
            n,
            f: sur.f.clone(),
            f_err: none(sur.f.len()),
            h: sur.h.clone(),
            h_err: none(sur.h.len()),
            u_sup: (n..names.len()).map(|i| Polynomial::var(sur.vars.clone(), i)).collect(),
            region: region_constraints(&sur.vars, n, region),
            coord_scale: vec![1.0; names.len()],
            names: ("r", "t"),
            per_symbol_names: true,
        }
    } else {
        let xv = make_vars(&names[..n]);
        Assembly {
            base: names[..n].to_vec(),
            n,
            f: sur.f.iter().map(|p| drop_inputs(p, n, &xv)).collect(),
            f_err: none(n),
            h: vec![],
            h_err: vec![],
            u_sup: vec![],
            region: region_constraints(&sur.vars, n, region)
                .into_iter()
                .filter(|r| r.state_only)
                .map(|r| RegionCon { g: drop_inputs(&r.g, n, &xv), ..r })
                .collect(),
            coord_scale: vec![1.0; n],
            names: ("r", "t"),
            per_symbol_names: true,
        }
    }
}

/// Stability of an already-polynomial model (no error symbols).
pub fn build_stability_exact(
    sur: &ExactSurrogate,
    region: &Region,
    opts: &BuildOptions,
) -> Result<SosProblem, SosError> {
    check_opts(opts)?;
    exact_assembly(sur, region, false).assemble(None, opts, ErrStyle::Box, true, true, &COR4)
}

/// Dissipativity of an already-polynomial model (no error symbols).
pub fn build_dissipativity_exact(
    sur: &ExactSurrogate,
    region: &Region,
    supply: &SupplyRate,
    opts: &BuildOptions,
) -> Result<SosProblem, SosError> {
    check_opts(opts)?;
    exact_assembly(sur, region, true).assemble(Some(supply), opts, ErrStyle::Box, false, false, &THM2)
}

/// Coordinates `w = x / width` so the box has unit width; the Bernstein
/// polynomials are re-expressed in `w`.
fn bernstein_assembly(sur: &BernsteinSurrogate, with_inputs: bool) -> Assembly {
    let n = sur.n;
    let names: Vec<String> = sur.vars.iter().cloned().collect();
    let nv = names.len();
    let width: Vec<f64> = sur.bounds_box.iter().map(|b| b.width()).collect();
    let mid: Vec<f64> = sur.bounds_box.iter().map(|b| b.mid()).collect();
    let to_w = AffineMap {
        scale: vec![1.0; nv],
        offset: (0..nv).map(|i| -mid[i] / width[i]).collect(),
    };
    let conv = |p: &Polynomial| p.compose_affine(&to_w).expect("valid map");
    let keep = if with_inputs { nv } else { n };
    let bvars = make_vars(&names[..keep]);
    let restrict = |p: &Polynomial| {
        if with_inputs {
            p.clone()
        } else {
            drop_inputs(p, n, &bvars)
        }
    };
    let one = Polynomial::constant(bvars.clone(), 1.0);
    let f = sur.f.iter().enumerate().map(|(i, c)| restrict(&conv(&c.poly)).scale(1.0 / width[i])).collect();
    let f_err = sur
        .f
        .iter()
        .enumerate()
        .map(|(i, c)| vec![ErrTerm { factor: one.scale(1.0 / width[i]), bound: c.error_bound }])
        .collect();
    let (h, h_err) = if with_inputs {
        (
            sur.h.iter().map(|c| conv(&c.poly)).collect(),
            sur.h.iter().map(|c| vec![ErrTerm { factor: one.clone(), bound: c.error_bound }]).collect(),
        )
    } else {
        (vec![], vec![])
    };
    let mut region = Vec::new();
    for i in 0..keep {
        let w = Polynomial::var(bvars.clone(), i);
        let b = sur.bounds_box[i];
        region.push(RegionCon {
            label: format!("{}<=", label_of(&names, i)),
            g: &w - &Polynomial::constant(bvars.clone(), b.hi / width[i]),
            side: 0,
            state_only: i < n,
        });
        region.push(RegionCon {
            label: format!("{}>=", label_of(&names, i)),
            g: &Polynomial::constant(bvars.clone(), b.lo / width[i]) - &w,
            side: 1,
            state_only: i < n,
        });
    }
    Assembly {
        base: names[..keep].to_vec(),
        n,
        f,
        f_err,
        h,
        h_err,
        u_sup: (n..keep).map(|i| Polynomial::var(bvars.clone(), i).scale(width[i])).collect(),
        region,
        coord_scale: width[..keep].to_vec(),
        names: ("e", "e'"),
        per_symbol_names: false,
    }
}

/// Local dissipativity from a Bernstein surrogate.
pub fn build_dissipativity_bernstein(
    sur: &BernsteinSurrogate,
    supply: &SupplyRate,
    opts: &BuildOptions,
) -> Result<SosProblem, SosError> {
    check_opts(opts)?;
    check_box(sur)?;
    bernstein_assembly(sur, true).assemble(Some(supply), opts, ErrStyle::Box, true, false, &THM5)
}

/// Local stability from a Bernstein surrogate; inputs fixed to zero.
pub fn build_stability_bernstein(
    sur: &BernsteinSurrogate,
    opts: &BuildOptions,
) -> Result<SosProblem, SosError> {
    check_opts(opts)?;
    check_box(sur)?;
    bernstein_assembly(sur, false).assemble(None, opts, ErrStyle::Box, true, true, &COR6)
}

fn check_box(sur: &BernsteinSurrogate) -> Result<(), SosError> {
    for (i, b) in sur.bounds_box.iter().enumerate() {
        if !(b.width() > 0.0 && b.width().is_finite()) {
            return Err(SosError::Region(format!("degenerate box for `{}`", sur.vars[i])));
        }
        if !b.contains(0.0) {
            return Err(SosError::Region(format!("box for `{}` excludes the origin", sur.vars[i])));
        }
    }
    Ok(())
}

fn check_opts(opts: &BuildOptions) -> Result<(), SosError> {
    if opts.v_degree < 2 || opts.v_min_degree > opts.v_degree || opts.v_min_degree == 0 {
        return Err(SosError::Options(format!(
            "storage degrees [{}, {}] admit no Gram basis",
            opts.v_min_degree, opts.v_degree
        )));
    }
    if !(opts.lambda >= 0.0 && opts.lambda.is_finite()) {
        return Err(SosError::Options(format!("invalid margin λ = {}", opts.lambda)));
    }
    for d in [opts.region_mult_degree, opts.error_mult_degree].into_iter().flatten() {
        if d % 2 == 1 {
            return Err(SosError::Options(format!("multiplier degree {d} must be even")));
        }
    }
    Ok(())
}
