//! End-to-end runs: surrogate, program, SDP solve, certificate, validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approx::{
    bernstein_expand, detect_polynomial, taylor_surrogate, ApproxError, ApproxModel,
    BernsteinErrorMode, RemainderMode,
};
use crate::cert::{
    validate, CertError, CertKind, Certificate, ConstraintDoc, ErrorSymbolDoc, IndexDoc,
    MultiplierDoc, RegionDoc, SolverDoc, ValidationReport, Verdict, DEFAULT_SAMPLES, DEFAULT_SEED,
};
use crate::expr::SystemModel;
use crate::poly::{AffineMap, Polynomial};
use crate::sos::{
    build_dissipativity_bernstein, build_dissipativity_exact, build_dissipativity_taylor,
    build_stability_bernstein, build_stability_exact, build_stability_taylor, compile_to_sdp,
    BuildOptions, CompiledSos, IndexSymbol, SosError, SosProblem, SupplyKind, SupplyRate,
    TaylorVariant,
};
use locpass_sdp::{solve, SdpError, SdpSolution, SolveStatus, SolverOptions};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Sos(#[from] SosError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Cert(#[from] CertError),
    #[error("{0}")]
    Config(String),
}

/// Surrogate choice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ApproxChoice {
    Taylor { order: u32 },
    /// Same Bernstein degree for every variable.
    Bernstein { degree: u32 },
    Exact,
    /// Exact if polynomial, Taylor order 5 inside the unit box, Bernstein 6 otherwise.
    Auto,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    Stability,
    Dissipativity(SupplyRate),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub approx: ApproxChoice,
    pub variant: TaylorVariant,
    pub build: BuildOptions,
    pub solver: SolverOptions,
    pub remainder_mode: RemainderMode,
    /// Interval subdivisions for Taylor remainder bounds.
    pub subdivisions: usize,
    pub bernstein_error: BernsteinErrorMode,
    pub samples: usize,
    pub seed: u64,
    /// Find the index by bisection instead of a direct maximization.
    pub bisection: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            approx: ApproxChoice::Auto,
            variant: TaylorVariant::Box,
            build: BuildOptions::default(),
            solver: SolverOptions::default(),
            remainder_mode: RemainderMode::PerBeta,
            subdivisions: 1,
            bernstein_error: BernsteinErrorMode::Empirical,
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            bisection: false,
        }
    }
}

/// Bisection interval and tolerance for the index fallback.
pub const BISECTION_BRACKET: (f64, f64) = (-10.0, 10.0);
pub const BISECTION_TOL: f64 = 1e-3;

/// Resolve [`ApproxChoice::Auto`] and build the surrogate.
pub fn make_surrogate(model: &SystemModel, cfg: &PipelineConfig) -> Result<ApproxModel, PipelineError> {
    let choice = match cfg.approx {
        ApproxChoice::Auto => {
            if let Some(exact) = detect_polynomial(model) {
                return Ok(exact);
            }
            let bx = model.bounding_box().map_err(|e| PipelineError::Config(e.to_string()))?;
            let radius = bx.iter().map(|i| i.mag()).fold(0.0, f64::max);
            if radius <= 1.0 {
                ApproxChoice::Taylor { order: 5 }
            } else {
                ApproxChoice::Bernstein { degree: 6 }
            }
        }
        c => c,
    };
    Ok(match choice {
        ApproxChoice::Taylor { order } => ApproxModel::Taylor(taylor_surrogate(
            model,
            order,
            cfg.remainder_mode,
            cfg.subdivisions,
        )?),
        ApproxChoice::Bernstein { degree } => {
            let d = vec![degree; model.n() + model.m()];
            ApproxModel::Bernstein(bernstein_expand(model, &d, &d, cfg.bernstein_error)?)
        }
        ApproxChoice::Exact => detect_polynomial(model)
            .ok_or_else(|| PipelineError::Config("model is not polynomial".into()))?,
        ApproxChoice::Auto => unreachable!(),
    })
}

/// Assemble the SOS program for `task` on `model` using `approx`.
pub fn build_program(
    model: &SystemModel,
    approx: &ApproxModel,
    task: &Task,
    cfg: &PipelineConfig,
) -> Result<SosProblem, PipelineError> {
    let o = &cfg.build;
    let region = &model.region;
    Ok(match (approx, task) {
        (ApproxModel::Taylor(s), Task::Stability) => build_stability_taylor(s, region, o)?,
        (ApproxModel::Taylor(s), Task::Dissipativity(w)) => {
            build_dissipativity_taylor(s, region, w, o, cfg.variant)?
        }
        (ApproxModel::Bernstein(s), Task::Stability) => build_stability_bernstein(s, o)?,
        (ApproxModel::Bernstein(s), Task::Dissipativity(w)) => build_dissipativity_bernstein(s, w, o)?,
        (ApproxModel::Exact(s), Task::Stability) => build_stability_exact(s, region, o)?,
        (ApproxModel::Exact(s), Task::Dissipativity(w)) => build_dissipativity_exact(s, region, w, o)?,
    })
}

/// Result of one attempted certification.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub certified: bool,
    /// Why certification failed, if it did.
    pub reason: Option<String>,
    pub certificate: Option<Certificate>,
    pub status: Option<SolveStatus>,
    pub gram_dimension: usize,
    pub num_constraints: usize,
    pub num_free: usize,
}

fn kind_of(task: &Task) -> CertKind {
    match task {
        Task::Stability => CertKind::Stability,
        Task::Dissipativity(w) => match w.kind {
            SupplyKind::Passivity => CertKind::Passivity,
            SupplyKind::Ofp => CertKind::Ofp,
            SupplyKind::Ifp => CertKind::Ifp,
            SupplyKind::Qsr => CertKind::Qsr,
            _ => CertKind::Dissipativity,
        },
    }
}

/// Storage function in model coordinates.
fn storage_in_model(prob: &SosProblem, v: &Polynomial, model: &SystemModel) -> Result<Polynomial, PipelineError> {
    let nv = prob.vars.len();
    let scale: Vec<f64> = (0..nv)
        .map(|i| prob.coord_scale.get(i).map(|s| 1.0 / s).unwrap_or(1.0))
        .collect();
    let back = v
        .compose_affine(&AffineMap { scale, offset: vec![0.0; nv] })
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    back.embed(&model.vars()).map_err(|e| PipelineError::Config(e.to_string()))
}

/// Certificate for a solved program (not yet validated).
pub fn certificate_from_solution(
    model: &SystemModel,
    approx: &ApproxModel,
    task: &Task,
    prob: &SosProblem,
    compiled: &CompiledSos,
    sol: &SdpSolution,
) -> Result<Certificate, PipelineError> {
    let asg = compiled.assignment(prob, sol);
    let v = prob.storage.eval(&asg);
    let storage = storage_in_model(prob, &v, model)?;
    let names: Vec<String> = prob.vars.iter().cloned().collect();
    let rows = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
    };
    let multipliers = prob
        .multipliers
        .iter()
        .map(|m| MultiplierDoc {
            name: m.label.clone(),
            family: m.family.clone(),
            constraint: prob.constraints[m.constraint].name.clone(),
            factor: m.factor.to_doc(),
            basis: m.basis.iter().map(|b| b.0.clone()).collect(),
            gram: rows(&asg.grams[m.block]),
        })
        .collect();
    let constraints = prob
        .constraints
        .iter()
        .enumerate()
        .map(|(k, c)| ConstraintDoc {
            name: c.name.clone(),
            variables: names.clone(),
            poly: c.poly.eval(&asg).to_doc(),
            basis: compiled.constraint_bases[k].iter().map(|b| b.0.clone()).collect(),
            gram: rows(&compiled.constraint_gram(k, sol)),
        })
        .collect();
    let index = prob.index.map(|(symbol, k)| IndexDoc { symbol, value: sol.free[k], bracket_width: None });
    let supply = match task {
        Task::Dissipativity(w) => Some(w.clone()),
        Task::Stability => None,
    };
    Ok(Certificate {
        schema_version: crate::cert::SCHEMA_VERSION,
        kind: kind_of(task),
        variables: model.var_names(),
        n: model.n(),
        m: model.m(),
        p: model.p(),
        storage: storage.to_doc(),
        multipliers,
        constraints,
        index,
        supply,
        region: RegionDoc::from_region(&model.region),
        approx: Some(approx.to_doc()),
        error_symbols: prob
            .error_symbols
            .iter()
            .map(|e| ErrorSymbolDoc {
                name: prob.vars[e.var].clone(),
                component: e.component.clone(),
                bound: e.bound,
            })
            .collect(),
        solver: Some(SolverDoc {
            status: sol.status,
            iterations: sol.iterations,
            primal_residual: sol.residuals.primal,
            dual_residual: sol.residuals.dual,
            gap: sol.residuals.gap,
        }),
        report: None,
    })
}

struct Solved {
    prob: SosProblem,
    compiled: CompiledSos,
    sol: Result<SdpSolution, SdpError>,
}

fn solve_program(model: &SystemModel, approx: &ApproxModel, task: &Task, cfg: &PipelineConfig) -> Result<Solved, PipelineError> {
    let prob = build_program(model, approx, task, cfg)?;
    let compiled = compile_to_sdp(&prob)?;
    let sol = solve(&compiled.sdp, &cfg.solver);
    Ok(Solved { prob, compiled, sol })
}

fn finish(
    model: &SystemModel,
    approx: &ApproxModel,
    task: &Task,
    cfg: &PipelineConfig,
    s: Solved,
    bracket: Option<f64>,
) -> Result<RunOutcome, PipelineError> {
    let mut out = RunOutcome {
        certified: false,
        reason: None,
        certificate: None,
        status: None,
        gram_dimension: s.compiled.sdp.gram_dimension(),
        num_constraints: s.compiled.sdp.constraints.len(),
        num_free: s.compiled.sdp.num_free,
    };
    let sol = match s.sol {
        Ok(sol) => sol,
        Err(SdpError::TooLarge { what, got, cap }) => {
            out.reason = Some(format!("problem too large: {what} = {got} exceeds {cap}"));
            return Ok(out);
        }
        Err(e) => return Err(e.into()),
    };
    out.status = Some(sol.status);
    if sol.status != SolveStatus::Optimal {
        out.reason = Some(format!("solver status {:?}", sol.status).to_lowercase());
        return Ok(out);
    }
    let mut cert = certificate_from_solution(model, approx, task, &s.prob, &s.compiled, &sol)?;
    if let (Some(w), Some(ix)) = (bracket, cert.index.as_mut()) {
        ix.bracket_width = Some(w);
    }
    let report = validate(&cert, model, cfg.samples, cfg.seed)?;
    out.certified = report.verdict == Verdict::Valid;
    if !out.certified {
        out.reason = Some(describe(&report));
    }
    cert.report = Some(report);
    out.certificate = Some(cert);
    Ok(out)
}

fn describe(r: &ValidationReport) -> String {
    format!(
        "validation {:?}: residual {:.3e}, sampled margin {:.3e}",
        r.verdict, r.coefficient_residual, r.sampled_margin
    )
    .to_lowercase()
}

/// Full run for a fixed task.
pub fn run(model: &SystemModel, task: &Task, cfg: &PipelineConfig) -> Result<RunOutcome, PipelineError> {
    let approx = make_surrogate(model, cfg)?;
    if let Task::Dissipativity(w) = task {
        if w.decision.is_some() && cfg.bisection {
            return run_bisection(model, &approx, w, cfg);
        }
    }
    let s = solve_program(model, &approx, task, cfg)?;
    finish(model, &approx, task, cfg, s, None)
}

/// Largest feasible index on [`BISECTION_BRACKET`], one feasibility SDP per step.
fn run_bisection(
    model: &SystemModel,
    approx: &ApproxModel,
    w: &SupplyRate,
    cfg: &PipelineConfig,
) -> Result<RunOutcome, PipelineError> {
    let feasible = |v: f64| -> Result<(bool, Solved), PipelineError> {
        let task = Task::Dissipativity(w.with_index(v));
        let s = solve_program(model, approx, &task, cfg)?;
        let ok = matches!(&s.sol, Ok(sol) if sol.status == SolveStatus::Optimal);
        Ok((ok, s))
    };
    let (mut lo, mut hi) = BISECTION_BRACKET;
    let (ok_lo, mut best) = feasible(lo)?;
    if !ok_lo {
        let task = Task::Dissipativity(w.with_index(lo));
        let mut out = finish(model, approx, &task, cfg, best, None)?;
        out.certified = false;
        out.reason = Some(format!("infeasible at the bracket's lower end {lo}"));
        return Ok(out);
    }
    let mut best_v = lo;
    let (ok_hi, s_hi) = feasible(hi)?;
    if ok_hi {
        best = s_hi;
        best_v = hi;
        lo = hi;
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let (ok, s) = feasible(mid)?;
        if ok {
            lo = mid;
            best = s;
            best_v = mid;
        } else {
            hi = mid;
        }
    }
    let task = Task::Dissipativity(w.with_index(best_v));
    let mut out = finish(model, approx, &task, cfg, best, Some(hi - lo))?;
    // The supply stored in the certificate is fixed at the certified end;
    // the reported index is the bracket midpoint.
    if let Some(c) = out.certificate.as_mut() {
        let sym = w.decision.unwrap_or(IndexSymbol::Rho);
        c.index = Some(IndexDoc { symbol: sym, value: 0.5 * (lo + hi), bracket_width: Some(hi - lo) });
    }
    Ok(out)
}

/// Program and SDP without solving.
pub fn export(model: &SystemModel, task: &Task, cfg: &PipelineConfig) -> Result<(SosProblem, CompiledSos), PipelineError> {
    let approx = make_surrogate(model, cfg)?;
    let prob = build_program(model, &approx, task, cfg)?;
    let compiled = compile_to_sdp(&prob)?;
    Ok((prob, compiled))
}
