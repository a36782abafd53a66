use locpass_core::approx::ApproxModel;
use locpass_core::cert::{validate, CertKind, Certificate, Verdict};
use locpass_core::expr::{parse_system, SystemModel};
use locpass_core::pipeline::{
    build_program, certificate_from_solution, make_surrogate, run, ApproxChoice, PipelineConfig, Task,
};
use locpass_core::poly::{MultiIndex, Polynomial};
use locpass_core::sos::{compile_to_sdp, make_supply, Index, SupplyKind, SupplyParams, SupplyRate};
use locpass_sdp::{solve, SolveStatus};

const MOTIVATIONAL: &str = "states x; inputs u; x' = -x + x^3 + (1 - x)*u; y1 = x - x^2 + (0.5*x^2 + 1)*u;
    region ineq x^2 - 1 <= 0;";

fn model(src: &str) -> SystemModel {
    parse_system(src).unwrap()
}

fn x_poly(m: &SystemModel, terms: &[(u32, f64)]) -> Polynomial {
    let nv = m.vars().len();
    Polynomial::from_terms(
        m.vars(),
        terms.iter().map(|&(e, c)| {
            let mut a = vec![0; nv];
            a[0] = e;
            (MultiIndex(a), c)
        }),
    )
}

fn supply(kind: SupplyKind, ix: Index) -> SupplyRate {
    make_supply(kind, &SupplyParams { m: 1, p: 1, rho: Some(ix), nu: Some(ix), ..Default::default() }).unwrap()
}

#[test]
fn reported_motivational_storage_validates() {
    let m = model(MOTIVATIONAL);
    let v = x_poly(&m, &[(4, -0.4581), (2, 1.416)]);
    let c = Certificate::from_storage(CertKind::Passivity, &m, &v, Some(SupplyRate::passivity(1)), &m.region).unwrap();
    let r = validate(&c, &m, 10_000, 42).unwrap();
    assert_eq!(r.samples, 10_000);
    assert!(r.sampled_margin >= -1e-6, "{}", r.sampled_margin);
    assert_eq!(r.verdict, Verdict::Valid);
}

#[test]
fn zero_storage_for_static_passive_map() {
    let m = model("states x; inputs u; x' = -x; y1 = u; region x in [-1, 1]; region u in [-1, 1];");
    let zero = Polynomial::zero(m.vars());
    let c = Certificate::from_storage(CertKind::Passivity, &m, &zero, Some(SupplyRate::passivity(1)), &m.region).unwrap();
    assert_eq!(validate(&c, &m, 2000, 1).unwrap().verdict, Verdict::Valid);
}

#[test]
fn negative_storage_is_invalid() {
    let m = model("states x; x' = -x; region x in [-1, 1];");
    let c = Certificate::from_storage(CertKind::Stability, &m, &x_poly(&m, &[(2, -1.0)]), None, &m.region).unwrap();
    let r = validate(&c, &m, 2000, 1).unwrap();
    assert!(r.storage_margin < 0.0);
    assert_eq!(r.verdict, Verdict::Invalid);
}

#[test]
fn mismatched_model_is_rejected() {
    let m = model("states x; x' = -x; region x in [-1, 1];");
    let other = model("states z; z' = -z; region z in [-1, 1];");
    let c = Certificate::from_storage(CertKind::Stability, &m, &x_poly(&m, &[(2, 1.0)]), None, &m.region).unwrap();
    assert!(validate(&c, &other, 100, 1).is_err());
}

#[test]
fn solved_certificate_round_trips_through_json() {
    let m = model(MOTIVATIONAL);
    let out = run(&m, &Task::Dissipativity(SupplyRate::passivity(1)), &PipelineConfig::default()).unwrap();
    assert!(out.certified, "{:?}", out.reason);
    let cert = out.certificate.unwrap();
    let original = cert.report.clone().unwrap();
    let back = Certificate::from_json(&cert.to_json()).unwrap();
    assert_eq!(back, cert);
    let again = validate(&back, &m, original.samples, original.seed).unwrap();
    assert_eq!(again, original);
    assert!(again.coefficient_residual <= 1e-6);
    assert!(again.gram_min_eigs.iter().all(|&e| e >= -1e-8));
}

#[test]
fn tampered_json_is_caught() {
    let m = model("states x; x' = -x; region x in [-1, 1];");
    let out = run(&m, &Task::Stability, &PipelineConfig::default()).unwrap();
    let mut cert = out.certificate.unwrap();
    cert.storage.coeffs.iter_mut().for_each(|c| *c = -*c);
    assert_eq!(validate(&cert, &m, 1000, 42).unwrap().verdict, Verdict::Invalid);
    let mut wrong = Certificate::from_json(&cert.to_json()).unwrap();
    wrong.schema_version = 99;
    assert!(Certificate::from_json(&wrong.to_json()).is_err());
}

#[test]
fn corrupted_error_bound_is_detected() {
    // Unstable at the origin; the degree-2 Bernstein surrogate is about -0.05 x.
    let m = model("states x; x' = 0.2*x - x^3; region x in [-0.5, 0.5];");
    let cfg = PipelineConfig { approx: ApproxChoice::Bernstein { degree: 2 }, ..Default::default() };
    let mut approx = make_surrogate(&m, &cfg).unwrap();
    let ApproxModel::Bernstein(b) = &mut approx else { panic!() };
    assert!((b.f[0].poly.max_abs_coeff() - 0.05).abs() < 1e-9);
    assert!(b.f[0].error_bound > 0.04);
    b.f[0].error_bound = 0.0;
    let task = Task::Stability;
    let prob = build_program(&m, &approx, &task, &cfg).unwrap();
    assert!(prob.error_symbols.is_empty());
    let compiled = compile_to_sdp(&prob).unwrap();
    let sol = solve(&compiled.sdp, &cfg.solver).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let cert = certificate_from_solution(&m, &approx, &task, &prob, &compiled, &sol).unwrap();
    let r = validate(&cert, &m, 10_000, 42).unwrap();
    assert!(r.dissipation_margin < 0.0);
    assert_eq!(r.verdict, Verdict::Invalid);
    // With the honest bound nothing is certified.
    assert!(!run(&m, &task, &cfg).unwrap().certified);
}

#[test]
fn stable_scalar_system_is_certified() {
    let m = model("states x; x' = -x; region x in [-1, 1];");
    for approx in [ApproxChoice::Exact, ApproxChoice::Taylor { order: 3 }, ApproxChoice::Bernstein { degree: 4 }] {
        let out = run(&m, &Task::Stability, &PipelineConfig { approx, ..Default::default() }).unwrap();
        assert!(out.certified, "{approx:?}: {:?}", out.reason);
    }
}

#[test]
fn unstable_scalar_system_is_never_certified() {
    let m = model("states x; x' = x; region x in [-1, 1];");
    let choices = [
        ApproxChoice::Exact,
        ApproxChoice::Taylor { order: 2 },
        ApproxChoice::Taylor { order: 4 },
        ApproxChoice::Bernstein { degree: 2 },
        ApproxChoice::Bernstein { degree: 4 },
        ApproxChoice::Bernstein { degree: 6 },
    ];
    for approx in choices {
        for v_degree in [2, 4] {
            let mut cfg = PipelineConfig { approx, ..Default::default() };
            cfg.build.v_degree = v_degree;
            let out = run(&m, &Task::Stability, &cfg).unwrap();
            assert!(!out.certified, "{approx:?} vdeg {v_degree}");
            assert!(out.reason.is_some());
        }
    }
}

fn index_of(src: &str, kind: SupplyKind, bisection: bool) -> f64 {
    let m = model(src);
    let cfg = PipelineConfig { bisection, ..Default::default() };
    let out = run(&m, &Task::Dissipativity(supply(kind, Index::Decision)), &cfg).unwrap();
    assert!(out.certified, "{:?}", out.reason);
    out.certificate.unwrap().index.unwrap().value
}

const GAIN_TWO: &str = "states x; inputs u; x' = -x; y1 = 2*u; region x in [-1, 1]; region u in [-1, 1];";
const IDENTITY: &str = "states x; inputs u; x' = -x; y1 = u; region x in [-1, 1]; region u in [-1, 1];";

#[test]
fn static_gain_output_index() {
    assert!((index_of(GAIN_TWO, SupplyKind::Ofp, false) - 0.5).abs() < 1e-4);
}

#[test]
fn identity_input_index() {
    assert!((index_of(IDENTITY, SupplyKind::Ifp, false) - 1.0).abs() < 1e-4);
}

#[test]
fn bisection_agrees_with_direct_maximization() {
    let direct = index_of(GAIN_TWO, SupplyKind::Ofp, false);
    let bis = index_of(GAIN_TWO, SupplyKind::Ofp, true);
    assert!((direct - bis).abs() < 2e-3, "{direct} vs {bis}");
}

#[test]
fn output_index_shrinks_with_radius() {
    let m = model(MOTIVATIONAL);
    let w = supply(SupplyKind::Ofp, Index::Decision);
    let mut last = f64::INFINITY;
    for r in [0.5, 0.75, 1.0, 1.25, 1.5] {
        let out = run(&m.with_state_ball(r), &Task::Dissipativity(w.clone()), &PipelineConfig::default()).unwrap();
        assert!(out.certified, "r={r}: {:?}", out.reason);
        let rho = out.certificate.unwrap().index.unwrap().value;
        assert!(rho <= last + 1e-6, "r={r}: {rho} > {last}");
        last = rho;
    }
    // A strictly passive interior point: ρ = 8/33 at r = 1/2.
    let small = run(&m.with_state_ball(0.5), &Task::Dissipativity(w), &PipelineConfig::default()).unwrap();
    let rho = small.certificate.unwrap().index.unwrap().value;
    assert!((rho - 8.0 / 33.0).abs() < 1e-3, "{rho}");
}
