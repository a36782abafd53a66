use std::collections::BTreeMap;

use locpass_core::approx::{bernstein_expand, detect_polynomial, taylor_surrogate, ApproxModel, BernsteinErrorMode, RemainderMode};
use locpass_core::expr::{parse_system, SystemModel};
use locpass_core::poly::{Polynomial, MultiIndex};
use locpass_core::sos::*;
use locpass_sdp::{solve, SolveStatus, SolverOptions};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EX2_BALL: &str = "states x1, x2; inputs u; x1' = x2; x2' = -2*x2 - x1*cos(x1 + x2) + u; y1 = x2;
    region ineq x1^2 + x2^2 - 1 <= 0; region u in [-1, 1];";
const EX1: &str = "states x1, x2; x1' = x2; x2' = -2*x2 - x1*cos(x1 + x2);
    region x1 in [-1, 1]; region x2 in [-1, 1];";
const EX4: &str = "states x1, x2; inputs u; x1' = x2; x2' = -2*x2 - x1*cos(x1 + x2) + u; y1 = x2;
    region x1 in [-0.5, 0.5]; region x2 in [-0.5, 0.5]; region u in [-0.5, 0.5];";
const MOTIVATIONAL: &str = "states x; inputs u; x' = -x + x^3 + (1 - x)*u; y1 = x - x^2 + (0.5*x^2 + 1)*u;
    region ineq x^2 - 1 <= 0;";

fn keep_all() -> BuildOptions {
    BuildOptions { keep_zero_bounds: true, ..Default::default() }
}

fn counts(p: &SosProblem) -> BTreeMap<String, usize> {
    p.family_counts()
}

fn total(p: &SosProblem) -> usize {
    p.multipliers.len()
}

/// `C(n + k - 1, k)`: monomials of exact degree `k` in `n` variables.
fn exact(n: u64, k: u64) -> usize {
    let mut c = 1u64;
    for i in 0..k {
        c = c * (n + i) / (i + 1);
    }
    c as usize
}

fn taylor(model: &SystemModel, k: u32) -> locpass_core::approx::TaylorSurrogate {
    taylor_surrogate(model, k, RemainderMode::PerBeta, 1).unwrap()
}

#[test]
fn box_variant_multiplier_count() {
    let m = parse_system(EX2_BALL).unwrap();
    for k in [2u32, 3] {
        let s = taylor(&m, k);
        let w = SupplyRate::passivity(1);
        let p = build_dissipativity_taylor(&s, &m.region, &w, &keep_all(), TaylorVariant::Box).unwrap();
        let beta = exact(3, k as u64);
        let (n, pp) = (2, 1);
        // x-ball and u-box
        let (ix, iu) = (1, 1);
        assert_eq!(total(&p), 2 * n * beta + 2 * pp * beta + ix + iu + 1, "k={k}: {:?}", counts(&p));
        let c = counts(&p);
        assert_eq!(c["s1"], 1);
        assert_eq!(c["s2"] + c["s3"], 2 * n * beta);
        assert_eq!(c["s4"] + c["s5"], 2 * pp * beta);
        assert_eq!(c["s6"], ix);
        assert_eq!(c["s7"], iu);
    }
}

#[test]
fn ellipsoid_variant_follows_displayed_program() {
    let m = parse_system(EX2_BALL).unwrap();
    let s = taylor(&m, 3);
    let p = build_dissipativity_taylor(&s, &m.region, &SupplyRate::passivity(1), &keep_all(), TaylorVariant::Ellipsoid)
        .unwrap();
    let c = counts(&p);
    // s1: I_X, s2: n, s3: p, s4: I_X, s5: I_U
    assert_eq!((c["s1"], c["s2"], c["s3"], c["s4"], c["s5"]), (1, 2, 1, 1, 1));
    assert_eq!(total(&p), 6);
}

#[test]
fn zero_bounds_are_dropped_by_default() {
    let m = parse_system(EX1).unwrap();
    let s = taylor(&m, 4);
    let with = build_stability_taylor(&s, &m.region, &keep_all()).unwrap();
    let without = build_stability_taylor(&s, &m.region, &BuildOptions::default()).unwrap();
    // f1 = x2 has identically zero remainders.
    let beta = exact(2, 4);
    assert_eq!(with.error_symbols.len(), 2 * beta);
    assert_eq!(without.error_symbols.len(), beta);
    assert!(without.error_symbols.iter().all(|e| e.component == "f2"));
}

#[test]
fn taylor_stability_multiplier_count() {
    let m = parse_system(EX1).unwrap();
    let s = taylor(&m, 5);
    let p = build_stability_taylor(&s, &m.region, &keep_all()).unwrap();
    let c = counts(&p);
    let beta = exact(2, 5);
    // two box constraints on the states
    assert_eq!(c["s1"], 2);
    assert_eq!(c["s2"] + c["s3"], 2 * 2 * beta);
    assert_eq!(c["s4"], 2);
    assert_eq!(p.constraints.len(), 2);
}

#[test]
fn bernstein_dissipativity_multiplier_count() {
    let m = parse_system(EX4).unwrap();
    let s = bernstein_expand(&m, &[4, 4, 4], &[4, 4, 4], BernsteinErrorMode::Empirical).unwrap();
    let p = build_dissipativity_bernstein(&s, &SupplyRate::passivity(1), &keep_all()).unwrap();
    let (n, mm, pp) = (2, 1, 1);
    let storage = p.constraints.iter().position(|c| c.name == "storage").unwrap();
    let diss = p.constraints.iter().position(|c| c.name == "dissipation").unwrap();
    assert_eq!(p.multipliers_in(storage), 2 * n);
    // Box-side pairs of s1..s10; the storage pair is not repeated in the dissipation inequality.
    assert_eq!(p.multipliers_in(diss), 4 * n + 2 * mm + 2 * pp);
    assert_eq!(total(&p), 6 * n + 2 * mm + 2 * pp);
    let c = counts(&p);
    for f in ["s1", "s2", "s3", "s4", "s5", "s6"] {
        assert_eq!(c[f], n, "{f}");
    }
    for f in ["s7", "s8"] {
        assert_eq!(c[f], mm, "{f}");
    }
    for f in ["s9", "s10"] {
        assert_eq!(c[f], pp, "{f}");
    }
}

#[test]
fn bernstein_stability_multiplier_count() {
    let m = parse_system(
        "states th, om; th' = om; om' = -sin(th) - om; region th in [-0.5, 0.5]; region om in [-0.5, 0.5];",
    )
    .unwrap();
    let s = bernstein_expand(&m, &[6, 6], &[6, 6], BernsteinErrorMode::Empirical).unwrap();
    let p = build_stability_bernstein(&s, &keep_all()).unwrap();
    let c = counts(&p);
    for f in ["s1", "s2", "s3", "s4", "s5", "s6"] {
        assert_eq!(c[f], 2, "{f}");
    }
    assert_eq!(total(&p), 12);
}

#[test]
fn exact_surrogate_has_no_error_multipliers() {
    let m = parse_system(MOTIVATIONAL).unwrap();
    let Some(ApproxModel::Exact(s)) = detect_polynomial(&m) else { panic!("polynomial model") };
    let p = build_dissipativity_exact(&s, &m.region, &SupplyRate::passivity(1), &keep_all()).unwrap();
    assert!(p.error_symbols.is_empty());
    let c = counts(&p);
    assert_eq!(c.get("s2"), None);
    assert_eq!(c["s1"], 1);
    assert_eq!(c["s6"], 1);
}

#[test]
fn supply_with_outputs_needs_outputs() {
    let m = parse_system("states x; inputs u; x' = -x + u; region x in [-1, 1]; region u in [-1, 1];").unwrap();
    let Some(ApproxModel::Exact(s)) = detect_polynomial(&m) else { panic!() };
    let w = make_supply(SupplyKind::Ifp, &SupplyParams { m: 1, p: 1, nu: Some(Index::Fixed(0.0)), ..Default::default() })
        .unwrap();
    assert!(matches!(build_dissipativity_exact(&s, &m.region, &w, &keep_all()), Err(SosError::Supply(_))));
}

#[test]
fn invalid_options_are_rejected() {
    let m = parse_system(EX1).unwrap();
    let s = taylor(&m, 3);
    let bad = [
        BuildOptions { v_degree: 1, v_min_degree: 1, ..Default::default() },
        BuildOptions { v_min_degree: 6, ..Default::default() },
        BuildOptions { lambda: -1.0, ..Default::default() },
        BuildOptions { region_mult_degree: Some(3), ..Default::default() },
    ];
    for o in bad {
        assert!(matches!(build_stability_taylor(&s, &m.region, &o), Err(SosError::Options(_))), "{o:?}");
    }
}

fn random_assignment(prob: &SosProblem, rng: &mut ChaCha8Rng) -> Assignment {
    Assignment {
        free: (0..prob.free_names.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        grams: prob
            .multipliers
            .iter()
            .map(|m| {
                let k = m.basis.len();
                let a = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
                &a + a.transpose()
            })
            .collect(),
    }
}

fn combine(a: &Assignment, b: &Assignment, s: f64) -> Assignment {
    Assignment {
        free: a.free.iter().zip(&b.free).map(|(x, y)| x + s * y).collect(),
        grams: a.grams.iter().zip(&b.grams).map(|(x, y)| x + y * s).collect(),
    }
}

fn zero_like(a: &Assignment) -> Assignment {
    Assignment {
        free: vec![0.0; a.free.len()],
        grams: a.grams.iter().map(|g| DMatrix::zeros(g.nrows(), g.ncols())).collect(),
    }
}

#[test]
fn constraints_are_affine_in_decisions() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let m2 = parse_system(EX2_BALL).unwrap();
    let m4 = parse_system(EX4).unwrap();
    let mo = parse_system(MOTIVATIONAL).unwrap();
    let Some(ApproxModel::Exact(exact_mo)) = detect_polynomial(&mo) else { panic!() };
    let ofp = make_supply(SupplyKind::Ofp, &SupplyParams { m: 1, p: 1, rho: Some(Index::Decision), ..Default::default() })
        .unwrap();
    let problems = vec![
        build_dissipativity_taylor(&taylor(&m2, 3), &m2.region, &SupplyRate::passivity(1), &keep_all(), TaylorVariant::Box)
            .unwrap(),
        build_dissipativity_taylor(&taylor(&m2, 3), &m2.region, &SupplyRate::passivity(1), &keep_all(), TaylorVariant::Ellipsoid)
            .unwrap(),
        build_dissipativity_bernstein(
            &bernstein_expand(&m4, &[4, 4, 4], &[4, 4, 4], BernsteinErrorMode::Empirical).unwrap(),
            &SupplyRate::passivity(1),
            &keep_all(),
        )
        .unwrap(),
        build_dissipativity_exact(&exact_mo, &mo.region, &ofp, &keep_all()).unwrap(),
    ];
    for prob in &problems {
        let a = random_assignment(prob, &mut rng);
        let b = random_assignment(prob, &mut rng);
        let z = zero_like(&a);
        for c in &prob.constraints {
            let p0 = c.poly.eval(&z);
            let pa = &c.poly.eval(&a) - &p0;
            let pb = &c.poly.eval(&b) - &p0;
            let pab = &c.poly.eval(&combine(&a, &b, 2.5)) - &p0;
            let want = &pa + &pb.scale(2.5);
            let tol = 1e-9 * (1.0 + want.max_abs_coeff());
            assert!(pab.max_abs_diff(&want) <= tol, "{}", c.name);
        }
    }
}

#[test]
fn index_enters_only_through_known_polynomial() {
    let mo = parse_system(MOTIVATIONAL).unwrap();
    let Some(ApproxModel::Exact(s)) = detect_polynomial(&mo) else { panic!() };
    for (kind, sym) in [(SupplyKind::Ofp, IndexSymbol::Rho), (SupplyKind::Ifp, IndexSymbol::Nu)] {
        let params = SupplyParams {
            m: 1,
            p: 1,
            rho: Some(Index::Decision),
            nu: Some(Index::Decision),
            ..Default::default()
        };
        let w = make_supply(kind, &params).unwrap();
        let prob = build_dissipativity_exact(&s, &mo.region, &w, &keep_all()).unwrap();
        let (got_sym, k) = prob.index.unwrap();
        assert_eq!(got_sym, sym);
        assert_eq!(prob.objective, Objective::Maximize(k));
        let idx = DecVar::Free(k);
        let vars = prob.vars.clone();
        let mut coeff = Polynomial::zero(vars.clone());
        for c in &prob.constraints {
            for (a, lin) in c.poly.terms() {
                if let Some(v) = lin.terms.get(&idx) {
                    assert_eq!(c.name, "dissipation");
                    coeff = &coeff + &Polynomial::monomial(vars.clone(), a.clone(), *v);
                }
            }
        }
        let arg = match sym {
            IndexSymbol::Rho => s.h[0].clone(),
            IndexSymbol::Nu => Polynomial::var(vars.clone(), 1),
        };
        let want = -&(&arg * &arg);
        assert!(coeff.max_abs_diff(&want) < 1e-12, "{sym:?}: {coeff}");
    }
}

#[test]
fn solved_constraints_are_nonnegative_on_region_and_error_box() {
    let m = parse_system(EX1).unwrap();
    let s = taylor(&m, 5);
    let prob = build_stability_taylor(&s, &m.region, &BuildOptions::default()).unwrap();
    let compiled = compile_to_sdp(&prob).unwrap();
    let sol = solve(&compiled.sdp, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let asg = compiled.assignment(&prob, &sol);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let nv = prob.vars.len();
    let bound: BTreeMap<usize, f64> = prob.error_symbols.iter().map(|e| (e.var, e.bound)).collect();
    for c in &prob.constraints {
        let p = c.poly.eval(&asg);
        for _ in 0..1000 {
            let pt: Vec<f64> = (0..nv)
                .map(|i| match prob.roles[i] {
                    VarRole::Error => {
                        let b = bound[&i];
                        rng.gen_range(-b..=b)
                    }
                    _ => rng.gen_range(-1.0..=1.0),
                })
                .collect();
            assert!(p.eval(&pt).unwrap() >= -1e-6, "{}", c.name);
        }
    }
    let v = prob.storage.eval(&asg);
    assert!(v.coeff(&MultiIndex(vec![0; nv])).abs() < 1e-12);
}

#[test]
fn dump_lists_every_constraint() {
    let m = parse_system(EX1).unwrap();
    let prob = build_stability_taylor(&taylor(&m, 3), &m.region, &BuildOptions::default()).unwrap();
    let d = prob.dump();
    for c in &prob.constraints {
        assert!(d.contains(&format!("constraint {} is SOS", c.name)));
    }
    assert!(d.contains("objective: feasibility"));
}
