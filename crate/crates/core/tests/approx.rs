use std::time::Instant;

use locpass_core::approx::{
    bernstein_error_bound, bernstein_expand, taylor_expand, taylor_remainder_bounds, taylor_surrogate,
    BernsteinErrorMode, RemainderMode,
};
use locpass_core::expr::parse_system;
use locpass_core::poly::MultiIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EX1: &str = "states x1, x2; x1' = x2; x2' = -2*x2 - x1*cos(x1 + x2);
    region x1 in [-1, 1]; region x2 in [-1, 1];";
const PENDULUM: &str = "states th, om; th' = om; om' = -sin(th) - om;
    region th in [-0.5, 0.5]; region om in [-0.5, 0.5];";
const EX4: &str = "states x1, x2; inputs u; x1' = x2; x2' = -2*x2 - x1*cos(x1 + x2) + u; y1 = x2;
    region x1 in [-0.5, 0.5]; region x2 in [-0.5, 0.5]; region u in [-0.5, 0.5];";

fn mi(e: &[u32]) -> MultiIndex {
    MultiIndex(e.to_vec())
}

/// `computed` agrees with a value printed to two significant figures.
fn two_sig(computed: f64, printed: f64) -> bool {
    let unit = 10f64.powi(printed.abs().log10().floor() as i32 - 1);
    (computed - printed).abs() <= 0.5 * unit * (1.0 + 1e-9)
}

#[test]
fn taylor_coefficients_of_x1_cos() {
    let t0 = Instant::now();
    let m = parse_system(EX1).unwrap();
    let s = taylor_expand(&m, 7).unwrap();
    // f2 = -2 x2 - p with p = x1 cos(x1 + x2).
    let f2 = &s.f[1].poly;
    let expected = [
        (mi(&[5, 0]), 1.0 / 24.0),
        (mi(&[4, 1]), 1.0 / 6.0),
        (mi(&[3, 2]), 1.0 / 4.0),
        (mi(&[3, 0]), -0.5),
        (mi(&[2, 3]), 1.0 / 6.0),
        (mi(&[2, 1]), -1.0),
        (mi(&[1, 4]), 1.0 / 24.0),
        (mi(&[1, 2]), -0.5),
        (mi(&[1, 0]), 1.0),
    ];
    for (a, c) in &expected {
        assert!((-f2.coeff(a) - c).abs() <= 1e-12, "{a:?}: {} vs {c}", -f2.coeff(a));
    }
    assert!((f2.coeff(&mi(&[0, 1])) + 2.0).abs() <= 1e-12);
    assert_eq!(f2.num_terms(), expected.len() + 1);
    assert_eq!(s.f[1].remainder_monomials.len(), 8);
    assert!(s.f[1].remainder_monomials.iter().all(|b| b.degree() == 7));
    assert!(t0.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn taylor_remainder_table() {
    let t0 = Instant::now();
    let m = parse_system(EX1).unwrap();
    let s = taylor_surrogate(&m, 7, RemainderMode::PerBeta, 1).unwrap();
    let expected = [2.0e-4, 0.0028, 0.0125, 0.0279, 0.0349, 0.0252, 0.0097, 0.0016];
    let c = &s.f[1];
    for (i, want) in expected.iter().enumerate() {
        let beta = mi(&[i as u32, 7 - i as u32]);
        let k = c.remainder_monomials.iter().position(|b| *b == beta).unwrap();
        let got = c.remainder_bounds[k];
        assert!((got - want).abs() <= 0.1 * want, "R{i}: {got} vs {want}");
    }
    // f1 = x2 is exact.
    assert!(s.f[0].remainder_bounds.iter().all(|&b| b == 0.0));
    assert!(t0.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn remainder_bounds_match_surrogate() {
    let m = parse_system(EX1).unwrap();
    let (r, t) = taylor_remainder_bounds(&m, 5, RemainderMode::PerBeta, 2).unwrap();
    let s = taylor_surrogate(&m, 5, RemainderMode::PerBeta, 2).unwrap();
    assert_eq!(r[1], s.f[1].remainder_bounds);
    assert!(t.is_empty());
}

#[test]
fn uniform_mode_dominates_per_beta() {
    let m = parse_system(EX1).unwrap();
    let a = taylor_surrogate(&m, 5, RemainderMode::PerBeta, 1).unwrap();
    let b = taylor_surrogate(&m, 5, RemainderMode::Uniform, 1).unwrap();
    for (x, y) in a.f[1].remainder_bounds.iter().zip(&b.f[1].remainder_bounds) {
        assert!(y >= x);
    }
}

#[test]
fn taylor_envelope_contains_truth() {
    let m = parse_system(EX1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in [3, 5, 7] {
        let s = taylor_surrogate(&m, k, RemainderMode::PerBeta, 1).unwrap();
        for _ in 0..10_000 {
            let x = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
            for (i, c) in s.f.iter().enumerate() {
                let err = (m.f[i].eval(&x) - c.poly.eval(&x).unwrap()).abs();
                assert!(err <= c.remainder_envelope(&x) + 1e-12, "k={k} i={i} x={x:?}");
            }
        }
    }
}

#[test]
fn pendulum_bernstein_coefficients() {
    let t0 = Instant::now();
    let m = parse_system(PENDULUM).unwrap();
    let s = bernstein_expand(&m, &[6, 6], &[6, 6], BernsteinErrorMode::Empirical).unwrap();
    let (f, _) = s.to_unit_box();
    // On [0,1]^2, om = x2 - 1/2 so the linear part contributes -x2 + 1/2.
    let p = &f[1];
    let printed = [
        (0, 0.48),
        (1, -0.91),
        (2, -0.14),
        (3, 0.089),
        (4, 1.9e-3),
        (5, -7.6e-4),
    ];
    for (k, want) in printed {
        let mut c = p.coeff(&mi(&[k, 0]));
        if k == 0 {
            c -= 0.5;
        }
        assert!(two_sig(c, want), "x1^{k}: {c} vs {want}");
    }
    assert!(p.coeff(&mi(&[6, 0])).abs() < 1e-12);
    assert!((p.coeff(&mi(&[0, 1])) + 1.0).abs() < 1e-12);
    assert_eq!(s.f[1].effective_degrees, vec![6, 1]);
    assert!(s.f[1].error_bound <= 0.04);
    assert_eq!(s.f[0].error_bound, 0.0);
    assert!(t0.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn bivariate_bernstein_coefficients() {
    let t0 = Instant::now();
    let m = parse_system(EX4).unwrap();
    let s = bernstein_expand(&m, &[4, 4, 4], &[4, 4, 4], BernsteinErrorMode::Empirical).unwrap();
    // Centered box of width 1: canonical coordinates equal x.
    let f2 = &s.f[1].poly;
    let p = |e: &[u32]| {
        let c = -f2.coeff(&mi(e));
        match e {
            [0, 1, 0] => c - 2.0,
            _ => c,
        }
    };
    let printed: [(&[u32], f64); 12] = [
        (&[4, 3, 0], -9.5e-4),
        (&[4, 1, 0], 0.015),
        (&[3, 4, 0], -7.1e-4),
        (&[3, 2, 0], 0.067),
        (&[3, 0, 0], -0.18),
        (&[2, 3, 0], 0.044),
        (&[2, 1, 0], -0.7),
        (&[1, 4, 0], 3.6e-3),
        (&[1, 2, 0], -0.34),
        (&[1, 0, 0], 0.89),
        (&[0, 3, 0], 3.7e-3),
        (&[0, 1, 0], -0.059),
    ];
    for (e, want) in printed {
        assert!(two_sig(p(e), want), "{e:?}: {} vs {want}", p(e));
    }
    assert!((f2.coeff(&mi(&[0, 0, 1])) - 1.0).abs() < 1e-12);
    assert!(s.f[1].error_bound <= 0.04);
    assert!(t0.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn bernstein_bounds_hold_on_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (src, deg) in [(PENDULUM, 6), (EX4, 4), (EX1, 5)] {
        let m = parse_system(src).unwrap();
        let nv = m.n() + m.m();
        for mode in [BernsteinErrorMode::Empirical, BernsteinErrorMode::Lipschitz] {
            let d = vec![deg; nv];
            let s = bernstein_expand(&m, &d, &d, mode).unwrap();
            let to_z = &s.to_canonical;
            for _ in 0..10_000 {
                let x: Vec<f64> = s.bounds_box.iter().map(|b| rng.gen_range(b.lo..=b.hi)).collect();
                let z = to_z.apply(&x);
                for (e, c) in m.f.iter().zip(&s.f) {
                    let err = (e.eval(&x) - c.poly.eval(&z).unwrap()).abs();
                    assert!(err <= c.error_bound + 1e-12, "{mode:?} {err} > {}", c.error_bound);
                }
            }
        }
    }
}

#[test]
fn lipschitz_bound_dominates_empirical() {
    let m = parse_system(PENDULUM).unwrap();
    let s = bernstein_expand(&m, &[6, 6], &[6, 6], BernsteinErrorMode::Empirical).unwrap();
    let (emp, _) = bernstein_error_bound(&m, &s, BernsteinErrorMode::Empirical).unwrap();
    let (lip, _) = bernstein_error_bound(&m, &s, BernsteinErrorMode::Lipschitz).unwrap();
    assert!(lip[1] >= emp[1] / 1.1);
    assert!(emp[1] > 0.0);
}

#[test]
fn bernstein_reproduces_affine_functions() {
    let m = parse_system(
        "states a, b; inputs u; a' = 3*a - 2*b + 0.25*u; b' = -a; y1 = a + 2*u;
         region a in [-2, 1]; region b in [-1, 4]; region u in [-1, 3];",
    )
    .unwrap();
    let s = bernstein_expand(&m, &[3, 5, 2], &[4, 4, 4], BernsteinErrorMode::Empirical).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let x: Vec<f64> = s.bounds_box.iter().map(|b| rng.gen_range(b.lo..=b.hi)).collect();
        let z = s.to_canonical.apply(&x);
        for (e, c) in m.f.iter().chain(&m.h).zip(s.f.iter().chain(&s.h)) {
            assert!((e.eval(&x) - c.poly.eval(&z).unwrap()).abs() < 1e-12);
        }
    }
    assert!(s.f.iter().chain(&s.h).all(|c| c.error_bound < 1e-12));
}

#[test]
fn bernstein_rejects_non_box_regions() {
    let m = parse_system("states x; x' = -sin(x); region ineq x^2 - 1 <= 0;").unwrap();
    assert!(bernstein_expand(&m, &[4], &[4], BernsteinErrorMode::Empirical).is_err());
}

#[test]
fn taylor_rejects_order_zero() {
    let m = parse_system(EX1).unwrap();
    assert!(taylor_expand(&m, 0).is_err());
}
