use locpass_core::expr::{
    bound_sup_abs, diff_expr, eval_interval, lipschitz_bound, parse_expr, parse_system, Interval,
    ParseError,
};
use locpass_core::poly::{vars, MultiIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

const CORPUS: &[&str] = &[
    "a*cos(a + b)",
    "-sin(a) - b",
    "exp(a - b^2) * tanh(3*b)",
    "(a^3 - 2*a*b + 1) / (2 + b^2)",
    "sqrt(1 + a^2) - cos(b)^3",
    "log(3 + a) * a^2 - b^5",
    "a - a^2 + (0.5*a^2 + 1)*b",
    "sin(a*b)^2 + exp(-a)",
];

#[test]
fn interval_evaluation_encloses_point_values() {
    let n = names(&["a", "b"]);
    let exprs: Vec<_> = CORPUS.iter().map(|s| parse_expr(s, &n).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0usize;
    for k in 0..100_000 {
        let e = &exprs[k % exprs.len()];
        let bx: Vec<Interval> = (0..2)
            .map(|_| {
                let c = rng.gen_range(-1.5..1.5);
                let w = rng.gen_range(0.0..1.0);
                Interval::new(c - w, c + w)
            })
            .collect();
        let x: Vec<f64> = bx.iter().map(|i| rng.gen_range(i.lo..=i.hi)).collect();
        let enc = eval_interval(e, &bx).unwrap();
        let v = e.eval(&x);
        let slack = 1e-12 * (1.0 + v.abs());
        assert!(enc.lo - slack <= v && v <= enc.hi + slack, "{} at {x:?}: {v} not in {enc:?}", CORPUS[k % exprs.len()]);
        checked += 1;
    }
    assert_eq!(checked, 100_000);
}

#[test]
fn division_by_interval_containing_zero_fails() {
    let n = names(&["a"]);
    let e = parse_expr("1 / a", &n).unwrap();
    assert!(eval_interval(&e, &[Interval::new(-1.0, 1.0)]).is_err());
    assert!(eval_interval(&e, &[Interval::new(0.5, 1.0)]).is_ok());
    let l = parse_expr("log(a)", &n).unwrap();
    assert!(eval_interval(&l, &[Interval::new(-1.0, 1.0)]).is_err());
}

#[test]
fn derivatives_match_central_differences() {
    let n = names(&["a", "b"]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for src in CORPUS {
        let e = parse_expr(src, &n).unwrap();
        for v in 0..2 {
            let d = diff_expr(&e, v);
            for _ in 0..50 {
                let x = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
                let h = 1e-6;
                let (mut xp, mut xm) = (x, x);
                xp[v] += h;
                xm[v] -= h;
                let fd = (e.eval(&xp) - e.eval(&xm)) / (2.0 * h);
                let an = d.eval(&x);
                assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()), "{src} d/d{v} at {x:?}: {an} vs {fd}");
            }
        }
    }
}

#[test]
fn derivative_of_constant_free_variable_is_zero() {
    let n = names(&["a", "b"]);
    let e = parse_expr("sin(a)^2", &n).unwrap();
    assert!(diff_expr(&e, 1).is_const(0.0));
}

#[test]
fn sup_bound_dominates_samples_and_tightens() {
    let n = names(&["a", "b"]);
    let e = parse_expr("a*cos(a + b)", &n).unwrap();
    let bx = [Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0)];
    let coarse = bound_sup_abs(&e, &bx, 1).unwrap();
    let fine = bound_sup_abs(&e, &bx, 16).unwrap();
    assert!(fine <= coarse);
    let mut best: f64 = 0.0;
    for i in 0..=200 {
        for j in 0..=200 {
            let x = [-1.0 + i as f64 / 100.0, -1.0 + j as f64 / 100.0];
            best = best.max(e.eval(&x).abs());
        }
    }
    assert!(fine >= best);
    assert!(fine <= 1.2 * best);
}

#[test]
fn lipschitz_bound_dominates_difference_quotients() {
    let n = names(&["a", "b"]);
    let e = parse_expr("sin(a) * b + a^2", &n).unwrap();
    let bx = [Interval::new(-1.0, 1.0), Interval::new(-0.5, 0.5)];
    let l = lipschitz_bound(&e, &bx, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..2000 {
        let x: [f64; 2] = [rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)];
        let y: [f64; 2] = [rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)];
        let dist = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        assert!((e.eval(&x) - e.eval(&y)).abs() <= l * dist + 1e-12);
    }
}

#[test]
fn operator_precedence() {
    let n = names(&["a"]);
    let e = parse_expr("-a^2 + 2*a - 3/2*a", &n).unwrap();
    assert_eq!(e.eval(&[3.0]), -9.0 + 6.0 - 4.5);
    let e = parse_expr("(a + 1)^2", &n).unwrap();
    assert_eq!(e.eval(&[2.0]), 9.0);
}

#[test]
fn polynomial_detection() {
    let n = names(&["a", "b"]);
    let v = vars(&n);
    let p = parse_expr("(a + b)^2 - 2*a*b", &n).unwrap().to_polynomial(&v).unwrap();
    assert_eq!(p.num_terms(), 2);
    assert_eq!(p.coeff(&MultiIndex(vec![2, 0])), 1.0);
    assert!(parse_expr("a*cos(b)", &n).unwrap().to_polynomial(&v).is_none());
    assert!(parse_expr("a / b", &n).unwrap().to_polynomial(&v).is_none());
    let q = parse_expr("a / 4", &n).unwrap().to_polynomial(&v).unwrap();
    assert_eq!(q.coeff(&MultiIndex(vec![1, 0])), 0.25);
}

#[test]
fn system_file_round_trip() {
    let m = parse_system(
        "# motivational example
         states x; inputs u;
         x' = -x + x^3 + (1 - x)*u;
         y1 = x - x^2 + (0.5*x^2 + 1)*u;
         region ineq x^2 - 1 <= 0;
         option order = 5;",
    )
    .unwrap();
    assert_eq!((m.n(), m.m(), m.p()), (1, 1, 1));
    assert_eq!(m.region.ineqs.len(), 1);
    assert_eq!(m.options.get("order").map(String::as_str), Some("5"));
    assert_eq!(m.eval_f(&[0.5, 1.0]), vec![-0.5 + 0.125 + 0.5]);
    let bounds = m.region.implied_bounds(0).unwrap();
    assert!((bounds.lo + 1.0).abs() < 1e-12 && (bounds.hi - 1.0).abs() < 1e-12);
    assert!(m.region.implied_bounds(1).is_none());
}

#[test]
fn parse_errors_are_reported() {
    let undeclared = parse_system("states x; x' = -y;");
    assert!(matches!(undeclared, Err(ParseError::Undeclared { .. })));
    assert!(parse_system("inputs u;").is_err());
    assert!(parse_system("states x; x' = -x; x' = x;").is_err());
    assert!(parse_system("states x; x' = 1 - x;").is_err());
    assert!(parse_system("states x; x' = -x; region x in [1, 2];").is_err());
    assert!(parse_system("states x; x' = -x; y = x;").is_err());
    assert!(parse_system("states x, y; x' = -x;").is_err());
    assert!(parse_system("states x; x' = -x +;").is_err());
}

#[test]
fn state_ball_replaces_state_region() {
    let m = parse_system("states a, b; inputs u; a' = -a; b' = -b + u; y1 = b;
        region a in [-1, 1]; region b in [-1, 1]; region u in [-2, 2];")
    .unwrap();
    let r = m.with_state_ball(0.5);
    assert!(r.region.contains(&[0.3, 0.3, 1.5]));
    assert!(!r.region.contains(&[0.4, 0.4, 0.0]));
    assert!(!r.region.contains(&[0.0, 0.0, 2.5]));
}
