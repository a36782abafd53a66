use locpass_core::poly::{vars, MultiIndex, Polynomial};
use locpass_core::sos::*;
use locpass_sdp::{solve, SolveStatus, SolverOptions};

fn univariate(coeffs: &[(u32, f64)]) -> Polynomial {
    let v = vars(&["x"]);
    Polynomial::from_terms(v, coeffs.iter().map(|&(e, c)| (MultiIndex(vec![e]), c)))
}

fn target(p: &Polynomial) -> SosProblem {
    let mut prob = SosProblem::new(p.vars().clone(), vec![VarRole::State]);
    prob.add_constraint("p", ParamPoly::from_poly(p));
    prob
}

#[test]
fn square_has_unit_gram() {
    let p = univariate(&[(2, 1.0)]);
    let c = compile_to_sdp(&target(&p)).unwrap();
    assert_eq!(c.constraint_bases[0], vec![MultiIndex(vec![1])]);
    assert_eq!(c.sdp.blocks.len(), 1);
    assert_eq!(c.sdp.blocks[0].size, 1);
    let sol = solve(&c.sdp, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.x[0][(0, 0)] - 1.0).abs() < 1e-7);
}

#[test]
fn quadratic_gram_matches_cholesky() {
    // x² + 2x + 2 over {1, x}: the Gram matrix is forced.
    let p = univariate(&[(0, 2.0), (1, 2.0), (2, 1.0)]);
    let c = compile_to_sdp(&target(&p)).unwrap();
    assert_eq!(c.constraint_bases[0], vec![MultiIndex(vec![0]), MultiIndex(vec![1])]);
    let sol = solve(&c.sdp, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let g = &sol.x[0];
    let want = [[2.0, 1.0], [1.0, 1.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((g[(i, j)] - want[i][j]).abs() < 1e-7, "{g}");
        }
    }
    // Cholesky factor [[√2, 0], [1/√2, 1/√2]] exists, so G is PD.
    assert!(g.clone().cholesky().is_some());
}

#[test]
fn odd_polynomial_rejected() {
    let p = univariate(&[(1, 1.0)]);
    match compile_to_sdp(&target(&p)) {
        Err(SosError::InfeasibleEqualities { .. }) => {}
        other => panic!("expected infeasible equalities, got {other:?}"),
    }
}

#[test]
fn gram_basis_prunes_unmatched_squares() {
    // x⁴ + 1 has no x² term; x stays since 2·x = x⁰ + x² is a cross pair.
    let v = 1;
    let supp = vec![MultiIndex(vec![0]), MultiIndex(vec![4])];
    let b = gram_basis(&supp, v, &[vec![0]]);
    assert_eq!(b, vec![MultiIndex(vec![0]), MultiIndex(vec![1]), MultiIndex(vec![2])]);
    // x⁴ alone: only x².
    let b = gram_basis(&[MultiIndex(vec![4])], v, &[vec![0]]);
    assert_eq!(b, vec![MultiIndex(vec![2])]);
}
