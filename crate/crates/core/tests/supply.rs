use locpass_core::poly::{vars, MultiIndex, Polynomial};
use locpass_core::sos::{make_supply, Index, IndexSymbol, SosError, SupplyKind, SupplyParams, SupplyRate};
use nalgebra::DMatrix;

fn uy() -> (Polynomial, Polynomial) {
    let v = vars(&["u", "y"]);
    (Polynomial::var(v.clone(), 0), Polynomial::var(v, 1))
}

fn mono(u: u32, y: u32, c: f64) -> Polynomial {
    Polynomial::monomial(vars(&["u", "y"]), MultiIndex(vec![u, y]), c)
}

#[test]
fn passivity_is_the_product() {
    let (u, y) = uy();
    let w = SupplyRate::passivity(1).evaluate(&[u], &[y]).unwrap();
    assert!(w.known.max_abs_diff(&mono(1, 1, 1.0)) < 1e-15);
    assert!(w.index_coeff.is_none());
}

#[test]
fn l2_gain_supply() {
    let (u, y) = uy();
    let w = make_supply(SupplyKind::L2Gain, &SupplyParams { m: 1, p: 1, gamma: Some(2.0), ..Default::default() })
        .unwrap()
        .evaluate(&[u], &[y])
        .unwrap();
    let want = &mono(2, 0, 4.0) - &mono(0, 2, 1.0);
    assert!(w.known.max_abs_diff(&want) < 1e-15);
}

#[test]
fn decision_indices_enter_linearly() {
    let (u, y) = uy();
    let p = SupplyParams { m: 1, p: 1, rho: Some(Index::Decision), nu: Some(Index::Decision), ..Default::default() };
    let ofp = make_supply(SupplyKind::Ofp, &p).unwrap();
    assert_eq!(ofp.decision, Some(IndexSymbol::Rho));
    let w = ofp.evaluate(&[u.clone()], &[y.clone()]).unwrap();
    assert!(w.known.max_abs_diff(&mono(1, 1, 1.0)) < 1e-15);
    assert!(w.index_coeff.unwrap().max_abs_diff(&mono(0, 2, -1.0)) < 1e-15);
    let ifp = make_supply(SupplyKind::Ifp, &p).unwrap();
    let w = ifp.evaluate(&[u], &[y]).unwrap();
    assert!(w.index_coeff.unwrap().max_abs_diff(&mono(2, 0, -1.0)) < 1e-15);
    // Only one index may be free at a time.
    assert!(make_supply(SupplyKind::IfOfp, &p).is_err());
}

#[test]
fn fixing_the_index_matches_numeric_evaluation() {
    let p = SupplyParams { m: 1, p: 1, rho: Some(Index::Decision), ..Default::default() };
    let ofp = make_supply(SupplyKind::Ofp, &p).unwrap();
    let fixed = ofp.with_index(0.3);
    let direct = make_supply(SupplyKind::Ofp, &SupplyParams { rho: Some(Index::Fixed(0.3)), ..p }).unwrap();
    for (u, y) in [(0.5, -1.0), (2.0, 0.25), (-1.5, 3.0)] {
        let a = ofp.eval_numeric(&[u], &[y], 0.3);
        assert!((a - fixed.eval_numeric(&[u], &[y], 0.0)).abs() < 1e-14);
        assert!((a - direct.eval_numeric(&[u], &[y], 0.0)).abs() < 1e-14);
        assert!((a - (u * y - 0.3 * y * y)).abs() < 1e-14);
    }
    assert_eq!(fixed.decision, None);
}

#[test]
fn qsr_requires_symmetric_weights() {
    let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    let p = SupplyParams {
        m: 2,
        p: 2,
        q: Some(q),
        s: Some(DMatrix::zeros(2, 2)),
        r: Some(DMatrix::identity(2, 2)),
        ..Default::default()
    };
    assert!(matches!(make_supply(SupplyKind::Qsr, &p), Err(SosError::AsymmetricSupply(_))));
    let ok = SupplyParams { q: Some(DMatrix::identity(2, 2)), ..p };
    assert!(make_supply(SupplyKind::Qsr, &ok).is_ok());
}

#[test]
fn passivity_needs_square_systems() {
    let p = SupplyParams { m: 2, p: 1, ..Default::default() };
    assert!(matches!(make_supply(SupplyKind::Passivity, &p), Err(SosError::Supply(_))));
    assert!(make_supply(SupplyKind::L2Gain, &SupplyParams { gamma: Some(1.0), ..p }).is_ok());
}

#[test]
fn supply_serializes() {
    let w = make_supply(SupplyKind::Ifp, &SupplyParams { m: 1, p: 1, nu: Some(Index::Fixed(0.5)), ..Default::default() })
        .unwrap();
    let back: SupplyRate = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
    assert_eq!(back, w);
}
