use locpass_sdp::{
    solve, Block, BlockKind, Constraint, LinearForm, SdpProblem, SolveStatus, SolverOptions,
    SparseSym,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sym1(i: usize, j: usize, v: f64) -> SparseSym {
    let mut s = SparseSym::new();
    s.push(i, j, v);
    s
}

#[test]
fn minimize_x_with_lower_bound() {
    // min x s.t. x - s = 1, s >= 0  ==  max -x.
    let p = SdpProblem {
        blocks: vec![Block { size: 2, kind: BlockKind::Diagonal }],
        num_free: 0,
        constraints: vec![Constraint {
            form: LinearForm {
                blocks: vec![(0, {
                    let mut s = sym1(0, 0, 1.0);
                    s.push(1, 1, -1.0);
                    s
                })],
                free: vec![],
            },
            rhs: 1.0,
        }],
        objective: LinearForm { blocks: vec![(0, sym1(0, 0, -1.0))], free: vec![] },
    };
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.x[0][(0, 0)] - 1.0).abs() < 1e-6);
}

#[test]
fn two_by_two_determinant() {
    // max t s.t. X = [[1,t],[t,1]] PSD, t = X_12 free-coupled.
    let p = SdpProblem {
        blocks: vec![Block { size: 2, kind: BlockKind::Psd }],
        num_free: 1,
        constraints: vec![
            Constraint { form: LinearForm { blocks: vec![(0, sym1(0, 0, 1.0))], free: vec![] }, rhs: 1.0 },
            Constraint { form: LinearForm { blocks: vec![(0, sym1(1, 1, 1.0))], free: vec![] }, rhs: 1.0 },
            Constraint {
                form: LinearForm { blocks: vec![(0, sym1(0, 1, 0.5))], free: vec![(0, -1.0)] },
                rhs: 0.0,
            },
        ],
        objective: LinearForm { blocks: vec![], free: vec![(0, 1.0)] },
    };
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.free[0] - 1.0).abs() < 1e-6, "t = {}", sol.free[0]);
}

#[test]
fn infeasible_detected() {
    // X_11 = -1 with X PSD.
    let p = SdpProblem {
        blocks: vec![Block { size: 2, kind: BlockKind::Psd }],
        num_free: 0,
        constraints: vec![Constraint {
            form: LinearForm { blocks: vec![(0, sym1(0, 0, 1.0))], free: vec![] },
            rhs: -1.0,
        }],
        objective: LinearForm::default(),
    };
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn inconsistent_free_equalities() {
    let p = SdpProblem {
        blocks: vec![Block { size: 1, kind: BlockKind::Psd }],
        num_free: 1,
        constraints: vec![
            Constraint { form: LinearForm { blocks: vec![], free: vec![(0, 1.0)] }, rhs: 1.0 },
            Constraint { form: LinearForm { blocks: vec![], free: vec![(0, 2.0)] }, rhs: 1.0 },
            Constraint { form: LinearForm { blocks: vec![(0, sym1(0, 0, 1.0))], free: vec![] }, rhs: 1.0 },
        ],
        objective: LinearForm::default(),
    };
    assert_eq!(solve(&p, &SolverOptions::default()).unwrap().status, SolveStatus::Infeasible);
}

#[test]
fn unbounded_detected() {
    // max f s.t. X_11 - f = 0.
    let p = SdpProblem {
        blocks: vec![Block { size: 1, kind: BlockKind::Psd }],
        num_free: 1,
        constraints: vec![Constraint {
            form: LinearForm { blocks: vec![(0, sym1(0, 0, 1.0))], free: vec![(0, -1.0)] },
            rhs: 0.0,
        }],
        objective: LinearForm { blocks: vec![], free: vec![(0, 1.0)] },
    };
    assert_eq!(solve(&p, &SolverOptions::default()).unwrap().status, SolveStatus::Unbounded);
}

#[test]
fn eliminated_free_rows_get_multipliers() {
    // max f1 - f0 s.t. f0 = 2, X_11 + f1 = 1, X PSD (1x1). Optimum f1 = 1.
    let p = SdpProblem {
        blocks: vec![Block { size: 1, kind: BlockKind::Psd }],
        num_free: 2,
        constraints: vec![
            Constraint { form: LinearForm { blocks: vec![], free: vec![(0, 1.0)] }, rhs: 2.0 },
            Constraint {
                form: LinearForm { blocks: vec![(0, sym1(0, 0, 1.0))], free: vec![(1, 1.0)] },
                rhs: 1.0,
            },
        ],
        objective: LinearForm { blocks: vec![], free: vec![(0, -1.0), (1, 1.0)] },
    };
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.primal_objective + 1.0).abs() < 1e-6);
    assert!(sol.residuals.max() < 1e-6);
}

#[test]
fn size_cap_enforced() {
    let p = SdpProblem {
        blocks: vec![Block { size: 5, kind: BlockKind::Psd }],
        num_free: 0,
        constraints: vec![Constraint { form: LinearForm { blocks: vec![(0, sym1(0, 0, 1.0))], free: vec![] }, rhs: 1.0 }],
        objective: LinearForm::default(),
    };
    let opts = SolverOptions { max_gram_dim: 4, ..Default::default() };
    assert!(solve(&p, &opts).is_err());
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

/// Strictly feasible instance built from an interior primal-dual pair.
fn random_instance(seed: u64) -> SdpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=8);
    let nd = rng.gen_range(1..=4);
    let nf = rng.gen_range(0..=3);
    let m = rng.gen_range(nf + 1..=(n * (n + 1) / 2 + nd).min(50));
    let x0 = random_spd(&mut rng, n);
    let z0 = random_spd(&mut rng, n);
    let xd: Vec<f64> = (0..nd).map(|_| rng.gen_range(0.5..2.0)).collect();
    let zd: Vec<f64> = (0..nd).map(|_| rng.gen_range(0.5..2.0)).collect();
    let f0: Vec<f64> = (0..nf).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y0: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut constraints = Vec::new();
    let mut c_dense = -z0.clone();
    let mut c_diag: Vec<f64> = zd.iter().map(|v| -v).collect();
    let mut c_free = vec![0.0; nf];
    for i in 0..m {
        let mut s = SparseSym::new();
        for r in 0..n {
            for c in r..n {
                if rng.gen_bool(0.4) {
                    s.push(r, c, rng.gen_range(-1.0..1.0));
                }
            }
        }
        let mut d = SparseSym::new();
        for k in 0..nd {
            if rng.gen_bool(0.5) {
                d.push(k, k, rng.gen_range(-1.0..1.0));
            }
        }
        let mut free: Vec<(usize, f64)> = Vec::new();
        for k in 0..nf {
            if rng.gen_bool(0.5) {
                free.push((k, rng.gen_range(-1.0..1.0)));
            }
        }
        let dd: Vec<f64> = (0..nd).map(|k| d.entries.iter().filter(|e| e.0 == k).map(|e| e.2).sum()).collect();
        let rhs = s.dot(&x0) + d.dot_diag(&xd) + free.iter().map(|&(k, v)| v * f0[k]).sum::<f64>();
        s.add_to(&mut c_dense, y0[i]);
        for k in 0..nd {
            c_diag[k] += y0[i] * dd[k];
        }
        for &(k, v) in &free {
            c_free[k] += y0[i] * v;
        }
        constraints.push(Constraint { form: LinearForm { blocks: vec![(0, s), (1, d)], free }, rhs });
    }
    let mut cs = SparseSym::new();
    for r in 0..n {
        for c in r..n {
            cs.push(r, c, c_dense[(r, c)]);
        }
    }
    let mut cd = SparseSym::new();
    for (k, v) in c_diag.iter().enumerate() {
        cd.push(k, k, *v);
    }
    SdpProblem {
        blocks: vec![Block { size: n, kind: BlockKind::Psd }, Block { size: nd, kind: BlockKind::Diagonal }],
        num_free: nf,
        constraints,
        objective: LinearForm { blocks: vec![(0, cs), (1, cd)], free: c_free.into_iter().enumerate().collect() },
    }
}

#[test]
fn random_instances_satisfy_kkt() {
    for seed in 0..50 {
        let p = random_instance(seed);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "seed {seed}");
        // Independent KKT check in dense arithmetic.
        let n = p.blocks[0].size;
        let mut s = DMatrix::<f64>::zeros(n, n);
        let mut sd = DVector::<f64>::zeros(p.blocks[1].size);
        for (k, m) in &p.objective.blocks {
            if *k == 0 { s -= m.to_dense(n) } else { sd -= m.to_dense(p.blocks[1].size).diagonal() }
        }
        let mut pr = 0.0f64;
        for (c, y) in p.constraints.iter().zip(&sol.y) {
            let a0 = c.form.blocks[0].1.to_dense(n);
            let a1 = c.form.blocks[1].1.to_dense(p.blocks[1].size);
            s += &a0 * *y;
            sd += a1.diagonal() * *y;
            let lhs = a0.dot(&sol.x[0]) + a1.dot(&sol.x[1]) + c.form.free.iter().map(|&(k, v)| v * sol.free[k]).sum::<f64>();
            pr = pr.max((lhs - c.rhs).abs());
        }
        let zmin = s.clone().symmetric_eigenvalues().min().min(sd.min());
        let xmin = sol.min_primal_eig();
        let gap = sol.dual_objective - sol.primal_objective;
        assert!(pr <= 1e-6, "seed {seed} primal {pr}");
        assert!(zmin >= -1e-6, "seed {seed} dual slack {zmin}");
        assert!(xmin >= -1e-8, "seed {seed}");
        assert!(gap >= -1e-6 * (1.0 + sol.primal_objective.abs()) && gap <= 1e-6 * (1.0 + sol.primal_objective.abs()), "seed {seed} gap {gap}");
    }
}

#[test]
fn deterministic() {
    let p = random_instance(7);
    let a = solve(&p, &SolverOptions::default()).unwrap();
    let b = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(a, b);
}
