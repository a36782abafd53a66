//! Infeasible-start primal-dual interior-point method (HKM direction,
//! Mehrotra predictor-corrector) with free variables kept in the Newton
//! system through block elimination.
//!
//! Internally the problem is solved in minimization form
//! `min <C', X> + c''f` with `C' = -C`, `c'' = -c`; dual multipliers are
//! negated on the way out so the reported pair matches [`SdpProblem`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::problem::{
    BlockKind, Residuals, SdpError, SdpProblem, SdpSolution, SolveStatus,
};

/// Solver settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Cap on the summed size of PSD blocks.
    pub max_gram_dim: usize,
    pub max_constraints: usize,
    /// Print one line per iteration to stderr.
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-7,
            max_iter: 100,
            max_gram_dim: 400,
            max_constraints: 20_000,
            verbose: false,
        }
    }
}

#[derive(Clone, Debug)]
enum Blk {
    Dense(DMatrix<f64>),
    Diag(DVector<f64>),
}

impl Blk {
    fn dot(&self, o: &Blk) -> f64 {
        match (self, o) {
            (Blk::Dense(a), Blk::Dense(b)) => a.dot(b),
            (Blk::Diag(a), Blk::Diag(b)) => a.dot(b),
            _ => unreachable!("block kinds differ"),
        }
    }

    fn axpy(&mut self, a: f64, o: &Blk) {
        match (self, o) {
            (Blk::Dense(x), Blk::Dense(y)) => *x += y * a,
            (Blk::Diag(x), Blk::Diag(y)) => x.axpy(a, y, 1.0),
            _ => unreachable!("block kinds differ"),
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            Blk::Dense(a) => a.norm_squared(),
            Blk::Diag(a) => a.norm_squared(),
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Blk::Dense(a) => a.clone(),
            Blk::Diag(d) => DMatrix::from_diagonal(d),
        }
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn dot_all(a: &[Blk], b: &[Blk]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn norm_all(a: &[Blk]) -> f64 {
    a.iter().map(Blk::norm_sq).sum::<f64>().sqrt()
}

/// Constraint data reorganized per block.
struct Data {
    kinds: Vec<BlockKind>,
    sizes: Vec<usize>,
    /// Per block: `(constraint, upper-triangle entries)`.
    by_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
    /// Minimization-form cost per block.
    c: Vec<Blk>,
    /// `m x nf` free-variable coefficients.
    g: DMatrix<f64>,
    /// Minimization-form free-variable cost.
    cf: DVector<f64>,
    b: DVector<f64>,
}

impl Data {
    fn m(&self) -> usize {
        self.b.len()
    }

    fn nf(&self) -> usize {
        self.cf.len()
    }

    fn zeros(&self) -> Vec<Blk> {
        self.kinds
            .iter()
            .zip(&self.sizes)
            .map(|(k, &n)| match k {
                BlockKind::Psd => Blk::Dense(DMatrix::zeros(n, n)),
                BlockKind::Diagonal => Blk::Diag(DVector::zeros(n)),
            })
            .collect()
    }

    fn identity(&self, s: f64) -> Vec<Blk> {
        self.kinds
            .iter()
            .zip(&self.sizes)
            .map(|(k, &n)| match k {
                BlockKind::Psd => Blk::Dense(DMatrix::identity(n, n) * s),
                BlockKind::Diagonal => Blk::Diag(DVector::from_element(n, s)),
            })
            .collect()
    }

    /// `A(X)`.
    fn apply(&self, x: &[Blk]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m());
        for (bk, list) in self.by_block.iter().enumerate() {
            match &x[bk] {
                Blk::Dense(xm) => {
                    for (i, ent) in list {
                        out[*i] += ent
                            .iter()
                            .map(|&(r, c, v)| if r == c { v * xm[(r, r)] } else { 2.0 * v * xm[(r, c)] })
                            .sum::<f64>();
                    }
                }
                Blk::Diag(d) => {
                    for (i, ent) in list {
                        out[*i] += ent.iter().map(|&(r, _, v)| v * d[r]).sum::<f64>();
                    }
                }
            }
        }
        out
    }

    /// `A*(y)`.
    fn adjoint(&self, y: &DVector<f64>) -> Vec<Blk> {
        let mut out = self.zeros();
        for (bk, list) in self.by_block.iter().enumerate() {
            match &mut out[bk] {
                Blk::Dense(m) => {
                    for (i, ent) in list {
                        let yi = y[*i];
                        if yi == 0.0 {
                            continue;
                        }
                        for &(r, c, v) in ent {
                            m[(r, c)] += yi * v;
                            if r != c {
                                m[(c, r)] += yi * v;
                            }
                        }
                    }
                }
                Blk::Diag(d) => {
                    for (i, ent) in list {
                        for &(r, _, v) in ent {
                            d[r] += y[*i] * v;
                        }
                    }
                }
            }
        }
        out
    }

    /// Schur complement `M_ij = <A_i, X A_j Z^-1>`.
    fn schur(&self, x: &[Blk], zinv: &[Blk]) -> DMatrix<f64> {
        let m = self.m();
        let mut out = DMatrix::zeros(m, m);
        for (bk, list) in self.by_block.iter().enumerate() {
            match (&x[bk], &zinv[bk]) {
                (Blk::Dense(xm), Blk::Dense(zi)) => {
                    let n = xm.nrows();
                    let mut t = DMatrix::zeros(n, n);
                    for (p, (i, ent_i)) in list.iter().enumerate() {
                        t.fill(0.0);
                        for &(r, c, v) in ent_i {
                            t.ger(v, &xm.column(r), &zi.column(c), 1.0);
                            if r != c {
                                t.ger(v, &xm.column(c), &zi.column(r), 1.0);
                            }
                        }
                        for (j, ent_j) in &list[p..] {
                            let s: f64 = ent_j
                                .iter()
                                .map(|&(r, c, v)| if r == c { v * t[(r, r)] } else { v * (t[(r, c)] + t[(c, r)]) })
                                .sum();
                            out[(*i, *j)] += s;
                            if i != j {
                                out[(*j, *i)] += s;
                            }
                        }
                    }
                }
                (Blk::Diag(xd), Blk::Diag(zd)) => {
                    let n = xd.len();
                    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
                    for (i, ent) in list {
                        for &(r, _, v) in ent {
                            cols[r].push((*i, v));
                        }
                    }
                    for (k, col) in cols.iter().enumerate() {
                        let w = xd[k] * zd[k];
                        for &(i, a) in col {
                            for &(j, b) in col {
                                out[(i, j)] += w * a * b;
                            }
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        out
    }
}

/// Cholesky with escalating diagonal regularization.
fn robust_cholesky(m: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = m.clone().cholesky() {
        return Some(c);
    }
    let scale = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut delta = 1e-14 * scale;
    while delta < 1e-2 * scale {
        let mut r = m.clone();
        for i in 0..r.nrows() {
            r[(i, i)] += delta;
        }
        if let Some(c) = r.cholesky() {
            return Some(c);
        }
        delta *= 100.0;
    }
    None
}

fn inverse_blocks(z: &[Blk]) -> Option<Vec<Blk>> {
    z.iter()
        .map(|b| match b {
            Blk::Dense(m) => m.clone().cholesky().map(|c| Blk::Dense(c.inverse())),
            Blk::Diag(d) => {
                if d.iter().all(|&v| v > 0.0) {
                    Some(Blk::Diag(d.map(|v| 1.0 / v)))
                } else {
                    None
                }
            }
        })
        .collect()
}

/// Largest `a` with `x + a dx` PSD (`f64::INFINITY` if unbounded).
fn max_step(x: &[Blk], dx: &[Blk]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (b, d) in x.iter().zip(dx) {
        match (b, d) {
            (Blk::Dense(xm), Blk::Dense(dm)) => {
                let l = match xm.clone().cholesky() {
                    Some(c) => c.l(),
                    None => return 0.0,
                };
                let linv = match l.clone().try_inverse() {
                    Some(v) => v,
                    None => return 0.0,
                };
                let w = &linv * dm * linv.transpose();
                let lmin = SymmetricEigen::new(sym(&w)).eigenvalues.min();
                if lmin < 0.0 {
                    alpha = alpha.min(-1.0 / lmin);
                }
            }
            (Blk::Diag(xd), Blk::Diag(dd)) => {
                for (xv, dv) in xd.iter().zip(dd.iter()) {
                    if *dv < 0.0 {
                        alpha = alpha.min(-xv / dv);
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    alpha
}

fn min_eig(b: &[Blk]) -> f64 {
    b.iter()
        .map(|blk| match blk {
            Blk::Dense(m) => SymmetricEigen::new(sym(m)).eigenvalues.min(),
            Blk::Diag(d) => d.min(),
        })
        .fold(f64::INFINITY, f64::min)
}

/// Linear equalities `E f = b_E` on free variables alone, eliminated up
/// front as `f = f0 + N w`.
struct FreeElimination {
    f0: DVector<f64>,
    n: DMatrix<f64>,
    /// Pseudo-inverse of `E^T` for recovering the eliminated multipliers.
    et_pinv: DMatrix<f64>,
    rows: Vec<usize>,
}

enum Presolved {
    Ready(Data, Option<FreeElimination>, Vec<usize>),
    Inconsistent,
}

fn presolve(p: &SdpProblem) -> Presolved {
    let nb = p.blocks.len();
    let mut pure = Vec::new();
    let mut kept = Vec::new();
    for (i, c) in p.constraints.iter().enumerate() {
        let touches = c.form.blocks.iter().any(|(_, m)| !m.entries.is_empty());
        if touches {
            kept.push(i);
        } else {
            pure.push(i);
        }
    }
    let nf = p.num_free;
    let mut g_full = DMatrix::zeros(p.constraints.len(), nf);
    for (i, c) in p.constraints.iter().enumerate() {
        for &(k, v) in &c.form.free {
            g_full[(i, k)] += v;
        }
    }
    let mut cf_full = DVector::zeros(nf);
    for &(k, v) in &p.objective.free {
        cf_full[k] -= v;
    }

    let mut elim = None;
    let mut b: DVector<f64> = DVector::from_iterator(kept.len(), kept.iter().map(|&i| p.constraints[i].rhs));
    let mut g = DMatrix::from_fn(kept.len(), nf, |r, c| g_full[(kept[r], c)]);
    let mut cf = cf_full.clone();
    if !pure.is_empty() {
        let e = DMatrix::from_fn(pure.len(), nf, |r, c| g_full[(pure[r], c)]);
        let be = DVector::from_iterator(pure.len(), pure.iter().map(|&i| p.constraints[i].rhs));
        let svd = e.clone().svd(true, true);
        let smax = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
        let rank_tol = 1e-12 * smax.max(1.0) * (e.nrows().max(nf) as f64);
        let f0 = svd.solve(&be, rank_tol).unwrap_or_else(|_| DVector::zeros(nf));
        if (&e * &f0 - &be).norm() > 1e-9 * (1.0 + be.norm()) {
            return Presolved::Inconsistent;
        }
        // Null space from the full right singular basis.
        let full = e.clone().transpose() * &e;
        let eig = SymmetricEigen::new(full);
        let cols: Vec<usize> = (0..nf)
            .filter(|&k| eig.eigenvalues[k].abs() <= rank_tol * smax.max(1.0))
            .collect();
        let n = DMatrix::from_fn(nf, cols.len(), |r, c| eig.eigenvectors[(r, cols[c])]);
        let et_pinv = e
            .transpose()
            .pseudo_inverse(rank_tol)
            .unwrap_or_else(|_| DMatrix::zeros(pure.len(), nf));
        b -= &g * &f0;
        g = &g * &n;
        cf = n.transpose() * &cf_full;
        elim = Some(FreeElimination { f0, n, et_pinv, rows: pure.clone() });
    }

    let mut by_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>> = vec![Vec::new(); nb];
    for (r, &i) in kept.iter().enumerate() {
        for (bk, m) in &p.constraints[i].form.blocks {
            if !m.entries.is_empty() {
                by_block[*bk].push((r, m.entries.clone()));
            }
        }
    }
    let mut data = Data {
        kinds: p.blocks.iter().map(|b| b.kind).collect(),
        sizes: p.blocks.iter().map(|b| b.size).collect(),
        by_block,
        c: Vec::new(),
        g,
        cf,
        b,
    };
    let mut c = data.zeros();
    for (bk, m) in &p.objective.blocks {
        match &mut c[*bk] {
            Blk::Dense(d) => m.add_to(d, -1.0),
            Blk::Diag(d) => {
                for &(r, _, v) in &m.entries {
                    d[r] -= v;
                }
            }
        }
    }
    data.c = c;
    Presolved::Ready(data, elim, kept)
}

struct Iterate {
    x: Vec<Blk>,
    z: Vec<Blk>,
    y: DVector<f64>,
    f: DVector<f64>,
}

struct Measures {
    pinf: f64,
    dinf: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
}

fn measure(d: &Data, it: &Iterate) -> (Measures, DVector<f64>, Vec<Blk>, DVector<f64>) {
    let rp = &d.b - d.apply(&it.x) - &d.g * &it.f;
    let aty = d.adjoint(&it.y);
    let mut rd = d.c.clone();
    for (r, (a, z)) in rd.iter_mut().zip(aty.iter().zip(&it.z)) {
        r.axpy(-1.0, a);
        r.axpy(-1.0, z);
    }
    let rf = &d.cf - d.g.transpose() * &it.y;
    let pobj = dot_all(&d.c, &it.x) + d.cf.dot(&it.f);
    let dobj = d.b.dot(&it.y);
    let xz = dot_all(&it.x, &it.z);
    let cnorm = (norm_all(&d.c).powi(2) + d.cf.norm_squared()).sqrt();
    let ms = Measures {
        pinf: rp.norm() / (1.0 + d.b.norm()),
        dinf: (norm_all(&rd).powi(2) + rf.norm_squared()).sqrt() / (1.0 + cnorm),
        gap: (pobj - dobj).abs().max(xz.abs()) / (1.0 + pobj.abs() + dobj.abs()),
        pobj,
        dobj,
    };
    (ms, rp, rd, rf)
}

/// `X ΔZ Z^-1`, symmetrized, per block.
fn hkm_term(x: &[Blk], dz: &[Blk], zinv: &[Blk]) -> Vec<Blk> {
    x.iter()
        .zip(dz.iter().zip(zinv))
        .map(|(xb, (db, zb))| match (xb, db, zb) {
            (Blk::Dense(xm), Blk::Dense(dm), Blk::Dense(zm)) => Blk::Dense(sym(&(xm * dm * zm))),
            (Blk::Diag(xd), Blk::Diag(dd), Blk::Diag(zd)) => {
                Blk::Diag(xd.component_mul(dd).component_mul(zd))
            }
            _ => unreachable!(),
        })
        .collect()
}

/// Newton direction for a given complementarity right-hand side `rc`.
#[allow(clippy::too_many_arguments)]
fn direction(
    d: &Data,
    it: &Iterate,
    zinv: &[Blk],
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    minv_g: &DMatrix<f64>,
    s_chol: Option<&nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    rp: &DVector<f64>,
    rd: &[Blk],
    rf: &DVector<f64>,
    rc: &[Blk],
) -> (Vec<Blk>, DVector<f64>, DVector<f64>, Vec<Blk>) {
    let xrz = hkm_term(&it.x, rd, zinv);
    let mut q = rc.to_vec();
    for (qb, t) in q.iter_mut().zip(&xrz) {
        qb.axpy(-1.0, t);
    }
    let h = rp - d.apply(&q);
    let minv_h = chol.solve(&h);
    let df = match s_chol {
        Some(sc) => {
            let rhs = d.g.transpose() * &minv_h - rf;
            sc.solve(&rhs)
        }
        None => DVector::zeros(d.nf()),
    };
    let dy = &minv_h - minv_g * &df;
    let aty = d.adjoint(&dy);
    let mut dz = rd.to_vec();
    for (zb, a) in dz.iter_mut().zip(&aty) {
        zb.axpy(-1.0, a);
    }
    let t = hkm_term(&it.x, &dz, zinv);
    let mut dx = rc.to_vec();
    for (xb, tb) in dx.iter_mut().zip(&t) {
        xb.axpy(-1.0, tb);
    }
    (dx, df, dy, dz)
}

/// Solve `p` to tolerance `opts.tol`.
pub fn solve(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    p.validate()?;
    if p.gram_dimension() > opts.max_gram_dim {
        return Err(SdpError::TooLarge {
            what: "total Gram dimension",
            got: p.gram_dimension(),
            cap: opts.max_gram_dim,
        });
    }
    if p.constraints.len() > opts.max_constraints {
        return Err(SdpError::TooLarge {
            what: "constraint count",
            got: p.constraints.len(),
            cap: opts.max_constraints,
        });
    }
    let (d, elim, kept) = match presolve(p) {
        Presolved::Ready(d, e, k) => (d, e, k),
        Presolved::Inconsistent => return Ok(trivial_infeasible(p)),
    };

    let scale = 1.0 + p.constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
    let cscale = 1.0 + d.c.iter().map(|b| match b {
        Blk::Dense(m) => m.amax(),
        Blk::Diag(v) => v.amax(),
    }).fold(0.0, f64::max);
    let mut it = Iterate {
        x: d.identity(scale),
        z: d.identity(scale.max(cscale)),
        y: DVector::zeros(d.m()),
        f: DVector::zeros(d.nf()),
    };
    let ntot: f64 = d.sizes.iter().sum::<usize>() as f64;

    let mut status = SolveStatus::Stalled;
    let mut iterations = 0;
    let mut best: Option<(f64, Iterate)> = None;
    let mut pinf_hist: Vec<f64> = Vec::new();
    let mut small_steps = 0;

    for k in 0..=opts.max_iter {
        iterations = k;
        let (ms, rp, rd, rf) = measure(&d, &it);
        if opts.verbose {
            eprintln!(
                "it {k:3} pobj {:+.6e} dobj {:+.6e} pinf {:.2e} dinf {:.2e} gap {:.2e}",
                -ms.pobj, -ms.dobj, ms.pinf, ms.dinf, ms.gap
            );
        }
        let score = ms.pinf.max(ms.dinf).max(ms.gap);
        if !score.is_finite() {
            break;
        }
        if best.as_ref().map_or(true, |(s, _)| score < *s) {
            best = Some((score, Iterate { x: it.x.clone(), z: it.z.clone(), y: it.y.clone(), f: it.f.clone() }));
        }
        if ms.pinf <= opts.tol && ms.dinf <= opts.tol && ms.gap <= opts.tol {
            status = SolveStatus::Optimal;
            break;
        }
        if detect_primal_infeasible(&d, &it, ms.dobj) {
            status = SolveStatus::Infeasible;
            break;
        }
        if detect_dual_infeasible(&d, &it, ms.pobj) {
            status = SolveStatus::Unbounded;
            break;
        }
        pinf_hist.push(ms.pinf);
        if ms.dobj > 1e8 && pinf_hist.len() > 20 {
            let old = pinf_hist[pinf_hist.len() - 21];
            if ms.pinf > 0.99 * old {
                status = SolveStatus::Infeasible;
                break;
            }
        }
        if k == opts.max_iter {
            break;
        }

        let zinv = match inverse_blocks(&it.z) {
            Some(z) => z,
            None => break,
        };
        let mu = dot_all(&it.x, &it.z) / ntot;
        let mmat = d.schur(&it.x, &zinv);
        let chol = match robust_cholesky(&mmat) {
            Some(c) => c,
            None => break,
        };
        let (minv_g, s_chol) = if d.nf() > 0 {
            let minv_g = chol.solve(&d.g);
            let s = d.g.transpose() * &minv_g;
            let sc = robust_cholesky(&sym(&s));
            if sc.is_none() {
                break;
            }
            (minv_g, sc)
        } else {
            (DMatrix::zeros(d.m(), 0), None)
        };

        // Predictor.
        let mut rc: Vec<Blk> = it.x.iter().map(|b| {
            let mut n = b.clone();
            n.axpy(-2.0, b);
            n
        }).collect();
        let (dxa, _, _, dza) = direction(&d, &it, &zinv, &chol, &minv_g, s_chol.as_ref(), &rp, &rd, &rf, &rc);
        let ap = (0.95 * max_step(&it.x, &dxa)).min(1.0);
        let ad = (0.95 * max_step(&it.z, &dza)).min(1.0);
        let mut xa = it.x.clone();
        let mut za = it.z.clone();
        for (b, db) in xa.iter_mut().zip(&dxa) {
            b.axpy(ap, db);
        }
        for (b, db) in za.iter_mut().zip(&dza) {
            b.axpy(ad, db);
        }
        let mu_aff = dot_all(&xa, &za) / ntot;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let second = hkm_term(&dxa, &dza, &zinv)
            .into_iter()
            .map(|b| match b {
                Blk::Dense(m) => Blk::Dense(m),
                Blk::Diag(v) => Blk::Diag(v),
            })
            .collect::<Vec<_>>();
        for ((r, zi), (xb, sb)) in rc.iter_mut().zip(&zinv).zip(it.x.iter().zip(&second)) {
            *r = zi.clone();
            match r {
                Blk::Dense(m) => *m *= sigma * mu,
                Blk::Diag(v) => *v *= sigma * mu,
            }
            r.axpy(-1.0, xb);
            r.axpy(-1.0, sb);
        }
        let (dx, df, dy, dz) = direction(&d, &it, &zinv, &chol, &minv_g, s_chol.as_ref(), &rp, &rd, &rf, &rc);
        let tau = if mu < 1e-6 { 0.98 } else { 0.95 };
        let ap = (tau * max_step(&it.x, &dx)).min(1.0);
        let ad = (tau * max_step(&it.z, &dz)).min(1.0);
        if ap < 1e-8 && ad < 1e-8 {
            small_steps += 1;
            if small_steps >= 5 {
                break;
            }
        } else {
            small_steps = 0;
        }
        for (b, db) in it.x.iter_mut().zip(&dx) {
            b.axpy(ap, db);
        }
        for (b, db) in it.z.iter_mut().zip(&dz) {
            b.axpy(ad, db);
        }
        it.f.axpy(ap, &df, 1.0);
        it.y.axpy(ad, &dy, 1.0);
        for b in it.x.iter_mut().chain(it.z.iter_mut()) {
            if let Blk::Dense(m) = b {
                *m = sym(m);
            }
        }
    }

    let final_it = match status {
        SolveStatus::Stalled => match best {
            Some((score, b)) => {
                if score <= NEAR_OPTIMAL * opts.tol {
                    status = SolveStatus::Optimal;
                }
                b
            }
            None => it,
        },
        _ => it,
    };
    Ok(assemble(p, &d, elim.as_ref(), &kept, final_it, status, iterations, opts.tol))
}

/// Loss of precision near the optimum is accepted within this factor of `tol`.
const NEAR_OPTIMAL: f64 = 100.0;

fn detect_primal_infeasible(d: &Data, it: &Iterate, dobj: f64) -> bool {
    if !(dobj > 1e3) {
        return false;
    }
    let ray = &it.y / dobj;
    let aty = d.adjoint(&ray);
    let neg: Vec<Blk> = aty
        .into_iter()
        .map(|b| match b {
            Blk::Dense(m) => Blk::Dense(-m),
            Blk::Diag(v) => Blk::Diag(-v),
        })
        .collect();
    let gty = d.g.transpose() * &ray;
    min_eig(&neg) >= -1e-8 && gty.norm() <= 1e-8
}

fn detect_dual_infeasible(d: &Data, it: &Iterate, pobj: f64) -> bool {
    if !(pobj < -1e3) {
        return false;
    }
    let t = -pobj;
    let ax = (d.apply(&it.x) + &d.g * &it.f) / t;
    ax.norm() <= 1e-8 * (1.0 + d.b.norm())
}

fn trivial_infeasible(p: &SdpProblem) -> SdpSolution {
    let x: Vec<DMatrix<f64>> = p.blocks.iter().map(|b| DMatrix::zeros(b.size, b.size)).collect();
    SdpSolution {
        z: x.clone(),
        x,
        free: vec![0.0; p.num_free],
        y: vec![0.0; p.constraints.len()],
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        status: SolveStatus::Infeasible,
        residuals: Residuals { primal: f64::INFINITY, dual: 0.0, gap: 0.0 },
        iterations: 0,
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    p: &SdpProblem,
    d: &Data,
    elim: Option<&FreeElimination>,
    kept: &[usize],
    it: Iterate,
    mut status: SolveStatus,
    iterations: usize,
    tol: f64,
) -> SdpSolution {
    let m = p.constraints.len();
    let mut y = vec![0.0; m];
    for (r, &i) in kept.iter().enumerate() {
        y[i] = -it.y[r];
    }
    let free: Vec<f64> = match elim {
        Some(e) => {
            let f = &e.f0 + &e.n * &it.f;
            // Multipliers of the eliminated rows from G'y = c.
            let mut resid = DVector::zeros(p.num_free);
            for &(k, v) in &p.objective.free {
                resid[k] += v;
            }
            for (i, c) in p.constraints.iter().enumerate() {
                for &(k, v) in &c.form.free {
                    resid[k] -= v * y[i];
                }
            }
            let ye = &e.et_pinv * resid;
            for (r, &i) in e.rows.iter().enumerate() {
                y[i] = ye[r];
            }
            f.iter().copied().collect()
        }
        None => it.f.iter().copied().collect(),
    };
    let _ = d;
    let x: Vec<DMatrix<f64>> = it.x.iter().map(Blk::to_dense).collect();
    let z: Vec<DMatrix<f64>> = it.z.iter().map(Blk::to_dense).collect();
    let mut sol = SdpSolution {
        x,
        free,
        y,
        z,
        primal_objective: 0.0,
        dual_objective: 0.0,
        status,
        residuals: Residuals::default(),
        iterations,
    };
    sol.primal_objective = SdpProblem::eval_form(&p.objective, &sol.x, &sol.free);
    sol.dual_objective = p.constraints.iter().zip(&sol.y).map(|(c, y)| c.rhs * y).sum();
    sol.residuals = p.residuals(&sol);
    if status == SolveStatus::Optimal && (sol.residuals.max() > 10.0 * tol || sol.min_primal_eig() < -1e-8) {
        status = SolveStatus::Stalled;
    }
    sol.status = status;
    sol
}
