//! Homogeneous self-dual interior-point method with Nesterov–Todd scaling
//! for real block-diagonal semidefinite cone programs.
//!
//! Primal: minimize `cᵀx` s.t. `Gx + s = h`, `Ax = b`, `s ⪰ 0`.
//! Dual:   maximize `−hᵀz − bᵀy` s.t. `Gᵀz + Aᵀy + c = 0`, `z ⪰ 0`.
//!
//! Each iteration is a Mehrotra predictor–corrector step on the embedding
//! with unknowns `(x, y, z, s, τ, κ)`; the reduced KKT system is solved
//! through the Schur complement `Gᵀ W⁻¹ W⁻ᵀ G`.

use std::f64::consts::SQRT_2;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::embed::ConeProgram;
use super::{IterationInfo, SolveStatus, SolverOptions};

type Blocks = Vec<DMatrix<f64>>;

pub(crate) struct IpmOutput {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: Blocks,
    pub pcost: f64,
    pub dcost: f64,
    pub gap: f64,
    pub iterations: usize,
}

fn blocks_dot(a: &Blocks, b: &Blocks) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn blocks_norm(a: &Blocks) -> f64 {
    blocks_dot(a, a).sqrt()
}

fn blocks_axpy(alpha: f64, x: &Blocks, y: &mut Blocks) {
    for (xi, yi) in x.iter().zip(y.iter_mut()) {
        *yi += xi * alpha;
    }
}

fn blocks_scale(a: &Blocks, alpha: f64) -> Blocks {
    a.iter().map(|m| m * alpha).collect()
}

fn blocks_zero(p: &ConeProgram) -> Blocks {
    p.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect()
}

fn blocks_identity(p: &ConeProgram) -> Blocks {
    p.blocks.iter().map(|&n| DMatrix::identity(n, n)).collect()
}

/// `Σ_p x_p G_p`
fn g_mul(p: &ConeProgram, x: &DVector<f64>) -> Blocks {
    let mut out = blocks_zero(p);
    for (col, &xp) in p.g_cols.iter().zip(x.iter()) {
        if xp == 0.0 {
            continue;
        }
        for e in col {
            out[e.block as usize][(e.r as usize, e.c as usize)] += e.v * xp;
        }
    }
    out
}

/// `(⟨G_p, Z⟩)_p`
fn gt_mul(p: &ConeProgram, z: &Blocks) -> DVector<f64> {
    DVector::from_iterator(
        p.g_cols.len(),
        p.g_cols.iter().map(|col| col.iter().map(|e| e.v * z[e.block as usize][(e.r as usize, e.c as usize)]).sum()),
    )
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym(m)).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Thin SVD `m = U diag(σ) Vᵀ`, returned as `(U, σ, V)`. nalgebra's SVD
/// can misplace nearly repeated singular values, which the scaling updates
/// cannot tolerate.
fn svd(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let f = faer::Mat::<f64>::from_fn(n, m.ncols(), |i, j| m[(i, j)]);
    let d = f.svd().ok()?;
    let (u, s, v) = (d.U(), d.S(), d.V());
    let k = s.dim();
    Some((
        DMatrix::from_fn(n, k, |i, j| u[(i, j)]),
        DVector::from_fn(k, |i, _| s[i]),
        DMatrix::from_fn(m.ncols(), k, |i, j| v[(i, j)]),
    ))
}

/// Nesterov–Todd scaling of one block: `Rᵀ Z R = Λ = R⁻¹ S R⁻ᵀ`.
struct BlockScaling {
    r: DMatrix<f64>,
    rinv: DMatrix<f64>,
    lambda: DVector<f64>,
}

impl BlockScaling {
    fn identity(n: usize) -> Self {
        BlockScaling {
            r: DMatrix::identity(n, n),
            rinv: DMatrix::identity(n, n),
            lambda: DVector::from_element(n, 1.0),
        }
    }

    fn new(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Self> {
        let ls = Cholesky::new(sym(s))?.unpack();
        let lz = Cholesky::new(sym(z))?.unpack();
        let (_, lambda, v) = svd(&(lz.transpose() * &ls))?;
        if lambda.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
            return None;
        }
        let v_t = v.transpose();
        let n = lambda.len();
        let mut r = &ls * &v;
        let ls_inv = ls.solve_lower_triangular(&DMatrix::identity(n, n))?;
        let mut rinv = &v_t * ls_inv;
        for j in 0..n {
            let f = lambda[j].sqrt();
            r.column_mut(j).scale_mut(1.0 / f);
            rinv.row_mut(j).scale_mut(f);
        }
        Some(BlockScaling { r, rinv, lambda })
    }

    /// Scaling at `s + α ds`, `z + α dz` from the scaled step directions
    /// `W⁻ᵀ ds` and `W dz`. Working in the scaled space keeps the factors
    /// accurate when `s` or `z` approach the cone boundary.
    fn updated(&self, sds: &DMatrix<f64>, sdz: &DMatrix<f64>, alpha: f64) -> Option<Self> {
        let n = self.lambda.len();
        let mut st = sym(sds) * alpha;
        let mut zt = sym(sdz) * alpha;
        for i in 0..n {
            st[(i, i)] += self.lambda[i];
            zt[(i, i)] += self.lambda[i];
        }
        let l1 = Cholesky::new(st)?.unpack();
        let l2 = Cholesky::new(zt)?.unpack();
        let (u, sigma, v) = svd(&(l2.transpose() * &l1))?;
        if sigma.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
            return None;
        }
        // R̃ = L₁ V Σ^{-1/2}, R̃⁻¹ = Σ^{-1/2} Uᵀ L₂ᵀ.
        let mut rt = &l1 * v;
        let mut rt_inv = u.transpose() * l2.transpose();
        for j in 0..n {
            let f = sigma[j].sqrt();
            rt.column_mut(j).scale_mut(1.0 / f);
            rt_inv.row_mut(j).scale_mut(1.0 / f);
        }
        Some(BlockScaling { r: &self.r * rt, rinv: rt_inv * &self.rinv, lambda: sigma })
    }

    /// `W⁻¹ u = R⁻ᵀ u R⁻¹`
    fn w_inv(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        self.rinv.transpose() * u * &self.rinv
    }

    /// `W⁻ᵀ u = R⁻¹ u R⁻ᵀ`
    fn w_inv_t(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.rinv * u * self.rinv.transpose()
    }

    /// `Wᵀ u = R u Rᵀ`
    fn w_t(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.r * u * self.r.transpose()
    }
}

/// Factored reduced KKT system in scaled form,
/// `[0 Aᵀ GᵀW⁻¹; A 0 0; W⁻ᵀG 0 −I] (ux, uy, ũz) = (bx, by, b̃z)`,
/// where `ũz = W uz` and `b̃z = W⁻ᵀ bz`. Working with scaled blocks keeps
/// residuals meaningful when `W` is badly conditioned.
struct Kkt<'a> {
    p: &'a ConeProgram,
    scaling: &'a [BlockScaling],
    /// Upper triangular `R` with `GᵀW⁻¹W⁻ᵀG + AᵀA = RᵀR`.
    h_r: DMatrix<f64>,
    /// Cholesky factor of `A H⁻¹ Aᵀ`, absent without equality constraints.
    schur_chol: Option<Cholesky<f64, Dyn>>,
}

const REFINE_MAX: usize = 10;

fn regularized_cholesky(mut m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = m.diagonal().iter().fold(1e-300_f64, |a, &d| a.max(d.abs()));
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let mut delta = scale * 1e-14;
    for _ in 0..12 {
        for i in 0..m.nrows() {
            m[(i, i)] += delta;
        }
        if let Some(c) = Cholesky::new(m.clone()) {
            return Some(c);
        }
        delta *= 10.0;
    }
    None
}

/// Upper triangular `R` with `GsᵀGs = RᵀR`. QR avoids squaring the condition
/// number; a rank-deficient `Gs` falls back to regularized normal equations.
fn factor_normal(gs: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = gs.ncols();
    if gs.nrows() >= n {
        // faer's blocked QR is several times faster than nalgebra's here.
        let f = faer::Mat::<f64>::from_fn(gs.nrows(), n, |i, j| gs[(i, j)]);
        let qr = f.qr();
        let fr = qr.thin_R();
        let r = DMatrix::from_fn(n, n, |i, j| if i <= j { fr[(i, j)] } else { 0.0 });
        let dmax = r.diagonal().iter().fold(0.0_f64, |a, d| a.max(d.abs()));
        if r.diagonal().iter().all(|d| d.abs() > 1e-13 * dmax) {
            return Some(r);
        }
    }
    let h = gs.transpose() * &gs;
    Some(regularized_cholesky(h)?.l().transpose())
}

impl<'a> Kkt<'a> {
    fn factor(p: &'a ConeProgram, scaling: &'a [BlockScaling]) -> Option<Self> {
        let n = p.num_vars();
        // Columns of W⁻ᵀG in symmetric-vector form, so that H = GsᵀGs.
        let offsets: Vec<usize> = p
            .blocks
            .iter()
            .scan(0, |acc, &nb| {
                let o = *acc;
                *acc += nb * (nb + 1) / 2;
                Some(o)
            })
            .collect();
        let rows: usize = p.blocks.iter().map(|&nb| nb * (nb + 1) / 2).sum();
        // A is stacked below: with `A ux = by` the system is unchanged when H
        // is replaced by `H + AᵀA`, which stays definite when H is only
        // definite on the null space of A.
        let m = p.num_eqs();
        let mut gs = DMatrix::<f64>::zeros(rows + m, n);
        if m > 0 {
            gs.rows_mut(rows, m).copy_from(&p.a);
        }
        for (j, col) in p.g_cols.iter().enumerate() {
            let mut touched: Vec<u32> = col.iter().map(|e| e.block).collect();
            touched.sort_unstable();
            touched.dedup();
            for b in touched {
                let bi = b as usize;
                let nb = p.blocks[bi];
                let rinv = &scaling[bi].rinv;
                let mut m = DMatrix::<f64>::zeros(nb, nb);
                for e in col.iter().filter(|e| e.block == b) {
                    m.ger(e.v, &rinv.column(e.r as usize), &rinv.column(e.c as usize), 1.0);
                }
                let mut k = offsets[bi];
                for c in 0..nb {
                    for r in 0..=c {
                        gs[(k, j)] = if r == c { m[(r, c)] } else { SQRT_2 * 0.5 * (m[(r, c)] + m[(c, r)]) };
                        k += 1;
                    }
                }
            }
        }
        let h_r = factor_normal(gs)?;
        let schur_chol = if p.num_eqs() > 0 {
            if h_r.diagonal().iter().any(|&d| d == 0.0) {
                return None;
            }
            let n = h_r.nrows();
            let rf = faer::Mat::<f64>::from_fn(n, n, |i, j| h_r[(i, j)]);
            let mut x = faer::Mat::<f64>::from_fn(n, m, |i, j| p.a[(j, i)]);
            faer::linalg::triangular_solve::solve_lower_triangular_in_place(rf.transpose(), x.as_mut(), faer::Par::Seq);
            let xtx = x.transpose() * &x;
            let s = DMatrix::from_fn(m, m, |i, j| xtx[(i, j)]);
            Some(regularized_cholesky(sym(&s))?)
        } else {
            None
        };
        Some(Kkt { p, scaling, h_r, schur_chol })
    }

    /// `(H + AᵀA)⁻¹ v`.
    fn h_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        self.h_r.tr_solve_upper_triangular_mut(&mut out);
        self.h_r.solve_upper_triangular_mut(&mut out);
        out
    }

    /// `W⁻¹ u` per block.
    fn w_inv(&self, u: &Blocks) -> Blocks {
        u.iter().zip(self.scaling).map(|(m, sc)| sc.w_inv(m)).collect()
    }

    /// `W⁻ᵀ G ux` per block.
    fn scaled_g(&self, ux: &DVector<f64>) -> Blocks {
        g_mul(self.p, ux).iter().zip(self.scaling).map(|(g, sc)| sc.w_inv_t(g)).collect()
    }

    fn solve_once(&self, bx: &DVector<f64>, by: &DVector<f64>, bz: &Blocks) -> (DVector<f64>, DVector<f64>, Blocks) {
        let mut rhs = bx + gt_mul(self.p, &self.w_inv(bz));
        if self.p.num_eqs() > 0 {
            rhs += self.p.a.transpose() * by;
        }
        let h_inv_rhs = self.h_solve(&rhs);
        let (ux, uy) = match &self.schur_chol {
            Some(sc) => {
                let t = &self.p.a * &h_inv_rhs - by;
                let uy = sc.solve(&t);
                let ux = self.h_solve(&(&rhs - self.p.a.transpose() * &uy));
                (ux, uy)
            }
            None => (h_inv_rhs, DVector::zeros(0)),
        };
        let uz = self.scaled_g(&ux).iter().zip(bz).map(|(a, b)| a - b).collect();
        (ux, uy, uz)
    }

    fn apply(&self, ux: &DVector<f64>, uy: &DVector<f64>, uz: &Blocks) -> (DVector<f64>, DVector<f64>, Blocks) {
        let mut rx = gt_mul(self.p, &self.w_inv(uz));
        if self.p.num_eqs() > 0 {
            rx += self.p.a.transpose() * uy;
        }
        let ry = &self.p.a * ux;
        let rz = self.scaled_g(ux).iter().zip(uz).map(|(g, u)| g - u).collect();
        (rx, ry, rz)
    }

    /// Solve with iterative refinement, continued while the residual keeps
    /// shrinking.
    fn solve(&self, bx: &DVector<f64>, by: &DVector<f64>, bz: &Blocks) -> (DVector<f64>, DVector<f64>, Blocks) {
        let (mut ux, mut uy, mut uz) = self.solve_once(bx, by, bz);
        let scale = bx.norm().max(by.norm()).max(blocks_norm(bz)).max(1e-300);
        let mut prev = f64::INFINITY;
        for _ in 0..REFINE_MAX {
            let (ax, ay, az) = self.apply(&ux, &uy, &uz);
            let ex = bx - ax;
            let ey = by - ay;
            let ez: Blocks = bz.iter().zip(&az).map(|(a, b)| a - b).collect();
            let err = ex.norm().max(ey.norm()).max(blocks_norm(&ez));
            if err <= 1e-15 * scale || err >= 0.5 * prev {
                break;
            }
            prev = err;
            let (dx, dy, dz) = self.solve_once(&ex, &ey, &ez);
            ux += dx;
            uy += dy;
            blocks_axpy(1.0, &dz, &mut uz);
        }
        (ux, uy, uz)
    }
}

/// Largest `α` with `Λ + α D ⪰ 0`.
fn max_step(lambda: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let n = lambda.len();
    let m = DMatrix::from_fn(n, n, |i, j| d[(i, j)] / (lambda[i] * lambda[j]).sqrt());
    let mn = min_eig(&m);
    if mn < 0.0 {
        -1.0 / mn
    } else {
        f64::INFINITY
    }
}

fn scalar_step(v: f64, dv: f64) -> f64 {
    if dv < 0.0 {
        -v / dv
    } else {
        f64::INFINITY
    }
}

/// Search direction with the cone parts in scaled form, `W⁻ᵀ ds` and `W dz`.
struct Direction {
    dx: DVector<f64>,
    dy: DVector<f64>,
    sdz: Blocks,
    sds: Blocks,
    dtau: f64,
    dkappa: f64,
}

pub(crate) fn solve(
    p: &ConeProgram,
    opts: &SolverOptions,
    mut progress: Option<&mut dyn FnMut(&IterationInfo)>,
) -> IpmOutput {
    let n = p.num_vars();
    let m = p.num_eqs();
    let degree = p.degree() as f64;
    let resx0 = p.c.norm().max(1.0);
    let resy0 = p.b.norm().max(1.0);
    let resz0 = blocks_norm(&p.h).max(1.0);

    let failure = |iterations| IpmOutput {
        status: SolveStatus::NumericalFailure,
        x: DVector::zeros(n),
        y: DVector::zeros(m),
        z: blocks_zero(p),
        pcost: f64::NAN,
        dcost: f64::NAN,
        gap: f64::NAN,
        iterations,
    };

    // Starting point from two least-squares-type solves with W = I.
    let ident: Vec<BlockScaling> = p.blocks.iter().map(|&nb| BlockScaling::identity(nb)).collect();
    let Some(kkt0) = Kkt::factor(p, &ident) else {
        return failure(0);
    };
    let (mut x, _, neg_s) = kkt0.solve(&DVector::zeros(n), &p.b, &p.h);
    let mut s = blocks_scale(&neg_s, -1.0);
    let (_, mut y, mut z) = kkt0.solve(&(-&p.c), &DVector::zeros(m), &blocks_zero(p));
    let eye = blocks_identity(p);
    let shift = |v: &mut Blocks| {
        let nrm = blocks_norm(v);
        let ts = v.iter().map(|b| -min_eig(b)).fold(f64::NEG_INFINITY, f64::max);
        if ts >= -1e-8 * nrm.max(1.0) {
            blocks_axpy(1.0 + ts, &eye, v);
        }
    };
    shift(&mut s);
    shift(&mut z);
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let mut last_optimal_like: Option<IpmOutput> = None;
    let Some(mut scaling) = s.iter().zip(&z).map(|(sb, zb)| BlockScaling::new(sb, zb)).collect::<Option<Vec<_>>>()
    else {
        return failure(0);
    };

    for iter in 0..=opts.max_iter {
        // Residuals.
        let gx = g_mul(p, &x);
        let gtz = gt_mul(p, &z);
        let aty = if m > 0 { p.a.transpose() * &y } else { DVector::zeros(n) };
        let ax = &p.a * &x;
        let r1 = &aty + &gtz + &p.c * tau;
        let r2 = -&ax + &p.b * tau;
        let r3: Blocks = gx.iter().zip(&p.h).zip(&s).map(|((g, h), s)| -g + h * tau - s).collect();
        let cx = p.c.dot(&x);
        let by = p.b.dot(&y);
        let hz = blocks_dot(&p.h, &z);
        let r4 = -cx - by - hz - kappa;

        let gap = blocks_dot(&s, &z);
        let mu = (gap + kappa * tau) / (degree + 1.0);
        let pcost = cx / tau;
        let dcost = -(by + hz) / tau;
        let pres = (r2.norm() / resy0).max(blocks_norm(&r3) / resz0) / tau;
        let dres = r1.norm() / resx0 / tau;
        let rel_gap = (pcost - dcost).abs() / pcost.abs().max(1.0);
        let compl = gap / (tau * tau) / pcost.abs().max(1.0);

        if let Some(cb) = progress.as_deref_mut() {
            cb(&IterationInfo { iteration: iter, pcost, dcost, gap: gap / (tau * tau), pres, dres, tau, kappa });
        }

        let finish = |status, it| IpmOutput {
            status,
            x: &x / tau,
            y: &y / tau,
            z: blocks_scale(&z, 1.0 / tau),
            pcost,
            dcost,
            gap: gap / (tau * tau),
            iterations: it,
        };

        // The contract is on the relative primal-dual gap; complementarity
        // only has to be small enough to rule out a spurious gap closure.
        if pres <= opts.feas_tol && dres <= opts.feas_tol && rel_gap <= opts.gap_tol && compl <= opts.gap_tol.sqrt() {
            return finish(SolveStatus::Optimal, iter);
        }
        if pres <= opts.feas_tol.sqrt() && dres <= opts.feas_tol.sqrt() && rel_gap <= opts.gap_tol.sqrt() {
            last_optimal_like = Some(finish(SolveStatus::NumericalFailure, iter));
        }
        // Infeasibility certificates.
        let hz_by = hz + by;
        if hz_by < 0.0 {
            let dres_inf = (&aty + &gtz).norm() / resx0 / (-hz_by);
            if dres_inf <= opts.feas_tol {
                return IpmOutput {
                    status: SolveStatus::Infeasible,
                    x: DVector::zeros(n),
                    y: &y / (-hz_by),
                    z: blocks_scale(&z, 1.0 / (-hz_by)),
                    pcost: f64::NAN,
                    dcost: f64::INFINITY,
                    gap: f64::NAN,
                    iterations: iter,
                };
            }
        }
        if cx < 0.0 {
            let gxs: Blocks = gx.iter().zip(&s).map(|(g, s)| g + s).collect();
            let pres_inf = (ax.norm() / resy0).max(blocks_norm(&gxs) / resz0) / (-cx);
            if pres_inf <= opts.feas_tol {
                return IpmOutput {
                    status: SolveStatus::Unbounded,
                    x: &x / (-cx),
                    y: DVector::zeros(m),
                    z: blocks_zero(p),
                    pcost: f64::NEG_INFINITY,
                    dcost: f64::NAN,
                    gap: f64::NAN,
                    iterations: iter,
                };
            }
        }
        if iter == opts.max_iter {
            break;
        }

        // Factorization.
        let Some(kkt) = Kkt::factor(p, &scaling) else { break };
        let scaled = |v: &Blocks| -> Blocks { v.iter().zip(&scaling).map(|(m, sc)| sc.w_inv_t(m)).collect() };
        let hs = scaled(&p.h);
        let r3s = scaled(&r3);
        let (x1, y1, z1) = kkt.solve(&(-&p.c), &p.b, &hs);
        let denom_base = p.c.dot(&x1) + p.b.dot(&y1) + blocks_dot(&hs, &z1);

        let lambda_sq: Blocks = scaling.iter().map(|sc| DMatrix::from_diagonal(&sc.lambda.map(|l| l * l))).collect();

        let compute = |eta: f64, rs: &Blocks, rk: f64| -> Direction {
            // d̂ solves Λ∘d̂ = rs, and W⁻ᵀds + W dz = d̂.
            let dhat: Blocks = rs
                .iter()
                .zip(&scaling)
                .map(|(r, sc)| {
                    let l = &sc.lambda;
                    DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| 2.0 * r[(i, j)] / (l[i] + l[j]))
                })
                .collect();
            let bx = &r1 * (-(1.0 - eta));
            let by = &r2 * (1.0 - eta);
            let bz: Blocks = r3s.iter().zip(&dhat).map(|(r, d)| r * (1.0 - eta) - d).collect();
            let (x2, y2, z2) = kkt.solve(&bx, &by, &bz);
            let rhs4 = -(1.0 - eta) * r4 + rk / tau;
            let num = rhs4 + p.c.dot(&x2) + p.b.dot(&y2) + blocks_dot(&hs, &z2);
            let dtau = num / (kappa / tau - denom_base);
            let dx = x2 + &x1 * dtau;
            let dy = y2 + &y1 * dtau;
            let mut sdz = z2;
            blocks_axpy(dtau, &z1, &mut sdz);
            let sds: Blocks = dhat.iter().zip(&sdz).map(|(d, z)| d - z).collect();
            let dkappa = (rk - kappa * dtau) / tau;
            Direction { dx, dy, sdz, sds, dtau, dkappa }
        };

        let step_len = |d: &Direction| -> f64 {
            let mut a = scalar_step(tau, d.dtau).min(scalar_step(kappa, d.dkappa));
            for ((a_s, a_z), sc) in d.sds.iter().zip(&d.sdz).zip(&scaling) {
                a = a.min(max_step(&sc.lambda, a_s)).min(max_step(&sc.lambda, a_z));
            }
            a
        };

        // Predictor.
        let rs_aff: Blocks = lambda_sq.iter().map(|l2| -l2).collect();
        let aff = compute(0.0, &rs_aff, -kappa * tau);
        let a_aff = step_len(&aff);
        let sigma = (1.0 - a_aff.min(1.0)).powi(3);

        // Corrector.
        let rs: Blocks = lambda_sq
            .iter()
            .zip(aff.sds.iter().zip(&aff.sdz))
            .map(|(l2, (ds_a, dz_a))| {
                let prod = ds_a * dz_a;
                let jordan = (&prod + prod.transpose()) * 0.5;
                let mut r = -l2 - jordan;
                for i in 0..r.nrows() {
                    r[(i, i)] += sigma * mu;
                }
                r
            })
            .collect();
        let rk = -kappa * tau + sigma * mu - aff.dtau * aff.dkappa;
        let dir = compute(sigma, &rs, rk);
        let a_max = step_len(&dir);
        let alpha = (0.99 * a_max).min(1.0);
        if !alpha.is_finite() || alpha <= 0.0 {
            break;
        }
        let next: Option<Vec<BlockScaling>> =
            scaling.iter().zip(dir.sds.iter().zip(&dir.sdz)).map(|(sc, (a, b))| sc.updated(a, b, alpha)).collect();

        x += &dir.dx * alpha;
        y += &dir.dy * alpha;
        for ((sc, (sb, zb)), (dsb, dzb)) in scaling.iter().zip(s.iter_mut().zip(z.iter_mut())).zip(dir.sds.iter().zip(&dir.sdz)) {
            *sb += sc.w_t(dsb) * alpha;
            *zb += sc.w_inv(dzb) * alpha;
        }
        for b in s.iter_mut().chain(z.iter_mut()) {
            *b = sym(b);
        }
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        if !(tau > 0.0 && kappa > 0.0) || !x.iter().all(|v| v.is_finite()) {
            break;
        }
        scaling = match next {
            Some(sc) => sc,
            None => match s.iter().zip(&z).map(|(sb, zb)| BlockScaling::new(sb, zb)).collect() {
                Some(sc) => sc,
                None => break,
            },
        };
    }
    last_optimal_like.unwrap_or_else(|| failure(opts.max_iter))
}
