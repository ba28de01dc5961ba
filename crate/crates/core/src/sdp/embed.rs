//! Lowering of a Hermitian program to a real symmetric cone program.
//!
//! A Hermitian `H = X + iY` is represented by `[[X, −Y], [Y, X]]`, which is
//! positive semi-definite exactly when `H` is. Every Hermitian variable of
//! dimension `d` contributes `d²` real coordinates. The lowered program is
//!
//! ```text
//! minimize cᵀx  subject to  G x + s = h,  A x = b,  s ∈ S₊ (block diagonal)
//! ```
//!
//! Trace pairings double under the embedding, so the objective of a lowered
//! program is taken as half the trace of the embedded objective.

use nalgebra::{DMatrix, DVector};

use super::model::{
    basis_pairs, hermitian_basis_element, hermitian_basis_len, hermitian_coords, Cone, Relation, SdpProblem, Sense,
};
use crate::error::{Error, Result};
use crate::operators::{CMatrix, SystemLayout, C64};

/// One nonzero of a column of `G`, in the real block `block`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GEntry {
    pub block: u32,
    pub r: u32,
    pub c: u32,
    pub v: f64,
}

/// Where a block of the lowered program came from.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockOrigin {
    Variable(usize),
    Constraint(usize),
}

/// Real conic program produced by [`embed_real`].
#[derive(Clone, Debug)]
pub struct ConeProgram {
    pub c: DVector<f64>,
    /// Real block sizes (twice the complex dimension).
    pub blocks: Vec<usize>,
    pub block_origin: Vec<BlockOrigin>,
    /// Column `p` of `G` as its nonzero entries; both triangles are stored.
    pub g_cols: Vec<Vec<GEntry>>,
    pub h: Vec<DMatrix<f64>>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Row ranges of `A` for each equality constraint.
    pub eq_rows: Vec<(usize, std::ops::Range<usize>)>,
    /// Column offset of each variable.
    pub var_offsets: Vec<usize>,
    /// Added to `cᵀx` to recover the objective value.
    pub objective_offset: f64,
    /// The objective was negated to turn a maximization into a minimization.
    pub negated: bool,
}

impl ConeProgram {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_eqs(&self) -> usize {
        self.b.len()
    }

    /// Sum of block sizes.
    pub fn degree(&self) -> usize {
        self.blocks.iter().sum()
    }
}

/// `H ↦ [[Re H, −Im H], [Im H, Re H]]`.
pub fn embed_hermitian(h: &CMatrix) -> DMatrix<f64> {
    let n = h.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for c in 0..n {
        for r in 0..n {
            let v = h[(r, c)];
            out[(r, c)] = v.re;
            out[(r + n, c + n)] = v.re;
            out[(r, c + n)] = -v.im;
            out[(r + n, c)] = v.im;
        }
    }
    out
}

/// Complex matrix whose embedding pairs with `z` the same way: returns `W`
/// with `⟨embed(H), z⟩ = 2 Re Tr(H W)` for all Hermitian `H`.
pub fn unembed_dual(z: &DMatrix<f64>) -> CMatrix {
    let n = z.nrows() / 2;
    CMatrix::from_fn(n, n, |i, j| {
        let re = z[(i, j)] + z[(i + n, j + n)];
        // Tr(H W) pairs H_ij with W_ji; the antisymmetric part of the
        // off-diagonal blocks carries the imaginary component.
        let im = z[(j, i + n)] - z[(j + n, i)];
        C64::new(re / 2.0, im / 2.0)
    })
}

/// Inverse of [`embed_hermitian`] (averaging the redundant copies).
pub fn unembed_primal(s: &DMatrix<f64>) -> CMatrix {
    let n = s.nrows() / 2;
    CMatrix::from_fn(n, n, |i, j| {
        let re = (s[(i, j)] + s[(i + n, j + n)]) / 2.0;
        let im = (s[(i + n, j)] - s[(i, j + n)]) / 2.0;
        C64::new(re, im)
    })
}

fn push_embedded(col: &mut Vec<GEntry>, block: usize, m: &CMatrix, scale: f64) {
    let n = m.nrows();
    for c in 0..n {
        for r in 0..n {
            let v = m[(r, c)] * scale;
            let (r, c, b) = (r as u32, c as u32, block as u32);
            let n = n as u32;
            if v.re != 0.0 {
                col.push(GEntry { block: b, r, c, v: v.re });
                col.push(GEntry { block: b, r: r + n, c: c + n, v: v.re });
            }
            if v.im != 0.0 {
                col.push(GEntry { block: b, r, c: c + n, v: -v.im });
                col.push(GEntry { block: b, r: r + n, c, v: v.im });
            }
        }
    }
}

/// Per variable: for each basis coordinate, the image of the basis element
/// under each term's map chain, accumulated per (constraint or objective).
struct Images {
    /// `images[k][p]` is the image of basis element `p` of variable `k`.
    images: Vec<Vec<CMatrix>>,
}

fn term_images(problem: &SdpProblem, expr: &super::model::Expr) -> Images {
    let out_dim = expr.layout().dim();
    let mut images: Vec<Vec<CMatrix>> = problem
        .variables
        .iter()
        .map(|_| Vec::new())
        .collect();
    for t in &expr.terms {
        let var = &problem.variables[t.var.0];
        let d = var.layout.dim();
        let pairs = basis_pairs(d);
        let slot = &mut images[t.var.0];
        if slot.is_empty() {
            *slot = vec![CMatrix::zeros(out_dim, out_dim); hermitian_basis_len(d)];
        }
        for (p, acc) in slot.iter_mut().enumerate() {
            let mut m = hermitian_basis_element(d, p, &pairs);
            let mut layout: SystemLayout = t.var_layout.clone();
            for op in &t.ops {
                let next = op.output_layout(&layout).expect("validated when built");
                m = op.apply(&layout, &m);
                layout = next;
            }
            *acc += m * C64::new(t.coef, 0.0);
        }
    }
    Images { images }
}

/// Lower a Hermitian program to a real cone program.
pub fn embed_real(problem: &SdpProblem) -> Result<ConeProgram> {
    let (sense, objective) =
        problem.objective.as_ref().ok_or_else(|| Error::MalformedProblem("no objective".into()))?;
    let mut var_offsets = Vec::with_capacity(problem.variables.len());
    let mut n = 0;
    for v in &problem.variables {
        var_offsets.push(n);
        n += hermitian_basis_len(v.layout.dim());
    }
    if n == 0 {
        return Err(Error::MalformedProblem("no variables".into()));
    }
    let sign = if *sense == Sense::Maximize { -1.0 } else { 1.0 };

    // Objective: half the trace of the embedded 1×1 image, i.e. its real part.
    let mut c = DVector::zeros(n);
    let obj_images = term_images(problem, objective);
    for (k, imgs) in obj_images.images.iter().enumerate() {
        for (p, m) in imgs.iter().enumerate() {
            let e = embed_hermitian(m);
            c[var_offsets[k] + p] = sign * e.trace() / 2.0;
        }
    }
    let objective_offset = objective.constant.as_ref().map(|m| m[(0, 0)].re).unwrap_or(0.0);

    let mut blocks = Vec::new();
    let mut block_origin = Vec::new();
    let mut h = Vec::new();
    let mut g_cols: Vec<Vec<GEntry>> = vec![Vec::new(); n];

    for (k, v) in problem.variables.iter().enumerate() {
        if v.cone == Cone::HermitianPsd {
            let d = v.layout.dim();
            let pairs = basis_pairs(d);
            let bi = blocks.len();
            blocks.push(2 * d);
            block_origin.push(BlockOrigin::Variable(k));
            h.push(DMatrix::zeros(2 * d, 2 * d));
            for p in 0..hermitian_basis_len(d) {
                let m = hermitian_basis_element(d, p, &pairs);
                push_embedded(&mut g_cols[var_offsets[k] + p], bi, &m, -1.0);
            }
        }
    }

    let mut a_rows: Vec<Vec<f64>> = Vec::new();
    let mut b_vals: Vec<f64> = Vec::new();
    let mut eq_rows = Vec::new();
    for (ci, con) in problem.constraints.iter().enumerate() {
        let dim = con.expr.layout().dim();
        let constant = con.expr.constant.clone().unwrap_or_else(|| CMatrix::zeros(dim, dim));
        let images = term_images(problem, &con.expr);
        match con.relation {
            Relation::Psd => {
                let bi = blocks.len();
                blocks.push(2 * dim);
                block_origin.push(BlockOrigin::Constraint(ci));
                h.push(embed_hermitian(&constant));
                for (k, imgs) in images.images.iter().enumerate() {
                    for (p, m) in imgs.iter().enumerate() {
                        push_embedded(&mut g_cols[var_offsets[k] + p], bi, m, -1.0);
                    }
                }
            }
            Relation::Zero => {
                let pairs = basis_pairs(dim);
                let start = a_rows.len();
                let rows = dim * dim;
                let mut block_rows = vec![vec![0.0; n]; rows];
                for (k, imgs) in images.images.iter().enumerate() {
                    for (p, m) in imgs.iter().enumerate() {
                        for (r, v) in hermitian_coords(m, &pairs).into_iter().enumerate() {
                            block_rows[r][var_offsets[k] + p] = v;
                        }
                    }
                }
                a_rows.extend(block_rows);
                b_vals.extend(hermitian_coords(&constant, &pairs).into_iter().map(|v| -v));
                eq_rows.push((ci, start..start + rows));
            }
        }
    }

    let m = a_rows.len();
    let a = DMatrix::from_fn(m, n, |i, j| a_rows[i][j]);
    let b = DVector::from_vec(b_vals);
    Ok(ConeProgram {
        c,
        blocks,
        block_origin,
        g_cols,
        h,
        a,
        b,
        eq_rows,
        var_offsets,
        objective_offset,
        negated: *sense == Sense::Maximize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| C64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)));
        (&g + g.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn scalar_embeds_to_diagonal_duplicate() {
        let h = CMatrix::from_element(1, 1, C64::new(2.5, 0.0));
        let e = embed_hermitian(&h);
        assert_eq!(e, DMatrix::from_row_slice(2, 2, &[2.5, 0.0, 0.0, 2.5]));
        assert_relative_eq!(e.trace() / 2.0, 2.5);
    }

    #[test]
    fn spectrum_doubles_and_trace_doubles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 3, 5] {
            let h = random_hermitian(n, &mut rng);
            let e = embed_hermitian(&h);
            assert!((&e - e.transpose()).amax() < 1e-15);
            let mut he: Vec<f64> = h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
            let mut ee: Vec<f64> = e.symmetric_eigen().eigenvalues.iter().copied().collect();
            he.sort_by(f64::total_cmp);
            ee.sort_by(f64::total_cmp);
            for (i, l) in he.iter().enumerate() {
                assert_relative_eq!(ee[2 * i], *l, epsilon = 1e-10);
                assert_relative_eq!(ee[2 * i + 1], *l, epsilon = 1e-10);
            }
            assert_relative_eq!(embed_hermitian(&h).trace(), 2.0 * h.trace().re, epsilon = 1e-12);
        }
    }

    #[test]
    fn dual_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 3;
        let h = random_hermitian(n, &mut rng);
        let z = DMatrix::from_fn(2 * n, 2 * n, |_, _| StandardNormal.sample(&mut rng));
        let z = (&z + z.transpose()) * 0.5;
        let w = unembed_dual(&z);
        let lhs = embed_hermitian(&h).dot(&z);
        let rhs = 2.0 * (&h * &w).trace().re;
        assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
        assert!(crate::operators::raw::max_abs(&(unembed_primal(&embed_hermitian(&h)) - &h)) < 1e-15);
    }
}
