//! Dense operator algebra over multi-factor Hilbert spaces.
//!
//! Every operator carries a [`SystemLayout`]: the ordered tensor factors it
//! acts on and which of them belong to the B side of the bipartition. Factor
//! order fixes the computational basis, with the first factor most
//! significant (the same order as a Kronecker product).

use std::fmt;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Hermiticity tolerance applied when constructing a [`HermitianOperator`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Positivity and trace tolerance for [`DensityOperator`].
pub const STATE_TOL: f64 = 1e-9;
/// Default eigenvalue cutoff for numerical rank and supports.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Ordered tensor factors with a designated B side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemLayout {
    factors: Vec<(String, usize)>,
    b_side: Vec<String>,
}

impl SystemLayout {
    pub fn new<L, B>(factors: L, b_side: B) -> Result<Self>
    where
        L: IntoIterator,
        L::Item: Into<(String, usize)>,
        B: IntoIterator,
        B::Item: AsRef<str>,
    {
        let factors: Vec<(String, usize)> = factors.into_iter().map(Into::into).collect();
        for (i, (label, dim)) in factors.iter().enumerate() {
            if *dim == 0 {
                return Err(Error::InvalidDimension { label: label.clone(), dim: *dim });
            }
            if factors[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        let mut layout = SystemLayout { factors, b_side: Vec::new() };
        layout.set_b_side(b_side)?;
        Ok(layout)
    }

    /// The one-dimensional layout with no factors.
    pub fn scalar() -> Self {
        SystemLayout { factors: Vec::new(), b_side: Vec::new() }
    }

    /// Two factors `a` and `b`, with `b` on the B side.
    pub fn bipartite(a: &str, da: usize, b: &str, db: usize) -> Result<Self> {
        SystemLayout::new([(a.to_string(), da), (b.to_string(), db)], [b])
    }

    fn set_b_side<B>(&mut self, b_side: B) -> Result<()>
    where
        B: IntoIterator,
        B::Item: AsRef<str>,
    {
        let wanted: Vec<String> = b_side.into_iter().map(|s| s.as_ref().to_string()).collect();
        for label in &wanted {
            if self.position(label).is_none() {
                return Err(Error::UnknownLabel(label.clone()));
            }
        }
        // Keep b_side in factor order so equality does not depend on input order.
        self.b_side = self
            .factors
            .iter()
            .filter(|(l, _)| wanted.iter().any(|w| w == l))
            .map(|(l, _)| l.clone())
            .collect();
        Ok(())
    }

    pub fn with_b_side<B>(&self, b_side: B) -> Result<Self>
    where
        B: IntoIterator,
        B::Item: AsRef<str>,
    {
        let mut out = self.clone();
        out.set_b_side(b_side)?;
        Ok(out)
    }

    pub fn factors(&self) -> &[(String, usize)] {
        &self.factors
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.factors.iter().map(|(l, _)| l.as_str())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|(_, d)| *d).collect()
    }

    /// Total dimension (product of factor dimensions).
    pub fn dim(&self) -> usize {
        self.factors.iter().map(|(_, d)| *d).product()
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.factors.iter().position(|(l, _)| l == label)
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        self.position(label)
            .map(|i| self.factors[i].1)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn b_side(&self) -> &[String] {
        &self.b_side
    }

    pub fn a_side(&self) -> Vec<String> {
        self.labels().filter(|l| !self.is_b_side(l)).map(str::to_string).collect()
    }

    pub fn is_b_side(&self, label: &str) -> bool {
        self.b_side.iter().any(|l| l == label)
    }

    /// Same factors in the same order, ignoring the bipartition.
    pub fn same_factors(&self, other: &SystemLayout) -> bool {
        self.factors == other.factors
    }

    pub fn mask<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.factors.len()];
        for label in labels {
            let i = self
                .position(label.as_ref())
                .ok_or_else(|| Error::UnknownLabel(label.as_ref().to_string()))?;
            mask[i] = true;
        }
        Ok(mask)
    }

    /// Concatenation `self ⊗ other`; labels must be disjoint.
    pub fn concat(&self, other: &SystemLayout) -> Result<Self> {
        if let Some((l, _)) = other.factors.iter().find(|(l, _)| self.position(l).is_some()) {
            return Err(Error::LabelCollision(l.clone()));
        }
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        let b: Vec<String> = self.b_side.iter().chain(other.b_side.iter()).cloned().collect();
        SystemLayout::new(factors, b)
    }

    /// Layout with the listed factors removed.
    pub fn without<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let mask = self.mask(labels)?;
        let factors: Vec<(String, usize)> = self
            .factors
            .iter()
            .zip(&mask)
            .filter(|(_, m)| !**m)
            .map(|(f, _)| f.clone())
            .collect();
        let b: Vec<String> =
            self.b_side.iter().filter(|l| !labels.iter().any(|x| x.as_ref() == l.as_str())).cloned().collect();
        SystemLayout::new(factors, b)
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        let i = self.position(from).ok_or_else(|| Error::UnknownLabel(from.to_string()))?;
        if from != to && self.position(to).is_some() {
            return Err(Error::LabelCollision(to.to_string()));
        }
        let mut out = self.clone();
        out.factors[i].0 = to.to_string();
        for l in out.b_side.iter_mut() {
            if l == from {
                *l = to.to_string();
            }
        }
        Ok(out)
    }

    /// Layout with the factor `label` given a new dimension.
    pub fn resized(&self, label: &str, dim: usize) -> Result<Self> {
        let i = self.position(label).ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        if dim == 0 {
            return Err(Error::InvalidDimension { label: label.to_string(), dim });
        }
        let mut out = self.clone();
        out.factors[i].1 = dim;
        Ok(out)
    }

    /// Reordered layout; `order` must be a permutation of the labels.
    pub fn reordered<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        let perm = self.permutation_to(order)?;
        let factors: Vec<(String, usize)> = perm.iter().map(|&i| self.factors[i].clone()).collect();
        SystemLayout::new(factors, self.b_side.clone())
    }

    pub(crate) fn permutation_to<S: AsRef<str>>(&self, order: &[S]) -> Result<Vec<usize>> {
        if order.len() != self.factors.len() {
            return Err(Error::DimensionMismatch(format!(
                "reorder expects {} labels, got {}",
                self.factors.len(),
                order.len()
            )));
        }
        let mut perm = Vec::with_capacity(order.len());
        for l in order {
            let i = self.position(l.as_ref()).ok_or_else(|| Error::UnknownLabel(l.as_ref().to_string()))?;
            if perm.contains(&i) {
                return Err(Error::DuplicateLabel(l.as_ref().to_string()));
            }
            perm.push(i);
        }
        Ok(perm)
    }
}

impl fmt::Display for SystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|(l, d)| format!("{l}={d}")).collect();
        write!(f, "[{}] b_side={{{}}}", parts.join(","), self.b_side.join(","))
    }
}

/// Index arithmetic on raw matrices whose basis is a tensor product of
/// factors with dimensions `dims` (first factor most significant).
pub(crate) mod raw {
    use super::{CMatrix, C64};

    pub fn strides(dims: &[usize]) -> Vec<usize> {
        let mut s = vec![1; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * dims[i + 1];
        }
        s
    }

    /// For every basis index, the part of the index carried by masked factors.
    fn masked_parts(dims: &[usize], mask: &[bool]) -> Vec<usize> {
        let n: usize = dims.iter().product();
        let st = strides(dims);
        (0..n)
            .map(|i| {
                dims.iter()
                    .zip(&st)
                    .zip(mask)
                    .filter(|(_, m)| **m)
                    .map(|((d, s), _)| (i / s) % d * s)
                    .sum()
            })
            .collect()
    }

    pub fn partial_transpose(m: &CMatrix, dims: &[usize], mask: &[bool]) -> CMatrix {
        let n = m.nrows();
        let parts = masked_parts(dims, mask);
        let mut out = CMatrix::zeros(n, n);
        for c in 0..n {
            for r in 0..n {
                let r2 = r - parts[r] + parts[c];
                let c2 = c - parts[c] + parts[r];
                out[(r2, c2)] = m[(r, c)];
            }
        }
        out
    }

    /// Index of `i` in the sub-space spanned by the factors selected by `keep`.
    pub fn sub_index(dims: &[usize], keep: &[bool]) -> Vec<usize> {
        let n: usize = dims.iter().product();
        let st = strides(dims);
        (0..n)
            .map(|i| {
                let mut k = 0;
                for ((d, s), keep) in dims.iter().zip(&st).zip(keep) {
                    if *keep {
                        k = k * d + (i / s) % d;
                    }
                }
                k
            })
            .collect()
    }

    /// Trace over the factors where `traced` is true.
    pub fn partial_trace(m: &CMatrix, dims: &[usize], traced: &[bool]) -> CMatrix {
        let keep: Vec<bool> = traced.iter().map(|t| !t).collect();
        let kept_dim: usize = dims.iter().zip(&keep).filter(|(_, k)| **k).map(|(d, _)| d).product();
        let traced_dim: usize = dims.iter().zip(traced).filter(|(_, t)| **t).map(|(d, _)| d).product();
        let kept = sub_index(dims, &keep);
        let tr = sub_index(dims, traced);
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); traced_dim];
        for i in 0..m.nrows() {
            groups[tr[i]].push(i);
        }
        let mut out = CMatrix::zeros(kept_dim, kept_dim);
        for g in &groups {
            for &c in g {
                for &r in g {
                    out[(kept[r], kept[c])] += m[(r, c)];
                }
            }
        }
        out
    }

    /// Reorder factors: new factor `k` is old factor `perm[k]`.
    pub fn permute(m: &CMatrix, dims: &[usize], perm: &[usize]) -> CMatrix {
        let n = m.nrows();
        let old_st = strides(dims);
        let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
        let new_st = strides(&new_dims);
        let map: Vec<usize> = (0..n)
            .map(|i| perm.iter().enumerate().map(|(k, &p)| (i / old_st[p]) % dims[p] * new_st[k]).sum())
            .collect();
        let mut out = CMatrix::zeros(n, n);
        for c in 0..n {
            for r in 0..n {
                out[(map[r], map[c])] = m[(r, c)];
            }
        }
        out
    }

    pub fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn hermitian_part(m: &CMatrix) -> CMatrix {
        (m + m.adjoint()) * C64::new(0.5, 0.0)
    }
}

/// Hermitian matrix tagged with a [`SystemLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    layout: SystemLayout,
    mat: CMatrix,
}

impl HermitianOperator {
    /// Validates shape and Hermiticity; the stored matrix is the exact Hermitian part.
    pub fn new(layout: SystemLayout, mat: CMatrix) -> Result<Self> {
        let n = layout.dim();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "layout {} needs a {n}x{n} matrix, got {}x{}",
                layout,
                mat.nrows(),
                mat.ncols()
            )));
        }
        let dev = raw::max_abs(&(&mat - mat.adjoint()));
        if dev > HERMITIAN_TOL * raw::max_abs(&mat).max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(HermitianOperator { layout, mat: raw::hermitian_part(&mat) })
    }

    /// Hermitian part of `mat`, without the tolerance check. Used for values
    /// that are Hermitian by construction up to rounding.
    pub(crate) fn from_parts(layout: SystemLayout, mat: CMatrix) -> Self {
        debug_assert_eq!(mat.nrows(), layout.dim());
        HermitianOperator { layout, mat: raw::hermitian_part(&mat) }
    }

    pub fn identity(layout: SystemLayout) -> Self {
        let n = layout.dim();
        HermitianOperator { layout, mat: CMatrix::identity(n, n) }
    }

    pub fn zeros(layout: SystemLayout) -> Self {
        let n = layout.dim();
        HermitianOperator { layout, mat: CMatrix::zeros(n, n) }
    }

    pub fn from_real_diagonal(layout: SystemLayout, diag: &[f64]) -> Result<Self> {
        if diag.len() != layout.dim() {
            return Err(Error::DimensionMismatch(format!("{} diagonal entries for {}", diag.len(), layout)));
        }
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Ok(HermitianOperator { layout, mat: CMatrix::from_diagonal(&d) })
    }

    /// `|v⟩⟨v|` (not normalized).
    pub fn projector_onto(layout: SystemLayout, v: &DVector<C64>) -> Result<Self> {
        if v.len() != layout.dim() {
            return Err(Error::DimensionMismatch(format!("vector of length {} for {}", v.len(), layout)));
        }
        Ok(HermitianOperator { layout, mat: v * v.adjoint() })
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.mat.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Eigendecomposition `(values, vectors)` with eigenvectors as columns.
    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        let e = self.mat.clone().symmetric_eigen();
        (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    /// Spectral calculus: `f` applied to each eigenvalue.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let (vals, vecs) = self.eigh();
        let d = DVector::from_iterator(vals.len(), vals.iter().map(|&l| C64::new(f(l), 0.0)));
        let mat = &vecs * CMatrix::from_diagonal(&d) * vecs.adjoint();
        HermitianOperator::from_parts(self.layout.clone(), mat)
    }

    /// Real part of `Tr(self · other)` (Hilbert–Schmidt inner product).
    pub fn inner(&self, other: &HermitianOperator) -> f64 {
        self.mat.iter().zip(other.mat.transpose().iter()).map(|(a, b)| (a * b).re).sum()
    }

    pub fn scale(&self, c: f64) -> HermitianOperator {
        HermitianOperator { layout: self.layout.clone(), mat: &self.mat * C64::new(c, 0.0) }
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        self.check_same(other)?;
        Ok(HermitianOperator { layout: self.layout.clone(), mat: &self.mat + &other.mat })
    }

    pub fn sub(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        self.check_same(other)?;
        Ok(HermitianOperator { layout: self.layout.clone(), mat: &self.mat - &other.mat })
    }

    fn check_same(&self, other: &HermitianOperator) -> Result<()> {
        if !self.layout.same_factors(&other.layout) {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.layout, other.layout)));
        }
        Ok(())
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &HermitianOperator) -> f64 {
        if self.mat.shape() != other.mat.shape() {
            return f64::INFINITY;
        }
        raw::max_abs(&(&self.mat - &other.mat))
    }

    pub fn with_layout(&self, layout: SystemLayout) -> Result<HermitianOperator> {
        HermitianOperator::new(layout, self.mat.clone())
    }

    pub fn with_b_side<B>(&self, b_side: B) -> Result<HermitianOperator>
    where
        B: IntoIterator,
        B::Item: AsRef<str>,
    {
        Ok(HermitianOperator { layout: self.layout.with_b_side(b_side)?, mat: self.mat.clone() })
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<HermitianOperator> {
        Ok(HermitianOperator { layout: self.layout.relabel(from, to)?, mat: self.mat.clone() })
    }

    /// Kronecker product with concatenated layout.
    pub fn tensor(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(HermitianOperator { layout, mat: self.mat.kronecker(&other.mat) })
    }

    pub fn partial_trace<S: AsRef<str>>(&self, over: &[S]) -> Result<HermitianOperator> {
        let mask = self.layout.mask(over)?;
        let layout = self.layout.without(over)?;
        let mat = raw::partial_trace(&self.mat, &self.layout.dims(), &mask);
        Ok(HermitianOperator::from_parts(layout, mat))
    }

    /// Trace over everything except `keep`.
    pub fn marginal<S: AsRef<str>>(&self, keep: &[S]) -> Result<HermitianOperator> {
        self.layout.mask(keep)?;
        let over: Vec<String> =
            self.layout.labels().filter(|l| !keep.iter().any(|k| k.as_ref() == *l)).map(str::to_string).collect();
        self.partial_trace(&over)
    }

    pub fn partial_transpose<S: AsRef<str>>(&self, on: &[S]) -> Result<HermitianOperator> {
        let mask = self.layout.mask(on)?;
        let mat = raw::partial_transpose(&self.mat, &self.layout.dims(), &mask);
        Ok(HermitianOperator { layout: self.layout.clone(), mat })
    }

    /// Partial transpose on the layout's B side.
    pub fn pt_b(&self) -> HermitianOperator {
        let mask: Vec<bool> = self.layout.labels().map(|l| self.layout.is_b_side(l)).collect();
        let mat = raw::partial_transpose(&self.mat, &self.layout.dims(), &mask);
        HermitianOperator { layout: self.layout.clone(), mat }
    }

    /// Reorder tensor factors to `order`.
    pub fn permute<S: AsRef<str>>(&self, order: &[S]) -> Result<HermitianOperator> {
        let perm = self.layout.permutation_to(order)?;
        let layout = self.layout.reordered(order)?;
        let mat = raw::permute(&self.mat, &self.layout.dims(), &perm);
        Ok(HermitianOperator { layout, mat })
    }

    /// `‖X‖₁`, the sum of absolute eigenvalues.
    pub fn trace_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|l| l.abs()).sum()
    }

    /// `‖X‖_∞`, the largest absolute eigenvalue.
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0, |m, l| m.max(l.abs()))
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }
}

/// Kronecker product; see [`HermitianOperator::tensor`].
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    a.tensor(b)
}

pub fn partial_trace<S: AsRef<str>>(x: &HermitianOperator, over: &[S]) -> Result<HermitianOperator> {
    x.partial_trace(over)
}

pub fn partial_transpose<S: AsRef<str>>(x: &HermitianOperator, on: &[S]) -> Result<HermitianOperator> {
    x.partial_transpose(on)
}

pub fn trace_norm(x: &HermitianOperator) -> f64 {
    x.trace_norm()
}

pub fn operator_norm(x: &HermitianOperator) -> f64 {
    x.operator_norm()
}

/// Positive semi-definite, unit-trace [`HermitianOperator`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator(HermitianOperator);

impl DensityOperator {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        DensityOperator::with_tolerance(op, STATE_TOL)
    }

    /// As [`DensityOperator::new`] with a caller-chosen tolerance.
    pub fn with_tolerance(op: HermitianOperator, tol: f64) -> Result<Self> {
        let min_eig = op.min_eigenvalue();
        let trace = op.trace();
        if min_eig < -tol || (trace - 1.0).abs() > tol {
            return Err(Error::NotDensity { min_eig, trace });
        }
        Ok(DensityOperator(op))
    }

    /// Normalizes a PSD operator to unit trace.
    pub fn normalized(op: HermitianOperator) -> Result<Self> {
        let t = op.trace();
        if t <= 0.0 {
            return Err(Error::NotDensity { min_eig: op.min_eigenvalue(), trace: t });
        }
        DensityOperator::new(op.scale(1.0 / t))
    }

    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
    pub fn pure(layout: SystemLayout, psi: &DVector<C64>) -> Result<Self> {
        DensityOperator::normalized(HermitianOperator::projector_onto(layout, psi)?)
    }

    /// `I/d`.
    pub fn maximally_mixed(layout: SystemLayout) -> Self {
        let d = layout.dim() as f64;
        DensityOperator(HermitianOperator::identity(layout).scale(1.0 / d))
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn into_op(self) -> HermitianOperator {
        self.0
    }

    pub fn tensor(&self, other: &DensityOperator) -> Result<DensityOperator> {
        Ok(DensityOperator(self.0.tensor(&other.0)?))
    }

    pub fn partial_trace<S: AsRef<str>>(&self, over: &[S]) -> Result<DensityOperator> {
        Ok(DensityOperator(self.0.partial_trace(over)?))
    }

    pub fn marginal<S: AsRef<str>>(&self, keep: &[S]) -> Result<DensityOperator> {
        Ok(DensityOperator(self.0.marginal(keep)?))
    }

    pub fn permute<S: AsRef<str>>(&self, order: &[S]) -> Result<DensityOperator> {
        Ok(DensityOperator(self.0.permute(order)?))
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<DensityOperator> {
        Ok(DensityOperator(self.0.relabel(from, to)?))
    }

    pub fn with_b_side<B>(&self, b_side: B) -> Result<DensityOperator>
    where
        B: IntoIterator,
        B::Item: AsRef<str>,
    {
        Ok(DensityOperator(self.0.with_b_side(b_side)?))
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.0.inner(&self.0)
    }
}

impl Deref for DensityOperator {
    type Target = HermitianOperator;

    fn deref(&self) -> &HermitianOperator {
        &self.0
    }
}

impl AsRef<HermitianOperator> for DensityOperator {
    fn as_ref(&self) -> &HermitianOperator {
        &self.0
    }
}

/// Number of eigenvalues above `rank_tol`.
pub fn numerical_rank(x: &HermitianOperator, rank_tol: f64) -> usize {
    x.eigenvalues().iter().filter(|&&l| l > rank_tol).count()
}

/// Projector onto the eigenspaces of `rho` with eigenvalue above `rank_tol`.
pub fn support_projector(rho: &HermitianOperator, rank_tol: f64) -> HermitianOperator {
    rho.map_spectrum(|l| if l > rank_tol { 1.0 } else { 0.0 })
}

/// `|Υ⟩ = Σᵢ |i⟩|i⟩`, of squared norm `d`.
pub fn unnormalized_max_ent(d: usize) -> DVector<C64> {
    let mut v = DVector::zeros(d * d);
    for i in 0..d {
        v[i * d + i] = C64::new(1.0, 0.0);
    }
    v
}

/// `Φ_d = |Υ⟩⟨Υ|/d` on factors `A`, `B` with `B` on the B side.
pub fn maximally_entangled(d: usize) -> DensityOperator {
    maximally_entangled_on("A", "B", d).expect("distinct labels")
}

pub fn maximally_entangled_on(a: &str, b: &str, d: usize) -> Result<DensityOperator> {
    let layout = SystemLayout::bipartite(a, d, b, d)?;
    DensityOperator::pure(layout, &unnormalized_max_ent(d))
}

/// Computational basis state `|i⟩⟨i|` on a single factor.
pub fn basis_state(label: &str, d: usize, i: usize) -> Result<DensityOperator> {
    if i >= d {
        return Err(Error::InvalidArgument(format!("basis index {i} out of range for dimension {d}")));
    }
    let layout = SystemLayout::new([(label.to_string(), d)], Vec::<String>::new())?;
    let mut diag = vec![0.0; d];
    diag[i] = 1.0;
    DensityOperator::new(HermitianOperator::from_real_diagonal(layout, &diag)?)
}
