//! Random states, unitaries and channels for the property suites.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channels::random_complex;
use crate::error::{Error, Result};
use crate::operators::{raw, CMatrix, DensityOperator, HermitianOperator, SystemLayout, C64};

/// `GG†/Tr GG†` for a Gaussian `dim × rank` matrix `G`.
pub fn random_state(layout: &SystemLayout, rank: usize, seed: u64) -> Result<DensityOperator> {
    random_state_with(layout, rank, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_pure(layout: &SystemLayout, seed: u64) -> Result<DensityOperator> {
    random_state(layout, 1, seed)
}

/// Convex mixture of products `ρ_A ⊗ ρ_B` across the A/B cut of `layout`;
/// separable, hence PPT.
pub fn random_ppt_state(layout: &SystemLayout, seed: u64) -> Result<DensityOperator> {
    random_ppt_state_with(layout, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// A PPT entangled state on `A = 3, B = 3`.
///
/// Starts from the bound entangled state built on the Tiles unextendible
/// product basis, rotates it by random local unitaries and mixes in a little
/// white noise and a random product state. Samples are kept only if they
/// remain PPT and the realignment criterion still certifies entanglement.
pub fn random_ppt_entangled_3x3(seed: u64) -> DensityOperator {
    random_ppt_entangled_3x3_with(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Trace norm of the realigned matrix `R_{(ij),(kl)} = ρ_{(ik),(jl)}` of a
/// state on two factors. A value above one certifies entanglement.
pub fn realignment_norm(rho: &HermitianOperator) -> Result<f64> {
    let dims = rho.layout().dims();
    let [da, db] = dims[..] else {
        return Err(Error::DimensionMismatch(format!("realignment needs two factors, got {}", rho.layout())));
    };
    let m = rho.matrix();
    let r = CMatrix::from_fn(da * da, db * db, |row, col| {
        let (i, j) = (row / da, row % da);
        let (k, l) = (col / db, col % db);
        m[(i * db + k, j * db + l)]
    });
    Ok(r.singular_values().sum())
}

pub(crate) fn random_state_with(layout: &SystemLayout, rank: usize, rng: &mut impl Rng) -> Result<DensityOperator> {
    let dim = layout.dim();
    if rank == 0 || rank > dim {
        return Err(Error::InvalidArgument(format!("rank {rank} outside 1..={dim}")));
    }
    let g = random_complex(dim, rank, rng);
    DensityOperator::normalized(HermitianOperator::from_parts(layout.clone(), &g * g.adjoint()))
}

/// Gaussian state of uniformly random rank.
pub(crate) fn random_mixed_with(layout: &SystemLayout, rng: &mut impl Rng) -> DensityOperator {
    let rank = rng.random_range(1..=layout.dim());
    random_state_with(layout, rank, rng).expect("rank within range")
}

pub(crate) fn random_ppt_state_with(layout: &SystemLayout, rng: &mut impl Rng) -> Result<DensityOperator> {
    let side = |b: bool| -> Vec<(String, usize)> {
        layout.factors().iter().filter(|(l, _)| layout.is_b_side(l) == b).cloned().collect()
    };
    let alice = SystemLayout::new(side(false), Vec::<String>::new())?;
    let bob_factors = side(true);
    let bob_labels: Vec<String> = bob_factors.iter().map(|(l, _)| l.clone()).collect();
    let bob = SystemLayout::new(bob_factors, bob_labels)?;
    let order: Vec<&str> = layout.labels().collect();

    let terms = rng.random_range(1..=4);
    let weights: Vec<f64> = (0..terms).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = HermitianOperator::zeros(layout.clone());
    for w in weights {
        let product = random_mixed_with(&alice, rng).tensor(&random_mixed_with(&bob, rng))?.permute(&order)?;
        acc = acc.add(&product.scale(w / total))?;
    }
    DensityOperator::with_tolerance(acc, 1e-9)
}

/// Haar unitary from the QR decomposition of a Gaussian matrix, with the
/// phases of `R`'s diagonal absorbed.
pub(crate) fn random_unitary(d: usize, rng: &mut impl Rng) -> CMatrix {
    let (mut q, r) = random_complex(d, d, rng).qr().unpack();
    for j in 0..d {
        let rj = r[(j, j)];
        let phase = if rj.norm() > 0.0 { rj / rj.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Random Hermitian operator `G + G†`.
pub(crate) fn random_hermitian(layout: &SystemLayout, rng: &mut impl Rng) -> HermitianOperator {
    let g = random_complex(layout.dim(), layout.dim(), rng);
    HermitianOperator::from_parts(layout.clone(), raw::hermitian_part(&(&g + g.adjoint())))
}

fn tiles_state() -> HermitianOperator {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let ket = |v: [f64; 3]| DVector::from_iterator(3, v.iter().map(|&x| C64::new(x, 0.0)));
    let zero = ket([1.0, 0.0, 0.0]);
    let two = ket([0.0, 0.0, 1.0]);
    let zero_minus_one = ket([s, -s, 0.0]);
    let one_minus_two = ket([0.0, s, -s]);
    let plus = ket([1.0, 1.0, 1.0]) / C64::new(3f64.sqrt(), 0.0);
    let basis = [
        zero.kronecker(&zero_minus_one),
        zero_minus_one.kronecker(&two),
        two.kronecker(&one_minus_two),
        one_minus_two.kronecker(&zero),
        plus.kronecker(&plus),
    ];
    let mut m = CMatrix::identity(9, 9);
    for v in &basis {
        m -= v * v.adjoint();
    }
    let layout = SystemLayout::bipartite("A", 3, "B", 3).expect("distinct labels");
    HermitianOperator::from_parts(layout, m / C64::new(4.0, 0.0))
}

pub(crate) fn random_ppt_entangled_3x3_with(rng: &mut impl Rng) -> DensityOperator {
    let tiles = tiles_state();
    let layout = tiles.layout().clone();
    let single = |l: &str| SystemLayout::new([(l.to_string(), 3)], Vec::<String>::new()).expect("label");
    loop {
        let u = random_unitary(3, rng).kronecker(&random_unitary(3, rng));
        let rotated = HermitianOperator::from_parts(layout.clone(), raw::hermitian_part(&(&u * tiles.matrix() * u.adjoint())));
        let white = rng.random_range(0.0..0.04);
        let product_weight = rng.random_range(0.0..0.04);
        let product = random_mixed_with(&single("A"), rng).tensor(&random_mixed_with(&single("B"), rng)).expect("labels");
        let product = product.with_b_side(["B"]).expect("label");
        let noise = HermitianOperator::identity(layout.clone()).scale(white / 9.0);
        let mixed = rotated
            .scale(1.0 - white - product_weight)
            .add(&noise)
            .and_then(|m| m.add(&product.scale(product_weight)))
            .expect("same layout");
        let ppt = mixed.pt_b().min_eigenvalue() >= -1e-12;
        if ppt && realignment_norm(&mixed).expect("two factors") > 1.0 + 1e-6 {
            return DensityOperator::with_tolerance(mixed, 1e-9).expect("convex mixture of states");
        }
    }
}
