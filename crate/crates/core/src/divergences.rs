//! Entropies and divergences, all in bits.
//!
//! Matrix functions go through Hermitian eigendecompositions. Supports are
//! compared with an absolute eigenvalue cutoff of [`DEFAULT_RANK_TOL`]; no
//! regularisation is applied to singular `σ`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::{CMatrix, DensityOperator, HermitianOperator, C64, DEFAULT_RANK_TOL};

/// A divergence value in bits, possibly `+∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DivergenceValue {
    pub value: f64,
    pub support_violation: bool,
}

impl DivergenceValue {
    pub fn finite(value: f64) -> Self {
        DivergenceValue { value, support_violation: false }
    }

    pub fn infinite() -> Self {
        DivergenceValue { value: f64::INFINITY, support_violation: true }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

impl fmt::Display for DivergenceValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.value.is_infinite() {
            write!(f, "+inf")
        } else {
            write!(f, "{:.6}", self.value)
        }
    }
}

fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// `S(ρ) = −Tr ρ log₂ ρ`.
pub fn entropy(rho: &DensityOperator) -> f64 {
    -rho.eigenvalues().into_iter().map(xlog2x).sum::<f64>()
}

/// `S(AB) − S(cond)`, i.e. `H(A|B)` when `cond = B`.
pub fn conditional_entropy(rho: &DensityOperator, cond: &str) -> Result<f64> {
    Ok(entropy(rho) - entropy(&rho.marginal(&[cond])?))
}

/// `I(A⟩B) = S(B) − S(AB)` with `B` the layout's B side.
pub fn coherent_information(rho: &DensityOperator) -> Result<f64> {
    let b = rho.layout().b_side().to_vec();
    if b.is_empty() {
        return Err(Error::InvalidArgument("coherent information needs a nonempty B side".into()));
    }
    Ok(entropy(&rho.marginal(&b)?) - entropy(rho))
}

/// Eigendecomposition of `σ` with the weight of `ρ` outside its support.
struct Support {
    vals: Vec<f64>,
    vecs: CMatrix,
    outside: f64,
}

fn support_of(rho: &HermitianOperator, sigma: &HermitianOperator) -> Result<Support> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!("ρ is {}-dimensional, σ is {}", rho.dim(), sigma.dim())));
    }
    let (vals, vecs) = sigma.eigh();
    let mut outside = 0.0;
    for (k, &l) in vals.iter().enumerate() {
        if l <= DEFAULT_RANK_TOL {
            let v = vecs.column(k);
            outside += (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
        }
    }
    Ok(Support { vals, vecs, outside })
}

impl Support {
    fn violated(&self) -> bool {
        self.outside > DEFAULT_RANK_TOL
    }

    /// `f(σ)` on the support, zero elsewhere.
    fn function(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let d = nalgebra::DVector::from_iterator(
            self.vals.len(),
            self.vals.iter().map(|&l| C64::new(if l > DEFAULT_RANK_TOL { f(l) } else { 0.0 }, 0.0)),
        );
        &self.vecs * CMatrix::from_diagonal(&d) * self.vecs.adjoint()
    }
}

/// Umegaki relative entropy `Tr ρ (log₂ ρ − log₂ σ)`.
pub fn relative_entropy(rho: &DensityOperator, sigma: &HermitianOperator) -> Result<DivergenceValue> {
    let sup = support_of(rho, sigma)?;
    if sup.violated() {
        return Ok(DivergenceValue::infinite());
    }
    let mut cross = 0.0;
    for (k, &l) in sup.vals.iter().enumerate() {
        if l > DEFAULT_RANK_TOL {
            let v = sup.vecs.column(k);
            cross += (v.adjoint() * rho.matrix() * v)[(0, 0)].re * l.log2();
        }
    }
    Ok(DivergenceValue::finite(-entropy(rho) - cross))
}

/// `log₂ ‖σ^{−1/2} ρ σ^{−1/2}‖_∞`, the least `λ` with `ρ ⪯ 2^λ σ`.
pub fn max_relative_entropy(rho: &DensityOperator, sigma: &HermitianOperator) -> Result<DivergenceValue> {
    let sup = support_of(rho, sigma)?;
    if sup.violated() {
        return Ok(DivergenceValue::infinite());
    }
    let s = sup.function(|l| l.powf(-0.5));
    let m = HermitianOperator::from_parts(rho.layout().clone(), crate::operators::raw::hermitian_part(&(&s * rho.matrix() * &s)));
    Ok(DivergenceValue::finite(m.max_eigenvalue().log2()))
}

/// Sandwiched Rényi divergence
/// `(α−1)⁻¹ log₂ Tr (σ^{(1−α)/2α} ρ σ^{(1−α)/2α})^α` for `α ∈ (0,1)∪(1,∞)`.
pub fn sandwiched_renyi(rho: &DensityOperator, sigma: &HermitianOperator, alpha: f64) -> Result<DivergenceValue> {
    if !(alpha > 0.0 && alpha.is_finite()) || alpha == 1.0 {
        return Err(Error::InvalidArgument(format!(
            "sandwiched Rényi order must lie in (0,1)∪(1,∞), got {alpha}; use relative_entropy at 1"
        )));
    }
    let sup = support_of(rho, sigma)?;
    if alpha > 1.0 && sup.violated() {
        return Ok(DivergenceValue::infinite());
    }
    let gamma = (1.0 - alpha) / (2.0 * alpha);
    let s = sup.function(|l| l.powf(gamma));
    let m = crate::operators::raw::hermitian_part(&(&s * rho.matrix() * &s));
    let mu: Vec<f64> = HermitianOperator::from_parts(rho.layout().clone(), m)
        .eigenvalues()
        .into_iter()
        .filter(|&x| x > 0.0)
        .collect();
    let Some(&top) = mu.last() else {
        // Orthogonal supports with α < 1.
        return Ok(DivergenceValue::finite(f64::INFINITY));
    };
    // log₂ Σ μ^α evaluated stably for large α.
    let log_sum = alpha * top.log2() + mu.iter().map(|&x| (x / top).powf(alpha)).sum::<f64>().log2();
    Ok(DivergenceValue::finite(log_sum / (alpha - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::random_local_channel;
    use crate::operators::{basis_state, maximally_entangled, SystemLayout};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mixed(d: usize) -> HermitianOperator {
        HermitianOperator::identity(SystemLayout::bipartite("A", d, "B", d).unwrap()).scale(1.0 / (d * d) as f64)
    }

    fn random_full_rank(layout: SystemLayout, rng: &mut ChaCha8Rng) -> DensityOperator {
        let n = layout.dim();
        let g = crate::channels::random_complex(n, n, rng);
        let m = &g * g.adjoint() + CMatrix::identity(n, n) * C64::new(0.05, 0.0);
        DensityOperator::normalized(HermitianOperator::new(layout, m).unwrap()).unwrap()
    }

    fn pair(seed: u64) -> (DensityOperator, DensityOperator) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = SystemLayout::bipartite("A", 2, "B", 2).unwrap();
        (random_full_rank(l.clone(), &mut rng), random_full_rank(l, &mut rng))
    }

    /// `Σ_k X^k`-free oracle: integer matrix powers by repeated products.
    fn matrix_pow_trace(m: &CMatrix, k: u32) -> f64 {
        let mut p = CMatrix::identity(m.nrows(), m.ncols());
        for _ in 0..k {
            p = &p * m;
        }
        p.trace().re
    }

    #[test]
    fn entropies() {
        let pi = DensityOperator::maximally_mixed(SystemLayout::bipartite("A", 3, "B", 2).unwrap());
        assert_relative_eq!(entropy(&pi), 6f64.log2(), epsilon = 1e-12);
        let phi = maximally_entangled(2);
        assert!(entropy(&phi).abs() < 1e-12);
        assert_relative_eq!(coherent_information(&phi).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(conditional_entropy(&phi, "B").unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn relative_entropy_values() {
        let phi = maximally_entangled(2);
        // Pure ρ and σ = I/4: Tr ρ log ρ = 0 and −Tr ρ log σ = log₂ 4.
        assert_relative_eq!(relative_entropy(&phi, &mixed(2)).unwrap().value, 2.0, epsilon = 1e-12);
        assert!(relative_entropy(&phi, phi.op()).unwrap().value.abs() < 1e-10);
        let z0 = basis_state("A", 2, 0).unwrap();
        let z1 = basis_state("A", 2, 1).unwrap();
        let d = relative_entropy(&z0, z1.op()).unwrap();
        assert!(d.support_violation && d.value.is_infinite());
    }

    #[test]
    fn max_relative_entropy_values() {
        let phi = maximally_entangled(2);
        assert_relative_eq!(max_relative_entropy(&phi, &mixed(2)).unwrap().value, 2.0, epsilon = 1e-12);
        let (rho, _) = pair(1);
        assert!(max_relative_entropy(&rho, rho.op()).unwrap().value.abs() < 1e-10);
        let pi = DensityOperator::maximally_mixed(SystemLayout::new([("A".to_string(), 2)], Vec::<String>::new()).unwrap());
        let z0 = basis_state("A", 2, 0).unwrap();
        assert!(max_relative_entropy(&pi, z0.op()).unwrap().support_violation);
        // ρ ⪯ 2^λ σ is tight at the returned λ.
        let (rho, sigma) = pair(2);
        let lam = max_relative_entropy(&rho, sigma.op()).unwrap().value;
        let gap = sigma.scale(2f64.powf(lam)).sub(rho.op()).unwrap().min_eigenvalue();
        assert!(gap > -1e-10 && gap < 1e-6, "{gap}");
    }

    #[test]
    fn sandwiched_matches_matrix_power_oracle() {
        let phi = maximally_entangled(2);
        assert_relative_eq!(sandwiched_renyi(&phi, &mixed(2), 2.0).unwrap().value, 2.0, epsilon = 1e-12);
        // α = 2 on a random pair: σ^{-1/4} by eigendecomposition, square by multiplication.
        let (rho, sigma) = pair(3);
        let s = sigma.map_spectrum(|l| l.powf(-0.25));
        let m = s.matrix() * rho.matrix() * s.matrix();
        let oracle = matrix_pow_trace(&m, 2).log2();
        assert_relative_eq!(sandwiched_renyi(&rho, sigma.op(), 2.0).unwrap().value, oracle, epsilon = 1e-10);
        // α = 1/2: the fidelity form −2 log₂ ‖√ρ √σ‖₁.
        let sr = rho.map_spectrum(f64::sqrt);
        let ss = sigma.map_spectrum(f64::sqrt);
        let f = (sr.matrix() * ss.matrix()).singular_values().sum();
        assert_relative_eq!(sandwiched_renyi(&rho, sigma.op(), 0.5).unwrap().value, -2.0 * f.log2(), epsilon = 1e-10);
        assert!(sandwiched_renyi(&rho, sigma.op(), 1.0).is_err());
        for alpha in [0.3, 0.5, 2.0, 7.0] {
            assert!(sandwiched_renyi(&rho, rho.op(), alpha).unwrap().value.abs() < 1e-9);
        }
        let z0 = basis_state("A", 2, 0).unwrap();
        let z1 = basis_state("A", 2, 1).unwrap();
        assert!(sandwiched_renyi(&z0, z1.op(), 2.0).unwrap().support_violation);
        let v = sandwiched_renyi(&z0, z1.op(), 0.5).unwrap();
        assert!(!v.support_violation && v.value.is_infinite());
    }

    #[test]
    fn limits_in_alpha() {
        for seed in 10..20 {
            let (rho, sigma) = pair(seed);
            let dmax = max_relative_entropy(&rho, sigma.op()).unwrap().value;
            let d = relative_entropy(&rho, sigma.op()).unwrap().value;
            let big = sandwiched_renyi(&rho, sigma.op(), 2f64.powi(14)).unwrap().value;
            assert!(dmax - big < 1e-3 && big <= dmax + 1e-9, "{big} vs {dmax}");
            for a in [1.0 - 1e-4, 1.0 + 1e-4] {
                assert!((sandwiched_renyi(&rho, sigma.op(), a).unwrap().value - d).abs() < 1e-2);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn monotone_in_alpha(seed in any::<u64>()) {
            let (rho, sigma) = pair(seed);
            let mut prev = f64::NEG_INFINITY;
            for a in [0.5, 0.9, 1.5, 2.0, 10.0, 64.0] {
                let v = sandwiched_renyi(&rho, sigma.op(), a).unwrap().value;
                prop_assert!(v >= prev - 1e-9);
                prev = v;
            }
            let d = relative_entropy(&rho, sigma.op()).unwrap().value;
            prop_assert!(sandwiched_renyi(&rho, sigma.op(), 0.9).unwrap().value <= d + 1e-9);
            prop_assert!(d <= sandwiched_renyi(&rho, sigma.op(), 1.1).unwrap().value + 1e-9);
            prop_assert!(prev <= max_relative_entropy(&rho, sigma.op()).unwrap().value + 1e-6);
        }

        #[test]
        fn data_processing(seed in any::<u64>()) {
            let (rho, sigma) = pair(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let ch = random_local_channel(2, 3, 2, &mut rng);
            let r2 = ch.apply(&rho, "B").unwrap();
            let s2 = ch.apply(&sigma, "B").unwrap();
            for a in [0.5, 2.0, 10.0] {
                let before = sandwiched_renyi(&rho, sigma.op(), a).unwrap().value;
                let after = sandwiched_renyi(&r2, s2.op(), a).unwrap().value;
                prop_assert!(before - after >= -1e-7, "α={} {} < {}", a, before, after);
            }
            prop_assert!(relative_entropy(&rho, sigma.op()).unwrap().value
                >= relative_entropy(&r2, s2.op()).unwrap().value - 1e-7);
            prop_assert!(max_relative_entropy(&rho, sigma.op()).unwrap().value
                >= max_relative_entropy(&r2, s2.op()).unwrap().value - 1e-7);
        }

        #[test]
        fn unitary_and_tensor_invariance(seed in any::<u64>()) {
            let (rho, sigma) = pair(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
            let u = crate::channels::random_complex(4, 4, &mut rng).qr().q();
            let conj = |x: &DensityOperator| {
                DensityOperator::new(HermitianOperator::new(x.layout().clone(), &u * x.matrix() * u.adjoint()).unwrap()).unwrap()
            };
            let (ur, us) = (conj(&rho), conj(&sigma));
            let l2 = SystemLayout::bipartite("C", 2, "D", 2).unwrap();
            let tau = random_full_rank(l2.clone(), &mut rng);
            let omega = random_full_rank(l2, &mut rng);
            let rt = rho.tensor(&tau).unwrap();
            let st = sigma.tensor(&omega).unwrap();
            type Div = fn(&DensityOperator, &HermitianOperator) -> Result<DivergenceValue>;
            let renyi2: Div = |r, s| sandwiched_renyi(r, s, 2.0);
            let renyi_half: Div = |r, s| sandwiched_renyi(r, s, 0.5);
            let divs: [Div; 4] = [relative_entropy, max_relative_entropy, renyi2, renyi_half];
            for div in divs {
                let base = div(&rho, sigma.op()).unwrap().value;
                prop_assert!((div(&ur, us.op()).unwrap().value - base).abs() < 1e-8);
                let extra = div(&tau, omega.op()).unwrap().value;
                prop_assert!((div(&rt, st.op()).unwrap().value - base - extra).abs() < 1e-8);
            }
        }
    }
}
