//! Entanglement measures of bipartite channels, evaluated on Choi operators.
//!
//! Throughout, `T` is the partial transpose on `{B, S_B}` and `Tr_AB` leaves
//! an operator on the reference systems `(S_A, S_B)`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channels::{BipartiteChannel, PointToPointChannel, A, B, R, S_A, S_B};
use crate::error::{Error, Result};
use crate::operators::{DensityOperator, HermitianOperator, SystemLayout, C64};
use crate::sdp::{Cone, Expr, SdpProblem};
use crate::state_measures::{
    kappa_entanglement_state, max_rains_state, min_rains_state, solve_optimal, CrossCheck, MeasureOptions,
    MeasureReport,
};

fn reference_layout(n: &BipartiteChannel) -> SystemLayout {
    SystemLayout::new([(S_A.to_string(), n.in_dims().0), (S_B.to_string(), n.in_dims().1)], [S_B]).expect("labels")
}

fn output_layout(n: &BipartiteChannel) -> SystemLayout {
    SystemLayout::new([(A.to_string(), n.out_dims().0), (B.to_string(), n.out_dims().1)], [B]).expect("labels")
}

/// `ρ_{S_A S_B} ⊗ I_{AB}` in Choi order.
fn lift_reference(rho: Expr, n: &BipartiteChannel) -> Result<Expr> {
    rho.tensor_identity(&output_layout(n))?.permute(&[S_A, A, B, S_B])
}

/// Adds `V, Y ⪰ 0` with `T(V − Y)` related to `rhs` and returns
/// `‖Tr_AB(V + Y)‖_∞` as an epigraph variable.
fn rains_core(p: &mut SdpProblem, n: &BipartiteChannel, rhs: Expr, equality: bool) -> Result<Expr> {
    let layout = n.choi().layout().clone();
    let v = p.var("V", layout.clone(), Cone::HermitianPsd)?;
    let y = p.var("Y", layout, Cone::HermitianPsd)?;
    let t = v.clone().sub(y.clone())?.pt_b()?;
    if equality {
        p.equal("pt", t, rhs)?;
    } else {
        p.geq("pt", t, rhs)?;
    }
    p.inf_norm_epigraph("t", v.add(y)?.ptrace(&[A, B])?, true)
}

/// `sup Tr[T(J) R] : ρ ⪰ 0, Tr ρ ≤ 1, −ρ ⊗ I ⪯ R ⪯ ρ ⊗ I`, or with `R`
/// replaced by `T(X)`, `X ⪰ 0`, `Tr ρ = 1` for the Rains variant.
fn sup_form(n: &BipartiteChannel, rains: bool, opts: &MeasureOptions) -> Result<crate::sdp::SdpSolution> {
    solve_optimal(&sup_problem(n, rains)?, &opts.solver)
}

fn sup_problem(n: &BipartiteChannel, rains: bool) -> Result<SdpProblem> {
    let layout = n.choi().layout().clone();
    let mut p = SdpProblem::new();
    let rho = p.var("rho", reference_layout(n), Cone::HermitianPsd)?;
    let (inner, objective) = if rains {
        let x = p.var("X", layout, Cone::HermitianPsd)?;
        (x.clone().pt_b()?, x.trace_with(n.choi())?)
    } else {
        let r = p.var("R", layout, Cone::HermitianFree)?;
        (r.clone(), r.trace_with(&n.choi().pt_b())?)
    };
    if rains {
        p.equal("normalization", rho.clone().trace()?, Expr::scalar(1.0))?;
    } else {
        p.leq("normalization", rho.clone().trace()?, Expr::scalar(1.0))?;
    }
    let lifted = lift_reference(rho, n)?;
    p.geq("upper", lifted.clone(), inner.clone())?;
    p.psd("lower", lifted.add(inner)?)?;
    p.maximize(objective)?;
    Ok(p)
}

/// `E_N(N) = log₂ ‖T_B ∘ N ∘ T_B′‖_◇`.
///
/// The value is from `inf ‖Tr_AB[V+Y]‖_∞ : V, Y ⪰ 0, T(V−Y) = J`; the
/// supremum form is solved as a cross-check and reported as the primal value.
pub fn log_negativity_channel(n: &BipartiteChannel, opts: &MeasureOptions) -> Result<MeasureReport> {
    let mut p = SdpProblem::new();
    let t = rains_core(&mut p, n, Expr::constant(n.choi()), true)?;
    p.minimize(t)?;
    let inf = solve_optimal(&p, &opts.solver)?;
    let sup = sup_form(n, false, opts)?;
    let mut report = MeasureReport::from_solution("log-negativity-channel", inf.primal_value.log2(), &inf);
    report.primal_value = sup.primal_value;
    report.dual_value = inf.primal_value;
    report.gap = (sup.primal_value - inf.primal_value).abs();
    report.iterations += sup.iterations;
    report.witness.extend(sup.variables);
    Ok(report)
}

/// `R_max(N) = log₂ Γ(N)`, `Γ = inf ‖Tr_AB[V+Y]‖_∞ : V, Y ⪰ 0, T(V−Y) ⪰ J`.
///
/// The dual `sup Tr[J X] : X, ρ ⪰ 0, Tr ρ = 1, −ρ⊗I ⪯ T(X) ⪯ ρ⊗I` is
/// solved as well and reported as the dual value.
pub fn max_rains_channel(n: &BipartiteChannel, opts: &MeasureOptions) -> Result<MeasureReport> {
    let mut p = SdpProblem::new();
    let t = rains_core(&mut p, n, Expr::constant(n.choi()), false)?;
    p.minimize(t)?;
    let inf = solve_optimal(&p, &opts.solver)?;
    let sup = sup_form(n, true, opts)?;
    let mut report = MeasureReport::from_solution("max-rains-channel", inf.primal_value.log2(), &inf);
    report.dual_value = sup.primal_value;
    report.gap = (inf.primal_value - sup.primal_value).abs();
    report.iterations += sup.iterations;
    report.witness.extend(sup.variables);
    Ok(report)
}

/// Divergence form of `R_max(N)`: the least `‖T_B ∘ M ∘ T_B′‖_◇` over
/// completely positive `M` with `J^N ⪯ J^M`, the diamond norm written
/// through its equality-constrained program. Returns the raw optimum.
pub fn max_rains_channel_divergence_form(n: &BipartiteChannel, opts: &MeasureOptions) -> Result<MeasureReport> {
    let mut p = SdpProblem::new();
    let jm = p.var("J_M", n.choi().layout().clone(), Cone::HermitianFree)?;
    p.geq("dominates", jm.clone(), Expr::constant(n.choi()))?;
    let t = rains_core(&mut p, n, jm, true)?;
    p.minimize(t)?;
    let sol = solve_optimal(&p, &opts.solver)?;
    Ok(MeasureReport::from_solution("max-rains-channel-divergence", sol.primal_value.log2(), &sol))
}

/// `E_κ(N) = log₂ inf ‖Tr_AB Q‖_∞ : Q ⪰ 0, −T(Q) ⪯ T(J) ⪯ T(Q)`.
pub fn kappa_entanglement_channel(n: &BipartiteChannel, opts: &MeasureOptions) -> Result<MeasureReport> {
    kappa_program(n.choi(), &[A, B], opts, "kappa-entanglement-channel")
}

/// The same program for a channel `A → B` on its Choi operator over `(R, B)`.
pub fn kappa_entanglement_point_to_point(m: &PointToPointChannel, opts: &MeasureOptions) -> Result<MeasureReport> {
    kappa_program(m.choi(), &[B], opts, "kappa-entanglement-point-to-point")
}

fn kappa_program(j: &HermitianOperator, outputs: &[&str], opts: &MeasureOptions, name: &str) -> Result<MeasureReport> {
    let mut p = SdpProblem::new();
    let q = p.var("Q", j.layout().clone(), Cone::HermitianPsd)?;
    let tq = q.clone().pt_b()?;
    let tj = j.pt_b();
    p.geq("upper", tq.clone(), Expr::constant(&tj))?;
    p.psd("lower", tq.add_const(&tj)?)?;
    let t = p.inf_norm_epigraph("t", q.ptrace(outputs)?, true)?;
    p.minimize(t)?;
    let sol = solve_optimal(&p, &opts.solver)?;
    Ok(MeasureReport::from_solution(name, sol.primal_value.log2(), &sol))
}

/// `N(ψ_RA)` on `(R, B)` with `B` as the B side.
fn channel_output(m: &PointToPointChannel, psi: &DVector<C64>) -> Result<DensityOperator> {
    let d = m.d_in();
    let layout = SystemLayout::new([(R.to_string(), d), ("A_in".to_string(), d)], ["A_in"])?;
    let input = DensityOperator::pure(layout, &(psi / C64::new(psi.norm(), 0.0)))?;
    m.apply(&input, "A_in")?.relabel("A_in", B)?.with_b_side([B])
}

/// Lower bound on `E_M(N) = sup_ψ E_M(N(ψ_RA))`.
///
/// Evaluates the maximally entangled input, `samples` random pure inputs,
/// and `restarts` rounds of random local search from the best point so far.
/// The value is a running maximum, so it never decreases with `restarts`.
pub fn min_rains_channel_lower(
    m: &PointToPointChannel,
    samples: usize,
    restarts: usize,
    seed: u64,
    opts: &MeasureOptions,
) -> Result<MeasureReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("min-Rains lower bound needs at least one sample".into()));
    }
    const STEPS: usize = 6;
    let d = m.d_in();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian = |rng: &mut ChaCha8Rng| {
        DVector::from_fn(d * d, |_, _| C64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)))
    };
    let eval = |psi: &DVector<C64>| -> Result<MeasureReport> { min_rains_state(&channel_output(m, psi)?, opts) };

    let mut best_psi = crate::operators::unnormalized_max_ent(d);
    let mut best = eval(&best_psi)?;
    let mut evaluations = 1;
    for _ in 0..samples {
        let psi = gaussian(&mut rng);
        let r = eval(&psi)?;
        evaluations += 1;
        if r.value > best.value {
            best = r;
            best_psi = psi;
        }
    }
    for round in 0..restarts {
        let step = 0.5 / (1.0 + round as f64);
        for _ in 0..STEPS {
            let normalized = &best_psi / C64::new(best_psi.norm(), 0.0);
            let psi = normalized + gaussian(&mut rng) * C64::new(step / (d as f64), 0.0);
            let r = eval(&psi)?;
            evaluations += 1;
            if r.value > best.value {
                best = r;
                best_psi = psi;
            }
        }
    }
    best.measure = "min-rains-channel-lower-bound".into();
    best.lower_bound = true;
    best.cross_checks.push(CrossCheck { name: "inputs evaluated".into(), optimum: evaluations as f64 });
    Ok(best)
}

/// Splits a state on `(L_A, A′, B′, L_B)` and applies `n` to the middle factors.
fn amortization_pair(n: &BipartiteChannel, rho: &DensityOperator) -> Result<(DensityOperator, DensityOperator)> {
    let labels: Vec<String> = rho.layout().labels().map(str::to_string).collect();
    if labels.len() != 4 {
        return Err(Error::DimensionMismatch(format!(
            "amortization needs a state on (L_A, A′, B′, L_B), got {}",
            rho.layout()
        )));
    }
    let before = rho.with_b_side([&labels[2], &labels[3]])?;
    let after = n.apply(&before, &labels[1], &labels[2])?;
    Ok((before, after))
}

/// `E_κ(L_A A; B L_B)_ω − E_κ(L_A A′; B′ L_B)_ρ` with `ω = N(ρ)`.
pub fn amortized_kappa_gap(n: &BipartiteChannel, rho: &DensityOperator, opts: &MeasureOptions) -> Result<f64> {
    let (before, after) = amortization_pair(n, rho)?;
    Ok(kappa_entanglement_state(&after, opts)?.value - kappa_entanglement_state(&before, opts)?.value)
}

/// `R_max(L_A A; B L_B)_ω − R_max(L_A A′; B′ L_B)_ρ` with `ω = N(ρ)`.
pub fn amortized_max_rains_gap(n: &BipartiteChannel, rho: &DensityOperator, opts: &MeasureOptions) -> Result<f64> {
    let (before, after) = amortization_pair(n, rho)?;
    Ok(max_rains_state(&after, opts)?.value - max_rains_state(&before, opts)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::random_cpptp;
    use crate::operators::{maximally_entangled, maximally_entangled_on};
    use crate::state_measures::log_negativity_state;

    fn opts() -> MeasureOptions {
        MeasureOptions::default()
    }

    fn id_embedded() -> BipartiteChannel {
        PointToPointChannel::identity(2).embed()
    }

    #[test]
    fn identity_channel_has_one_ebit() {
        let n = id_embedded();
        let en = log_negativity_channel(&n, &opts()).unwrap();
        let rm = max_rains_channel(&n, &opts()).unwrap();
        let ek = kappa_entanglement_channel(&n, &opts()).unwrap();
        for r in [&en, &rm, &ek] {
            assert!((r.value - 1.0).abs() < 1e-6, "{} = {}", r.measure, r.value);
        }
        assert!(en.relative_gap() < 1e-6 && rm.relative_gap() < 1e-6, "{en:?} {rm:?}");
        let div = max_rains_channel_divergence_form(&n, &opts()).unwrap();
        assert!((div.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn replacer_reduces_to_state() {
        let phi = maximally_entangled(2);
        let n = BipartiteChannel::replacer(&phi, (2, 2)).unwrap();
        let en = log_negativity_channel(&n, &opts()).unwrap();
        assert!((en.value - log_negativity_state(&phi, &opts()).unwrap().value).abs() < 1e-6);
        assert!((max_rains_channel(&n, &opts()).unwrap().value - 1.0).abs() < 1e-6);
        assert!((kappa_entanglement_channel(&n, &opts()).unwrap().value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cpptp_channels_are_free() {
        for seed in 0..2 {
            let n = random_cpptp((2, 2), (2, 2), seed);
            for r in [
                log_negativity_channel(&n, &opts()).unwrap(),
                max_rains_channel(&n, &opts()).unwrap(),
                kappa_entanglement_channel(&n, &opts()).unwrap(),
            ] {
                assert!(r.value.abs() < 1e-6, "{} = {}", r.measure, r.value);
            }
        }
    }

    #[test]
    fn point_to_point_kappa_matches_embedding() {
        let dep = PointToPointChannel::depolarizing(2, 0.3).unwrap();
        let direct = kappa_entanglement_point_to_point(&dep, &opts()).unwrap();
        let embedded = kappa_entanglement_channel(&dep.embed(), &opts()).unwrap();
        assert!((direct.value - embedded.value).abs() < 1e-6);
        assert!(direct.value > 0.1);
    }

    #[test]
    fn min_rains_lower_bound() {
        let id = PointToPointChannel::identity(2);
        let r = min_rains_channel_lower(&id, 2, 0, 1, &opts()).unwrap();
        assert!(r.lower_bound && r.value >= 1.0 - 1e-6);
        assert!(min_rains_channel_lower(&id, 0, 0, 1, &opts()).is_err());

        let dep = PointToPointChannel::depolarizing(2, 0.4).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for restarts in 0..3 {
            let v = min_rains_channel_lower(&dep, 2, restarts, 5, &opts()).unwrap().value;
            assert!(v >= prev);
            prev = v;
        }

        let full = PointToPointChannel::depolarizing(2, 1.0).unwrap();
        assert!(min_rains_channel_lower(&full, 3, 1, 2, &opts()).unwrap().value.abs() < 1e-6);
    }

    #[test]
    fn amortization_examples() {
        let pi = DensityOperator::maximally_mixed(
            SystemLayout::new(
                [("LA".to_string(), 2), ("Ap".to_string(), 2), ("Bp".to_string(), 2), ("LB".to_string(), 2)],
                ["Bp", "LB"],
            )
            .unwrap(),
        );
        let rep = BipartiteChannel::replacer(&maximally_entangled(2), (2, 2)).unwrap();
        assert!((amortized_kappa_gap(&rep, &pi, &opts()).unwrap() - 1.0).abs() < 1e-6);
        assert!((amortized_max_rains_gap(&rep, &pi, &opts()).unwrap() - 1.0).abs() < 1e-6);

        // Φ across L_A:L_B and a product state on A′B′, identity channel.
        let phi = maximally_entangled_on("LA", "LB", 2).unwrap();
        let mid = DensityOperator::maximally_mixed(SystemLayout::bipartite("Ap", 2, "Bp", 2).unwrap());
        let rho = phi.tensor(&mid).unwrap().permute(&["LA", "Ap", "Bp", "LB"]).unwrap();
        let id = BipartiteChannel::identity(2, 2);
        assert!(amortized_kappa_gap(&id, &rho, &opts()).unwrap().abs() < 1e-6);
        assert!(amortized_max_rains_gap(&id, &rho, &opts()).unwrap().abs() < 1e-6);
    }
}
