//! Trial bodies of the property families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    random_hermitian, random_mixed_with, random_state_with, random_unitary, CheckResult, Input, Measure, Suite,
    SuiteConfig,
};
use crate::channel_measures::{
    amortized_kappa_gap, amortized_max_rains_gap, kappa_entanglement_channel, log_negativity_channel,
    max_rains_channel, max_rains_channel_divergence_form,
};
use crate::channels::{random_channel, random_complex, random_cpptp_with, random_local_channel, BipartiteChannel, PptSuperchannel};
use crate::divergences::{max_relative_entropy, relative_entropy, sandwiched_renyi, DivergenceValue};
use crate::error::{Error, Result};
use crate::harness::generators::{random_ppt_entangled_3x3_with, random_ppt_state_with};
use crate::operators::{
    maximally_entangled, raw, unnormalized_max_ent, CMatrix, DensityOperator, HermitianOperator, SystemLayout,
};
use crate::sdp::{Expr, SdpProblem, Cone};
use crate::state_measures::{
    kappa_entanglement_state, log_negativity_state, max_rains_state, min_rains_state, one_shot_exact_distillable,
    MeasureOptions,
};

const PT_SELF_ADJOINT: &str = "partial transpose is self-adjoint: ⟨T_B(X), Y⟩ = ⟨X, T_B(Y)⟩";
const PT_ISOMETRY: &str = "partial transpose preserves the Hilbert–Schmidt inner product";
const PT_TRACE: &str = "partial transpose preserves the trace";
const TRANSPOSE_SPECTRUM: &str = "full transpose preserves the eigenvalue multiset";
const TRANSPOSE_TRICK: &str = "(Q_{SL} ⊗ I_A)|Υ⟩_{L:A} = (T_A(Q_{SA}) ⊗ I_L)|Υ⟩_{L:A}";
const PT_MAX_ENT: &str = "T_L(|Υ⟩⟨Υ|_{LA}) = T_A(|Υ⟩⟨Υ|_{LA})";

const CHOI_CONTRACTION: &str = "applying a channel through its Choi operator equals applying its Kraus operators";
const COMPOSE_ASSOCIATIVE: &str = "serial composition is associative";
const COMPOSE_CHOI: &str = "the Choi operator of N₂∘N₁ is the Choi operator of x ↦ N₂(N₁(x))";

const DATA_PROCESSING: &str = "data processing: D̃_α(N(ρ)‖N(σ)) ≤ D̃_α(ρ‖σ) for α ∈ [1/2, 1) ∪ (1, ∞)";
const ALPHA_MONOTONE: &str = "D̃_α(ρ‖σ) is nondecreasing in α, with D̃_1 = D";
const ALPHA_INFINITY: &str = "D̃_α(ρ‖σ) increases to D_max(ρ‖σ) as α → ∞";
const ALPHA_ONE: &str = "D̃_α(ρ‖σ) → D(ρ‖σ) as α → 1";
const UNITARY_INVARIANCE: &str = "D(UρU†‖UσU†) = D(ρ‖σ) for unitary U";
const TENSOR_INVARIANCE: &str = "D(ρ⊗τ‖σ⊗τ) = D(ρ‖σ)";

const PRIMAL_DUAL: &str = "primal and dual SDP optima coincide";
const DIVERGENCE_FORM: &str = "R_max(N) equals its divergence form min_{M: J^N ⪯ J^M} log₂‖T_B∘M∘T_B′‖_◇";
const COMPLEMENTARITY: &str = "optimal primal and dual solutions are complementary";
const SCALING: &str = "min Tr S : −T_B(S) ⪯ T_B(cρ) ⪯ T_B(S) scales linearly in c > 0";

const RMAX_LE_EN: &str = "R_max(ρ) ≤ E_N(ρ)";
const RMAX_NONNEG: &str = "R_max(ρ) ≥ 0";
const W0_LE_EMIN: &str = "−log₂ W₀(ρ) ≤ E_M(ρ)";
const FAITHFUL_PPT: &str = "the measure vanishes on PPT states";
const FAITHFUL_BELL: &str = "the measure is positive on a slightly noisy Bell state";
const PRODUCT_MONOTONE: &str = "the measure does not increase under local channels N_A ⊗ N_B";

const FAITHFUL_CPPTP: &str = "the channel measure vanishes on C-PPT-P channels";
const IDENTITY_VALUE: &str = "the channel measure of the identity channel on ℂ^d is log₂ d";
const REPLACER: &str = "the channel measure of the replacer channel preparing ρ equals the state measure of ρ";
const SUBADDITIVE: &str = "R_max(N₂∘N₁) ≤ R_max(N₁) + R_max(N₂)";

const SUPER_CLOSURE: &str = "PPT superchannels map C-PPT-P channels to C-PPT-P channels";
const SUPER_MONOTONE: &str = "the channel measure does not increase under PPT superchannels";

const AMORT_KAPPA: &str = "E_κ(LA; BL)_{N(ρ)} − E_κ(LA′; B′L)_ρ ≤ E_κ(N)";
const AMORT_RMAX: &str = "R_max(LA; BL)_{N(ρ)} − R_max(LA′; B′L)_ρ ≤ R_max(N)";
const DISTILLATION: &str = "a state prepared by P³∘N∘P²∘N∘P¹ with C-PPT-P P^i has R_max ≤ 2 R_max(N)";
const ADDITIVE: &str = "the measure is additive on tensor products of states";

/// Tolerance of a check.
enum Tol {
    /// The configured slack.
    Slack,
    Fixed(f64),
}

struct Trial<'a> {
    cfg: &'a SuiteConfig,
    rng: ChaCha8Rng,
    out: Vec<CheckResult>,
}

impl Trial<'_> {
    fn dim(&mut self) -> usize {
        self.rng.random_range(2..=self.cfg.dims)
    }

    fn opts(&self) -> &MeasureOptions {
        &self.cfg.options
    }

    fn channel_measures(&self) -> Vec<Measure> {
        self.cfg.measures.iter().copied().filter(|m| m.has_channel_form()).collect()
    }

    fn record(
        &mut self,
        property: impl Into<String>,
        anchor: &'static str,
        tol: Tol,
        inputs: Vec<(&str, Input)>,
        value: Result<(f64, f64)>,
    ) {
        let (lhs, rhs, solver_failure, error) = match value {
            Ok((l, r)) => (l, r, false, None),
            Err(e @ Error::Solver { .. }) => (f64::NAN, f64::NAN, true, Some(e.to_string())),
            Err(e) => (f64::NAN, f64::NAN, false, Some(e.to_string())),
        };
        self.out.push(CheckResult {
            property: property.into(),
            anchor,
            lhs,
            rhs,
            tolerance: match tol {
                Tol::Slack => self.cfg.slack,
                Tol::Fixed(t) => t,
            },
            solver_failure,
            error,
            inputs: inputs.into_iter().map(|(n, i)| (n.to_string(), i)).collect(),
        });
    }
}

pub(super) fn run_trial(suite: Suite, seed: u64, cfg: &SuiteConfig) -> Vec<CheckResult> {
    let mut t = Trial { cfg, rng: ChaCha8Rng::seed_from_u64(seed), out: Vec::new() };
    match suite {
        Suite::Operators => operators(&mut t),
        Suite::Channels => channels(&mut t),
        Suite::Divergences => divergences(&mut t),
        Suite::Sdp => sdp(&mut t),
        Suite::States => states(&mut t),
        Suite::ChannelMeasures => channel_measures(&mut t),
        Suite::Superchannels => superchannels(&mut t),
        Suite::Amortization => amortization(&mut t),
        Suite::Distillation => distillation(&mut t),
        Suite::Additivity => additivity(&mut t),
        Suite::All => {
            for s in Suite::FAMILIES {
                t.out.extend(run_trial(s, seed, cfg));
            }
        }
    }
    t.out
}

/// Re-raises a stored result, keeping solver failures recognizable.
fn reuse(v: &Result<f64>) -> Result<f64> {
    match v {
        Ok(x) => Ok(*x),
        Err(Error::Solver { status, iterations }) => Err(Error::Solver { status: *status, iterations: *iterations }),
        Err(e) => Err(Error::InvalidArgument(e.to_string())),
    }
}

fn state_value(m: Measure, rho: &DensityOperator, opts: &MeasureOptions) -> Result<f64> {
    let report = match m {
        Measure::LogNegativity => log_negativity_state(rho, opts)?,
        Measure::MaxRains => max_rains_state(rho, opts)?,
        Measure::Kappa => kappa_entanglement_state(rho, opts)?,
        Measure::MinRains => min_rains_state(rho, opts)?,
        Measure::ExactDistillable => one_shot_exact_distillable(rho, opts)?,
    };
    Ok(report.value)
}

fn channel_value(m: Measure, n: &BipartiteChannel, opts: &MeasureOptions) -> Result<f64> {
    let report = match m {
        Measure::LogNegativity => log_negativity_channel(n, opts)?,
        Measure::MaxRains => max_rains_channel(n, opts)?,
        Measure::Kappa => kappa_entanglement_channel(n, opts)?,
        other => return Err(Error::InvalidArgument(format!("no exact channel form for `{}`", other.name()))),
    };
    Ok(report.value)
}

fn bipartite(da: usize, db: usize) -> SystemLayout {
    SystemLayout::bipartite("A", da, "B", db).expect("distinct labels")
}

fn op(x: &HermitianOperator) -> Input {
    Input::from(x)
}

fn ch(n: &BipartiteChannel) -> Input {
    Input::from(n)
}

fn operators(t: &mut Trial) {
    let (da, db) = (t.dim(), t.dim());
    let layout = bipartite(da, db);
    let x = random_hermitian(&layout, &mut t.rng);
    let y = random_hermitian(&layout, &mut t.rng);
    let (tx, ty) = (x.pt_b(), y.pt_b());
    let inputs = || vec![("X", op(&x)), ("Y", op(&y))];
    t.record("pt-self-adjoint", PT_SELF_ADJOINT, Tol::Fixed(1e-9), inputs(), Ok(((tx.inner(&y) - x.inner(&ty)).abs(), 0.0)));
    t.record("pt-isometry", PT_ISOMETRY, Tol::Fixed(1e-9), inputs(), Ok(((tx.inner(&ty) - x.inner(&y)).abs(), 0.0)));
    t.record("pt-trace", PT_TRACE, Tol::Fixed(1e-9), inputs(), Ok(((tx.trace() - x.trace()).abs(), 0.0)));
    let spectrum = x.partial_transpose(&["A", "B"]).map(|full| {
        let mut a = full.eigenvalues();
        let mut b = x.eigenvalues();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        (a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max), 0.0)
    });
    t.record("transpose-spectrum", TRANSPOSE_SPECTRUM, Tol::Fixed(1e-9), inputs(), spectrum);

    let (s, d) = (t.dim(), t.dim());
    let q = random_complex(s * d, s * d, &mut t.rng);
    let ups = CMatrix::from_column_slice(d * d, 1, unnormalized_max_ent(d).as_slice());
    let embed = CMatrix::identity(s, s).kronecker(&ups);
    let id = CMatrix::identity(d, d);
    // (S, L, A) ordering on the left, (S, A, L) on the right.
    let lhs = q.kronecker(&id) * &embed;
    let sal = raw::partial_transpose(&q, &[s, d], &[false, true]).kronecker(&id) * &embed;
    let rhs = CMatrix::from_fn(s * d * d, s, |r, c| {
        let (si, l, a) = (r / (d * d), (r / d) % d, r % d);
        sal[(si * d * d + a * d + l, c)]
    });
    t.record("transpose-trick", TRANSPOSE_TRICK, Tol::Fixed(1e-12), vec![], Ok((raw::max_abs(&(lhs - rhs)), 0.0)));

    let proj = HermitianOperator::projector_onto(
        SystemLayout::new([("L".to_string(), d), ("A".to_string(), d)], Vec::<String>::new()).expect("labels"),
        &unnormalized_max_ent(d),
    )
    .expect("dims");
    let exact = proj.partial_transpose(&["L"]).and_then(|l| Ok((l.max_abs_diff(&proj.partial_transpose(&["A"])?), 0.0)));
    t.record("pt-max-entangled", PT_MAX_ENT, Tol::Fixed(0.0), vec![], exact);
}

/// Kraus operators of a random channel `d_in → d_out`.
fn random_kraus(d_in: usize, d_out: usize, rank: usize, rng: &mut impl Rng) -> Vec<CMatrix> {
    let rank = rank.max(d_in.div_ceil(d_out));
    let q = random_complex(d_out * rank, d_in, rng).qr().q();
    (0..rank).map(|k| q.rows(k * d_out, d_out).into_owned()).collect()
}

fn kraus_apply(kraus: &[CMatrix], x: &CMatrix) -> CMatrix {
    let d = kraus[0].nrows();
    kraus.iter().fold(CMatrix::zeros(d, d), |acc, k| acc + k * x * k.adjoint())
}

fn channels(t: &mut Trial) {
    let dims: Vec<usize> = (0..6).map(|_| t.dim()).collect();
    let (i1, o1, o2) = ((dims[0], dims[1]), (dims[2], dims[3]), (dims[4], dims[5]));
    let rank = t.rng.random_range(1..=3);
    let k1 = random_kraus(i1.0 * i1.1, o1.0 * o1.1, rank, &mut t.rng);
    let k2 = random_kraus(o1.0 * o1.1, o2.0 * o2.1, rank, &mut t.rng);

    let direct = {
        let k1 = k1.clone();
        move |x: &CMatrix| kraus_apply(&k1, x)
    };
    let n1 = match BipartiteChannel::choi_of(&direct, i1, o1) {
        Ok(n) => n,
        Err(e) => return t.record("choi-contraction", CHOI_CONTRACTION, Tol::Fixed(1e-9), vec![], Err(e)),
    };
    let layout = SystemLayout::new(
        [("R".to_string(), 2), ("A'".to_string(), i1.0), ("B'".to_string(), i1.1)],
        ["B'"],
    )
    .expect("labels");
    let rho = random_mixed_with(&layout, &mut t.rng);
    let padded: Vec<CMatrix> = k1.iter().map(|k| CMatrix::identity(2, 2).kronecker(k)).collect();
    let contraction =
        n1.apply(&rho, "A'", "B'").map(|out| (raw::max_abs(&(out.matrix() - kraus_apply(&padded, rho.matrix()))), 0.0));
    t.record("choi-contraction", CHOI_CONTRACTION, Tol::Fixed(1e-9), vec![("N", ch(&n1)), ("rho", op(&rho))], contraction);

    let composed_choi = BipartiteChannel::choi_of(|x: &CMatrix| kraus_apply(&k2, &kraus_apply(&k1, x)), i1, o2)
        .and_then(|oracle| {
            let n2 = BipartiteChannel::choi_of(|x: &CMatrix| kraus_apply(&k2, x), o1, o2)?;
            Ok((n2.compose(&n1)?.choi().max_abs_diff(oracle.choi()), 0.0))
        });
    t.record("compose-choi", COMPOSE_CHOI, Tol::Fixed(1e-9), vec![("N1", ch(&n1))], composed_choi);

    let r = t.rng.random_range(1..=3);
    let a = random_channel(i1, o1, r, &mut t.rng);
    let b = random_channel(o1, o2, r, &mut t.rng);
    let c = random_channel(o2, i1, r, &mut t.rng);
    let assoc = b.compose(&a).and_then(|ba| {
        let left = c.compose(&ba)?;
        let right = c.compose(&b)?.compose(&a)?;
        Ok((left.choi().max_abs_diff(right.choi()), 0.0))
    });
    t.record(
        "compose-associative",
        COMPOSE_ASSOCIATIVE,
        Tol::Fixed(1e-9),
        vec![("N1", ch(&a)), ("N2", ch(&b)), ("N3", ch(&c))],
        assoc,
    );
}

fn divergences(t: &mut Trial) {
    let (da, db) = (t.dim(), t.dim());
    let layout = bipartite(da, db);
    let rho = random_state_with(&layout, layout.dim(), &mut t.rng).expect("full rank");
    let sigma = random_state_with(&layout, layout.dim(), &mut t.rng).expect("full rank");
    let inputs = || vec![("rho", op(&rho)), ("sigma", op(&sigma))];
    let value = |v: Result<DivergenceValue>| v.map(|d| d.value);

    let rank = t.rng.random_range(1..=3);
    let n = random_channel((da, db), (da, db), rank, &mut t.rng);
    match n.apply(&rho, "A", "B").and_then(|r| Ok((r, n.apply(&sigma, "A", "B")?))) {
        Ok((nr, ns)) => {
            for alpha in [0.5, 2.0, 10.0] {
                let v = value(sandwiched_renyi(&nr, &ns, alpha))
                    .and_then(|after| Ok((after, value(sandwiched_renyi(&rho, &sigma, alpha))?)));
                let mut with_channel = inputs();
                with_channel.push(("N", ch(&n)));
                t.record(format!("data-processing[{alpha}]"), DATA_PROCESSING, Tol::Fixed(1e-7), with_channel, v);
            }
        }
        Err(e) => t.record("data-processing", DATA_PROCESSING, Tol::Fixed(1e-7), inputs(), Err(e)),
    }

    let alphas = [0.5, 0.7, 0.9, 1.0, 1.1, 1.5, 2.0, 5.0, 10.0];
    let ladder: Result<Vec<f64>> = alphas
        .iter()
        .map(|&a| value(if a == 1.0 { relative_entropy(&rho, &sigma) } else { sandwiched_renyi(&rho, &sigma, a) }))
        .collect();
    let worst_drop = |v: Vec<f64>| (v.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max), 0.0);
    t.record("alpha-monotone", ALPHA_MONOTONE, Tol::Fixed(1e-9), inputs(), ladder.map(worst_drop));

    let powers: Result<Vec<f64>> = (1..=14).map(|k| value(sandwiched_renyi(&rho, &sigma, 2f64.powi(k)))).collect();
    let dmax = value(max_relative_entropy(&rho, &sigma));
    match (powers, dmax) {
        (Ok(p), Ok(dmax)) => {
            let last = p[p.len() - 1];
            t.record("alpha-infinity-increasing", ALPHA_INFINITY, Tol::Fixed(1e-9), inputs(), Ok(worst_drop(p)));
            t.record("alpha-infinity-bound", ALPHA_INFINITY, Tol::Fixed(1e-9), inputs(), Ok((last, dmax)));
            t.record("alpha-infinity-gap", ALPHA_INFINITY, Tol::Fixed(0.0), inputs(), Ok((dmax - last, 1e-3)));
        }
        (Err(e), _) | (_, Err(e)) => t.record("alpha-infinity-gap", ALPHA_INFINITY, Tol::Fixed(0.0), inputs(), Err(e)),
    }

    let near_one = value(relative_entropy(&rho, &sigma)).and_then(|d| {
        let lo = value(sandwiched_renyi(&rho, &sigma, 1.0 - 1e-4))?;
        let hi = value(sandwiched_renyi(&rho, &sigma, 1.0 + 1e-4))?;
        Ok(((lo - d).abs().max((hi - d).abs()), 1e-2))
    });
    t.record("alpha-one-limit", ALPHA_ONE, Tol::Fixed(0.0), inputs(), near_one);

    // Unitary and tensor invariance for D, D_max and D̃_2.
    let u = random_unitary(layout.dim(), &mut t.rng);
    let rotate = |x: &HermitianOperator| HermitianOperator::from_parts(layout.clone(), raw::hermitian_part(&(&u * x.matrix() * u.adjoint())));
    let tau = random_mixed_with(&SystemLayout::new([("C".to_string(), 2)], Vec::<String>::new()).expect("label"), &mut t.rng);
    let all = |r: &DensityOperator, s: &HermitianOperator| -> Result<[f64; 3]> {
        Ok([value(relative_entropy(r, s))?, value(max_relative_entropy(r, s))?, value(sandwiched_renyi(r, s, 2.0))?])
    };
    let spread = |a: [f64; 3], b: [f64; 3]| (a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max), 0.0);
    let unitary = DensityOperator::with_tolerance(rotate(&rho), 1e-9)
        .and_then(|ur| Ok(spread(all(&ur, &rotate(&sigma))?, all(&rho, &sigma)?)));
    t.record("unitary-invariance", UNITARY_INVARIANCE, Tol::Fixed(1e-8), inputs(), unitary);
    let tensor = rho
        .tensor(&tau)
        .and_then(|rt| Ok(spread(all(&rt, &sigma.op().tensor(tau.op())?)?, all(&rho, &sigma)?)));
    t.record("tensor-invariance", TENSOR_INVARIANCE, Tol::Fixed(1e-8), inputs(), tensor);
}

/// `min Tr S : S ⪰ 0, −T_B(S) ⪯ T_B(X) ⪯ T_B(S)`.
fn kappa_problem(x: &HermitianOperator) -> Result<SdpProblem> {
    let mut p = SdpProblem::new();
    let s = p.var("S", x.layout().clone(), Cone::HermitianPsd)?;
    let ts = s.clone().pt_b()?;
    let tx = x.pt_b();
    p.geq("upper", ts.clone(), Expr::constant(&tx))?;
    p.psd("lower", ts.add_const(&tx)?)?;
    p.minimize(s.trace()?)?;
    Ok(p)
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(1.0)
}

fn sdp(t: &mut Trial) {
    let (da, db) = (t.dim(), t.dim());
    let layout = bipartite(da, db);
    let rho = random_mixed_with(&layout, &mut t.rng);
    let opts = *t.opts();
    let gap = log_negativity_state(&rho, &opts).map(|r| (r.relative_gap(), 0.0));
    t.record("primal-dual[en-state]", PRIMAL_DUAL, Tol::Fixed(1e-6), vec![("rho", op(&rho))], gap);

    let rank = t.rng.random_range(1..=4);
    let n = random_channel((2, 2), (2, 2), rank, &mut t.rng);
    let gap = log_negativity_channel(&n, &opts).map(|r| (r.relative_gap(), 0.0));
    t.record("primal-dual[en-channel]", PRIMAL_DUAL, Tol::Fixed(1e-6), vec![("N", ch(&n))], gap);
    let rmax = max_rains_channel(&n, &opts);
    let gap = rmax.as_ref().map(|r| (r.relative_gap(), 0.0)).map_err(|e| Error::InvalidArgument(e.to_string()));
    let div = max_rains_channel_divergence_form(&n, &opts);
    match (rmax, div) {
        (Ok(r), Ok(d)) => {
            t.record("primal-dual[rmax-channel]", PRIMAL_DUAL, Tol::Fixed(1e-6), vec![("N", ch(&n))], gap);
            let v = (relative(r.optimum, d.optimum), 0.0);
            t.record("rmax-divergence-form", DIVERGENCE_FORM, Tol::Fixed(1e-6), vec![("N", ch(&n))], Ok(v));
        }
        (Err(e), _) | (_, Err(e)) => {
            t.record("rmax-divergence-form", DIVERGENCE_FORM, Tol::Fixed(1e-6), vec![("N", ch(&n))], Err(e))
        }
    }

    let c = t.rng.random_range(0.1..10.0);
    let solved = kappa_problem(&rho).and_then(|p| {
        let sol = p.solve(&opts.solver)?.require_optimal()?;
        Ok((p, sol))
    });
    match solved {
        Ok((p, sol)) => {
            let residual = p.complementarity_residual(&sol);
            t.record("complementary-slackness", COMPLEMENTARITY, Tol::Fixed(1e-6), vec![("rho", op(&rho))], Ok((residual, 0.0)));
            let scaled = kappa_problem(&rho.scale(c))
                .and_then(|q| q.solve(&opts.solver)?.require_optimal())
                .map(|s| (relative(c * sol.primal_value, s.primal_value), 0.0));
            t.record("kappa-scaling-covariance", SCALING, Tol::Fixed(1e-6), vec![("rho", op(&rho))], scaled);
        }
        Err(e) => t.record("complementary-slackness", COMPLEMENTARITY, Tol::Fixed(1e-6), vec![("rho", op(&rho))], Err(e)),
    }
}

/// `(1 − p) Φ₂ + p I/4` with `p < 0.1`.
fn noisy_bell(rng: &mut ChaCha8Rng) -> DensityOperator {
    let phi = maximally_entangled(2);
    let p = rng.random_range(0.0..0.1);
    let mixed = phi.scale(1.0 - p).add(&HermitianOperator::identity(phi.layout().clone()).scale(p / 4.0)).expect("same layout");
    DensityOperator::with_tolerance(mixed, 1e-9).expect("convex mixture")
}

fn states(t: &mut Trial) {
    let (da, db) = (t.dim(), t.dim());
    let layout = bipartite(da, db);
    let rho = random_mixed_with(&layout, &mut t.rng);
    let opts = *t.opts();
    let measures = t.cfg.measures.clone();
    let values: Vec<(Measure, Result<f64>)> = measures.iter().map(|&m| (m, state_value(m, &rho, &opts))).collect();
    let get = |m: Measure| values.iter().find(|(k, _)| *k == m).map(|(_, v)| reuse(v));
    let input = || vec![("rho", op(&rho))];

    if let (Some(r), Some(e)) = (get(Measure::MaxRains), get(Measure::LogNegativity)) {
        t.record("rmax-le-en", RMAX_LE_EN, Tol::Slack, input(), r.and_then(|r| Ok((r, e?))));
    }
    if let Some(r) = get(Measure::MaxRains) {
        t.record("rmax-nonneg", RMAX_NONNEG, Tol::Slack, input(), r.map(|r| (-r, 0.0)));
    }
    if let (Some(w), Some(e)) = (get(Measure::ExactDistillable), get(Measure::MinRains)) {
        t.record("w0-le-emin", W0_LE_EMIN, Tol::Slack, input(), w.and_then(|w| Ok((w, e?))));
    }

    let sep = random_ppt_state_with(&layout, &mut t.rng).expect("separable mixture");
    let bell = noisy_bell(&mut t.rng);
    let bound = (t.cfg.dims >= 3).then(|| random_ppt_entangled_3x3_with(&mut t.rng));
    for &m in &measures {
        let v = state_value(m, &sep, &opts).map(|v| (v, 0.0));
        t.record(format!("faithfulness-ppt[{}]", m.name()), FAITHFUL_PPT, Tol::Slack, vec![("sigma", op(&sep))], v);
        if let Some(b) = &bound {
            let v = state_value(m, b, &opts).map(|v| (v, 0.0));
            let name = format!("faithfulness-ppt-entangled[{}]", m.name());
            t.record(name, FAITHFUL_PPT, Tol::Slack, vec![("sigma", op(b))], v);
        }
        // E_M and W₀ only see the support, which is everything here.
        if !m.has_channel_form() {
            continue;
        }
        let v = state_value(m, &bell, &opts).map(|v| (1e-3, v));
        t.record(format!("faithfulness-noisy-bell[{}]", m.name()), FAITHFUL_BELL, Tol::Fixed(0.0), vec![("rho", op(&bell))], v);
    }

    let ra = t.rng.random_range(1..=3);
    let rb = t.rng.random_range(1..=3);
    let na = random_local_channel(da, da, ra, &mut t.rng);
    let nb = random_local_channel(db, db, rb, &mut t.rng);
    let local = BipartiteChannel::product(&na, &nb);
    match local.apply(&rho, "A", "B") {
        Ok(after) => {
            for &m in measures.iter().filter(|m| m.has_channel_form()) {
                let before = get(m).expect("selected");
                let v = state_value(m, &after, &opts).and_then(|a| Ok((a, before?)));
                let inputs = vec![("rho", op(&rho)), ("N", ch(&local))];
                t.record(format!("product-monotone[{}]", m.name()), PRODUCT_MONOTONE, Tol::Slack, inputs, v);
            }
        }
        Err(e) => t.record("product-monotone", PRODUCT_MONOTONE, Tol::Slack, input(), Err(e)),
    }
}

/// A replacer channel preparing a Bell state: not C-PPT-P.
fn bell_preparation() -> BipartiteChannel {
    BipartiteChannel::replacer(&maximally_entangled(2), (2, 2)).expect("two factors")
}

fn channel_measures(t: &mut Trial) {
    let opts = *t.opts();
    let measures = t.channel_measures();
    let cpptp =
        if t.cfg.inject_violation { bell_preparation() } else { random_cpptp_with((2, 2), (2, 2), &mut t.rng) };
    let d = t.dim();
    let identity = crate::channels::PointToPointChannel::identity(d).embed();
    let rho = random_mixed_with(&bipartite(2, 2), &mut t.rng);
    let replacer = BipartiteChannel::replacer(&rho, (2, 2)).expect("two factors");
    for &m in &measures {
        let v = channel_value(m, &cpptp, &opts).map(|v| (v, 0.0));
        t.record(format!("faithfulness-cpptp[{}]", m.name()), FAITHFUL_CPPTP, Tol::Slack, vec![("N", ch(&cpptp))], v);
        let v = channel_value(m, &identity, &opts).map(|v| ((v - (d as f64).log2()).abs(), 0.0));
        t.record(format!("identity-value[{}]", m.name()), IDENTITY_VALUE, Tol::Slack, vec![("N", ch(&identity))], v);
        let v = channel_value(m, &replacer, &opts)
            .and_then(|c| Ok(((c - state_value(m, &rho, &opts)?).abs(), 0.0)));
        t.record(format!("replacer-reduction[{}]", m.name()), REPLACER, Tol::Slack, vec![("rho", op(&rho))], v);
    }

    if measures.contains(&Measure::MaxRains) {
        let (r1, r2) = (t.rng.random_range(1..=4), t.rng.random_range(1..=4));
        let n1 = random_channel((2, 2), (2, 2), r1, &mut t.rng);
        let n2 = random_channel((2, 2), (2, 2), r2, &mut t.rng);
        let v = n2.compose(&n1).and_then(|c| {
            let lhs = channel_value(Measure::MaxRains, &c, &opts)?;
            Ok((lhs, channel_value(Measure::MaxRains, &n1, &opts)? + channel_value(Measure::MaxRains, &n2, &opts)?))
        });
        t.record("rmax-subadditive", SUBADDITIVE, Tol::Slack, vec![("N1", ch(&n1)), ("N2", ch(&n2))], v);
    }
}

fn superchannels(t: &mut Trial) {
    let opts = *t.opts();
    let memory = (t.rng.random_range(1..=2), t.rng.random_range(1..=2));
    let theta = PptSuperchannel::random((2, 2), (2, 2), (2, 2), (2, 2), memory, &mut t.rng);
    let m = random_cpptp_with((2, 2), (2, 2), &mut t.rng);
    let closure = theta.apply(&m).map(|out| (-out.cpptp_min_eigenvalue(), 0.0));
    t.record("superchannel-closure", SUPER_CLOSURE, Tol::Fixed(1e-9), vec![("M", ch(&m))], closure);

    let rank = t.rng.random_range(1..=4);
    let m = random_channel((2, 2), (2, 2), rank, &mut t.rng);
    match theta.apply(&m) {
        Ok(out) => {
            for m_kind in t.channel_measures() {
                let v = channel_value(m_kind, &out, &opts).and_then(|a| Ok((a, channel_value(m_kind, &m, &opts)?)));
                let inputs = vec![("M", ch(&m)), ("Theta(M)", ch(&out))];
                t.record(format!("superchannel-monotone[{}]", m_kind.name()), SUPER_MONOTONE, Tol::Slack, inputs, v);
            }
        }
        Err(e) => t.record("superchannel-monotone", SUPER_MONOTONE, Tol::Slack, vec![("M", ch(&m))], Err(e)),
    }
}

fn amortization(t: &mut Trial) {
    let opts = *t.opts();
    let layout = SystemLayout::new(
        [("L_A".to_string(), 2), ("A'".to_string(), 2), ("B'".to_string(), 2), ("L_B".to_string(), 2)],
        ["B'", "L_B"],
    )
    .expect("labels");
    let rank = t.rng.random_range(1..=4);
    let n = random_channel((2, 2), (2, 2), rank, &mut t.rng);
    let rho = random_mixed_with(&layout, &mut t.rng);
    let inputs = || vec![("N", ch(&n)), ("rho", op(&rho))];
    if t.cfg.uses(Measure::Kappa) {
        let v = amortized_kappa_gap(&n, &rho, &opts).and_then(|g| Ok((g, channel_value(Measure::Kappa, &n, &opts)?)));
        t.record("amortized-kappa", AMORT_KAPPA, Tol::Slack, inputs(), v);
    }
    if t.cfg.uses(Measure::MaxRains) {
        let v = amortized_max_rains_gap(&n, &rho, &opts)
            .and_then(|g| Ok((g, channel_value(Measure::MaxRains, &n, &opts)?)));
        t.record("amortized-rmax", AMORT_RMAX, Tol::Slack, inputs(), v);
    }
}

/// The state prepared by `P³ ∘ (N ⊗ id) ∘ P² ∘ (N ⊗ id) ∘ P¹` with qubit memories.
pub(crate) fn distillation_chain(n: &BipartiteChannel, rng: &mut impl Rng) -> Result<DensityOperator> {
    let (ia, ib) = n.in_dims();
    let (oa, ob) = n.out_dims();
    let p1 = random_cpptp_with((1, 1), (2 * ia, 2 * ib), rng);
    let p2 = random_cpptp_with((2 * oa, 2 * ob), (2 * ia, 2 * ib), rng);
    let p3 = random_cpptp_with((2 * oa, 2 * ob), (2, 2), rng);
    let used = n.with_memory(2, 2);
    let omega = p3.compose(&used.compose(&p2.compose(&used.compose(&p1)?)?)?)?;
    omega.choi_state().partial_trace(&[crate::channels::S_A, crate::channels::S_B])
}

fn distillation(t: &mut Trial) {
    if !t.cfg.uses(Measure::MaxRains) {
        return;
    }
    let opts = *t.opts();
    let rank = t.rng.random_range(1..=4);
    let n = random_channel((2, 2), (2, 2), rank, &mut t.rng);
    let v = distillation_chain(&n, &mut t.rng).and_then(|omega| {
        Ok((state_value(Measure::MaxRains, &omega, &opts)?, 2.0 * channel_value(Measure::MaxRains, &n, &opts)?))
    });
    t.record("distillation-chain", DISTILLATION, Tol::Slack, vec![("N", ch(&n))], v);
}

/// `ρ ⊗ σ` on `(A, B, A2, B2)` with B side `{B, B2}`.
pub(crate) fn tensor_pair(rho: &DensityOperator, sigma: &DensityOperator) -> Result<DensityOperator> {
    rho.tensor(&sigma.relabel("A", "A2")?.relabel("B", "B2")?)
}

fn additivity(t: &mut Trial) {
    let opts = *t.opts();
    let layout = bipartite(2, 2);
    let (r1, r2) = (t.rng.random_range(1..=3), t.rng.random_range(1..=3));
    let rho = random_state_with(&layout, r1, &mut t.rng).expect("rank in range");
    let sigma = random_state_with(&layout, r2, &mut t.rng).expect("rank in range");
    for m in [Measure::Kappa, Measure::MinRains] {
        if !t.cfg.uses(m) {
            continue;
        }
        let v = tensor_pair(&rho, &sigma).and_then(|joint| {
            let sum = state_value(m, &rho, &opts)? + state_value(m, &sigma, &opts)?;
            Ok(((state_value(m, &joint, &opts)? - sum).abs(), 0.0))
        });
        let inputs = vec![("rho", op(&rho)), ("sigma", op(&sigma))];
        t.record(format!("additivity[{}]", m.name()), ADDITIVE, Tol::Slack, inputs, v);
    }
}
