//! Entanglement measures of bipartite states.
//!
//! Every measure partially transposes the layout's B side. Values are in
//! bits; the raw optimum of the underlying program is kept alongside.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::{numerical_rank, support_projector, DensityOperator, HermitianOperator, SystemLayout, DEFAULT_RANK_TOL};
use crate::sdp::{Cone, Expr, SdpProblem, SdpSolution, SolveStatus, SolverOptions};

/// Solver and rank settings shared by all measures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureOptions {
    pub solver: SolverOptions,
    /// Eigenvalue cutoff for support projectors.
    pub rank_tol: f64,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions { solver: SolverOptions::default(), rank_tol: DEFAULT_RANK_TOL }
    }
}

/// An independent evaluation of the same quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossCheck {
    pub name: String,
    pub optimum: f64,
}

/// Outcome of a measure computation.
#[derive(Clone, Debug, Serialize)]
pub struct MeasureReport {
    pub measure: String,
    /// In bits.
    pub value: f64,
    /// Optimum of the defining program before taking the logarithm.
    pub optimum: f64,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `|primal − dual|`.
    pub gap: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// The value is only a certified lower bound.
    pub lower_bound: bool,
    /// Numerical rank of the support projector, for support-based measures.
    pub rank: Option<usize>,
    pub cross_checks: Vec<CrossCheck>,
    #[serde(skip)]
    pub witness: Vec<(String, HermitianOperator)>,
}

impl MeasureReport {
    pub(crate) fn from_solution(measure: &str, value: f64, sol: &SdpSolution) -> Self {
        MeasureReport {
            measure: measure.to_string(),
            value,
            optimum: sol.primal_value,
            primal_value: sol.primal_value,
            dual_value: sol.dual_value,
            gap: (sol.primal_value - sol.dual_value).abs(),
            status: sol.status,
            iterations: sol.iterations,
            lower_bound: false,
            rank: None,
            cross_checks: Vec::new(),
            witness: sol.variables.clone(),
        }
    }

    /// `|primal − dual| / max(1, |primal|)`.
    pub fn relative_gap(&self) -> f64 {
        self.gap / self.primal_value.abs().max(1.0)
    }

    pub fn witness(&self, name: &str) -> Option<&HermitianOperator> {
        self.witness.iter().find(|(n, _)| n == name).map(|(_, w)| w)
    }
}

pub(crate) fn solve_optimal(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    p.solve(opts)?.require_optimal()
}

fn require_bipartite(layout: &SystemLayout) -> Result<()> {
    if layout.b_side().is_empty() || layout.a_side().is_empty() {
        return Err(Error::InvalidArgument(format!("measure needs a nontrivial A|B cut, got {layout}")));
    }
    Ok(())
}

/// Smallest eigenvalue of `T_B(ρ)` is at least `−tol`.
pub fn is_ppt(rho: &HermitianOperator, tol: f64) -> bool {
    rho.pt_b().min_eigenvalue() >= -tol
}

/// `σ ⪰ 0` and `‖T_B(σ)‖₁ ≤ 1`, both within `tol`.
pub fn is_ppt_prime(sigma: &HermitianOperator, tol: f64) -> bool {
    sigma.min_eigenvalue() >= -tol && sigma.pt_b().trace_norm() <= 1.0 + tol
}

/// `E_N(ρ) = log₂ ‖T_B(ρ)‖₁`.
///
/// The value comes from the spectrum of `T_B(ρ)`. The primal
/// `sup Tr[Rρ] : −I ⪯ T_B(R) ⪯ I` and dual `inf Tr[K+L] : T_B(K−L) = ρ`
/// programs are solved separately and reported as primal and dual values.
pub fn log_negativity_state(rho: &DensityOperator, opts: &MeasureOptions) -> Result<MeasureReport> {
    require_bipartite(rho.layout())?;
    let layout = rho.layout().clone();
    let norm = rho.pt_b().trace_norm();
    let id = HermitianOperator::identity(layout.clone());

    let mut primal = SdpProblem::new();
    let r = primal.var("R", layout.clone(), Cone::HermitianFree)?;
    let tr = r.clone().pt_b()?;
    primal.leq("upper", tr.clone(), Expr::constant(&id))?;
    primal.geq("lower", tr, Expr::constant(&id.scale(-1.0)))?;
    primal.maximize(r.trace_with(rho.op())?)?;
    let ps = solve_optimal(&primal, &opts.solver)?;

    let mut dual = SdpProblem::new();
    let k = dual.var("K", layout.clone(), Cone::HermitianPsd)?;
    let l = dual.var("L", layout, Cone::HermitianPsd)?;
    dual.equal("pt", k.clone().sub(l.clone())?.pt_b()?, Expr::constant(rho.op()))?;
    dual.minimize(k.add(l)?.trace()?)?;
    let ds = solve_optimal(&dual, &opts.solver)?;

    let mut report = MeasureReport::from_solution("log-negativity", norm.log2(), &ps);
    report.optimum = norm;
    report.dual_value = ds.primal_value;
    report.gap = (ps.primal_value - ds.primal_value).abs();
    report.iterations += ds.iterations;
    report.witness.extend(ds.variables);
    report.cross_checks.push(CrossCheck { name: "partial-transpose spectrum".into(), optimum: norm });
    Ok(report)
}

/// `R_max(ρ) = log₂ W`, `W = min Tr[C+D] : C, D ⪰ 0, T_B(C−D) ⪰ ρ`.
///
/// The dual `sup Tr[Rρ] : R ⪰ 0, −I ⪯ T_B(R) ⪯ I` is solved as well.
pub fn max_rains_state(rho: &DensityOperator, opts: &MeasureOptions) -> Result<MeasureReport> {
    require_bipartite(rho.layout())?;
    let layout = rho.layout().clone();
    let mut p = SdpProblem::new();
    let c = p.var("C", layout.clone(), Cone::HermitianPsd)?;
    let d = p.var("D", layout.clone(), Cone::HermitianPsd)?;
    p.geq("dominates", c.clone().sub(d.clone())?.pt_b()?, Expr::constant(rho.op()))?;
    p.minimize(c.add(d)?.trace()?)?;
    let sol = solve_optimal(&p, &opts.solver)?;

    let id = HermitianOperator::identity(layout.clone());
    let mut q = SdpProblem::new();
    let r = q.var("R", layout, Cone::HermitianPsd)?;
    let tr = r.clone().pt_b()?;
    q.leq("upper", tr.clone(), Expr::constant(&id))?;
    q.geq("lower", tr, Expr::constant(&id.scale(-1.0)))?;
    q.maximize(r.trace_with(rho.op())?)?;
    let dsol = solve_optimal(&q, &opts.solver)?;

    let mut report = MeasureReport::from_solution("max-rains", sol.primal_value.log2(), &sol);
    report.dual_value = dsol.primal_value;
    report.gap = (sol.primal_value - dsol.primal_value).abs();
    report.iterations += dsol.iterations;
    report.witness.extend(dsol.variables);
    Ok(report)
}

/// `E_κ(ρ) = log₂ min Tr S : S ⪰ 0, −T_B(S) ⪯ T_B(ρ) ⪯ T_B(S)`.
pub fn kappa_entanglement_state(rho: &DensityOperator, opts: &MeasureOptions) -> Result<MeasureReport> {
    require_bipartite(rho.layout())?;
    let mut p = SdpProblem::new();
    let s = p.var("S", rho.layout().clone(), Cone::HermitianPsd)?;
    let ts = s.clone().pt_b()?;
    let tr = rho.pt_b();
    p.geq("upper", ts.clone(), Expr::constant(&tr))?;
    p.psd("lower", ts.add_const(&tr)?)?;
    p.minimize(s.trace()?)?;
    let sol = solve_optimal(&p, &opts.solver)?;
    Ok(MeasureReport::from_solution("kappa-entanglement", sol.primal_value.log2(), &sol))
}

fn support_program(rho: &DensityOperator, opts: &MeasureOptions, capped: bool) -> Result<(SdpSolution, usize)> {
    require_bipartite(rho.layout())?;
    let layout = rho.layout().clone();
    let proj = support_projector(rho.op(), opts.rank_tol);
    let rank = numerical_rank(rho.op(), opts.rank_tol);
    let mut p = SdpProblem::new();
    let r = p.var("R", layout.clone(), Cone::HermitianFree)?;
    p.geq("support", r.clone(), Expr::constant(&proj))?;
    if capped {
        p.leq("cap", r.clone(), Expr::constant(&HermitianOperator::identity(layout)))?;
    }
    let t = p.inf_norm_epigraph("t", r.pt_b()?, false)?;
    p.minimize(t)?;
    Ok((solve_optimal(&p, &opts.solver)?, rank))
}

/// `E_M(ρ) = −log₂ M`, `M = min ‖T_B(R)‖_∞ : P ⪯ R` with `P` the support
/// projector of `ρ`.
pub fn min_rains_state(rho: &DensityOperator, opts: &MeasureOptions) -> Result<MeasureReport> {
    let (sol, rank) = support_program(rho, opts, false)?;
    let mut report = MeasureReport::from_solution("min-rains", -sol.primal_value.log2(), &sol);
    report.rank = Some(rank);
    Ok(report)
}

/// `−log₂ W₀`, `W₀ = min ‖T_B(R)‖_∞ : P ⪯ R ⪯ I`.
pub fn one_shot_exact_distillable(rho: &DensityOperator, opts: &MeasureOptions) -> Result<MeasureReport> {
    let (sol, rank) = support_program(rho, opts, true)?;
    let mut report = MeasureReport::from_solution("one-shot-exact-distillable", -sol.primal_value.log2(), &sol);
    report.rank = Some(rank);
    Ok(report)
}
