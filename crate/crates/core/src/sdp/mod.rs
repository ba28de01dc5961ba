//! Hermitian semidefinite programming: modeling, real embedding and an
//! interior-point solver.
//!
//! ```no_run
//! use entmeter::operators::{DensityOperator, SystemLayout};
//! use entmeter::sdp::{Cone, Expr, SdpProblem, SolverOptions};
//!
//! let layout = SystemLayout::bipartite("A", 2, "B", 2).unwrap();
//! let rho = DensityOperator::maximally_mixed(layout.clone());
//! let mut p = SdpProblem::new();
//! let s = p.var("S", layout, Cone::HermitianPsd).unwrap();
//! p.geq("dominates", s.clone(), Expr::constant(rho.op())).unwrap();
//! p.minimize(s.trace().unwrap()).unwrap();
//! let sol = p.solve(&SolverOptions::default()).unwrap();
//! assert!((sol.primal_value - 1.0).abs() < 1e-7);
//! ```

mod dump;
mod embed;
mod ipm;
mod model;

use nalgebra::DVector;
use serde::Serialize;

pub use dump::dump_text;
pub use embed::{embed_hermitian, embed_real, unembed_dual, unembed_primal, BlockOrigin, ConeProgram, GEntry};
pub use model::{Cone, Constraint, Expr, LinearMap, Relation, SdpProblem, Sense, VarId, Variable};

use crate::error::{Error, Result};
use crate::operators::HermitianOperator;
use model::{basis_pairs, hermitian_from_coords};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { gap_tol: 1e-8, feas_tol: 1e-8, max_iter: 200 }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol > 0.0 && self.feas_tol > 0.0) {
            return Err(Error::InvalidArgument("solver tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-iteration solver state passed to progress callbacks.
#[derive(Clone, Copy, Debug)]
pub struct IterationInfo {
    pub iteration: usize,
    pub pcost: f64,
    pub dcost: f64,
    pub gap: f64,
    pub pres: f64,
    pub dres: f64,
    pub tau: f64,
    pub kappa: f64,
}

/// Result of [`SdpProblem::solve`]. Objective values are for the problem as
/// posed (a maximization reports its maximum).
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub variables: Vec<(String, HermitianOperator)>,
    /// Dual operator of each constraint, paired with `Re Tr(Y · expr)`.
    pub constraint_duals: Vec<(String, nalgebra::DMatrix<crate::operators::C64>)>,
    /// How equality constraints were passed to the backend.
    pub equality_realization: &'static str,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn variable(&self, name: &str) -> Option<&HermitianOperator> {
        self.variables.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// `|primal − dual| / max(1, |primal|)`.
    pub fn relative_gap(&self) -> f64 {
        (self.primal_value - self.dual_value).abs() / self.primal_value.abs().max(1.0)
    }

    /// Error unless the status is optimal.
    pub fn require_optimal(self) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::Solver { status: self.status, iterations: self.iterations })
        }
    }
}

impl SdpProblem {
    pub fn solve(&self, opts: &SolverOptions) -> Result<SdpSolution> {
        self.solve_inner(opts, None)
    }

    /// Largest `|Re Tr(Y · expr(x))|` over the constraints at `sol`: the
    /// complementary-slackness residual, zero at an exact optimum.
    pub fn complementarity_residual(&self, sol: &SdpSolution) -> f64 {
        let values: Vec<HermitianOperator> = sol.variables.iter().map(|(_, v)| v.clone()).collect();
        self.constraints
            .iter()
            .filter_map(|c| {
                let (_, y) = sol.constraint_duals.iter().find(|(n, _)| *n == c.name)?;
                let x = c.expr.evaluate(&values);
                Some((y * x).trace().re.abs())
            })
            .fold(0.0, f64::max)
    }

    /// As [`SdpProblem::solve`], calling `progress` after each iteration.
    pub fn solve_with_progress(&self, opts: &SolverOptions, progress: &mut dyn FnMut(&IterationInfo)) -> Result<SdpSolution> {
        self.solve_inner(opts, Some(progress))
    }

    fn solve_inner(&self, opts: &SolverOptions, progress: Option<&mut dyn FnMut(&IterationInfo)>) -> Result<SdpSolution> {
        opts.validate()?;
        let prog = embed_real(self)?;
        let out = ipm::solve(&prog, opts, progress);
        let sign = if prog.negated { -1.0 } else { 1.0 };
        let primal_value = sign * out.pcost + prog.objective_offset;
        let dual_value = sign * out.dcost + prog.objective_offset;

        let variables = self
            .variables
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let d = v.layout.dim();
                let off = prog.var_offsets[k];
                let xs: Vec<f64> = out.x.rows(off, d * d).iter().copied().collect();
                let m = hermitian_from_coords(&xs, d, &basis_pairs(d));
                (v.name.clone(), HermitianOperator::from_parts(v.layout.clone(), m))
            })
            .collect();

        let mut constraint_duals = Vec::new();
        for (bi, origin) in prog.block_origin.iter().enumerate() {
            if let BlockOrigin::Constraint(ci) = origin {
                let w = unembed_dual(&out.z[bi]) * crate::operators::C64::new(2.0, 0.0);
                constraint_duals.push((self.constraints[*ci].name.clone(), w));
            }
        }
        for (ci, rows) in &prog.eq_rows {
            let d = self.constraints[*ci].expr.layout().dim();
            let ys: DVector<f64> = out.y.rows(rows.start, rows.len()).into_owned();
            // Equality rows are coordinates; diagonal rows pair with weight 1,
            // off-diagonal coordinate rows pair with weight 2 in Re Tr(Y X).
            let mut half: Vec<f64> = ys.iter().copied().collect();
            for v in half.iter_mut().skip(d) {
                *v /= 2.0;
            }
            let m = hermitian_from_coords(&half, d, &basis_pairs(d));
            constraint_duals.push((self.constraints[*ci].name.clone(), m));
        }

        Ok(SdpSolution {
            status: out.status,
            primal_value,
            dual_value,
            gap: out.gap,
            iterations: out.iterations,
            variables,
            constraint_duals,
            equality_realization: "native",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{maximally_entangled, DensityOperator, SystemLayout};
    use approx::assert_relative_eq;

    fn single(label: &str, d: usize) -> SystemLayout {
        SystemLayout::new([(label.to_string(), d)], Vec::<String>::new()).unwrap()
    }

    #[test]
    fn trace_of_dominating_operator() {
        let rho = DensityOperator::maximally_mixed(single("A", 2));
        let mut p = SdpProblem::new();
        let s = p.var("S", single("A", 2), Cone::HermitianPsd).unwrap();
        p.geq("dom", s.clone(), Expr::constant(rho.op())).unwrap();
        p.minimize(s.trace().unwrap()).unwrap();
        let sol = p.solve(&SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.primal_value, 1.0, epsilon = 1e-7);
        assert_relative_eq!(sol.dual_value, 1.0, epsilon = 1e-7);
        assert_eq!(sol.equality_realization, "native");
    }

    #[test]
    fn operator_norm_epigraph_of_constant() {
        let x = HermitianOperator::from_real_diagonal(single("A", 2), &[3.0, -5.0]).unwrap();
        let mut p = SdpProblem::new();
        // A dummy variable keeps the program non-empty; the constant carries X.
        let y = p.var("Y", single("A", 2), Cone::HermitianPsd).unwrap();
        let expr = Expr::constant(&x).add(y.clone().scale(0.0)).unwrap();
        let t = p.inf_norm_epigraph("t", expr, false).unwrap();
        p.minimize(t.add(y.trace().unwrap()).unwrap()).unwrap();
        let sol = p.solve(&SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.primal_value, 5.0, epsilon = 1e-6);
    }

    #[test]
    fn contradictory_constraints_are_infeasible() {
        let mut p = SdpProblem::new();
        let s = p.var("S", single("A", 2), Cone::HermitianPsd).unwrap();
        p.geq("big", s.clone(), Expr::constant(&HermitianOperator::identity(single("A", 2)))).unwrap();
        p.leq("small", s.clone().trace().unwrap(), Expr::scalar(0.5)).unwrap();
        p.minimize(s.trace().unwrap()).unwrap();
        let sol = p.solve(&SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(sol.clone().require_optimal().is_err());
    }

    #[test]
    fn unbounded_detected() {
        let mut p = SdpProblem::new();
        let s = p.var("S", single("A", 2), Cone::HermitianFree).unwrap();
        p.geq("lower", s.clone(), Expr::constant(&HermitianOperator::identity(single("A", 2)))).unwrap();
        p.maximize(s.trace().unwrap()).unwrap();
        let sol = p.solve(&SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn equality_constrained_negativity_dual() {
        // inf Tr[K + L] s.t. T_B(K − L) = Φ₂, K, L ⪰ 0 → ‖T_B Φ₂‖₁ = 2.
        let phi = maximally_entangled(2);
        let l = phi.layout().clone();
        let mut p = SdpProblem::new();
        let k = p.var("K", l.clone(), Cone::HermitianPsd).unwrap();
        let lv = p.var("L", l, Cone::HermitianPsd).unwrap();
        let diff = k.clone().sub(lv.clone()).unwrap().pt_b().unwrap();
        p.equal("pt", diff, Expr::constant(phi.op())).unwrap();
        p.minimize(k.add(lv).unwrap().trace().unwrap()).unwrap();
        let sol = p.solve(&SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_relative_eq!(sol.primal_value, 2.0, epsilon = 1e-7);
        assert!(sol.relative_gap() < 1e-7);
    }

    #[test]
    fn progress_callback_and_determinism() {
        let phi = maximally_entangled(2);
        let build = || {
            let mut p = SdpProblem::new();
            let s = p.var("S", phi.layout().clone(), Cone::HermitianPsd).unwrap();
            let rho_t = Expr::constant(phi.op()).pt_b().unwrap();
            let s_t = s.clone().pt_b().unwrap();
            p.geq("upper", s_t.clone(), rho_t.clone()).unwrap();
            p.geq("lower", rho_t, s_t.neg()).unwrap();
            p.minimize(s.trace().unwrap()).unwrap();
            p
        };
        let mut seen = 0;
        let a = build().solve_with_progress(&SolverOptions::default(), &mut |_| seen += 1).unwrap();
        let b = build().solve(&SolverOptions::default()).unwrap();
        assert!(seen >= a.iterations);
        assert_eq!(a.primal_value.to_bits(), b.primal_value.to_bits());
        assert_relative_eq!(a.primal_value, 2.0, epsilon = 1e-7);
        assert!(build().complementarity_residual(&a) < 1e-6);
    }

    #[test]
    fn random_psd_operator_norm() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 4;
        let g = crate::operators::CMatrix::from_fn(n, n, |_, _| {
            crate::operators::C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        let x = HermitianOperator::from_parts(single("A", n), &g * g.adjoint());
        let mut p = SdpProblem::new();
        let y = p.var("Y", single("A", n), Cone::HermitianPsd).unwrap();
        let expr = Expr::constant(&x).add(y.clone().scale(0.0)).unwrap();
        let t = p.inf_norm_epigraph("t", expr, true).unwrap();
        p.minimize(t.add(y.trace().unwrap()).unwrap()).unwrap();
        let sol = p.solve(&SolverOptions::default()).unwrap();
        assert_relative_eq!(sol.primal_value, x.operator_norm(), epsilon = 1e-7 * x.operator_norm().max(1.0));
    }
}
