//! Small dense semidefinite programming: a modelling layer, an interior-point solver,
//! complex-to-real embedding and beamformer extraction from solved matrices.

mod beamform;
mod embed;
mod ipm;
mod problem;

pub use beamform::{extract_beamformer, reduce_rank, solve_min_gain_beamforming, MinGain};
pub use embed::{embed, herm_quad_coeff, recover_hermitian, trace_coeff};
pub use ipm::{SolverOptions, Status};
pub use problem::{Affine, BlockVar, Constraint, ScalarKind, ScalarVar, SdpProblem};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Solution of an [`SdpProblem`], expressed in the user's variables.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub blocks: Vec<DMatrix<f64>>,
    pub scalars: Vec<f64>,
    /// Primal objective (of the maximization).
    pub objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub iterations: usize,
    pub status: Status,
}

impl SdpSolution {
    pub fn block(&self, b: BlockVar) -> &DMatrix<f64> {
        &self.blocks[b.0]
    }

    pub fn scalar(&self, s: ScalarVar) -> f64 {
        self.scalars[s.0]
    }

    /// Optimal, or stopped early with a gap and residual small enough to trust.
    pub fn is_usable(&self) -> bool {
        match self.status {
            Status::Optimal => true,
            Status::MaxIterations => self.gap <= 1e-5 && self.primal_residual <= 1e-5,
            _ => false,
        }
    }
}

pub fn solve_sdp(problem: &SdpProblem, tol: f64) -> Result<SdpSolution> {
    solve_sdp_with(
        problem,
        &SolverOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn solve_sdp_with(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    if !(opts.tol > 0.0 && opts.tol <= 1e-2) {
        return Err(Error::domain(format!("solver tolerance {} outside (0, 1e-2]", opts.tol)));
    }
    if opts.max_iter == 0 {
        return Err(Error::domain("max_iter must be positive"));
    }
    let compiled = problem.compile()?;
    let raw = ipm::solve_standard(&compiled.std, opts);
    let blocks = raw.x.mats[..compiled.user_blocks].to_vec();
    let scalars = compiled
        .scalar_slots
        .iter()
        .map(|&(p, m)| raw.x.lin[p] - m.map_or(0.0, |m| raw.x.lin[m]))
        .collect();
    Ok(SdpSolution {
        blocks,
        scalars,
        objective: compiled.objective_constant - raw.primal_objective,
        dual_objective: compiled.objective_constant - raw.dual_objective,
        gap: raw.gap,
        primal_residual: raw.primal_residual,
        iterations: raw.iterations,
        status: raw.status,
    })
}

/// Like [`solve_sdp`], but a non-usable status becomes [`Error::Solver`].
pub fn solve_sdp_checked(problem: &SdpProblem, tol: f64) -> Result<SdpSolution> {
    let sol = solve_sdp(problem, tol)?;
    if sol.is_usable() {
        Ok(sol)
    } else {
        Err(Error::Solver(format!(
            "status {:?} after {} iterations (gap {:.3e}, residual {:.3e})",
            sol.status, sol.iterations, sol.gap, sol.primal_residual
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_in_sdp_form() {
        // max x + y  s.t. x + 2y <= 4, 3x + y <= 6, x,y >= 0  -> (8/5, 6/5), value 14/5
        let mut p = SdpProblem::new();
        let x = p.add_scalar(ScalarKind::Nonneg);
        let y = p.add_scalar(ScalarKind::Nonneg);
        p.maximize(Affine::scalar(x, 1.0).plus_scalar(y, 1.0));
        p.constrain(Constraint::Le(Affine::scalar(x, 1.0).plus_scalar(y, 2.0).plus_constant(-4.0)));
        p.constrain(Constraint::Le(Affine::scalar(x, 3.0).plus_scalar(y, 1.0).plus_constant(-6.0)));
        let s = solve_sdp(&p, 1e-9).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - 2.8).abs() < 1e-7);
        assert!((s.scalar(x) - 1.6).abs() < 1e-6);
        assert!((s.scalar(y) - 1.2).abs() < 1e-6);
    }

    #[test]
    fn max_eigenvalue() {
        // max <C, X> s.t. tr X = 1, X psd  -> λmax(C)
        let c = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 1.0]);
        let mut p = SdpProblem::new();
        let b = p.add_block(3);
        p.maximize(Affine::trace(b, c.clone()));
        p.constrain(Constraint::Eq(Affine::trace(b, DMatrix::identity(3, 3)).plus_constant(-1.0)));
        let s = solve_sdp(&p, 1e-9).unwrap();
        let lmax = c.symmetric_eigenvalues().max();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - lmax).abs() < 1e-7, "{} vs {lmax}", s.objective);
    }

    #[test]
    fn free_scalar_and_lmi() {
        // max t s.t. [[1, t],[t, 4]] psd -> t = 2
        let mut p = SdpProblem::new();
        let t = p.add_scalar(ScalarKind::Free);
        p.maximize(Affine::scalar(t, 1.0));
        p.constrain(Constraint::Lmi(vec![
            vec![Affine::constant(1.0), Affine::scalar(t, 1.0)],
            vec![Affine::scalar(t, 1.0), Affine::constant(4.0)],
        ]));
        let s = solve_sdp(&p, 1e-9).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.scalar(t) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn detects_infeasible() {
        let mut p = SdpProblem::new();
        let x = p.add_scalar(ScalarKind::Nonneg);
        p.maximize(Affine::scalar(x, 1.0));
        p.constrain(Constraint::Eq(Affine::scalar(x, 1.0).plus_constant(1.0)));
        let s = solve_sdp(&p, 1e-8).unwrap();
        assert_eq!(s.status, Status::Infeasible);
        assert!(solve_sdp_checked(&p, 1e-8).is_err());
    }

    #[test]
    fn detects_unbounded() {
        let mut p = SdpProblem::new();
        let x = p.add_scalar(ScalarKind::Nonneg);
        let y = p.add_scalar(ScalarKind::Nonneg);
        p.maximize(Affine::scalar(x, 1.0));
        p.constrain(Constraint::Ge(Affine::scalar(x, 1.0).plus_scalar(y, -1.0)));
        let s = solve_sdp(&p, 1e-8).unwrap();
        assert_eq!(s.status, Status::Unbounded);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let p = SdpProblem::new();
        assert!(matches!(solve_sdp(&p, 0.0), Err(Error::Domain(_))));
        assert!(matches!(solve_sdp(&p, 0.5), Err(Error::Domain(_))));
    }
}
