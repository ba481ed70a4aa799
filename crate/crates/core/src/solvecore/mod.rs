//! Optimisation kernel: sparse revised simplex with duals, branch and bound,
//! outer-approximation tangents and incremental piecewise-linear encodings.

mod factor;
pub mod lp;
pub mod mip;
pub mod oa;
mod presolve;
pub mod pwl;
mod simplex;

pub use lp::{Basis, LinearProgram, LpSolution, LpStatus, Row, Sense, VarStatus};
pub use mip::{
    solve_mip, solve_mip_with, IncrementalGroup, MipOptions, MipSolution, MipStatus,
    MixedIntegerProgram, Separator,
};
pub use oa::{epigraph_violation, oa_refine, OaCut};
pub use pwl::{encode_pwl, PwlEncoding, PwlError};
pub use simplex::SimplexOptions;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

/// Solves `lp` from a cold start.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, SolveError> {
    solve_lp_with(lp, None, &SimplexOptions::default())
}

/// Solves `lp`, optionally warm-starting from `hint`.
pub fn solve_lp_with(
    lp: &LinearProgram,
    hint: Option<&Basis>,
    opts: &SimplexOptions,
) -> Result<LpSolution, SolveError> {
    lp.validate()?;
    let mut s = simplex::Simplex::new(lp, &lp.lower, &lp.upper, hint, opts);
    let status = s.solve()?;
    Ok(s.extract(lp, &lp.lower, &lp.upper, status))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_row_dual() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row([(x, 1.0)], Sense::Ge, 3.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[x] - 3.0).abs() < 1e-9);
        assert!((s.duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_row([(x, 1.0)], Sense::Ge, 2.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, 0.0, f64::INFINITY);
        let y = lp.add_var(0.0, 0.0, f64::INFINITY);
        lp.add_row([(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn slack_pair_equality_dual() {
        // min L1 + L2  s.t.  p_i - p_j + L1 - L2 = 121,  p in [0, 100]
        let mut lp = LinearProgram::new();
        let pi = lp.add_var(0.0, 0.0, 100.0);
        let pj = lp.add_var(0.0, 0.0, 100.0);
        let l1 = lp.add_var(1.0, 0.0, f64::INFINITY);
        let l2 = lp.add_var(1.0, 0.0, f64::INFINITY);
        lp.add_row(
            [(pi, 1.0), (pj, -1.0), (l1, 1.0), (l2, -1.0)],
            Sense::Eq,
            121.0,
        );
        let s = solve_lp(&lp).unwrap();
        assert!((s.objective - 21.0).abs() < 1e-9);
        assert!((s.duals[0] - 1.0).abs() < 1e-9);

        lp.rows[0].rhs = -121.0;
        let s = solve_lp(&lp).unwrap();
        assert!((s.objective - 21.0).abs() < 1e-9);
        assert!((s.duals[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn warm_start_reuses_basis() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, 0.0, 10.0);
        let y = lp.add_var(-1.0, 0.0, 10.0);
        lp.add_row([(x, 1.0), (y, 2.0)], Sense::Le, 8.0);
        lp.add_row([(x, 3.0), (y, 1.0)], Sense::Le, 9.0);
        let cold = solve_lp(&lp).unwrap();
        let warm = solve_lp_with(&lp, cold.basis.as_ref(), &SimplexOptions::default()).unwrap();
        assert!((cold.objective - warm.objective).abs() < 1e-12);
        assert!(warm.iterations <= 1);
    }
}
