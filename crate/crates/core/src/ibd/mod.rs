//! Decomposition with per-period linear gas-feasibility checks.
//!
//! The master fixes pipeline flows `Ḡ`. For each period a small LP looks for
//! squared pressures within bounds and compressor ratios that reproduce
//! `Ḡ|Ḡ| = k (π_i - π_j)` on every pipeline, paying for any mismatch with
//! a pair of nonnegative slacks. A positive optimum `g` yields the cut
//!
//! ```text
//! g + Σ_l 2|Ḡ_l| u_l (G_l - Ḡ_l) <= 0
//! ```
//!
//! where `u_l = ∂g/∂(Ḡ_l|Ḡ_l|)` is the dual of pipeline row `l`. Periods are
//! independent, so the checks run as one parallel batch and each violated
//! period contributes its own cut.

mod log;

use std::time::Instant;

use ::log::{debug, info, warn};
use rayon::prelude::*;
use serde::Serialize;

pub use self::log::{ConvergenceLog, IterationRecord};

use crate::master::{FlowCut, MasterConfig, MasterError, MasterProblem, Schedule};
use crate::netmodel::DispatchCase;
use crate::solvecore::{
    solve_lp, solve_lp_with, LinearProgram, LpStatus, Sense, SimplexOptions, SolveError,
};

/// Anchor magnitude below which the flow-square gradient is replaced by a secant.
pub const ZERO_ANCHOR: f64 = 1e-6;
/// Half-width of that secant.
pub const SECANT_HALF_WIDTH: f64 = 1e-3;

/// Feasibility LP of one period.
#[derive(Clone, Debug)]
pub struct FeasibilitySubproblem {
    pub period: usize,
    pub anchors: Vec<f64>,
    pub lp: LinearProgram,
    pub n_nodes: usize,
    pub n_pipelines: usize,
}

impl FeasibilitySubproblem {
    pub fn pressure_var(&self, node: usize) -> usize {
        node
    }

    /// Slack columns `(L1, L2)` of pipeline `l`.
    pub fn slack_vars(&self, l: usize) -> (usize, usize) {
        (self.n_nodes + 2 * l, self.n_nodes + 2 * l + 1)
    }

    pub fn num_vars(&self) -> usize {
        self.lp.num_vars()
    }
}

/// Columns: squared pressures per node, then `(L1, L2)` per pipeline.
/// Rows: one flow-equation row per pipeline (right-hand side `Ḡ|Ḡ|`),
/// then two ratio rows per compressor.
pub fn build_subproblem(case: &DispatchCase, anchors: &[f64], t: usize) -> FeasibilitySubproblem {
    let g = &case.gas;
    assert_eq!(anchors.len(), g.pipelines.len(), "one anchor per pipeline");
    let mut lp = LinearProgram::new();
    for n in &g.nodes {
        lp.add_var(0.0, n.pi_min_sq, n.pi_max_sq);
    }
    let nn = g.nodes.len();
    for _ in &g.pipelines {
        lp.add_var(1.0, 0.0, f64::INFINITY);
        lp.add_var(1.0, 0.0, f64::INFINITY);
    }
    for (l, p) in g.pipelines.iter().enumerate() {
        let a = anchors[l];
        let terms = [
            (p.from, p.k),
            (p.to, -p.k),
            (nn + 2 * l, 1.0),
            (nn + 2 * l + 1, -1.0),
        ];
        lp.add_row(terms, Sense::Eq, a * a.abs());
    }
    for c in &g.compressors {
        lp.add_row([(c.to, 1.0), (c.from, -c.r_min_sq)], Sense::Ge, 0.0);
        lp.add_row([(c.to, 1.0), (c.from, -c.r_max_sq)], Sense::Le, 0.0);
    }
    FeasibilitySubproblem {
        period: t,
        anchors: anchors.to_vec(),
        lp,
        n_nodes: nn,
        n_pipelines: g.pipelines.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityResult {
    pub period: usize,
    /// Total flow-equation mismatch `g`.
    pub mismatch: f64,
    /// `∂g/∂(Ḡ_l|Ḡ_l|)` per pipeline.
    pub duals: Vec<f64>,
    pub pressures: Vec<f64>,
    /// Signed mismatch `L1 - L2` per pipeline.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IbdError {
    #[error(transparent)]
    Master(#[from] MasterError),
    #[error("period {period}: feasibility LP failed twice: {source}")]
    Subproblem { period: usize, source: SolveError },
    #[error("period {0}: pressure bounds and compressor ratios admit no pressure profile")]
    PressureInfeasible(usize),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Solves the feasibility LP; retries once with iterated scaling on a
/// numerical failure.
pub fn check_feasibility(sp: &FeasibilitySubproblem) -> Result<FeasibilityResult, IbdError> {
    let sol = match solve_lp(&sp.lp) {
        Ok(s) => s,
        Err(first) => {
            warn!(
                "period {}: feasibility LP failed ({first}); retrying with iterated scaling",
                sp.period
            );
            let opts = SimplexOptions {
                scale_passes: 4,
                ..SimplexOptions::default()
            };
            solve_lp_with(&sp.lp, None, &opts).map_err(|source| IbdError::Subproblem {
                period: sp.period,
                source,
            })?
        }
    };
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(IbdError::PressureInfeasible(sp.period)),
        LpStatus::Unbounded => {
            return Err(IbdError::Subproblem {
                period: sp.period,
                source: SolveError::NumericalFailure("mismatch LP reported unbounded".into()),
            })
        }
    }
    let duals = sol.duals[..sp.n_pipelines].to_vec();
    let residuals = (0..sp.n_pipelines)
        .map(|l| {
            let (a, b) = sp.slack_vars(l);
            sol.x[a] - sol.x[b]
        })
        .collect();
    Ok(FeasibilityResult {
        period: sp.period,
        mismatch: sol.objective.max(0.0),
        duals,
        pressures: sol.x[..sp.n_nodes].to_vec(),
        residuals,
    })
}

/// Cut data for one violated period.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfeasibilityCut {
    pub period: usize,
    pub mismatch: f64,
    pub duals: Vec<f64>,
    /// Flow-square slope per pipeline: `2|Ḡ|`, or the secant slope near zero.
    pub sigma: Vec<f64>,
    pub anchors: Vec<f64>,
    pub iteration: usize,
}

impl InfeasibilityCut {
    /// `σ_l u_l` per pipeline.
    pub fn slopes(&self) -> Vec<f64> {
        self.sigma
            .iter()
            .zip(&self.duals)
            .map(|(s, u)| s * u)
            .collect()
    }

    /// Left-hand side of the linear cut at `flows` (feasible side is `<= 0`).
    pub fn linear_value(&self, flows: &[f64]) -> f64 {
        self.mismatch
            + self
                .slopes()
                .iter()
                .zip(flows.iter().zip(&self.anchors))
                .map(|(s, (g, a))| s * (g - a))
                .sum::<f64>()
    }

    /// Left-hand side of the same cut written in the lifted variables
    /// `θ_l = G_l|G_l|`: `g + Σ u_l (θ_l - Ḡ_l|Ḡ_l|)`.
    pub fn lifted_value(&self, flows: &[f64]) -> f64 {
        self.mismatch
            + self
                .duals
                .iter()
                .zip(flows.iter().zip(&self.anchors))
                .map(|(u, (g, a))| u * (g * g.abs() - a * a.abs()))
                .sum::<f64>()
    }

    pub fn to_flow_cut(&self) -> FlowCut {
        let slopes = self.slopes();
        let mut terms = Vec::new();
        let mut rhs = -self.mismatch;
        for (l, (&s, &a)) in slopes.iter().zip(&self.anchors).enumerate() {
            if s != 0.0 {
                terms.push((self.period, l, s));
                rhs += s * a;
            }
        }
        FlowCut {
            terms,
            rhs,
            iteration: self.iteration,
        }
    }
}

/// The cut for a violated period, or `None` when `g <= eps`.
pub fn make_cut(
    res: &FeasibilityResult,
    anchors: &[f64],
    eps: f64,
    iteration: usize,
) -> Option<InfeasibilityCut> {
    if res.mismatch <= eps {
        return None;
    }
    let sigma = anchors
        .iter()
        .zip(&res.duals)
        .map(|(&a, &u)| {
            if a.abs() < ZERO_ANCHOR && u != 0.0 {
                // secant of G|G| over [-δ, δ]
                SECANT_HALF_WIDTH
            } else {
                2.0 * a.abs()
            }
        })
        .collect();
    Some(InfeasibilityCut {
        period: res.period,
        mismatch: res.mismatch,
        duals: res.duals.clone(),
        sigma,
        anchors: anchors.to_vec(),
        iteration,
    })
}

#[derive(Clone, Debug)]
pub struct IbdConfig {
    /// Mismatch tolerance in the flow-square units of the case.
    pub eps_feas: f64,
    pub max_iter: usize,
    pub workers: usize,
    pub master: MasterConfig,
}

impl Default for IbdConfig {
    fn default() -> Self {
        Self {
            eps_feas: 1e-4,
            max_iter: 200,
            workers: 1,
            master: MasterConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct IbdOutcome {
    /// Final master schedule; `point.pi` holds the pressures of the last sweep.
    pub schedule: Schedule,
    pub log: ConvergenceLog,
    pub converged: bool,
    pub iterations: usize,
    pub cuts: Vec<InfeasibilityCut>,
    /// Results of the final subproblem sweep, one per period.
    pub certificate: Vec<FeasibilityResult>,
}

/// Solves every period's feasibility LP on `pool`, in period order.
pub fn check_all(
    case: &DispatchCase,
    flows: &[Vec<f64>],
    pool: &rayon::ThreadPool,
) -> Result<Vec<FeasibilityResult>, IbdError> {
    pool.install(|| {
        (0..flows.len())
            .into_par_iter()
            .map(|t| check_feasibility(&build_subproblem(case, &flows[t], t)))
            .collect()
    })
}

pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool, IbdError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| IbdError::Pool(e.to_string()))
}

pub fn run_ibd(case: &DispatchCase, cfg: &IbdConfig) -> Result<IbdOutcome, IbdError> {
    let started = Instant::now();
    let pool = worker_pool(cfg.workers)?;
    let mut master = MasterProblem::new(case, &cfg.master);
    let mut log = ConvergenceLog::default();
    let mut cuts = Vec::new();
    let mut iter = 0;
    loop {
        iter += 1;
        let t0 = Instant::now();
        let mut schedule = master.solve(case)?;
        let t_master = t0.elapsed();
        let t1 = Instant::now();
        let results = check_all(case, &schedule.point.g_pipe, &pool)?;
        let t_sub = t1.elapsed();

        let mut added = 0;
        for (t, res) in results.iter().enumerate() {
            if let Some(cut) = make_cut(res, &schedule.point.g_pipe[t], cfg.eps_feas, iter) {
                master.add_cut(cut.to_flow_cut())?;
                cuts.push(cut);
                added += 1;
            }
        }
        let mismatches: Vec<f64> = results.iter().map(|r| r.mismatch).collect();
        log.push(IterationRecord {
            iter,
            master_obj: schedule.objective,
            mismatches,
            cuts_added: added,
            t_master_ms: t_master.as_secs_f64() * 1e3,
            t_sub_ms: t_sub.as_secs_f64() * 1e3,
            t_total_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        debug!(
            "iteration {iter}: objective {:.6}, {added} cuts",
            schedule.objective
        );

        let converged = added == 0;
        if converged || iter >= cfg.max_iter {
            if !converged {
                info!("stopped after {iter} iterations without reaching the mismatch tolerance");
            }
            schedule.point.pi = results.iter().map(|r| r.pressures.clone()).collect();
            return Ok(IbdOutcome {
                schedule,
                log,
                converged,
                iterations: iter,
                cuts,
                certificate: results,
            });
        }
    }
}
