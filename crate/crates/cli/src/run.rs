//! Runs one algorithm on a case and reduces the outcome to what the reports need.

use std::fmt;
use std::time::Instant;

use clap::ValueEnum;
use iegs_core::baselines::{run_bd, run_pwl, BdConfig, BdStatus, PwlConfig};
use iegs_core::ibd::{run_ibd, ConvergenceLog, IbdConfig, IbdError, IterationRecord};
use iegs_core::master::{MasterConfig, MasterError, Schedule};
use iegs_core::netmodel::DispatchCase;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Ibd,
    Bd,
    Pwl,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Ibd => "ibd",
            Algo::Bd => "bd",
            Algo::Pwl => "pwl",
        })
    }
}

/// Solver settings shared by every algorithm. `None` keeps the algorithm's
/// own default.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub eps_feas: f64,
    pub max_iter: usize,
    pub segments: usize,
    pub fuel_segments: usize,
    pub workers: usize,
    pub mip_gap: Option<f64>,
    pub node_limit: Option<usize>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.eps_feas > 0.0 && self.eps_feas.is_finite()) {
            return Err("--eps must be positive".into());
        }
        if self.max_iter == 0 {
            return Err("--max-iter must be at least 1".into());
        }
        if self.workers == 0 {
            return Err("--workers must be at least 1".into());
        }
        if self.segments < 2 {
            return Err("--segments must be at least 2".into());
        }
        if self.fuel_segments < 1 {
            return Err("--segments-eq7 must be at least 1".into());
        }
        if let Some(g) = self.mip_gap {
            if !(g > 0.0 && g.is_finite()) {
                return Err("--mip-gap must be positive".into());
            }
        }
        Ok(())
    }

    fn master(&self, mut m: MasterConfig) -> MasterConfig {
        m.fuel_segments = self.fuel_segments;
        if let Some(g) = self.mip_gap {
            m.mip.gap = g;
        }
        if let Some(n) = self.node_limit {
            m.mip.node_limit = n;
        }
        m
    }
}

/// Why a run produced no schedule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Failure {
    Infeasible,
    Solver,
}

#[derive(Clone, Debug)]
pub struct RunError {
    pub kind: Failure,
    pub message: String,
}

impl From<MasterError> for RunError {
    fn from(e: MasterError) -> Self {
        let kind = match e {
            MasterError::Infeasible { .. } => Failure::Infeasible,
            _ => Failure::Solver,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<IbdError> for RunError {
    fn from(e: IbdError) -> Self {
        match e {
            IbdError::Master(m) => m.into(),
            IbdError::PressureInfeasible(_) => Self {
                kind: Failure::Infeasible,
                message: e.to_string(),
            },
            _ => Self {
                kind: Failure::Solver,
                message: e.to_string(),
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub algo: Algo,
    pub schedule: Schedule,
    pub log: ConvergenceLog,
    pub iterations: usize,
    pub converged: bool,
    /// Algorithm-specific termination, e.g. `converged`, `max_iterations`.
    pub status: String,
    pub n_binaries: usize,
    pub n_continuous: usize,
    /// Around the solve call only.
    pub wall_s: f64,
}

pub fn run(case: &DispatchCase, algo: Algo, cfg: &RunConfig) -> Result<RunReport, RunError> {
    let started = Instant::now();
    let report = match algo {
        Algo::Ibd => {
            let c = IbdConfig {
                eps_feas: cfg.eps_feas,
                max_iter: cfg.max_iter,
                workers: cfg.workers,
                master: cfg.master(MasterConfig::default()),
            };
            let out = run_ibd(case, &c)?;
            let status = if out.converged {
                "converged"
            } else {
                "max_iterations"
            };
            RunReport {
                algo,
                n_binaries: out.schedule.stats.n_binaries,
                n_continuous: out.schedule.stats.n_continuous,
                schedule: out.schedule,
                log: out.log,
                iterations: out.iterations,
                converged: out.converged,
                status: status.into(),
                wall_s: 0.0,
            }
        }
        Algo::Bd => {
            let c = BdConfig {
                eps_feas: cfg.eps_feas,
                max_iter: cfg.max_iter,
                master: cfg.master(MasterConfig::default()),
                ..BdConfig::default()
            };
            let out = run_bd(case, &c)?;
            let status = match out.status {
                BdStatus::Converged => "converged",
                BdStatus::MaxIterations => "max_iterations",
                BdStatus::NewtonDiverged => "newton_diverged",
                BdStatus::Stalled => "stalled",
            };
            RunReport {
                algo,
                n_binaries: out.schedule.stats.n_binaries,
                n_continuous: out.schedule.stats.n_continuous,
                converged: out.converged(),
                schedule: out.schedule,
                log: out.log,
                iterations: out.iterations,
                status: status.into(),
                wall_s: 0.0,
            }
        }
        Algo::Pwl => {
            let defaults = PwlConfig::default();
            let c = PwlConfig {
                segments: cfg.segments,
                master: cfg.master(defaults.master),
            };
            let out = run_pwl(case, &c)?;
            let log = pwl_log(case, &out.schedule, out.stats.wall_s);
            let status = if out.stats.converged {
                "converged"
            } else {
                "node_limit"
            };
            RunReport {
                algo,
                schedule: out.schedule,
                log,
                iterations: 1,
                converged: out.stats.converged,
                status: status.into(),
                n_binaries: out.stats.n_binaries,
                n_continuous: out.stats.n_continuous,
                wall_s: 0.0,
            }
        }
    };
    Ok(RunReport {
        wall_s: started.elapsed().as_secs_f64(),
        ..report
    })
}

/// The monolithic model solves once; its log row carries the exact
/// flow-equation residual of the solution in place of a mismatch.
fn pwl_log(case: &DispatchCase, s: &Schedule, wall_s: f64) -> ConvergenceLog {
    let x = &s.point;
    let mismatches = (0..case.n_periods())
        .map(|t| {
            case.gas
                .pipelines
                .iter()
                .enumerate()
                .map(|(l, p)| {
                    let f = x.g_pipe[t][l];
                    (f * f.abs() - p.k * (x.pi[t][p.from] - x.pi[t][p.to])).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let ms = wall_s * 1e3;
    let mut log = ConvergenceLog::default();
    log.push(IterationRecord {
        iter: 1,
        master_obj: s.objective,
        mismatches,
        cuts_added: 0,
        t_master_ms: ms,
        t_sub_ms: 0.0,
        t_total_ms: ms,
    });
    log
}
