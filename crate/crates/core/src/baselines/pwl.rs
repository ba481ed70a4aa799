//! Monolithic model: the master plus squared pressures, compressor ratio
//! rows and an incremental piecewise-linear encoding of `G|G|` per pipeline
//! and period, solved as one MILP.

use std::time::Instant;

use serde::Serialize;

use crate::master::{MasterConfig, MasterError, MasterProblem, Schedule, VarKind};
use crate::netmodel::DispatchCase;
use crate::solvecore::{PwlEncoding, Sense};

#[derive(Clone, Debug)]
pub struct PwlConfig {
    /// Segments per pipeline flow-square encoding.
    pub segments: usize,
    pub master: MasterConfig,
}

impl Default for PwlConfig {
    fn default() -> Self {
        let mut master = MasterConfig::default();
        // the monolithic tree rarely closes on multi-pipeline cases; stop
        // with the incumbent and report the remaining gap
        master.mip.node_limit = 200;
        master.mip.gap = 1e-4;
        master.lp_tangent_rounds = 100;
        Self {
            segments: 56,
            master,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PwlStats {
    pub n_binaries: usize,
    pub n_continuous: usize,
    pub n_rows: usize,
    /// Binaries introduced by the flow-square encodings alone.
    pub weymouth_binaries: usize,
    pub nodes: usize,
    /// Relative gap left by the tree search; `converged` when within the
    /// configured MIP gap.
    pub mip_gap: f64,
    pub converged: bool,
    pub wall_s: f64,
}

#[derive(Clone, Debug)]
pub struct PwlOutcome {
    /// Schedule with `point.pi` filled from the model's pressure columns.
    pub schedule: Schedule,
    pub stats: PwlStats,
}

/// Master model extended with pressures and flow-square encodings; returns
/// the model, the index of the first pressure column and the number of
/// binaries the flow-square encodings added.
pub fn build_pwl(case: &DispatchCase, cfg: &PwlConfig) -> (MasterProblem, usize, usize) {
    let mut m = MasterProblem::new(case, &cfg.master);
    let g = &case.gas;
    let nt = case.n_periods();
    let nn = g.nodes.len();
    let lay = m.layout.clone();
    let binaries_before = m.mip().binaries.len();

    let pi0 = m.mip().lp.num_vars();
    for _ in 0..nt {
        for n in &g.nodes {
            m.mip_mut().lp.add_var(0.0, n.pi_min_sq, n.pi_max_sq);
        }
    }
    let pi = |t: usize, n: usize| pi0 + t * nn + n;
    for t in 0..nt {
        for c in &g.compressors {
            m.add_extra_row(
                vec![(pi(t, c.to), 1.0), (pi(t, c.from), -c.r_min_sq)],
                Sense::Ge,
                0.0,
            );
            m.add_extra_row(
                vec![(pi(t, c.to), 1.0), (pi(t, c.from), -c.r_max_sq)],
                Sense::Le,
                0.0,
            );
        }
    }
    let segments = cfg.segments.max(1);
    for (l, p) in g.pipelines.iter().enumerate() {
        let cap = p.flow_cap(&g.nodes);
        for t in 0..nt {
            let gj = lay.index(VarKind::Gpipe, t, l);
            let lp = &mut m.mip_mut().lp;
            lp.lower[gj] = -cap;
            lp.upper[gj] = cap;
            if cap <= 0.0 {
                continue;
            }
            let mut enc = PwlEncoding::uniform(-cap, cap, segments, |x| x * x.abs())
                .expect("valid flow breakpoints");
            let rows_before = m.mip().lp.num_rows();
            enc.attach(
                m.mip_mut(),
                &[(gj, 1.0)],
                &[(pi(t, p.from), p.k), (pi(t, p.to), -p.k)],
            );
            // keep row tags aligned with the rows the encoding appended
            let added = m.mip().lp.num_rows() - rows_before;
            m.tag_extra_rows(added);
        }
    }
    let weymouth_binaries = m.mip().binaries.len() - binaries_before;
    (m, pi0, weymouth_binaries)
}

pub fn run_pwl(case: &DispatchCase, cfg: &PwlConfig) -> Result<PwlOutcome, MasterError> {
    let started = Instant::now();
    let (mut m, pi0, weymouth_binaries) = build_pwl(case, cfg);
    let mut schedule = m.solve(case)?;
    let nn = case.gas.nodes.len();
    let x = m.last_solution();
    schedule.point.pi = (0..case.n_periods())
        .map(|t| x[pi0 + t * nn..pi0 + (t + 1) * nn].to_vec())
        .collect();
    let stats = PwlStats {
        n_binaries: m.mip().binaries.len(),
        n_continuous: m.mip().lp.num_vars() - m.mip().binaries.len(),
        n_rows: m.mip().lp.num_rows(),
        weymouth_binaries,
        nodes: schedule.stats.mip_nodes,
        mip_gap: schedule.stats.mip_gap,
        converged: schedule.stats.mip_optimal,
        wall_s: started.elapsed().as_secs_f64(),
    };
    Ok(PwlOutcome { schedule, stats })
}
