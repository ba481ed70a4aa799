//! Classic Benders baseline. The master is the same dispatch model the
//! decomposition uses; the gas side is then re-solved as one system over all
//! periods (storage links them) with the master's pipeline flows, gas-unit
//! fuel use, P2G output and loads held fixed. Each flow equation carries a
//! signed slack `w = Ḡ|Ḡ| - k(π_i - π_j)`, and a projected
//! Levenberg-Marquardt iteration drives the squared slacks and the residuals
//! of the nodal balances, compressor use, storage dynamics and ratio limits to
//! a stationary point. If slacks are left, a single cut aggregating every
//! period's mismatch `M` is added to the master:
//!
//! ```text
//! M + Σ_{t,l} sign(w_tl) σ_tl (G_tl - Ḡ_tl) <= 0
//! ```
//!
//! with `σ = 2|Ḡ|` (secant near zero as in the decomposition). The signs come
//! from a least-squares point rather than an LP dual, so the cut is a
//! heuristic linearization and can remove feasible flows.

use std::time::Instant;

use ::log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::ibd::{ConvergenceLog, IterationRecord, SECANT_HALF_WIDTH, ZERO_ANCHOR};
use crate::master::{FlowCut, MasterConfig, MasterError, MasterProblem, Schedule};
use crate::netmodel::{DispatchCase, OperatingPoint};

/// Column layout of the all-period gas system. Per period, in order:
/// compressor throughput and fuel use, squared pressures, storage exchange
/// and level, flow-equation slacks, well outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BdLayout {
    pub n_periods: usize,
    pub n_compressors: usize,
    pub n_nodes: usize,
    pub n_storages: usize,
    pub n_pipelines: usize,
    pub n_wells: usize,
}

impl BdLayout {
    pub fn new(case: &DispatchCase) -> Self {
        let g = &case.gas;
        Self {
            n_periods: case.n_periods(),
            n_compressors: g.compressors.len(),
            n_nodes: g.nodes.len(),
            n_storages: g.storages.len(),
            n_pipelines: g.pipelines.len(),
            n_wells: g.wells.len(),
        }
    }

    pub fn per_period(&self) -> usize {
        2 * self.n_compressors
            + self.n_nodes
            + 2 * self.n_storages
            + self.n_pipelines
            + self.n_wells
    }

    pub fn num_vars(&self) -> usize {
        self.n_periods * self.per_period()
    }

    fn base(&self, t: usize) -> usize {
        t * self.per_period()
    }
    pub fn gm(&self, t: usize, m: usize) -> usize {
        self.base(t) + m
    }
    pub fn gc(&self, t: usize, m: usize) -> usize {
        self.base(t) + self.n_compressors + m
    }
    pub fn pi(&self, t: usize, n: usize) -> usize {
        self.base(t) + 2 * self.n_compressors + n
    }
    pub fn gr(&self, t: usize, z: usize) -> usize {
        self.base(t) + 2 * self.n_compressors + self.n_nodes + z
    }
    pub fn s(&self, t: usize, z: usize) -> usize {
        self.gr(t, z) + self.n_storages
    }
    pub fn slack(&self, t: usize, l: usize) -> usize {
        self.base(t) + 2 * self.n_compressors + self.n_nodes + 2 * self.n_storages + l
    }
    pub fn gs(&self, t: usize, i: usize) -> usize {
        self.slack(t, 0) + self.n_pipelines + i
    }
}

/// The gas system with the master's coupling quantities fixed, plus the
/// current Newton point.
#[derive(Clone, Debug)]
pub struct BdSubproblemState {
    pub layout: BdLayout,
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Fixed net injection per period and node (P2G output minus gas-unit
    /// fuel use minus loads).
    pub injection: Vec<Vec<f64>>,
    /// Master pipeline flows per period.
    pub flows: Vec<Vec<f64>>,
    /// Current Levenberg parameter, relative to the Gauss-Newton diagonal.
    pub damping: f64,
    pipes: Vec<(usize, usize, f64)>,
    compressors: Vec<(usize, usize, f64, f64, f64)>,
    wells: Vec<usize>,
    storages: Vec<(usize, f64)>,
}

impl BdSubproblemState {
    /// State for the master point `p`, starting from its gas-side values with
    /// pressures at the middle of their bounds.
    pub fn from_point(case: &DispatchCase, p: &OperatingPoint) -> Self {
        let lay = BdLayout::new(case);
        let g = &case.gas;
        let n = lay.num_vars();
        let (mut lower, mut upper) = (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n]);
        let mut injection = vec![vec![0.0; lay.n_nodes]; lay.n_periods];
        for t in 0..lay.n_periods {
            for m in 0..lay.n_compressors {
                lower[lay.gm(t, m)] = 0.0;
                lower[lay.gc(t, m)] = 0.0;
            }
            for (i, node) in g.nodes.iter().enumerate() {
                lower[lay.pi(t, i)] = node.pi_min_sq;
                upper[lay.pi(t, i)] = node.pi_max_sq;
            }
            for (z, s) in g.storages.iter().enumerate() {
                (lower[lay.gr(t, z)], upper[lay.gr(t, z)]) = (-s.g_out, s.g_in);
                (lower[lay.s(t, z)], upper[lay.s(t, z)]) = (s.s_min, s.s_max);
            }
            for (i, w) in g.wells.iter().enumerate() {
                (lower[lay.gs(t, i)], upper[lay.gs(t, i)]) = (w.g_min, w.g_max);
            }
            let inj = &mut injection[t];
            for (k, q) in case.power.p2g.iter().enumerate() {
                inj[q.gas_node] += p.g_p[t][k];
            }
            for (j, u) in case.power.gas_units.iter().enumerate() {
                inj[u.gas_node] -= p.g_g[t][j];
            }
            for l in &g.gas_loads {
                inj[l.node] -= l.demand[t];
            }
        }
        let mut state = Self {
            layout: lay,
            x: vec![0.0; n],
            lower,
            upper,
            injection,
            flows: p.g_pipe.clone(),
            damping: 1e-4,
            pipes: g.pipelines.iter().map(|p| (p.from, p.to, p.k)).collect(),
            compressors: g
                .compressors
                .iter()
                .map(|c| (c.from, c.to, c.r_min_sq, c.r_max_sq, c.alpha))
                .collect(),
            wells: g.wells.iter().map(|w| w.node).collect(),
            storages: g.storages.iter().map(|s| (s.node, s.s0)).collect(),
        };
        state.x = state.initial_point(p);
        state
    }

    /// Gas-side values of `p` with flat-start pressures, projected on the bounds.
    pub fn initial_point(&self, p: &OperatingPoint) -> Vec<f64> {
        let lay = &self.layout;
        let mut x = self.flat_start();
        for t in 0..lay.n_periods {
            for m in 0..lay.n_compressors {
                x[lay.gm(t, m)] = p.g_m[t][m];
                x[lay.gc(t, m)] = p.g_c[t][m];
            }
            for z in 0..lay.n_storages {
                x[lay.gr(t, z)] = p.g_r[t][z];
                x[lay.s(t, z)] = p.s[t][z];
            }
            for i in 0..lay.n_wells {
                x[lay.gs(t, i)] = p.g_s[t][i];
            }
        }
        self.project(&mut x);
        self.sync_slacks(&mut x);
        x
    }

    /// Slacks are determined by the pressures; keeps their slots current.
    fn sync_slacks(&self, x: &mut [f64]) {
        let w = self.flow_residuals(x);
        for (t, row) in w.iter().enumerate() {
            for (l, &v) in row.iter().enumerate() {
                x[self.layout.slack(t, l)] = v;
            }
        }
    }

    /// Midpoint of every finite box, zero elsewhere.
    pub fn flat_start(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| match (l.is_finite(), u.is_finite()) {
                (true, true) => 0.5 * (l + u),
                (true, false) => l,
                (false, true) => u,
                (false, false) => 0.0,
            })
            .collect()
    }

    fn project(&self, x: &mut [f64]) {
        for ((v, &l), &u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(l, u);
        }
    }

    /// Residual rows in a fixed order: per period the nodal balances,
    /// compressor use, storage dynamics, the two ratio hinges per
    /// compressor and the flow equations; then one cyclic storage row per
    /// storage. Each row carries its sparse gradient and a magnitude used
    /// for scaling.
    fn residuals(&self, x: &[f64]) -> Vec<ResidualRow> {
        let lay = &self.layout;
        let mut rows = Vec::new();
        for t in 0..lay.n_periods {
            let mut bal: Vec<ResidualRow> = self.injection[t]
                .iter()
                .map(|&v| ResidualRow {
                    period: t,
                    value: v,
                    scale: v.abs(),
                    grad: Vec::new(),
                })
                .collect();
            let add = |row: &mut ResidualRow, j: usize, a: f64| {
                row.value += a * x[j];
                row.scale += (a * x[j]).abs();
                row.grad.push((j, a));
            };
            for (i, &node) in self.wells.iter().enumerate() {
                add(&mut bal[node], lay.gs(t, i), 1.0);
            }
            for (m, &(from, to, ..)) in self.compressors.iter().enumerate() {
                add(&mut bal[from], lay.gm(t, m), -1.0);
                add(&mut bal[from], lay.gc(t, m), -1.0);
                add(&mut bal[to], lay.gm(t, m), 1.0);
            }
            for (l, &(from, to, _)) in self.pipes.iter().enumerate() {
                let f = self.flows[t][l];
                bal[from].value -= f;
                bal[to].value += f;
                bal[from].scale += f.abs();
                bal[to].scale += f.abs();
            }
            for (z, &(node, _)) in self.storages.iter().enumerate() {
                add(&mut bal[node], lay.gr(t, z), -1.0);
            }
            rows.extend(bal);

            for (m, &(_, _, _, _, alpha)) in self.compressors.iter().enumerate() {
                let (gc, gm) = (lay.gc(t, m), lay.gm(t, m));
                rows.push(ResidualRow {
                    period: t,
                    value: x[gc] - alpha * x[gm],
                    scale: x[gc].abs() + (alpha * x[gm]).abs(),
                    grad: vec![(gc, 1.0), (gm, -alpha)],
                });
            }
            for (z, &(_, s0)) in self.storages.iter().enumerate() {
                let (s, gr) = (lay.s(t, z), lay.gr(t, z));
                let (prev_val, mut grad) = if t == 0 {
                    (s0, vec![(s, 1.0), (gr, -1.0)])
                } else {
                    let p = lay.s(t - 1, z);
                    (x[p], vec![(s, 1.0), (p, -1.0), (gr, -1.0)])
                };
                grad.sort_by_key(|e| e.0);
                rows.push(ResidualRow {
                    period: t,
                    value: x[s] - prev_val - x[gr],
                    scale: x[s].abs() + prev_val.abs() + x[gr].abs(),
                    grad,
                });
            }
            for &(from, to, r_min, r_max, _) in &self.compressors {
                let (pf, pt) = (lay.pi(t, from), lay.pi(t, to));
                let lo = x[pt] - r_min * x[pf];
                let hi = x[pt] - r_max * x[pf];
                let scale = x[pt].abs() + r_max * x[pf].abs();
                // hinge rows: zero with no gradient while the ratio holds
                let hinge = |v: f64, active: bool, r: f64| ResidualRow {
                    period: t,
                    value: if active { v } else { 0.0 },
                    scale,
                    grad: if active {
                        vec![(pt, 1.0), (pf, -r)]
                    } else {
                        Vec::new()
                    },
                };
                rows.push(hinge(lo, lo < 0.0, r_min));
                rows.push(hinge(hi, hi > 0.0, r_max));
            }
            for (l, &(from, to, k)) in self.pipes.iter().enumerate() {
                // the slack row, with the slack eliminated
                let (pf, pt) = (lay.pi(t, from), lay.pi(t, to));
                let f = self.flows[t][l];
                rows.push(ResidualRow {
                    period: t,
                    value: f * f.abs() - k * (x[pf] - x[pt]),
                    scale: f * f + k * (x[pf].abs() + x[pt].abs()),
                    grad: vec![(pf, -k), (pt, k)],
                });
            }
        }
        if lay.n_periods > 0 {
            let t = lay.n_periods - 1;
            for (z, &(_, s0)) in self.storages.iter().enumerate() {
                let s = lay.s(t, z);
                rows.push(ResidualRow {
                    period: t,
                    value: x[s] - s0,
                    scale: x[s].abs() + s0.abs(),
                    grad: vec![(s, 1.0)],
                });
            }
        }
        rows
    }

    /// Flow-equation slacks `Ḡ|Ḡ| - k(π_i - π_j)` per period and pipeline.
    pub fn flow_residuals(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let lay = &self.layout;
        (0..lay.n_periods)
            .map(|t| {
                self.pipes
                    .iter()
                    .enumerate()
                    .map(|(l, &(from, to, k))| {
                        let f = self.flows[t][l];
                        f * f.abs() - k * (x[lay.pi(t, from)] - x[lay.pi(t, to)])
                    })
                    .collect()
            })
            .collect()
    }

    /// Writes the gas-side values of `x` into `p` (pressures included;
    /// pipeline flows are the master's and stay).
    pub fn write_point(&self, x: &[f64], p: &mut OperatingPoint) {
        let lay = &self.layout;
        p.pi = vec![vec![0.0; lay.n_nodes]; lay.n_periods];
        for t in 0..lay.n_periods {
            for m in 0..lay.n_compressors {
                p.g_m[t][m] = x[lay.gm(t, m)];
                p.g_c[t][m] = x[lay.gc(t, m)];
            }
            for n in 0..lay.n_nodes {
                p.pi[t][n] = x[lay.pi(t, n)];
            }
            for z in 0..lay.n_storages {
                p.g_r[t][z] = x[lay.gr(t, z)];
                p.s[t][z] = x[lay.s(t, z)];
            }
            for i in 0..lay.n_wells {
                p.g_s[t][i] = x[lay.gs(t, i)];
            }
        }
    }
}

#[derive(Clone, Debug)]
struct ResidualRow {
    period: usize,
    value: f64,
    scale: f64,
    grad: Vec<(usize, f64)>,
}

fn half_square(rows: &[ResidualRow]) -> f64 {
    0.5 * rows.iter().map(|r| r.value * r.value).sum::<f64>()
}

fn scaled_max(rows: &[ResidualRow]) -> f64 {
    rows.iter()
        .map(|r| r.value.abs() / (1.0 + r.scale))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct NewtonConfig {
    /// Initial Levenberg parameter, relative to the Gauss-Newton diagonal.
    pub damping: f64,
    pub max_nr_iter: usize,
    /// Scaled residual accepted as a solution.
    pub tol: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            damping: 1e-4,
            max_nr_iter: 200,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NewtonStatus {
    /// Every scaled residual is within tolerance.
    Solved,
    /// Stationary point of the squared residuals with a nonzero residual left.
    Stationary,
    /// No stationary point within the iteration budget, or the damped system
    /// stayed singular after the damping and flat-start retries.
    Diverged,
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub status: NewtonStatus,
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Flow-equation slack per period and pipeline.
    pub flow_residuals: Vec<Vec<f64>>,
    /// Sum of absolute residuals per period, all row kinds.
    pub period_mismatch: Vec<f64>,
    pub scaled_residual: f64,
}

/// Backtracking halvings per step.
const MAX_HALVINGS: usize = 10;
/// Damping increases tried on a failed factorization before restarting.
const MAX_DAMPING_RETRIES: usize = 6;
/// Relative projected-gradient size treated as stationary.
const STATIONARY_TOL: f64 = 1e-10;

/// Projected Levenberg-Marquardt on the squared residuals of `state` from
/// `init` (the state's point when `None`).
pub fn newton_gas(
    state: &mut BdSubproblemState,
    init: Option<&[f64]>,
    cfg: &NewtonConfig,
) -> NewtonOutcome {
    let mut x = init.map(|v| v.to_vec()).unwrap_or_else(|| state.x.clone());
    state.project(&mut x);
    state.damping = cfg.damping;
    let mut flat_retry = true;
    let mut iterations = 0;
    let status = loop {
        match lm_run(state, &mut x, cfg, &mut iterations) {
            Some(s) => break s,
            None if flat_retry => {
                debug!("damped system stayed singular; restarting from the flat start");
                flat_retry = false;
                x = state.flat_start();
                state.damping = cfg.damping;
            }
            None => break NewtonStatus::Diverged,
        }
    };
    state.sync_slacks(&mut x);
    state.x = x.clone();
    let rows = state.residuals(&x);
    let mut period_mismatch = vec![0.0; state.layout.n_periods];
    for r in &rows {
        period_mismatch[r.period] += r.value.abs();
    }
    NewtonOutcome {
        status,
        flow_residuals: state.flow_residuals(&x),
        period_mismatch,
        scaled_residual: scaled_max(&rows),
        x,
        iterations,
    }
}

/// Iterates until solved, stationary or out of budget; `None` when the
/// damped normal equations cannot be factorized.
fn lm_run(
    state: &mut BdSubproblemState,
    x: &mut Vec<f64>,
    cfg: &NewtonConfig,
    iterations: &mut usize,
) -> Option<NewtonStatus> {
    let n = x.len();
    let mut rows = state.residuals(x);
    let mut f = half_square(&rows);
    while *iterations < cfg.max_nr_iter {
        if scaled_max(&rows) <= cfg.tol {
            return Some(NewtonStatus::Solved);
        }
        *iterations += 1;
        let mut jtj = DMatrix::<f64>::zeros(n, n);
        let mut grad = DVector::<f64>::zeros(n);
        for r in &rows {
            for &(i, a) in &r.grad {
                grad[i] += a * r.value;
                for &(j, b) in &r.grad {
                    jtj[(i, j)] += a * b;
                }
            }
        }
        // free set: not held at a bound by the gradient
        let free: Vec<usize> = (0..n)
            .filter(|&j| {
                let at_lo = x[j] <= state.lower[j] && grad[j] > 0.0;
                let at_hi = x[j] >= state.upper[j] && grad[j] < 0.0;
                !(at_lo || at_hi)
            })
            .collect();
        let pg = free.iter().map(|&j| grad[j].abs()).fold(0.0, f64::max);
        let scale = 1.0 + rows.iter().map(|r| r.scale * r.scale).sum::<f64>().sqrt();
        if pg <= STATIONARY_TOL * scale * (1.0 + f.sqrt()) {
            return Some(NewtonStatus::Stationary);
        }

        let k = free.len();
        let mut accepted = false;
        for _ in 0..MAX_DAMPING_RETRIES {
            let mut a = DMatrix::<f64>::zeros(k, k);
            let mut b = DVector::<f64>::zeros(k);
            for (p, &i) in free.iter().enumerate() {
                b[p] = -grad[i];
                for (q, &j) in free.iter().enumerate() {
                    a[(p, q)] = jtj[(i, j)];
                }
                a[(p, p)] += state.damping * (jtj[(i, i)] + 1e-12);
            }
            let Some(chol) = a.cholesky() else {
                state.damping *= 10.0;
                continue;
            };
            let step = chol.solve(&b);
            let mut t = 1.0;
            for _ in 0..=MAX_HALVINGS {
                let mut trial = x.clone();
                for (p, &j) in free.iter().enumerate() {
                    trial[j] += t * step[p];
                }
                state.project(&mut trial);
                let trial_rows = state.residuals(&trial);
                let trial_f = half_square(&trial_rows);
                if trial_f < f {
                    let progress = f - trial_f;
                    *x = trial;
                    rows = trial_rows;
                    f = trial_f;
                    accepted = true;
                    state.damping = (state.damping / 3.0).max(1e-12);
                    if progress <= 1e-15 * f.max(1e-300) {
                        return Some(NewtonStatus::Stationary);
                    }
                    break;
                }
                t *= 0.5;
            }
            if accepted {
                break;
            }
            // no decrease along the damped direction: damp harder
            state.damping *= 10.0;
            if state.damping > 1e12 {
                return Some(NewtonStatus::Stationary);
            }
        }
        if !accepted && state.damping > 1e12 {
            return Some(NewtonStatus::Stationary);
        }
        if !accepted && free.is_empty() {
            return Some(NewtonStatus::Stationary);
        }
        if !accepted {
            // every retry failed to factorize
            return None;
        }
    }
    Some(NewtonStatus::Diverged)
}

/// The aggregated cut from a Newton point, or `None` when the total
/// mismatch is within `eps`.
pub fn aggregated_cut(
    state: &BdSubproblemState,
    out: &NewtonOutcome,
    eps: f64,
    iteration: usize,
) -> Option<FlowCut> {
    let total: f64 = out.period_mismatch.iter().sum();
    if total <= eps {
        return None;
    }
    let lay = &state.layout;
    let mut terms = Vec::new();
    let mut rhs = -total;
    for t in 0..lay.n_periods {
        for l in 0..lay.n_pipelines {
            let w = out.flow_residuals[t][l];
            if w == 0.0 {
                continue;
            }
            let g = state.flows[t][l];
            let sigma = if g.abs() < ZERO_ANCHOR {
                SECANT_HALF_WIDTH
            } else {
                2.0 * g.abs()
            };
            let coef = w.signum() * sigma;
            terms.push((t, l, coef));
            rhs += coef * g;
        }
    }
    if terms.is_empty() {
        // mismatch left only in the linear rows: no flow direction to cut
        return None;
    }
    Some(FlowCut {
        terms,
        rhs,
        iteration,
    })
}

#[derive(Clone, Debug)]
pub struct BdConfig {
    /// Total mismatch tolerance over all periods.
    pub eps_feas: f64,
    pub max_iter: usize,
    pub newton: NewtonConfig,
    pub master: MasterConfig,
}

impl Default for BdConfig {
    fn default() -> Self {
        Self {
            eps_feas: 1e-4,
            max_iter: 200,
            newton: NewtonConfig::default(),
            master: MasterConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BdStatus {
    Converged,
    MaxIterations,
    /// The Newton solve diverged; the run stopped at that iteration.
    NewtonDiverged,
    /// The linearized cut had no flow terms to act on.
    Stalled,
}

#[derive(Clone, Debug)]
pub struct BdOutcome {
    /// Master power side combined with the gas side of the last Newton point;
    /// `objective` is the cost of that combined point.
    pub schedule: Schedule,
    pub log: ConvergenceLog,
    pub status: BdStatus,
    pub iterations: usize,
    pub cuts: Vec<FlowCut>,
}

impl BdOutcome {
    pub fn converged(&self) -> bool {
        self.status == BdStatus::Converged
    }
}

pub fn run_bd(case: &DispatchCase, cfg: &BdConfig) -> Result<BdOutcome, MasterError> {
    let started = Instant::now();
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
        let mut state = BdSubproblemState::from_point(case, &schedule.point);
        let out = newton_gas(&mut state, None, &cfg.newton);
        let t_sub = t1.elapsed();

        let cut = match out.status {
            NewtonStatus::Diverged => None,
            _ => aggregated_cut(&state, &out, cfg.eps_feas, iter),
        };
        let added = usize::from(cut.is_some());
        log.push(IterationRecord {
            iter,
            master_obj: schedule.objective,
            mismatches: out.period_mismatch.clone(),
            cuts_added: added,
            t_master_ms: t_master.as_secs_f64() * 1e3,
            t_sub_ms: t_sub.as_secs_f64() * 1e3,
            t_total_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        debug!(
            "bd iteration {iter}: objective {:.6}, newton {:?} in {} steps, mismatch {:.3e}",
            schedule.objective,
            out.status,
            out.iterations,
            out.period_mismatch.iter().sum::<f64>()
        );

        let total: f64 = out.period_mismatch.iter().sum();
        let status = if out.status == NewtonStatus::Diverged {
            warn!("bd iteration {iter}: gas system solve diverged");
            Some(BdStatus::NewtonDiverged)
        } else if total <= cfg.eps_feas {
            Some(BdStatus::Converged)
        } else if cut.is_none() {
            Some(BdStatus::Stalled)
        } else if iter >= cfg.max_iter {
            Some(BdStatus::MaxIterations)
        } else {
            None
        };
        if let Some(c) = cut {
            cuts.push(c.clone());
            if status.is_none() {
                master.add_cut(c)?;
            }
        }
        if let Some(status) = status {
            state.write_point(&out.x, &mut schedule.point);
            schedule.costs = schedule.point.cost(case);
            schedule.objective = schedule.costs.total;
            return Ok(BdOutcome {
                schedule,
                log,
                status,
                iterations: iter,
                cuts,
            });
        }
    }
}
