//! Dispatch master problem: power dispatch, gas balance and storage, the
//! gas-unit fuel curve as an incremental piecewise-linear encoding, the coal
//! cost as an outer-approximated epigraph, and a pool of linear cuts on
//! pipeline flows. Pressures and the pipeline flow equation are left out.

mod layout;

use std::fmt;
use std::time::Instant;

use log::{debug, info};
use serde::Serialize;

pub use layout::{Layout, VarKind};

use crate::netmodel::{CostBreakdown, DispatchCase, OperatingPoint};
use crate::solvecore::{
    oa_refine, solve_lp, solve_lp_with, solve_mip_with, Basis, LinearProgram, LpStatus, MipOptions,
    MipSolution, MipStatus, MixedIntegerProgram, OaCut, PwlEncoding, Row, Sense, SimplexOptions,
    SolveError,
};

#[derive(Clone, Debug)]
pub struct MasterConfig {
    /// Segments of the gas-unit fuel curve encoding.
    pub fuel_segments: usize,
    pub mip: MipOptions,
    /// Relative epigraph violation accepted by the coal-cost refinement loop.
    pub oa_tol: f64,
    pub oa_max_rounds: usize,
    /// Tangents placed on each coal cost curve before the first solve.
    pub initial_tangents: usize,
    /// Refine tangents on the LP relaxation before branching, at most this
    /// many rounds. Pays off when each MIP solve is expensive.
    pub lp_tangent_rounds: usize,
}

impl Default for MasterConfig {
    fn default() -> Self {
        Self {
            fuel_segments: 10,
            mip: MipOptions::default(),
            oa_tol: 1e-6,
            oa_max_rounds: 100,
            initial_tangents: 8,
            lp_tangent_rounds: 0,
        }
    }
}

/// A linear inequality `sum(coef * G[t][l]) <= rhs` over pipeline flows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowCut {
    /// `(period, pipeline, coefficient)`.
    pub terms: Vec<(usize, usize, f64)>,
    pub rhs: f64,
    /// Iteration that produced the cut.
    pub iteration: usize,
}

impl FlowCut {
    /// Left-hand side minus right-hand side at `flows[t][l]`.
    pub fn violation(&self, flows: &[Vec<f64>]) -> f64 {
        self.terms
            .iter()
            .map(|&(t, l, c)| c * flows[t][l])
            .sum::<f64>()
            - self.rhs
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MasterError {
    #[error("master problem is infeasible; conflicting rows: {}", .rows.join(", "))]
    Infeasible { rows: Vec<String> },
    #[error("master problem is unbounded")]
    Unbounded,
    #[error("branch and bound hit its node limit without a feasible point")]
    NodeLimit,
    #[error("cut references period {period} / pipeline {pipeline} outside the case")]
    LayoutMismatch { period: usize, pipeline: usize },
    #[error("period {0} is out of range")]
    PeriodOutOfRange(usize),
    #[error(transparent)]
    Solver(#[from] SolveError),
}

/// What a master row enforces, for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowTag {
    LineUpper { t: usize, line: usize },
    LineLower { t: usize, line: usize },
    Balance { t: usize },
    RampUp { t: usize, unit: usize, gas: bool },
    RampDown { t: usize, unit: usize, gas: bool },
    CoalTangent { t: usize, unit: usize },
    FuelCurve { t: usize, unit: usize },
    CompressorUse { t: usize, compressor: usize },
    StorageLevel { t: usize, storage: usize },
    StorageCycle { storage: usize },
    P2g { t: usize, unit: usize },
    GasBalance { t: usize, node: usize },
    Curtailment { t: usize, farm: usize },
    Cut { index: usize },
    Extra,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RowTag::LineUpper { t, line } => write!(f, "line {line} upper limit (t={t})"),
            RowTag::LineLower { t, line } => write!(f, "line {line} lower limit (t={t})"),
            RowTag::Balance { t } => write!(f, "power balance (t={t})"),
            RowTag::RampUp { t, unit, gas } => {
                write!(f, "{} unit {unit} ramp up (t={t})", kind(gas))
            }
            RowTag::RampDown { t, unit, gas } => {
                write!(f, "{} unit {unit} ramp down (t={t})", kind(gas))
            }
            RowTag::CoalTangent { t, unit } => write!(f, "coal unit {unit} cost tangent (t={t})"),
            RowTag::FuelCurve { t, unit } => write!(f, "gas unit {unit} fuel curve (t={t})"),
            RowTag::CompressorUse { t, compressor } => {
                write!(f, "compressor {compressor} fuel (t={t})")
            }
            RowTag::StorageLevel { t, storage } => write!(f, "storage {storage} level (t={t})"),
            RowTag::StorageCycle { storage } => write!(f, "storage {storage} end-of-horizon level"),
            RowTag::P2g { t, unit } => write!(f, "p2g {unit} conversion (t={t})"),
            RowTag::GasBalance { t, node } => write!(f, "gas node {node} balance (t={t})"),
            RowTag::Curtailment { t, farm } => write!(f, "wind farm {farm} curtailment (t={t})"),
            RowTag::Cut { index } => write!(f, "cut {index}"),
            RowTag::Extra => write!(f, "auxiliary row"),
        }
    }
}

fn kind(gas: bool) -> &'static str {
    if gas {
        "gas"
    } else {
        "coal"
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct MasterStats {
    pub oa_rounds: usize,
    pub mip_nodes: usize,
    pub lp_iterations: usize,
    /// Relative gap between the last incumbent and the proven bound.
    pub mip_gap: f64,
    /// Every MIP solve closed its gap (no node limit hit).
    pub mip_optimal: bool,
    pub n_binaries: usize,
    pub n_continuous: usize,
    pub n_rows: usize,
}

/// One master solution.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub point: OperatingPoint,
    /// Master objective (coal cost epigraphs + well cost + curtailment).
    pub objective: f64,
    pub costs: CostBreakdown,
    pub stats: MasterStats,
}

/// `(period, unit, P)` of every coal epigraph violated at `x`.
fn violated_tangents(
    lay: &Layout,
    case: &DispatchCase,
    tol: f64,
    x: &[f64],
) -> Vec<(usize, usize, f64)> {
    let mut at = Vec::new();
    for t in 0..lay.n_periods {
        for (i, u) in case.power.coal_units.iter().enumerate() {
            let pf = x[lay.index(VarKind::Pf, t, i)];
            let ff = x[lay.index(VarKind::Ff, t, i)];
            let truth = u.cost(pf);
            if truth - ff > tol * (1.0 + truth.abs()) {
                at.push((t, i, pf));
            }
        }
    }
    at
}

/// Pipeline flows of period `t`, in pipeline order.
pub fn extract_flows(s: &Schedule, t: usize) -> Result<&[f64], MasterError> {
    s.point
        .g_pipe
        .get(t)
        .map(|v| v.as_slice())
        .ok_or(MasterError::PeriodOutOfRange(t))
}

/// The master model plus its growing cut pool and tangent sets.
pub struct MasterProblem {
    pub layout: Layout,
    mip: MixedIntegerProgram,
    tags: Vec<RowTag>,
    cuts: Vec<FlowCut>,
    tangents: Vec<Vec<f64>>,
    cfg: MasterConfig,
    warm: Option<Basis>,
    last_x: Vec<f64>,
}

impl MasterProblem {
    pub fn new(case: &DispatchCase, cfg: &MasterConfig) -> Self {
        let layout = Layout::new(case);
        let mut m = Self {
            mip: MixedIntegerProgram::new(LinearProgram::new()),
            layout,
            tags: Vec::new(),
            cuts: Vec::new(),
            tangents: Vec::new(),
            cfg: cfg.clone(),
            warm: None,
            last_x: Vec::new(),
        };
        m.build(case);
        m
    }

    pub fn mip(&self) -> &MixedIntegerProgram {
        &self.mip
    }

    /// Direct access for models that extend the master with extra columns
    /// and rows (which must be appended after the layout's columns).
    pub fn mip_mut(&mut self) -> &mut MixedIntegerProgram {
        &mut self.mip
    }

    /// Appends a row not produced by the master itself.
    pub fn add_extra_row(&mut self, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.tags.push(RowTag::Extra);
        self.mip.lp.add_row(terms, sense, rhs)
    }

    /// Tags rows appended directly through [`MasterProblem::mip_mut`].
    pub fn tag_extra_rows(&mut self, count: usize) {
        self.tags
            .extend(std::iter::repeat(RowTag::Extra).take(count));
    }

    pub fn cuts(&self) -> &[FlowCut] {
        &self.cuts
    }

    /// Row tag for diagnostics.
    pub fn tag(&self, row: usize) -> RowTag {
        self.tags[row]
    }

    /// Primal values of the last solve over all columns.
    pub fn last_solution(&self) -> &[f64] {
        &self.last_x
    }

    fn row(&mut self, tag: RowTag, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.tags.push(tag);
        self.mip.lp.add_row(terms, sense, rhs);
    }

    pub fn add_cut(&mut self, cut: FlowCut) -> Result<(), MasterError> {
        let np = self.layout.count(VarKind::Gpipe);
        let mut terms = Vec::with_capacity(cut.terms.len());
        for &(t, l, c) in &cut.terms {
            if t >= self.layout.n_periods || l >= np {
                return Err(MasterError::LayoutMismatch {
                    period: t,
                    pipeline: l,
                });
            }
            terms.push((self.layout.index(VarKind::Gpipe, t, l), c));
        }
        let index = self.cuts.len();
        self.row(RowTag::Cut { index }, terms, Sense::Le, cut.rhs);
        self.cuts.push(cut);
        Ok(())
    }

    fn build(&mut self, case: &DispatchCase) {
        use VarKind::*;
        let lay = self.layout.clone();
        let nt = lay.n_periods;
        let (p, g) = (&case.power, &case.gas);
        let inf = f64::INFINITY;

        // columns in layout order
        for kind in VarKind::ALL {
            for t in 0..nt {
                for e in 0..lay.count(kind) {
                    let (cost, lo, hi) = match kind {
                        Pf => (0.0, p.coal_units[e].p_min, p.coal_units[e].p_max),
                        Pg => (0.0, p.gas_units[e].p_min, p.gas_units[e].p_max),
                        Pw => (0.0, 0.0, p.wind[e].availability[t]),
                        Pp => (0.0, 0.0, p.p2g[e].p_max),
                        Ff => (1.0, -inf, inf),
                        Gg => (0.0, -inf, inf),
                        Gpipe => (0.0, -inf, inf),
                        Gm => (0.0, 0.0, inf),
                        Gc => (0.0, -inf, inf),
                        Gs => (g.wells[e].cost, g.wells[e].g_min, g.wells[e].g_max),
                        Gr => (0.0, -g.storages[e].g_out, g.storages[e].g_in),
                        S => (0.0, g.storages[e].s_min, g.storages[e].s_max),
                        Gp => (0.0, -inf, inf),
                        Fw => (1.0, -inf, inf),
                    };
                    let j = self.mip.lp.add_var(cost, lo, hi);
                    debug_assert_eq!(j, lay.index(kind, t, e));
                }
            }
        }

        let h = &case.factors;
        let ncoal = p.coal_units.len();
        let ngas = p.gas_units.len();
        for t in 0..nt {
            // line limits: H_g P_gen - H_d [loads; P2G] within +-capacity
            for (l, line) in p.lines.iter().enumerate() {
                let mut terms = Vec::new();
                for (u, &coef) in h.h_g[l].iter().enumerate() {
                    let j = if u < ncoal {
                        lay.index(Pf, t, u)
                    } else if u < ncoal + ngas {
                        lay.index(Pg, t, u - ncoal)
                    } else {
                        lay.index(Pw, t, u - ncoal - ngas)
                    };
                    terms.push((j, coef));
                }
                let mut fixed = 0.0;
                for (d, &coef) in h.h_d[l].iter().enumerate() {
                    if d < p.loads.len() {
                        fixed += coef * p.loads[d].demand[t];
                    } else {
                        terms.push((lay.index(Pp, t, d - p.loads.len()), -coef));
                    }
                }
                if terms.iter().all(|x| x.1 == 0.0) {
                    continue;
                }
                self.row(
                    RowTag::LineUpper { t, line: l },
                    terms.clone(),
                    Sense::Le,
                    line.capacity + fixed,
                );
                self.row(
                    RowTag::LineLower { t, line: l },
                    terms,
                    Sense::Ge,
                    -line.capacity + fixed,
                );
            }

            let mut bal = Vec::new();
            bal.extend((0..ncoal).map(|i| (lay.index(Pf, t, i), 1.0)));
            bal.extend((0..ngas).map(|j| (lay.index(Pg, t, j), 1.0)));
            bal.extend((0..p.wind.len()).map(|n| (lay.index(Pw, t, n), 1.0)));
            bal.extend((0..p.p2g.len()).map(|k| (lay.index(Pp, t, k), -1.0)));
            let demand: f64 = p.loads.iter().map(|l| l.demand[t]).sum();
            self.row(RowTag::Balance { t }, bal, Sense::Eq, demand);

            // ramps; period 0 against the initial output
            let ramp_units: Vec<(VarKind, bool, f64, f64, f64)> = p
                .coal_units
                .iter()
                .map(|u| (Pf, false, u.ramp_dw, u.ramp_up, u.p0))
                .chain(
                    p.gas_units
                        .iter()
                        .map(|u| (Pg, true, u.ramp_dw, u.ramp_up, u.p0)),
                )
                .collect();
            let mut counter = [0usize; 2];
            for (kind, gas, dw, up, p0) in ramp_units {
                let unit = counter[gas as usize];
                counter[gas as usize] += 1;
                let cur = lay.index(kind, t, unit);
                if t == 0 {
                    self.row(
                        RowTag::RampUp { t, unit, gas },
                        vec![(cur, 1.0)],
                        Sense::Le,
                        p0 + up,
                    );
                    self.row(
                        RowTag::RampDown { t, unit, gas },
                        vec![(cur, 1.0)],
                        Sense::Ge,
                        p0 + dw,
                    );
                } else {
                    let prev = lay.index(kind, t - 1, unit);
                    self.row(
                        RowTag::RampUp { t, unit, gas },
                        vec![(cur, 1.0), (prev, -1.0)],
                        Sense::Le,
                        up,
                    );
                    self.row(
                        RowTag::RampDown { t, unit, gas },
                        vec![(cur, 1.0), (prev, -1.0)],
                        Sense::Ge,
                        dw,
                    );
                }
            }

            for (m, c) in g.compressors.iter().enumerate() {
                let terms = vec![(lay.index(Gc, t, m), 1.0), (lay.index(Gm, t, m), -c.alpha)];
                self.row(
                    RowTag::CompressorUse { t, compressor: m },
                    terms,
                    Sense::Eq,
                    0.0,
                );
            }
            for (z, s) in g.storages.iter().enumerate() {
                let mut terms = vec![(lay.index(S, t, z), 1.0), (lay.index(Gr, t, z), -1.0)];
                let rhs = if t == 0 {
                    s.s0
                } else {
                    terms.push((lay.index(S, t - 1, z), -1.0));
                    0.0
                };
                self.row(
                    RowTag::StorageLevel { t, storage: z },
                    terms,
                    Sense::Eq,
                    rhs,
                );
            }
            for (k, q) in p.p2g.iter().enumerate() {
                let terms = vec![(lay.index(Gp, t, k), 1.0), (lay.index(Pp, t, k), -q.eta)];
                self.row(RowTag::P2g { t, unit: k }, terms, Sense::Eq, 0.0);
            }

            let mut node_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.nodes.len()];
            let mut node_rhs = vec![0.0; g.nodes.len()];
            for (i, w) in g.wells.iter().enumerate() {
                node_terms[w.node].push((lay.index(Gs, t, i), 1.0));
            }
            for (k, q) in p.p2g.iter().enumerate() {
                node_terms[q.gas_node].push((lay.index(Gp, t, k), 1.0));
            }
            for (m, c) in g.compressors.iter().enumerate() {
                node_terms[c.from].push((lay.index(Gm, t, m), -1.0));
                node_terms[c.from].push((lay.index(Gc, t, m), -1.0));
                node_terms[c.to].push((lay.index(Gm, t, m), 1.0));
            }
            for (l, pl) in g.pipelines.iter().enumerate() {
                node_terms[pl.from].push((lay.index(Gpipe, t, l), -1.0));
                node_terms[pl.to].push((lay.index(Gpipe, t, l), 1.0));
            }
            for (z, s) in g.storages.iter().enumerate() {
                node_terms[s.node].push((lay.index(Gr, t, z), -1.0));
            }
            for (j, u) in p.gas_units.iter().enumerate() {
                node_terms[u.gas_node].push((lay.index(Gg, t, j), -1.0));
            }
            for l in &g.gas_loads {
                node_rhs[l.node] += l.demand[t];
            }
            for (n, terms) in node_terms.into_iter().enumerate() {
                self.row(
                    RowTag::GasBalance { t, node: n },
                    terms,
                    Sense::Eq,
                    node_rhs[n],
                );
            }

            for (n, w) in p.wind.iter().enumerate() {
                let rho = case.meta.rho;
                let terms = vec![(lay.index(Fw, t, n), 1.0), (lay.index(Pw, t, n), rho)];
                self.row(
                    RowTag::Curtailment { t, farm: n },
                    terms,
                    Sense::Eq,
                    rho * w.availability[t],
                );
            }
        }
        for (z, s) in g.storages.iter().enumerate() {
            self.row(
                RowTag::StorageCycle { storage: z },
                vec![(lay.index(S, nt - 1, z), 1.0)],
                Sense::Eq,
                s.s0,
            );
        }

        // gas-unit fuel curves
        let segments = self.cfg.fuel_segments.max(1);
        for t in 0..nt {
            for (j, u) in p.gas_units.iter().enumerate() {
                let (pg, gg) = (lay.index(Pg, t, j), lay.index(Gg, t, j));
                if u.p_max - u.p_min <= 1e-9 {
                    self.row(
                        RowTag::FuelCurve { t, unit: j },
                        vec![(gg, 1.0)],
                        Sense::Eq,
                        u.consumption(u.p_min),
                    );
                    continue;
                }
                let mut enc =
                    PwlEncoding::uniform(u.p_min, u.p_max, segments, |x| u.consumption(x))
                        .expect("valid fuel curve breakpoints");
                let before = self.mip.lp.num_rows();
                enc.attach(&mut self.mip, &[(pg, 1.0)], &[(gg, 1.0)]);
                let added = self.mip.lp.num_rows() - before;
                self.tags
                    .extend(std::iter::repeat(RowTag::FuelCurve { t, unit: j }).take(added));
            }
        }

        // initial coal cost tangents
        self.tangents = vec![Vec::new(); nt * ncoal];
        let k0 = self.cfg.initial_tangents.max(1);
        for t in 0..nt {
            for (i, u) in p.coal_units.iter().enumerate() {
                for q in 0..k0 {
                    let pt = if k0 == 1 {
                        0.5 * (u.p_min + u.p_max)
                    } else {
                        u.p_min + (u.p_max - u.p_min) * q as f64 / (k0 - 1) as f64
                    };
                    self.add_tangent(t, i, u.a, u.b, u.c, pt);
                }
            }
        }
    }

    fn add_tangent(&mut self, t: usize, unit: usize, a: f64, b: f64, c: f64, at: f64) -> bool {
        let ncoal = self.layout.count(VarKind::Pf);
        let pts = &mut self.tangents[t * ncoal + unit];
        if pts
            .iter()
            .any(|&q| (q - at).abs() <= 1e-12 * (1.0 + at.abs()))
        {
            return false;
        }
        pts.push(at);
        let cut: OaCut = oa_refine(a, b, c, at);
        let f = self.layout.index(VarKind::Ff, t, unit);
        let pf = self.layout.index(VarKind::Pf, t, unit);
        self.tags.push(RowTag::CoalTangent { t, unit });
        cut.add_to(&mut self.mip.lp, f, pf);
        true
    }

    /// Solves the master, refining coal cost tangents until the epigraph
    /// gap is within tolerance.
    pub fn solve(&mut self, case: &DispatchCase) -> Result<Schedule, MasterError> {
        let started = Instant::now();
        let mut stats = MasterStats {
            n_binaries: self.mip.binaries.len(),
            n_continuous: self.mip.lp.num_vars() - self.mip.binaries.len(),
            mip_optimal: true,
            ..Default::default()
        };
        self.lp_tangent_rounds(case)?;
        loop {
            stats.oa_rounds += 1;
            let res = self.solve_with_lazy_tangents(case)?;
            stats.mip_nodes += res.nodes;
            stats.lp_iterations += res.lp_iterations;
            if res.root_basis.is_some() {
                self.warm = res.root_basis.clone();
            }
            let sol = match (res.status, res.solution) {
                (MipStatus::Infeasible, _) => return Err(self.diagnose_infeasible()),
                (MipStatus::Unbounded, _) => return Err(MasterError::Unbounded),
                (MipStatus::NodeLimit, None) => return Err(MasterError::NodeLimit),
                (_, Some(s)) => s,
                (_, None) => return Err(MasterError::NodeLimit),
            };
            stats.mip_gap =
                ((sol.objective - res.best_bound) / sol.objective.abs().max(1.0)).max(0.0);
            stats.mip_optimal &= res.status == MipStatus::Optimal;

            let added = if stats.oa_rounds < self.cfg.oa_max_rounds {
                self.separate_tangents(case, &sol.x)
            } else {
                0
            };
            if added == 0 {
                stats.n_rows = self.mip.lp.num_rows();
                debug!(
                    "master solved: obj {:.6} after {} tangent rounds, {} nodes, {:.1} ms",
                    sol.objective,
                    stats.oa_rounds,
                    stats.mip_nodes,
                    started.elapsed().as_secs_f64() * 1e3
                );
                let point = self.point_from(case, &sol.x);
                let costs = point.cost(case);
                self.last_x = sol.x;
                return Ok(Schedule {
                    point,
                    objective: sol.objective,
                    costs,
                    stats,
                });
            }
            debug!("tangent round {}: {added} tangents added", stats.oa_rounds);
        }
    }

    /// Adds a tangent wherever the coal cost epigraph is violated at `x`.
    fn separate_tangents(&mut self, case: &DispatchCase, x: &[f64]) -> usize {
        violated_tangents(&self.layout, case, self.cfg.oa_tol, x)
            .into_iter()
            .filter(|&(t, i, pf)| {
                let u = &case.power.coal_units[i];
                self.add_tangent(t, i, u.a, u.b, u.c, pf)
            })
            .count()
    }

    /// One MIP solve in which violated coal tangents are added as the tree
    /// search finds them; they are copied into the model afterwards.
    fn solve_with_lazy_tangents(
        &mut self,
        case: &DispatchCase,
    ) -> Result<MipSolution, MasterError> {
        let lay = &self.layout;
        let tol = self.cfg.oa_tol;
        let mut found = Vec::new();
        let mut sep = |x: &[f64]| -> Vec<Row> {
            let at = violated_tangents(lay, case, tol, x);
            let rows = at
                .iter()
                .map(|&(t, i, pf)| {
                    let u = &case.power.coal_units[i];
                    let cut = oa_refine(u.a, u.b, u.c, pf);
                    let f = lay.index(VarKind::Ff, t, i);
                    let p = lay.index(VarKind::Pf, t, i);
                    Row {
                        terms: vec![(f, 1.0), (p, -cut.slope)],
                        sense: Sense::Ge,
                        rhs: cut.intercept,
                    }
                })
                .collect();
            found.extend(at);
            rows
        };
        let res = solve_mip_with(&self.mip, &self.cfg.mip, self.warm.as_ref(), Some(&mut sep))?;
        for (t, i, pf) in found {
            let u = &case.power.coal_units[i];
            self.add_tangent(t, i, u.a, u.b, u.c, pf);
        }
        Ok(res)
    }

    fn lp_tangent_rounds(&mut self, case: &DispatchCase) -> Result<(), MasterError> {
        for round in 0..self.cfg.lp_tangent_rounds {
            // binaries are [0, 1] columns, so this is the relaxation
            let sol = solve_lp_with(&self.mip.lp, self.warm.as_ref(), &SimplexOptions::default())?;
            if sol.status != LpStatus::Optimal {
                return Ok(());
            }
            self.warm = sol.basis.clone();
            let added = self.separate_tangents(case, &sol.x);
            debug!(
                "relaxation tangent round {}: {added} tangents added",
                round + 1
            );
            if added == 0 {
                break;
            }
        }
        Ok(())
    }

    fn point_from(&self, case: &DispatchCase, x: &[f64]) -> OperatingPoint {
        use VarKind::*;
        let lay = &self.layout;
        let nt = lay.n_periods;
        let fam = |k: VarKind| {
            (0..nt)
                .map(|t| lay.slice(x, k, t).to_vec())
                .collect::<Vec<_>>()
        };
        let mut pt = OperatingPoint {
            p_f: fam(Pf),
            p_g: fam(Pg),
            p_w: fam(Pw),
            p_p: fam(Pp),
            f_f: fam(Ff),
            g_g: fam(Gg),
            g_pipe: fam(Gpipe),
            g_m: fam(Gm),
            g_c: fam(Gc),
            g_s: fam(Gs),
            g_r: fam(Gr),
            s: fam(S),
            g_p: fam(Gp),
            f_w: fam(Fw),
            pi: Vec::new(),
        };
        // report the epigraph at its curve value (they agree within the refinement tolerance)
        for t in 0..nt {
            for (i, u) in case.power.coal_units.iter().enumerate() {
                pt.f_f[t][i] = pt.f_f[t][i].max(u.cost(pt.p_f[t][i]));
            }
        }
        pt
    }

    /// Deletion filter on the continuous relaxation: drops rows one at a
    /// time while the remainder stays infeasible. Skipped for large models.
    fn diagnose_infeasible(&self) -> MasterError {
        const LIMIT: usize = 4000;
        let lp = &self.mip.lp;
        if lp.num_rows() > LIMIT {
            info!("master infeasible; model too large for conflict filtering");
            return MasterError::Infeasible {
                rows: vec![format!("(not filtered: {} rows)", lp.num_rows())],
            };
        }
        let mut keep: Vec<bool> = vec![true; lp.num_rows()];
        let mut trial = lp.clone();
        for i in 0..lp.num_rows() {
            keep[i] = false;
            trial.rows = lp
                .rows
                .iter()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(r, _)| r.clone())
                .collect();
            let still_infeasible = matches!(solve_lp(&trial), Ok(s) if s.status == crate::solvecore::LpStatus::Infeasible);
            if !still_infeasible {
                keep[i] = true;
            }
        }
        let rows = keep
            .iter()
            .enumerate()
            .filter(|(_, &k)| k)
            .map(|(i, _)| self.tags[i].to_string())
            .collect();
        MasterError::Infeasible { rows }
    }
}

/// Builds the master for `case` with every cut of `pool` appended.
pub fn build_master(
    case: &DispatchCase,
    pool: &[FlowCut],
    cfg: &MasterConfig,
) -> Result<MasterProblem, MasterError> {
    let mut m = MasterProblem::new(case, cfg);
    for c in pool {
        m.add_cut(c.clone())?;
    }
    Ok(m)
}

/// Builds and solves in one call.
pub fn solve_master(
    case: &DispatchCase,
    pool: &[FlowCut],
    cfg: &MasterConfig,
) -> Result<Schedule, MasterError> {
    build_master(case, pool, cfg)?.solve(case)
}
