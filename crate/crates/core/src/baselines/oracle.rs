//! Exhaustive grid search for tiny single-period cases: one coal unit, at
//! most one gas unit, a chain of at most two pipelines, wells and loads, and
//! nothing else on the gas side.
//!
//! Only gas-unit outputs and all wells but the last are gridded. The coal
//! output follows from the power balance, the last well from the gas balance,
//! chain flows from the nodal balances, and pressures from the flow equations
//! solved exactly: with drops `d_l = G_l|G_l|/k_l`, node `n` sits at
//! `π_0 - D_n` (`D_n` the cumulative drop), so a pressure profile exists iff
//! `max_n(lo_n + D_n) <= min_n(hi_n + D_n)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::netmodel::{DispatchCase, OperatingPoint};

/// Largest number of grid points enumerated.
pub const ORACLE_BUDGET: u64 = 100_000_000;

const TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct OracleResult {
    pub objective: f64,
    /// Best point, with pressures.
    pub point: OperatingPoint,
    /// Grid step used on every gridded axis.
    pub step: f64,
    pub evaluated: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("case outside the enumerable class: {0}")]
    Unsupported(&'static str),
    #[error("grid of {0} points exceeds the enumeration budget")]
    BudgetExceeded(u64),
    #[error("grid step must be positive and finite")]
    BadStep,
    #[error("no grid point satisfies every constraint")]
    NoFeasiblePoint,
}

struct Axis {
    lo: f64,
    count: u64,
    step: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, step: f64) -> Self {
        let count = ((hi - lo) / step + 1e-9).floor().max(0.0) as u64 + 1;
        Self { lo, count, step }
    }

    fn value(&self, k: u64) -> f64 {
        self.lo + k as f64 * self.step
    }
}

fn check_class(case: &DispatchCase) -> Result<(), OracleError> {
    let (p, g) = (&case.power, &case.gas);
    if case.n_periods() != 1 {
        return Err(OracleError::Unsupported("more than one period"));
    }
    if p.coal_units.len() != 1 || p.gas_units.len() > 1 {
        return Err(OracleError::Unsupported(
            "needs one coal unit and at most one gas unit",
        ));
    }
    if !p.wind.is_empty()
        || !p.p2g.is_empty()
        || !g.compressors.is_empty()
        || !g.storages.is_empty()
    {
        return Err(OracleError::Unsupported(
            "wind, P2G, compressors and storage are not enumerated",
        ));
    }
    if g.pipelines.len() > 2 || g.nodes.len() != g.pipelines.len() + 1 {
        return Err(OracleError::Unsupported(
            "gas network must be a chain of at most two pipelines",
        ));
    }
    if g.pipelines
        .iter()
        .enumerate()
        .any(|(l, pl)| pl.from != l || pl.to != l + 1)
    {
        return Err(OracleError::Unsupported(
            "pipelines must run node l to node l + 1",
        ));
    }
    let gas_demand = !p.gas_units.is_empty() || g.gas_loads.iter().any(|l| l.demand[0] != 0.0);
    if gas_demand && g.wells.is_empty() {
        return Err(OracleError::Unsupported("gas demand without a well"));
    }
    Ok(())
}

/// Evaluates one grid point; `None` if any constraint fails. The point is
/// written to `out` only when given, keeping the enumeration free of
/// allocations.
fn evaluate(
    case: &DispatchCase,
    p_gas: Option<f64>,
    wells: &[f64],
    out: Option<&mut OperatingPoint>,
) -> Option<f64> {
    let (p, g) = (&case.power, &case.gas);
    let load: f64 = p.loads.iter().map(|l| l.demand[0]).sum();
    let coal = &p.coal_units[0];
    let pf = load - p_gas.unwrap_or(0.0);
    let outside = |v: f64, lo: f64, hi: f64| v < lo - TOL || v > hi + TOL;
    if outside(pf, coal.p_min, coal.p_max) || outside(pf - coal.p0, coal.ramp_dw, coal.ramp_up) {
        return None;
    }
    // at most three nodes in the class
    let mut demand = [0.0; 3];
    for l in &g.gas_loads {
        demand[l.node] += l.demand[0];
    }
    let mut fuel = 0.0;
    if let (Some(pg), Some(u)) = (p_gas, p.gas_units.first()) {
        if outside(pg - u.p0, u.ramp_dw, u.ramp_up) {
            return None;
        }
        fuel = u.consumption(pg);
        demand[u.gas_node] += fuel;
    }
    // line limits through the distribution factors; generators are ordered
    // coal, gas
    let h = &case.factors;
    for (l, line) in p.lines.iter().enumerate() {
        let mut flow = h.h_g[l][0] * pf;
        if let Some(pg) = p_gas {
            flow += h.h_g[l][1] * pg;
        }
        flow -= h.h_d[l]
            .iter()
            .zip(&p.loads)
            .map(|(a, ld)| a * ld.demand[0])
            .sum::<f64>();
        if flow.abs() > line.capacity + TOL {
            return None;
        }
    }

    let nn = g.nodes.len();
    let mut inj = [0.0; 3];
    for n in 0..nn {
        inj[n] = -demand[n];
    }
    let total: f64 = demand.iter().sum();
    let mut pinned = 0.0;
    if let Some(last) = g.wells.len().checked_sub(1) {
        pinned = total - wells.iter().sum::<f64>();
        let w = &g.wells[last];
        if outside(pinned, w.g_min, w.g_max) {
            return None;
        }
        for (i, well) in g.wells.iter().enumerate() {
            inj[well.node] += if i == last { pinned } else { wells[i] };
        }
    } else if total.abs() > TOL {
        return None;
    }

    // chain flows and the pressure window
    let mut flows = [0.0; 2];
    let mut cum = [0.0; 3];
    let mut flow = 0.0;
    for (l, pl) in g.pipelines.iter().enumerate() {
        flow += inj[l];
        flows[l] = flow;
        cum[l + 1] = cum[l] + flow * flow.abs() / pl.k;
    }
    let lo = g
        .nodes
        .iter()
        .zip(&cum)
        .map(|(n, d)| n.pi_min_sq + d)
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = g
        .nodes
        .iter()
        .zip(&cum)
        .map(|(n, d)| n.pi_max_sq + d)
        .fold(f64::INFINITY, f64::min);
    if lo > hi + TOL {
        return None;
    }
    let well_cost: f64 = g
        .wells
        .iter()
        .enumerate()
        .map(|(i, w)| {
            w.cost
                * if i + 1 == g.wells.len() {
                    pinned
                } else {
                    wells[i]
                }
        })
        .sum();
    let cost = coal.cost(pf) + well_cost;

    if let Some(x) = out {
        x.p_f[0][0] = pf;
        x.f_f[0][0] = coal.cost(pf);
        if let Some(pg) = p_gas {
            x.p_g[0][0] = pg;
            x.g_g[0][0] = fuel;
        }
        for i in 0..g.wells.len() {
            x.g_s[0][i] = if i + 1 == g.wells.len() {
                pinned
            } else {
                wells[i]
            };
        }
        x.g_pipe[0].copy_from_slice(&flows[..g.pipelines.len()]);
        let pi0 = 0.5 * (lo + hi.max(lo));
        x.pi = vec![cum[..nn].iter().map(|d| pi0 - d).collect()];
    }
    Some(cost)
}

/// Best grid point at step `h` on every gridded axis (MW for unit outputs,
/// flow units for wells).
pub fn brute_force(case: &DispatchCase, h: f64) -> Result<OracleResult, OracleError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(OracleError::BadStep);
    }
    check_class(case)?;
    let mut axes = Vec::new();
    if let Some(u) = case.power.gas_units.first() {
        axes.push(Axis::new(u.p_min, u.p_max, h));
    }
    let n_wells = case.gas.wells.len();
    for w in case.gas.wells.iter().take(n_wells.saturating_sub(1)) {
        axes.push(Axis::new(w.g_min, w.g_max, h));
    }
    let total = axes
        .iter()
        .try_fold(1u64, |acc, a| acc.checked_mul(a.count))
        .unwrap_or(u64::MAX);
    if total > ORACLE_BUDGET {
        return Err(OracleError::BudgetExceeded(total));
    }
    let has_gas_unit = !case.power.gas_units.is_empty();
    let decode = |mut k: u64| -> (Option<f64>, Vec<f64>) {
        let mut vals = Vec::with_capacity(axes.len());
        for a in axes.iter().rev() {
            vals.push(a.value(k % a.count));
            k /= a.count;
        }
        vals.reverse();
        if has_gas_unit {
            let pg = vals.remove(0);
            (Some(pg), vals)
        } else {
            (None, vals)
        }
    };
    // lowest cost, ties to the lowest index so the result is order-independent
    let best = (0..total)
        .into_par_iter()
        .filter_map(|k| {
            let (pg, wells) = decode(k);
            evaluate(case, pg, &wells, None).map(|c| (c, k))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (objective, k) = best.ok_or(OracleError::NoFeasiblePoint)?;
    let (pg, wells) = decode(k);
    let mut point = OperatingPoint::zeros(case);
    evaluate(case, pg, &wells, Some(&mut point)).expect("best point was feasible");
    Ok(OracleResult {
        objective,
        point,
        step: h,
        evaluated: total,
    })
}
