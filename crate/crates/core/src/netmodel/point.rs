//! A full operating point over all periods and the residual of every model
//! constraint evaluated at it.

use serde::{Deserialize, Serialize};

use super::case::DispatchCase;

/// Values of every decision variable, indexed `[period][element]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub p_f: Vec<Vec<f64>>,
    pub p_g: Vec<Vec<f64>>,
    pub p_w: Vec<Vec<f64>>,
    pub p_p: Vec<Vec<f64>>,
    pub f_f: Vec<Vec<f64>>,
    pub g_g: Vec<Vec<f64>>,
    pub g_pipe: Vec<Vec<f64>>,
    pub g_m: Vec<Vec<f64>>,
    pub g_c: Vec<Vec<f64>>,
    pub g_s: Vec<Vec<f64>>,
    pub g_r: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    pub g_p: Vec<Vec<f64>>,
    pub f_w: Vec<Vec<f64>>,
    /// Squared nodal pressures; empty when no pressure profile is known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pi: Vec<Vec<f64>>,
}

impl OperatingPoint {
    pub fn zeros(case: &DispatchCase) -> Self {
        let nt = case.n_periods();
        let z = |n: usize| vec![vec![0.0; n]; nt];
        let (p, g) = (&case.power, &case.gas);
        Self {
            p_f: z(p.coal_units.len()),
            p_g: z(p.gas_units.len()),
            p_w: z(p.wind.len()),
            p_p: z(p.p2g.len()),
            f_f: z(p.coal_units.len()),
            g_g: z(p.gas_units.len()),
            g_pipe: z(g.pipelines.len()),
            g_m: z(g.compressors.len()),
            g_c: z(g.compressors.len()),
            g_s: z(g.wells.len()),
            g_r: z(g.storages.len()),
            s: z(g.storages.len()),
            g_p: z(p.p2g.len()),
            f_w: z(p.wind.len()),
            pi: Vec::new(),
        }
    }

    /// Objective: coal cost epigraph + well cost + curtailment cost.
    pub fn cost(&self, case: &DispatchCase) -> CostBreakdown {
        let mut out = CostBreakdown::default();
        for t in 0..case.n_periods() {
            out.coal += self.f_f[t].iter().sum::<f64>();
            out.gas += case
                .gas
                .wells
                .iter()
                .zip(&self.g_s[t])
                .map(|(w, g)| w.cost * g)
                .sum::<f64>();
            out.curtailment += self.f_w[t].iter().sum::<f64>();
        }
        out.total = out.coal + out.gas + out.curtailment;
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub coal: f64,
    pub gas: f64,
    pub curtailment: f64,
    pub total: f64,
}

/// Largest absolute violation per constraint family. Pressure-dependent
/// families are `None` when the point carries no pressures.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Residuals {
    pub line_limits: f64,
    pub power_balance: f64,
    pub output_bounds: f64,
    pub ramping: f64,
    /// `F_f` below the quadratic cost curve.
    pub coal_cost: f64,
    pub gas_consumption: f64,
    pub weymouth: Option<f64>,
    pub pressure_bounds: Option<f64>,
    pub compressor_ratio: Option<f64>,
    pub compressor_use: f64,
    pub well_storage_bounds: f64,
    pub storage_dynamics: f64,
    pub p2g: f64,
    pub gas_balance: f64,
    pub curtailment_cost: f64,
}

impl Residuals {
    /// Power-side dispatch rows: line limits, balance, bounds, ramps.
    pub fn power_max(&self) -> f64 {
        self.line_limits
            .max(self.power_balance)
            .max(self.output_bounds)
            .max(self.ramping)
    }

    /// Gas-side rows other than the Weymouth relation.
    pub fn gas_max(&self) -> f64 {
        [
            self.pressure_bounds.unwrap_or(0.0),
            self.compressor_ratio.unwrap_or(0.0),
            self.compressor_use,
            self.well_storage_bounds,
            self.storage_dynamics,
            self.p2g,
            self.gas_balance,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn max_all(&self) -> f64 {
        self.power_max()
            .max(self.gas_max())
            .max(self.coal_cost)
            .max(self.gas_consumption)
            .max(self.weymouth.unwrap_or(0.0))
            .max(self.curtailment_cost)
    }
}

fn above(v: f64, hi: f64) -> f64 {
    (v - hi).max(0.0)
}

fn outside(v: f64, lo: f64, hi: f64) -> f64 {
    (lo - v).max(v - hi).max(0.0)
}

/// Evaluates every model constraint at `x`.
pub fn residuals(case: &DispatchCase, x: &OperatingPoint) -> Residuals {
    let p = &case.power;
    let g = &case.gas;
    let h = &case.factors;
    let mut r = Residuals::default();
    let has_pi = !x.pi.is_empty();
    let (mut wey, mut pbound, mut ratio) = (0.0f64, 0.0f64, 0.0f64);

    for t in 0..case.n_periods() {
        let gen: Vec<f64> = x.p_f[t]
            .iter()
            .chain(&x.p_g[t])
            .chain(&x.p_w[t])
            .copied()
            .collect();
        let dem: Vec<f64> = p
            .loads
            .iter()
            .map(|l| l.demand[t])
            .chain(x.p_p[t].iter().copied())
            .collect();
        for (l, line) in p.lines.iter().enumerate() {
            let flow: f64 = h.h_g[l].iter().zip(&gen).map(|(a, b)| a * b).sum::<f64>()
                - h.h_d[l].iter().zip(&dem).map(|(a, b)| a * b).sum::<f64>();
            r.line_limits = r.line_limits.max(above(flow.abs(), line.capacity));
        }
        r.power_balance = r
            .power_balance
            .max((gen.iter().sum::<f64>() - dem.iter().sum::<f64>()).abs());

        for (i, u) in p.coal_units.iter().enumerate() {
            let v = x.p_f[t][i];
            r.output_bounds = r.output_bounds.max(outside(v, u.p_min, u.p_max));
            let prev = if t == 0 { u.p0 } else { x.p_f[t - 1][i] };
            r.ramping = r.ramping.max(outside(v - prev, u.ramp_dw, u.ramp_up));
            r.coal_cost = r.coal_cost.max(above(u.cost(v), x.f_f[t][i]));
        }
        for (j, u) in p.gas_units.iter().enumerate() {
            let v = x.p_g[t][j];
            r.output_bounds = r.output_bounds.max(outside(v, u.p_min, u.p_max));
            let prev = if t == 0 { u.p0 } else { x.p_g[t - 1][j] };
            r.ramping = r.ramping.max(outside(v - prev, u.ramp_dw, u.ramp_up));
            r.gas_consumption = r
                .gas_consumption
                .max((x.g_g[t][j] - u.consumption(v)).abs());
        }
        for (n, w) in p.wind.iter().enumerate() {
            let v = x.p_w[t][n];
            r.output_bounds = r.output_bounds.max(outside(v, 0.0, w.availability[t]));
            let fw = case.meta.rho * (w.availability[t] - v);
            r.curtailment_cost = r.curtailment_cost.max((x.f_w[t][n] - fw).abs());
        }
        for (k, q) in p.p2g.iter().enumerate() {
            let v = x.p_p[t][k];
            r.p2g = r
                .p2g
                .max(outside(v, 0.0, q.p_max))
                .max((x.g_p[t][k] - q.eta * v).abs());
        }

        for (m, c) in g.compressors.iter().enumerate() {
            r.compressor_use = r
                .compressor_use
                .max((x.g_c[t][m] - c.alpha * x.g_m[t][m]).abs())
                .max(-x.g_m[t][m]);
        }
        for (i, w) in g.wells.iter().enumerate() {
            r.well_storage_bounds =
                r.well_storage_bounds
                    .max(outside(x.g_s[t][i], w.g_min, w.g_max));
        }
        for (z, s) in g.storages.iter().enumerate() {
            let prev = if t == 0 { s.s0 } else { x.s[t - 1][z] };
            r.well_storage_bounds = r
                .well_storage_bounds
                .max(outside(x.g_r[t][z], -s.g_out, s.g_in))
                .max(outside(x.s[t][z], s.s_min, s.s_max));
            r.storage_dynamics = r
                .storage_dynamics
                .max((x.s[t][z] - prev - x.g_r[t][z]).abs());
        }

        let mut bal = vec![0.0; g.nodes.len()];
        for (i, w) in g.wells.iter().enumerate() {
            bal[w.node] += x.g_s[t][i];
        }
        for (k, q) in p.p2g.iter().enumerate() {
            bal[q.gas_node] += x.g_p[t][k];
        }
        for (m, c) in g.compressors.iter().enumerate() {
            bal[c.from] -= x.g_m[t][m] + x.g_c[t][m];
            bal[c.to] += x.g_m[t][m];
        }
        for (l, pl) in g.pipelines.iter().enumerate() {
            bal[pl.from] -= x.g_pipe[t][l];
            bal[pl.to] += x.g_pipe[t][l];
        }
        for (z, s) in g.storages.iter().enumerate() {
            bal[s.node] -= x.g_r[t][z];
        }
        for (j, u) in p.gas_units.iter().enumerate() {
            bal[u.gas_node] -= x.g_g[t][j];
        }
        for l in &g.gas_loads {
            bal[l.node] -= l.demand[t];
        }
        r.gas_balance = r
            .gas_balance
            .max(bal.iter().fold(0.0, |m, v| m.max(v.abs())));

        if has_pi {
            let pi = &x.pi[t];
            for (l, pl) in g.pipelines.iter().enumerate() {
                let f = x.g_pipe[t][l];
                wey = wey.max((f * f.abs() - pl.k * (pi[pl.from] - pi[pl.to])).abs());
            }
            for (n, node) in g.nodes.iter().enumerate() {
                pbound = pbound.max(outside(pi[n], node.pi_min_sq, node.pi_max_sq));
            }
            for c in &g.compressors {
                let (pin, pout) = (pi[c.from], pi[c.to]);
                ratio = ratio
                    .max(above(c.r_min_sq * pin, pout))
                    .max(above(pout, c.r_max_sq * pin));
            }
        }
    }
    for (z, s) in g.storages.iter().enumerate() {
        if let Some(last) = x.s.last() {
            r.storage_dynamics = r.storage_dynamics.max((last[z] - s.s0).abs());
        }
    }
    if has_pi {
        r.weymouth = Some(wey);
        r.pressure_bounds = Some(pbound);
        r.compressor_ratio = Some(ratio);
    }
    r
}
