//! Case data for the coupled power/gas system and the JSON case format.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ptdf::{compute_ptdf, Ptdf};
use super::CaseError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub name: String,
    pub n_periods: usize,
    #[serde(default = "one")]
    pub period_hours: f64,
    /// Wind curtailment penalty per MW.
    pub rho: f64,
    /// Free-form unit labels, for reporting only.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub units: BTreeMap<String, String>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reactance: Option<f64>,
    pub capacity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalUnit {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// Largest allowed decrease per period, as a non-positive number.
    pub ramp_dw: f64,
    pub ramp_up: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p0: f64,
}

impl CoalUnit {
    pub fn cost(&self, p: f64) -> f64 {
        self.a * p * p + self.b * p + self.c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasUnit {
    pub bus: usize,
    pub gas_node: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub ramp_dw: f64,
    pub ramp_up: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p0: f64,
}

impl GasUnit {
    /// Gas burned at output `p`.
    pub fn consumption(&self, p: f64) -> f64 {
        self.a * p * p + self.b * p + self.c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindFarm {
    pub bus: usize,
    pub availability: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: usize,
    pub demand: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerToGas {
    pub bus: usize,
    pub gas_node: usize,
    pub eta: f64,
    pub p_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSystem {
    pub buses: usize,
    #[serde(default)]
    pub slack_bus: usize,
    pub lines: Vec<Line>,
    /// Explicit distribution factors; computed from line reactances when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ptdf: Option<Ptdf>,
    #[serde(default)]
    pub coal_units: Vec<CoalUnit>,
    #[serde(default)]
    pub gas_units: Vec<GasUnit>,
    #[serde(default)]
    pub wind: Vec<WindFarm>,
    #[serde(default)]
    pub loads: Vec<Load>,
    #[serde(default)]
    pub p2g: Vec<PowerToGas>,
}

impl PowerSystem {
    /// Generating units in distribution-factor column order: coal, gas, wind.
    pub fn generator_buses(&self) -> Vec<usize> {
        let coal = self.coal_units.iter().map(|u| u.bus);
        let gas = self.gas_units.iter().map(|u| u.bus);
        let wind = self.wind.iter().map(|w| w.bus);
        coal.chain(gas).chain(wind).collect()
    }

    /// Demand elements in distribution-factor column order: loads, P2G.
    pub fn demand_buses(&self) -> Vec<usize> {
        self.loads
            .iter()
            .map(|l| l.bus)
            .chain(self.p2g.iter().map(|p| p.bus))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasNode {
    pub pi_min_sq: f64,
    pub pi_max_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub from: usize,
    pub to: usize,
    pub k: f64,
}

impl Pipeline {
    /// Largest flow magnitude any pressure profile within bounds can carry.
    pub fn flow_cap(&self, nodes: &[GasNode]) -> f64 {
        let fwd = nodes[self.from].pi_max_sq - nodes[self.to].pi_min_sq;
        let bwd = nodes[self.to].pi_max_sq - nodes[self.from].pi_min_sq;
        (self.k * fwd.max(bwd).max(0.0)).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Compressor {
    pub from: usize,
    pub to: usize,
    pub r_min_sq: f64,
    pub r_max_sq: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    0.03
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Well {
    pub node: usize,
    pub g_min: f64,
    pub g_max: f64,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Storage {
    pub node: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub s0: f64,
    pub g_in: f64,
    pub g_out: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasLoad {
    pub node: usize,
    pub demand: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasSystem {
    pub nodes: Vec<GasNode>,
    #[serde(default)]
    pub pipelines: Vec<Pipeline>,
    #[serde(default)]
    pub compressors: Vec<Compressor>,
    #[serde(default)]
    pub wells: Vec<Well>,
    #[serde(default)]
    pub storages: Vec<Storage>,
    #[serde(default)]
    pub gas_loads: Vec<GasLoad>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchCase {
    pub meta: Meta,
    pub power: PowerSystem,
    pub gas: GasSystem,
    /// Distribution factors in use (explicit or computed); filled by [`DispatchCase::prepare`].
    #[serde(skip)]
    pub factors: Ptdf,
}

impl DispatchCase {
    pub fn n_periods(&self) -> usize {
        self.meta.n_periods
    }

    /// Validates the case and fills in the distribution factors.
    pub fn prepare(mut self) -> Result<Self, CaseError> {
        validate(&self)?;
        self.factors = match &self.power.ptdf {
            Some(p) => p.clone(),
            None => compute_ptdf(&self.power)?,
        };
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serialises")
    }
}

/// Parses and validates a JSON case document.
pub fn parse_case(raw: &[u8]) -> Result<DispatchCase, CaseError> {
    let case: DispatchCase = serde_json::from_slice(raw).map_err(|e| {
        let msg = e.to_string();
        if msg.starts_with("missing field") {
            CaseError::MissingField(msg)
        } else {
            CaseError::Syntax(msg)
        }
    })?;
    case.prepare()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), CaseError> {
    if cond {
        Ok(())
    } else {
        Err(CaseError::Invalid(msg()))
    }
}

fn check_ref(
    kind: &str,
    idx: usize,
    what: &str,
    len: usize,
    target: &str,
) -> Result<(), CaseError> {
    if idx < len {
        Ok(())
    } else {
        Err(CaseError::DanglingReference(format!(
            "{kind}: {what} {idx} but only {len} {target}"
        )))
    }
}

fn check_profile(kind: &str, profile: &[f64], n: usize) -> Result<(), CaseError> {
    if profile.len() != n {
        return Err(CaseError::ProfileLength {
            element: kind.to_string(),
            expected: n,
            got: profile.len(),
        });
    }
    check(profile.iter().all(|v| v.is_finite()), || {
        format!("{kind}: non-finite profile entry")
    })
}

fn validate(case: &DispatchCase) -> Result<(), CaseError> {
    let nt = case.meta.n_periods;
    let p = &case.power;
    let g = &case.gas;
    check(nt >= 1, || "n_periods must be at least 1".into())?;
    check(case.meta.rho >= 0.0, || "rho must be non-negative".into())?;
    check(case.meta.period_hours > 0.0, || {
        "period_hours must be positive".into()
    })?;
    check(p.buses >= 1, || "at least one bus is required".into())?;
    check_ref("power", p.slack_bus, "slack bus", p.buses, "buses")?;

    for (i, l) in p.lines.iter().enumerate() {
        let kind = format!("line {i}");
        check_ref(&kind, l.from, "bus", p.buses, "buses")?;
        check_ref(&kind, l.to, "bus", p.buses, "buses")?;
        check(l.from != l.to, || format!("{kind} is a self-loop"))?;
        check(l.capacity > 0.0, || {
            format!("{kind}: capacity must be positive")
        })?;
        if p.ptdf.is_none() {
            match l.reactance {
                Some(x) => check(x.is_finite() && x > 0.0, || {
                    format!("{kind}: reactance must be positive")
                })?,
                None => {
                    return Err(CaseError::MissingField(format!(
                        "{kind}: reactance (no explicit ptdf given)"
                    )))
                }
            }
        }
    }
    if let Some(h) = &p.ptdf {
        let ng = p.coal_units.len() + p.gas_units.len() + p.wind.len();
        let nd = p.loads.len() + p.p2g.len();
        check(
            h.h_g.len() == p.lines.len() && h.h_d.len() == p.lines.len(),
            || "ptdf must have one row per line".into(),
        )?;
        check(h.h_g.iter().all(|r| r.len() == ng), || {
            format!("ptdf h_g needs {ng} columns (coal, gas, wind)")
        })?;
        check(h.h_d.iter().all(|r| r.len() == nd), || {
            format!("ptdf h_d needs {nd} columns (loads, p2g)")
        })?;
    }

    for (i, u) in p.coal_units.iter().enumerate() {
        let kind = format!("coal unit {i}");
        check_ref(&kind, u.bus, "bus", p.buses, "buses")?;
        check(u.p_min <= u.p_max, || format!("{kind}: p_min > p_max"))?;
        check(u.a > 0.0, || {
            format!("{kind}: quadratic cost coefficient must be positive")
        })?;
        check(u.ramp_dw <= 0.0 && u.ramp_up >= 0.0, || {
            format!("{kind}: need ramp_dw <= 0 <= ramp_up")
        })?;
    }
    for (i, u) in p.gas_units.iter().enumerate() {
        let kind = format!("gas unit {i}");
        check_ref(&kind, u.bus, "bus", p.buses, "buses")?;
        check_ref(&kind, u.gas_node, "gas node", g.nodes.len(), "gas nodes")?;
        check(u.p_min <= u.p_max, || format!("{kind}: p_min > p_max"))?;
        check(u.a >= 0.0, || {
            format!("{kind}: quadratic coefficient must be non-negative")
        })?;
        check(u.ramp_dw <= 0.0 && u.ramp_up >= 0.0, || {
            format!("{kind}: need ramp_dw <= 0 <= ramp_up")
        })?;
    }
    for (i, w) in p.wind.iter().enumerate() {
        let kind = format!("wind farm {i}");
        check_ref(&kind, w.bus, "bus", p.buses, "buses")?;
        check_profile(&kind, &w.availability, nt)?;
        check(w.availability.iter().all(|&v| v >= 0.0), || {
            format!("{kind}: negative availability")
        })?;
    }
    for (i, l) in p.loads.iter().enumerate() {
        let kind = format!("load {i}");
        check_ref(&kind, l.bus, "bus", p.buses, "buses")?;
        check_profile(&kind, &l.demand, nt)?;
    }
    for (i, q) in p.p2g.iter().enumerate() {
        let kind = format!("p2g {i}");
        check_ref(&kind, q.bus, "bus", p.buses, "buses")?;
        check_ref(&kind, q.gas_node, "gas node", g.nodes.len(), "gas nodes")?;
        check(q.eta > 0.0 && q.p_max >= 0.0, || {
            format!("{kind}: need eta > 0 and p_max >= 0")
        })?;
    }

    check(!g.nodes.is_empty(), || {
        "at least one gas node is required".into()
    })?;
    for (i, n) in g.nodes.iter().enumerate() {
        check(0.0 <= n.pi_min_sq && n.pi_min_sq <= n.pi_max_sq, || {
            format!("gas node {i}: need 0 <= pi_min_sq <= pi_max_sq")
        })?;
    }
    let nn = g.nodes.len();
    for (i, l) in g.pipelines.iter().enumerate() {
        let kind = format!("pipeline {i}");
        check_ref(&kind, l.from, "node", nn, "gas nodes")?;
        check_ref(&kind, l.to, "node", nn, "gas nodes")?;
        check(l.from != l.to, || format!("{kind} is a self-loop"))?;
        check(l.k > 0.0 && l.k.is_finite(), || {
            format!("{kind}: k must be positive")
        })?;
    }
    for (i, c) in g.compressors.iter().enumerate() {
        let kind = format!("compressor {i}");
        check_ref(&kind, c.from, "node", nn, "gas nodes")?;
        check_ref(&kind, c.to, "node", nn, "gas nodes")?;
        check(1.0 <= c.r_min_sq && c.r_min_sq <= c.r_max_sq, || {
            format!("{kind}: need 1 <= r_min_sq <= r_max_sq")
        })?;
        check((0.0..=0.1).contains(&c.alpha), || {
            format!("{kind}: alpha must lie in [0, 0.1]")
        })?;
    }
    for (i, w) in g.wells.iter().enumerate() {
        let kind = format!("well {i}");
        check_ref(&kind, w.node, "node", nn, "gas nodes")?;
        check(w.g_min <= w.g_max, || format!("{kind}: g_min > g_max"))?;
        check(w.cost.is_finite(), || {
            format!("{kind}: cost must be finite")
        })?;
    }
    for (i, s) in g.storages.iter().enumerate() {
        let kind = format!("storage {i}");
        check_ref(&kind, s.node, "node", nn, "gas nodes")?;
        check(s.s_min <= s.s0 && s.s0 <= s.s_max, || {
            format!("{kind}: need s_min <= s0 <= s_max")
        })?;
        check(s.g_in >= 0.0 && s.g_out >= 0.0, || {
            format!("{kind}: rate limits must be non-negative")
        })?;
    }
    for (i, l) in g.gas_loads.iter().enumerate() {
        let kind = format!("gas load {i}");
        check_ref(&kind, l.node, "node", nn, "gas nodes")?;
        check_profile(&kind, &l.demand, nt)?;
    }
    Ok(())
}
