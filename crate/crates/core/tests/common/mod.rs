#![allow(dead_code)]

use iegs_core::netmodel::{parse_case, DispatchCase};
use serde_json::{json, Value};

/// One period, one bus per side of a single line, one coal unit, gas chain
/// 0 -> 1 with a cheap well at 0 and an expensive one at 1.
pub fn base_case() -> Value {
    json!({
        "meta": {"name": "t", "n_periods": 1, "period_hours": 1.0, "rho": 35.0},
        "power": {
            "buses": 2, "slack_bus": 0,
            "lines": [{"from": 0, "to": 1, "reactance": 0.1, "capacity": 1000.0}],
            "coal_units": [{"bus": 0, "p_min": 0.0, "p_max": 300.0, "ramp_dw": -1000.0, "ramp_up": 1000.0,
                            "a": 0.01, "b": 20.0, "c": 100.0, "p0": 100.0}],
            "loads": [{"bus": 1, "demand": [120.0]}]
        },
        "gas": {
            "nodes": [{"pi_min_sq": 0.0, "pi_max_sq": 100.0}, {"pi_min_sq": 0.0, "pi_max_sq": 100.0}],
            "pipelines": [{"from": 0, "to": 1, "k": 1.0}],
            "wells": [{"node": 0, "g_min": 0.0, "g_max": 50.0, "cost": 100.0},
                      {"node": 1, "g_min": 0.0, "g_max": 50.0, "cost": 500.0}],
            "gas_loads": [{"node": 1, "demand": [11.0]}]
        }
    })
}

pub fn case(v: &Value) -> DispatchCase {
    parse_case(&serde_json::to_vec(v).unwrap()).unwrap()
}

/// The base case read as a decomposition example: the master's first flow is
/// 11 on a pipeline whose pressure window carries at most 10.
pub fn rigged_case() -> DispatchCase {
    case(&base_case())
}

/// Flows in period `t` realizable by some pressure profile, with every flow
/// of the same sign as the matching anchor (anchors within `1e-6` of zero
/// take either sign). Walks the pipeline/compressor tree from node 0 and draws
/// each child pressure from the interval its parent allows; `None` when a
/// draw hits an empty interval.
pub fn sample_same_sign_flows(
    case: &DispatchCase,
    anchors: &[f64],
    rng: &mut impl rand::Rng,
) -> Option<Vec<f64>> {
    let g = &case.gas;
    let nn = g.nodes.len();
    // (neighbour, edge): edge >= 0 a pipeline, edge < 0 compressor -(m + 1)
    let mut adj = vec![Vec::new(); nn];
    for (l, p) in g.pipelines.iter().enumerate() {
        adj[p.from].push((p.to, l as isize));
        adj[p.to].push((p.from, l as isize));
    }
    for (m, c) in g.compressors.iter().enumerate() {
        adj[c.from].push((c.to, -(m as isize) - 1));
        adj[c.to].push((c.from, -(m as isize) - 1));
    }
    let mut pi = vec![f64::NAN; nn];
    fn draw(lo: f64, hi: f64, rng: &mut impl rand::Rng) -> Option<f64> {
        (lo < hi).then(|| rng.gen_range(lo..hi))
    }
    for root in 0..nn {
        if !pi[root].is_nan() {
            continue;
        }
        pi[root] = draw(g.nodes[root].pi_min_sq, g.nodes[root].pi_max_sq, rng)?;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            for &(v, e) in &adj[u] {
                if !pi[v].is_nan() {
                    continue;
                }
                let (mut lo, mut hi) = (g.nodes[v].pi_min_sq, g.nodes[v].pi_max_sq);
                if e >= 0 {
                    let l = e as usize;
                    let s = if anchors[l].abs() < 1e-6 {
                        0.0
                    } else {
                        anchors[l].signum()
                    };
                    // positive flow needs the sending node above the receiving one
                    let v_sends = g.pipelines[l].from == v;
                    match (s > 0.0, s < 0.0, v_sends) {
                        (true, _, true) | (_, true, false) => lo = lo.max(pi[u]),
                        (true, _, false) | (_, true, true) => hi = hi.min(pi[u]),
                        _ => {}
                    }
                } else {
                    let c = &g.compressors[(-e - 1) as usize];
                    if c.to == v {
                        lo = lo.max(c.r_min_sq * pi[u]);
                        hi = hi.min(c.r_max_sq * pi[u]);
                    } else {
                        lo = lo.max(pi[u] / c.r_max_sq);
                        hi = hi.min(pi[u] / c.r_min_sq);
                    }
                }
                pi[v] = draw(lo, hi, rng)?;
                stack.push(v);
            }
        }
    }
    Some(
        g.pipelines
            .iter()
            .map(|p| {
                let d = pi[p.from] - pi[p.to];
                d.signum() * (p.k * d.abs()).sqrt()
            })
            .collect(),
    )
}
