//! Seeded synthetic cases built around a known feasible operating point.
//!
//! The power side is a fixed 6-bus meshed grid. The gas side is an inlet node
//! feeding a compressor whose outlet roots a random pipeline tree; a cheap
//! well sits at the deepest leaf, a mid-priced well at the inlet and an
//! expensive well next to a gas load. Every limit (ramps, line ratings, well
//! capacities, pipeline constants, storage levels) is derived from the
//! construction point with slack, so that point satisfies all constraints.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::case::*;
use super::point::OperatingPoint;
use super::ptdf::{compute_ptdf, Ptdf};

const N_PERIODS: usize = 24;
const BUSES: usize = 6;
const PI_TREE: (f64, f64) = (16.0, 49.0);
const PI_INLET: (f64, f64) = (9.0, 25.0);
const PI_TOP: f64 = 48.0;
/// Largest pressure swing along any root-to-leaf path at the construction point.
const PATH_DROP: f64 = 24.0;

/// Generated case plus the operating point it was built from.
pub fn generate_case_with_witness(pipelines: usize, seed: u64) -> (DispatchCase, OperatingPoint) {
    let pipelines = pipelines.clamp(1, 500);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nt = N_PERIODS;
    let shape: Vec<f64> = (0..nt)
        .map(|t| {
            0.5 + 0.35 * (2.0 * PI * (t as f64 - 9.0) / 24.0).sin() + rng.gen_range(-0.05..0.05)
        })
        .collect();

    // ---- gas topology: node 0 inlet, node 1 compressor outlet / tree root
    let nn = pipelines + 2;
    let mut parent = vec![usize::MAX; nn];
    let mut depth = vec![0usize; nn];
    for i in 2..nn {
        let lo = i.saturating_sub(3).max(1);
        parent[i] = rng.gen_range(lo..i);
        depth[i] = depth[parent[i]] + 1;
    }
    let depth_max = *depth.iter().max().unwrap();
    let far_leaf = (2..nn).max_by_key(|&i| (depth[i], i)).unwrap();
    let tree_node = |rng: &mut ChaCha8Rng| rng.gen_range(1..nn);

    // ---- power-side elements
    let mut power = PowerSystem {
        buses: BUSES,
        slack_bus: 0,
        lines: [
            (0, 1),
            (1, 2),
            (2, 3),
            (3, 4),
            (4, 5),
            (5, 0),
            (0, 3),
            (1, 4),
        ]
        .iter()
        .map(|&(from, to)| Line {
            from,
            to,
            reactance: Some(rng.gen_range(0.05..0.15)),
            capacity: 1.0,
        })
        .collect(),
        ptdf: None,
        coal_units: Vec::new(),
        gas_units: Vec::new(),
        wind: Vec::new(),
        loads: Vec::new(),
        p2g: Vec::new(),
    };
    for bus in [0, 2, 4] {
        let p_min = rng.gen_range(20.0..40.0);
        power.coal_units.push(CoalUnit {
            bus,
            p_min,
            p_max: p_min + rng.gen_range(130.0..210.0),
            ramp_dw: 0.0,
            ramp_up: 0.0,
            a: rng.gen_range(0.002..0.01),
            b: rng.gen_range(15.0..25.0),
            c: rng.gen_range(100.0..300.0),
            p0: 0.0,
        });
    }
    for bus in [1, 3] {
        let p_min = rng.gen_range(10.0..20.0);
        power.gas_units.push(GasUnit {
            bus,
            gas_node: tree_node(&mut rng),
            p_min,
            p_max: p_min + rng.gen_range(90.0..130.0),
            ramp_dw: 0.0,
            ramp_up: 0.0,
            a: rng.gen_range(1e-4..3e-4),
            b: rng.gen_range(0.04..0.07),
            c: rng.gen_range(0.2..0.5),
            p0: 0.0,
        });
    }
    let wind_cap = rng.gen_range(80.0..140.0);
    let avail: Vec<f64> = (0..nt)
        .map(|t| wind_cap * (0.35 + 0.5 * (1.0 - shape[t]).clamp(0.0, 1.0)))
        .collect();
    power.wind.push(WindFarm {
        bus: 5,
        availability: avail.clone(),
    });
    let p2g_max = rng.gen_range(20.0..40.0);
    power.p2g.push(PowerToGas {
        bus: 4,
        gas_node: tree_node(&mut rng),
        eta: rng.gen_range(0.15..0.25),
        p_max: p2g_max,
    });

    // ---- construction dispatch
    let mut x = OperatingPoint::default();
    let shares = [0.3, 0.3, 0.4];
    let mut load_profiles = vec![vec![0.0; nt]; 3];
    for t in 0..nt {
        let frac = (0.25 + 0.45 * shape[t]).clamp(0.1, 0.9);
        let p_f: Vec<f64> = power
            .coal_units
            .iter()
            .map(|u| u.p_min + frac * (u.p_max - u.p_min))
            .collect();
        let p_g: Vec<f64> = power
            .gas_units
            .iter()
            .map(|u| u.p_min + (0.3 + 0.4 * shape[t].clamp(0.0, 1.0)) * (u.p_max - u.p_min))
            .collect();
        let p_w = vec![0.85 * avail[t]];
        let p_p = vec![0.3 * p2g_max];
        let total = p_f.iter().sum::<f64>() + p_g.iter().sum::<f64>() + p_w[0] - p_p[0];
        for (i, s) in shares.iter().enumerate() {
            load_profiles[i][t] = s * total;
        }
        x.f_f.push(
            power
                .coal_units
                .iter()
                .zip(&p_f)
                .map(|(u, &p)| u.cost(p))
                .collect(),
        );
        x.g_g.push(
            power
                .gas_units
                .iter()
                .zip(&p_g)
                .map(|(u, &p)| u.consumption(p))
                .collect(),
        );
        x.f_w.push(vec![0.0]);
        x.g_p.push(
            power
                .p2g
                .iter()
                .zip(&p_p)
                .map(|(q, &p)| q.eta * p)
                .collect(),
        );
        x.p_f.push(p_f);
        x.p_g.push(p_g);
        x.p_w.push(p_w);
        x.p_p.push(p_p);
    }
    for (i, bus) in [1, 2, 5].into_iter().enumerate() {
        power.loads.push(Load {
            bus,
            demand: load_profiles[i].clone(),
        });
    }
    let rho = 35.0;
    for t in 0..nt {
        x.f_w[t][0] = rho * (avail[t] - x.p_w[t][0]);
    }
    for (i, u) in power.coal_units.iter_mut().enumerate() {
        let (dw, up) = ramp_extremes((0..nt).map(|t| x.p_f[t][i]));
        u.p0 = x.p_f[0][i];
        u.ramp_dw = dw - rng.gen_range(10.0..25.0);
        u.ramp_up = up + rng.gen_range(10.0..25.0);
    }
    for (j, u) in power.gas_units.iter_mut().enumerate() {
        let (dw, up) = ramp_extremes((0..nt).map(|t| x.p_g[t][j]));
        u.p0 = x.p_g[0][j];
        u.ramp_dw = dw - rng.gen_range(10.0..25.0);
        u.ramp_up = up + rng.gen_range(10.0..25.0);
    }
    let factors = compute_ptdf(&power).expect("fixed grid is connected");
    let mut peak = vec![0.0f64; power.lines.len()];
    for t in 0..nt {
        let flows = line_flows(&factors, &power, &x, t);
        for (p, f) in peak.iter_mut().zip(flows) {
            *p = p.max(f.abs());
        }
    }
    for (line, p) in power.lines.iter_mut().zip(&peak) {
        line.capacity = 1.3 * p + 20.0;
    }

    // ---- gas loads, storage and wells
    let mut gas_loads = Vec::new();
    let n_loads = (pipelines / 2).max(1);
    let mut load_nodes: Vec<usize> = Vec::new();
    while load_nodes.len() < n_loads.min(nn - 1) {
        let n = tree_node(&mut rng);
        if !load_nodes.contains(&n) {
            load_nodes.push(n);
        }
    }
    for &node in &load_nodes {
        let base = rng.gen_range(4.0..12.0);
        gas_loads.push(GasLoad {
            node,
            demand: (0..nt).map(|t| base * (0.7 + 0.6 * shape[t])).collect(),
        });
    }
    let storage_node = tree_node(&mut rng);
    let demand_at = |t: usize| -> f64 {
        gas_loads.iter().map(|l| l.demand[t]).sum::<f64>() + x.g_g[t].iter().sum::<f64>()
            - x.g_p[t].iter().sum::<f64>()
    };
    let d_min = (0..nt).map(demand_at).fold(f64::INFINITY, f64::min);
    let rate = 0.1 * d_min;
    let half = nt / 2;
    let g_r: Vec<f64> = (0..nt)
        .map(|t| {
            if t < half {
                rate
            } else if t < 2 * half {
                -rate
            } else {
                0.0
            }
        })
        .collect();
    let s0 = 50.0;
    let mut level = s0;
    let mut s_hist = Vec::with_capacity(nt);
    for &q in &g_r {
        level += q;
        s_hist.push(level);
    }
    let swing = rate * half as f64;
    let storages = vec![Storage {
        node: storage_node,
        s_min: s0 - swing - 5.0,
        s_max: s0 + 2.0 * swing + 5.0,
        s0,
        g_in: 2.0 * rate,
        g_out: 2.0 * rate,
    }];
    let alpha = rng.gen_range(0.03..0.05);
    let near_load = load_nodes[0];
    let out_b = 0.3 * d_min;
    let out_c = 0.1 * d_min;
    let mut g_m = Vec::with_capacity(nt);
    let mut out_a = Vec::with_capacity(nt);
    for t in 0..nt {
        let gm = demand_at(t) + g_r[t] - out_b - out_c;
        g_m.push(gm);
        out_a.push(gm * (1.0 + alpha));
    }
    let a_max = out_a.iter().fold(0.0f64, |m, &v| m.max(v));
    let wells = vec![
        Well {
            node: 0,
            g_min: 0.0,
            g_max: 2.0 * a_max,
            cost: rng.gen_range(250.0..300.0),
        },
        Well {
            node: far_leaf,
            g_min: 0.0,
            g_max: 3.0 * out_b,
            cost: rng.gen_range(150.0..200.0),
        },
        Well {
            node: near_load,
            g_min: 0.0,
            g_max: (2.0 * out_c).max(0.5 * d_min),
            cost: rng.gen_range(400.0..450.0),
        },
    ];

    // ---- tree flows from nodal net withdrawals (children have larger indices)
    let mut flows = vec![vec![0.0; pipelines]; nt];
    let mut withdrawal = vec![vec![0.0; nn]; nt];
    for t in 0..nt {
        let w = &mut withdrawal[t];
        for l in &gas_loads {
            w[l.node] += l.demand[t];
        }
        for (j, u) in power.gas_units.iter().enumerate() {
            w[u.gas_node] += x.g_g[t][j];
        }
        for (k, q) in power.p2g.iter().enumerate() {
            w[q.gas_node] -= x.g_p[t][k];
        }
        w[storage_node] += g_r[t];
        w[far_leaf] -= out_b;
        w[near_load] -= out_c;
        let mut subtree = w.clone();
        for i in (2..nn).rev() {
            flows[t][i - 2] = subtree[i];
            let v = subtree[i];
            subtree[parent[i]] += v;
        }
    }
    let drop = PATH_DROP / depth_max.max(1) as f64;
    let mut pipes = Vec::with_capacity(pipelines);
    for i in 2..nn {
        let peak = (0..nt)
            .map(|t| flows[t][i - 2].abs())
            .fold(1.0f64, f64::max);
        pipes.push(Pipeline {
            from: parent[i],
            to: i,
            k: peak * peak / drop,
        });
    }

    // ---- pressures
    let drops = |pipes: &[Pipeline]| -> Vec<Vec<f64>> {
        (0..nt)
            .map(|t| {
                let mut pi = vec![0.0; nn];
                for i in 2..nn {
                    let f = flows[t][i - 2];
                    pi[i] = pi[parent[i]] - f * f.abs() / pipes[i - 2].k;
                }
                pi
            })
            .collect()
    };
    // reverse flows can stack drops along two branches; stiffen every pipe
    // until each period's spread fits the pressure window
    let window = PI_TOP - PI_TREE.0 - 1.0;
    let spread = drops(&pipes)
        .iter()
        .map(|pi| {
            let (lo, hi) = pi[1..]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            hi - lo
        })
        .fold(0.0f64, f64::max);
    if spread > window {
        for p in pipes.iter_mut() {
            p.k *= spread / window;
        }
    }
    let mut pressures = drops(&pipes);
    for pi in pressures.iter_mut() {
        let top = pi[1..].iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        for v in pi[1..].iter_mut() {
            *v += PI_TOP - top;
        }
        pi[0] = (pi[1] / 2.0).clamp(PI_INLET.0, PI_INLET.1);
    }

    let mut nodes = vec![GasNode {
        pi_min_sq: PI_INLET.0,
        pi_max_sq: PI_INLET.1,
    }];
    nodes.extend((1..nn).map(|_| GasNode {
        pi_min_sq: PI_TREE.0,
        pi_max_sq: PI_TREE.1,
    }));
    let gas = GasSystem {
        nodes,
        pipelines: pipes,
        compressors: vec![Compressor {
            from: 0,
            to: 1,
            r_min_sq: 1.2,
            r_max_sq: 3.5,
            alpha,
        }],
        wells,
        storages,
        gas_loads,
    };

    for t in 0..nt {
        x.g_pipe.push(flows[t].clone());
        x.g_m.push(vec![g_m[t]]);
        x.g_c.push(vec![alpha * g_m[t]]);
        x.g_s.push(vec![out_a[t], out_b, out_c]);
        x.g_r.push(vec![g_r[t]]);
        x.s.push(vec![s_hist[t]]);
    }
    x.pi = pressures;

    let case = DispatchCase {
        meta: Meta {
            name: format!("synthetic-{pipelines}p-s{seed}"),
            n_periods: nt,
            period_hours: 1.0,
            rho,
            units: [
                ("power", "MW"),
                ("gas", "kcf/h"),
                ("pressure", "bar^2"),
                ("cost", "USD"),
            ]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
        },
        power,
        gas,
        factors: Ptdf::default(),
    };
    let case = case.prepare().expect("generated case is valid");
    (case, x)
}

/// Deterministic synthetic case with `pipelines` pipelines and 24 periods.
pub fn generate_case(pipelines: usize, seed: u64) -> DispatchCase {
    generate_case_with_witness(pipelines, seed).0
}

/// Single-period case with one or two pipelines in a chain and no
/// compressor, storage, wind or P2G: a cheap well at the chain head, an
/// expensive one at the tail next to the gas unit and the gas load.
pub fn generate_tiny_case(pipelines: usize, seed: u64) -> DispatchCase {
    let pipelines = pipelines.clamp(1, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7139_0000);
    let tail = pipelines;
    let p_min = rng.gen_range(10.0..20.0);
    let gas_unit = GasUnit {
        bus: 1,
        gas_node: tail,
        p_min,
        p_max: p_min + rng.gen_range(60.0..100.0),
        ramp_dw: -1000.0,
        ramp_up: 1000.0,
        a: rng.gen_range(1e-4..3e-4),
        b: rng.gen_range(0.04..0.07),
        c: rng.gen_range(0.2..0.5),
        p0: p_min,
    };
    let coal = CoalUnit {
        bus: 0,
        p_min: 0.0,
        p_max: 400.0,
        ramp_dw: -1000.0,
        ramp_up: 1000.0,
        a: rng.gen_range(0.005..0.02),
        b: rng.gen_range(15.0..25.0),
        c: rng.gen_range(50.0..150.0),
        p0: 100.0,
    };
    let load = rng.gen_range(150.0..250.0);
    let gas_load = rng.gen_range(4.0..10.0);
    let demand_mid = gas_load + gas_unit.consumption(0.5 * (gas_unit.p_min + gas_unit.p_max));
    let spread = PI_TREE.1 - PI_TREE.0;
    // the cheap well alone cannot serve the mid-range demand
    let reach = rng.gen_range(0.45..0.75) * demand_mid;
    let pipes: Vec<Pipeline> = (0..pipelines)
        .map(|l| Pipeline {
            from: l,
            to: l + 1,
            k: reach * reach / (spread / pipelines as f64) * rng.gen_range(0.9..1.1),
        })
        .collect();
    let power = PowerSystem {
        buses: 2,
        slack_bus: 0,
        lines: vec![Line {
            from: 0,
            to: 1,
            reactance: Some(0.1),
            capacity: 1000.0,
        }],
        ptdf: None,
        coal_units: vec![coal],
        gas_units: vec![gas_unit],
        wind: vec![],
        loads: vec![Load {
            bus: 1,
            demand: vec![load],
        }],
        p2g: vec![],
    };
    let gas = GasSystem {
        nodes: (0..=pipelines)
            .map(|_| GasNode {
                pi_min_sq: PI_TREE.0,
                pi_max_sq: PI_TREE.1,
            })
            .collect(),
        pipelines: pipes,
        compressors: vec![],
        wells: vec![
            Well {
                node: 0,
                g_min: 0.0,
                g_max: 3.0 * demand_mid,
                cost: rng.gen_range(150.0..200.0),
            },
            Well {
                node: tail,
                g_min: 0.0,
                g_max: 3.0 * demand_mid,
                cost: rng.gen_range(380.0..450.0),
            },
        ],
        storages: vec![],
        gas_loads: vec![GasLoad {
            node: tail,
            demand: vec![gas_load],
        }],
    };
    let case = DispatchCase {
        meta: Meta {
            name: format!("tiny-{pipelines}p-s{seed}"),
            n_periods: 1,
            period_hours: 1.0,
            rho: 35.0,
            units: Default::default(),
        },
        power,
        gas,
        factors: Ptdf::default(),
    };
    case.prepare().expect("tiny case is valid")
}

fn ramp_extremes(series: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = series.collect();
    let mut dw = 0.0f64;
    let mut up = 0.0f64;
    for w in v.windows(2) {
        dw = dw.min(w[1] - w[0]);
        up = up.max(w[1] - w[0]);
    }
    (dw, up)
}

fn line_flows(h: &Ptdf, power: &PowerSystem, x: &OperatingPoint, t: usize) -> Vec<f64> {
    let gen: Vec<f64> = x.p_f[t]
        .iter()
        .chain(&x.p_g[t])
        .chain(&x.p_w[t])
        .copied()
        .collect();
    let dem: Vec<f64> = power
        .loads
        .iter()
        .map(|l| l.demand[t])
        .chain(x.p_p[t].iter().copied())
        .collect();
    h.h_g
        .iter()
        .zip(&h.h_d)
        .map(|(hg, hd)| {
            hg.iter().zip(&gen).map(|(a, b)| a * b).sum::<f64>()
                - hd.iter().zip(&dem).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}
