mod common;

use common::{base_case, case};
use iegs_core::master::*;
use iegs_core::netmodel::{generate_case, residuals, DispatchCase, Well};
use serde_json::json;

fn solve(c: &DispatchCase, pool: &[FlowCut]) -> Result<Schedule, MasterError> {
    solve_master(c, pool, &MasterConfig::default())
}

#[test]
fn single_coal_unit_covers_load() {
    let mut v = base_case();
    v["gas"]["gas_loads"][0]["demand"] = json!([0.0]);
    let c = case(&v);
    let s = solve(&c, &[]).unwrap();
    let d = 120.0;
    assert!((s.point.p_f[0][0] - d).abs() < 1e-7);
    let expect = 0.01 * d * d + 20.0 * d + 100.0;
    // brute-force grid over the only power variable
    let grid_best = (0..=30000)
        .map(|i| i as f64 * 0.01)
        .filter(|p| (p - d).abs() < 1e-9)
        .map(|p| 0.01 * p * p + 20.0 * p + 100.0)
        .fold(f64::INFINITY, f64::min);
    assert!((grid_best - expect).abs() < 1e-9);
    assert!(
        (s.objective - expect).abs() <= 1e-6 * (1.0 + expect),
        "{} vs {expect}",
        s.objective
    );
}

#[test]
fn cut_caps_the_flow() {
    let c = case(&base_case());
    let free = solve(&c, &[]).unwrap();
    assert!(
        (free.point.g_pipe[0][0] - 11.0).abs() < 1e-7,
        "cheap well serves everything"
    );
    let cut = FlowCut {
        terms: vec![(0, 0, 22.0)],
        rhs: 22.0 * 11.0 - 21.0,
        iteration: 1,
    };
    let s = solve(&c, &[cut]).unwrap();
    let g = s.point.g_pipe[0][0];
    assert!(g <= 11.0 - 21.0 / 22.0 + 1e-9);
    assert!((g - (11.0 - 21.0 / 22.0)).abs() < 1e-7);
    assert!(s.objective >= free.objective);
}

fn curtailment_case(rho: f64) -> DispatchCase {
    let mut v = base_case();
    v["meta"]["rho"] = json!(rho);
    v["power"]["coal_units"] = json!([]);
    v["power"]["wind"] = json!([{"bus": 0, "availability": [100.0]}]);
    v["power"]["loads"] = json!([{"bus": 1, "demand": [50.0]}]);
    v["gas"]["gas_loads"][0]["demand"] = json!([0.0]);
    case(&v)
}

#[test]
fn forced_curtailment_is_priced() {
    let s = solve(&curtailment_case(35.0), &[]).unwrap();
    assert!((s.point.p_w[0][0] - 50.0).abs() < 1e-9);
    assert!((s.point.f_w[0][0] - 1750.0).abs() < 1e-7);
    let s2 = solve(&curtailment_case(1000.0), &[]).unwrap();
    assert!((s2.point.p_w[0][0] - 50.0).abs() < 1e-9);
}

#[test]
fn infeasible_load_is_reported() {
    let mut v = base_case();
    v["power"]["loads"][0]["demand"] = json!([1000.0]);
    let err = solve(&case(&v), &[]).unwrap_err();
    match err {
        MasterError::Infeasible { rows } => {
            assert!(rows.iter().any(|r| r.contains("power balance")), "{rows:?}")
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn flows_are_extracted_per_period() {
    let c = case(&base_case());
    let s = solve(&c, &[]).unwrap();
    assert_eq!(extract_flows(&s, 0).unwrap(), &[s.point.g_pipe[0][0]]);
    assert!(matches!(
        extract_flows(&s, 1),
        Err(MasterError::PeriodOutOfRange(1))
    ));
}

#[test]
fn zero_gas_demand_leaves_pipelines_idle() {
    let mut v = base_case();
    v["gas"]["gas_loads"][0]["demand"] = json!([0.0]);
    let s = solve(&case(&v), &[]).unwrap();
    assert_eq!(extract_flows(&s, 0).unwrap(), &[0.0]);
}

#[test]
fn layout_round_trips() {
    let c = generate_case(8, 1);
    let lay = Layout::new(&c);
    for kind in VarKind::ALL {
        for t in 0..c.n_periods() {
            for e in 0..lay.count(kind) {
                assert_eq!(lay.decode(lay.index(kind, t, e)), Some((kind, t, e)));
            }
        }
    }
    assert_eq!(lay.decode(lay.len()), None);
}

#[test]
fn generated_master_is_consistent() {
    let c = generate_case(8, 1);
    let s = solve(&c, &[]).unwrap();
    let r = residuals(&c, &s.point);
    assert!(r.gas_balance <= 1e-6, "{r:?}");
    assert!(r.power_max() <= 1e-6 && r.gas_max() <= 1e-6, "{r:?}");
    // storage telescopes back to its initial level
    for (z, st) in c.gas.storages.iter().enumerate() {
        let total: f64 = s.point.g_r.iter().map(|v| v[z]).sum();
        assert!(total.abs() <= 1e-6);
        assert!((s.point.s.last().unwrap()[z] - st.s0).abs() <= 1e-6);
    }
}

#[test]
fn cuts_never_lower_the_objective() {
    let c = generate_case(4, 3);
    let mut m = MasterProblem::new(&c, &MasterConfig::default());
    let mut last = m.solve(&c).unwrap().objective;
    for t in 0..6 {
        let s = m.solve(&c).unwrap();
        // cap the largest flow of period t a little below its current value
        let flows = &s.point.g_pipe[t];
        let (l, g) = flows
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        let sign = g.signum();
        m.add_cut(FlowCut {
            terms: vec![(t, l, sign)],
            rhs: g.abs() * 0.9,
            iteration: t,
        })
        .unwrap();
        let obj = m.solve(&c).unwrap().objective;
        assert!(obj >= last - 1e-7 * last.abs(), "{obj} < {last}");
        last = obj;
    }
}

/// Pure power dispatch solved by an independent LP solver with a tangent
/// cutting-plane loop for the quadratic costs.
fn dispatch_oracle(c: &DispatchCase) -> f64 {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let p = &c.power;
    let nt = c.n_periods();
    let mut tangents: Vec<Vec<f64>> = vec![vec![]; nt * p.coal_units.len()];
    for (k, tv) in tangents.iter_mut().enumerate() {
        let u = &p.coal_units[k % p.coal_units.len()];
        tv.extend((0..5).map(|q| u.p_min + (u.p_max - u.p_min) * q as f64 / 4.0));
    }
    loop {
        let mut pr = Problem::new(OptimizationDirection::Minimize);
        let mut pf = vec![];
        let mut ff = vec![];
        let mut pg = vec![];
        let mut pw = vec![];
        let mut constant = 0.0;
        for t in 0..nt {
            for u in &p.coal_units {
                pf.push(pr.add_var(0.0, (u.p_min, u.p_max)));
                ff.push(pr.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY)));
            }
            for u in &p.gas_units {
                pg.push(pr.add_var(0.0, (u.p_min, u.p_max)));
            }
            for w in &p.wind {
                pw.push(pr.add_var(-c.meta.rho, (0.0, w.availability[t])));
                constant += c.meta.rho * w.availability[t];
            }
        }
        let nc = p.coal_units.len();
        let ng = p.gas_units.len();
        let nw = p.wind.len();
        for t in 0..nt {
            for (i, u) in p.coal_units.iter().enumerate() {
                for &q in &tangents[t * nc + i] {
                    let slope = 2.0 * u.a * q + u.b;
                    pr.add_constraint(
                        &[(ff[t * nc + i], 1.0), (pf[t * nc + i], -slope)],
                        ComparisonOp::Ge,
                        u.c - u.a * q * q,
                    );
                }
            }
            let mut bal = vec![];
            bal.extend((0..nc).map(|i| (pf[t * nc + i], 1.0)));
            bal.extend((0..ng).map(|j| (pg[t * ng + j], 1.0)));
            bal.extend((0..nw).map(|n| (pw[t * nw + n], 1.0)));
            let d: f64 = p.loads.iter().map(|l| l.demand[t]).sum();
            pr.add_constraint(&bal, ComparisonOp::Eq, d);
            for (l, line) in p.lines.iter().enumerate() {
                let mut terms = vec![];
                let hg = &c.factors.h_g[l];
                for i in 0..nc {
                    terms.push((pf[t * nc + i], hg[i]));
                }
                for j in 0..ng {
                    terms.push((pg[t * ng + j], hg[nc + j]));
                }
                for n in 0..nw {
                    terms.push((pw[t * nw + n], hg[nc + ng + n]));
                }
                let fixed: f64 = p
                    .loads
                    .iter()
                    .enumerate()
                    .map(|(k, ld)| c.factors.h_d[l][k] * ld.demand[t])
                    .sum();
                pr.add_constraint(&terms, ComparisonOp::Le, line.capacity + fixed);
                pr.add_constraint(&terms, ComparisonOp::Ge, -line.capacity + fixed);
            }
            for (i, u) in p.coal_units.iter().enumerate() {
                add_ramp(&mut pr, t, &pf, nc, i, u.ramp_dw, u.ramp_up, u.p0);
            }
            for (j, u) in p.gas_units.iter().enumerate() {
                add_ramp(&mut pr, t, &pg, ng, j, u.ramp_dw, u.ramp_up, u.p0);
            }
        }
        let sol = pr.solve().expect("oracle LP solves");
        let mut added = false;
        for t in 0..nt {
            for (i, u) in p.coal_units.iter().enumerate() {
                let x = sol[pf[t * nc + i]];
                let f = sol[ff[t * nc + i]];
                if u.cost(x) - f > 1e-9 * (1.0 + f.abs()) {
                    tangents[t * nc + i].push(x);
                    added = true;
                }
            }
        }
        if !added {
            return sol.objective() + constant;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn add_ramp(
    pr: &mut minilp::Problem,
    t: usize,
    v: &[minilp::Variable],
    n: usize,
    i: usize,
    dw: f64,
    up: f64,
    p0: f64,
) {
    use minilp::ComparisonOp;
    if t == 0 {
        pr.add_constraint(&[(v[i], 1.0)], ComparisonOp::Le, p0 + up);
        pr.add_constraint(&[(v[i], 1.0)], ComparisonOp::Ge, p0 + dw);
    } else {
        let terms = [(v[t * n + i], 1.0), (v[(t - 1) * n + i], -1.0)];
        pr.add_constraint(&terms, ComparisonOp::Le, up);
        pr.add_constraint(&terms, ComparisonOp::Ge, dw);
    }
}

#[test]
fn without_gas_demand_master_is_plain_dispatch() {
    for seed in [1, 2] {
        let mut c = generate_case(4, seed);
        for l in &mut c.gas.gas_loads {
            l.demand.iter_mut().for_each(|d| *d = 0.0);
        }
        // no gas-side costs or limits: free unlimited wells everywhere, P2G off
        c.gas.wells = (0..c.gas.nodes.len())
            .map(|node| Well {
                node,
                g_min: 0.0,
                g_max: 1e4,
                cost: 0.0,
            })
            .collect();
        for q in &mut c.power.p2g {
            q.p_max = 0.0;
        }
        for s in &mut c.gas.storages {
            s.g_in = 0.0;
            s.g_out = 0.0;
        }
        for pl in &mut c.gas.pipelines {
            pl.k = 1e6;
        }
        let s = solve(&c, &[]).unwrap();
        let oracle = dispatch_oracle(&c);
        let rel = (s.objective - oracle).abs() / oracle.abs();
        assert!(
            rel <= 1e-6,
            "seed {seed}: master {} oracle {oracle} rel {rel:e}",
            s.objective
        );
    }
}
