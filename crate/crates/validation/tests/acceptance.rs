//! End-to-end acceptance run. Every check prints one PASS/FAIL line with the
//! values it measured; the process fails if any check did. Checks run one
//! after another so the wall-time comparisons do not compete for cores.

use std::process::ExitCode;
use std::time::Instant;

use iegs_core::baselines::{
    brute_force, run_bd, run_pwl, BdConfig, BdLayout, BdOutcome, PwlConfig, PwlOutcome,
};
use iegs_core::ibd::{build_subproblem, check_feasibility, run_ibd, IbdConfig, IbdOutcome};
use iegs_core::netmodel::{generate_case, generate_tiny_case, residuals, DispatchCase};
use iegs_core::solvecore::{
    oa_refine, solve_lp, solve_mip, LinearProgram, LpStatus, MipOptions, MipStatus,
    MixedIntegerProgram, Sense,
};
use iegs_validation::{sample_same_sign_flows, Report, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn ibd(c: &DispatchCase) -> IbdOutcome {
    run_ibd(c, &IbdConfig::default()).expect("ibd run")
}

fn pwl(c: &DispatchCase, segments: usize) -> PwlOutcome {
    run_pwl(
        c,
        &PwlConfig {
            segments,
            ..PwlConfig::default()
        },
    )
    .expect("pwl run")
}

/// Seeded suite shared by the decomposition checks.
fn suite() -> Vec<(String, DispatchCase)> {
    let mut cases: Vec<_> = (1..=3)
        .map(|s| (format!("tiny-2/{s}"), generate_tiny_case(2, s)))
        .collect();
    for (p, s) in [(2, 1), (4, 1), (4, 2), (8, 1)] {
        cases.push((format!("{p}-pipe/{s}"), generate_case(p, s)));
    }
    cases
}

struct Runs {
    cases: Vec<(String, DispatchCase)>,
    ibd: Vec<IbdOutcome>,
    bd: Vec<BdOutcome>,
}

impl Runs {
    fn new() -> Self {
        let cases = suite();
        let ibd = cases.iter().map(|(_, c)| ibd(c)).collect();
        let bd = cases
            .iter()
            .map(|(_, c)| run_bd(c, &BdConfig::default()).expect("bd run"))
            .collect();
        Self { cases, ibd, bd }
    }

    fn ibd_of(&self, name: &str) -> &IbdOutcome {
        let i = self
            .cases
            .iter()
            .position(|(n, _)| n == name)
            .expect("case in suite");
        &self.ibd[i]
    }
}

fn oracle_equivalence() -> Verdict {
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    let mut bad = Vec::new();
    let cases: Vec<_> = [1, 2]
        .into_iter()
        .flat_map(|p| (1..=3).map(move |s| (p, s)))
        .collect();
    for &(p, s) in &cases {
        let c = generate_tiny_case(p, s);
        let (out, t_ibd) = timed(|| ibd(&c));
        let (oracle, t_oracle) = timed(|| brute_force(&c, 0.01).expect("oracle"));
        let rel = (out.schedule.objective - oracle.objective).abs() / oracle.objective.abs();
        worst = worst.max(rel);
        slowest = slowest.max(t_ibd).max(t_oracle);
        if !(out.converged && rel <= 5e-3 && t_ibd < 5.0 && t_oracle < 5.0) {
            bad.push(format!(
                "tiny-{p}/{s} rel {rel:.2e} ibd {t_ibd:.2}s oracle {t_oracle:.2}s"
            ));
        }
    }
    Verdict::new(
        bad.is_empty(),
        format!(
            "{}/{} cases within 0.5% and 5 s, worst rel {worst:.2e}, slowest solve {slowest:.2}s{}",
            cases.len() - bad.len(),
            cases.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; failing: {}", bad.join(", "))
            }
        ),
    )
}

fn pwl_agreement(runs: &Runs) -> Verdict {
    let c = generate_case(8, 1);
    let a = runs.ibd_of("8-pipe/1");
    let (b, t) = timed(|| pwl(&c, 64));
    let (oi, op) = (a.schedule.objective, b.schedule.objective);
    let rel = (oi - op).abs() / op.abs();
    Verdict::new(
        rel <= 1e-3 && a.converged && b.stats.converged,
        format!(
            "ibd {oi:.2} (converged {}) vs pwl(64) {op:.2} (converged {}, gap {:.2e} after {} nodes, {t:.1}s): rel {rel:.2e}",
            a.converged, b.stats.converged, b.stats.mip_gap, b.stats.nodes
        ),
    )
}

fn iteration_dominance(runs: &Runs) -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for (((name, _), a), b) in runs.cases.iter().zip(&runs.ibd).zip(&runs.bd) {
        if b.converged() {
            ok &= a.iterations <= b.iterations;
        }
        parts.push(format!(
            "{name} {}/{}{}",
            a.iterations,
            b.iterations,
            if b.converged() { "" } else { "*" }
        ));
    }
    // a capped run would need at least its cap to converge, so the ratio
    // against the cap is a lower bound on the margin
    let i = runs
        .cases
        .iter()
        .position(|(n, _)| n == "8-pipe/1")
        .unwrap();
    let margin = runs.bd[i].iterations as f64 / runs.ibd[i].iterations as f64;
    ok &= margin >= 2.0;
    Verdict::new(
        ok,
        format!(
            "ibd/bd iterations ({}; * = bd hit its cap) 8-pipe margin {margin:.1}x",
            parts.join(", ")
        ),
    )
}

fn runtime_ordering() -> Verdict {
    let mut t_ibd = Vec::new();
    let mut t_pwl = Vec::new();
    for p in [8, 12] {
        let c = generate_case(p, 1);
        t_ibd.push(timed(|| ibd(&c)).1);
        t_pwl.push(timed(|| pwl(&c, 56)).1);
    }
    let (gi, gp) = (t_ibd[1] / t_ibd[0], t_pwl[1] / t_pwl[0]);
    let ok = t_ibd[0] < t_pwl[0] && t_ibd[1] < t_pwl[1] && t_pwl[1] > t_pwl[0] && gi < gp;
    Verdict::new(
        ok,
        format!(
            "8 pipes ibd {:.2}s pwl {:.1}s, 12 pipes ibd {:.2}s pwl {:.1}s, growth ibd {gi:.2}x pwl {gp:.2}x",
            t_ibd[0], t_pwl[0], t_ibd[1], t_pwl[1]
        ),
    )
}

fn feasibility_certificate(runs: &Runs) -> Verdict {
    let eps = IbdConfig::default().eps_feas;
    let (mut weymouth, mut others) = (0.0f64, 0.0f64);
    let mut converged = true;
    for ((_, c), out) in runs.cases.iter().zip(&runs.ibd) {
        converged &= out.converged;
        let x = &out.schedule.point;
        for (t, cert) in out.certificate.iter().enumerate() {
            for (l, p) in c.gas.pipelines.iter().enumerate() {
                let f = x.g_pipe[t][l];
                let (from, to) = (cert.pressures[p.from], cert.pressures[p.to]);
                let r = (f * f.abs() - p.k * (from - to)).abs() / (1.0 + f * f);
                weymouth = weymouth.max(r);
            }
        }
        let res = residuals(c, x);
        others = others.max(res.power_max()).max(res.gas_max());
    }
    Verdict::new(
        converged && weymouth <= eps && others <= 1e-6,
        format!("scaled flow-equation residual {weymouth:.2e}, dispatch and gas-network residuals {others:.2e}"),
    )
}

fn cut_validity(runs: &Runs) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut cuts, mut violations, mut worst) = (0, 0, f64::NEG_INFINITY);
    let mut starved = 0;
    for ((_, c), out) in runs.cases.iter().zip(&runs.ibd) {
        for cut in &out.cuts {
            cuts += 1;
            let (mut samples, mut tries) = (0, 0);
            while samples < 200 && tries < 200_000 {
                tries += 1;
                let Some(flows) = sample_same_sign_flows(c, &cut.anchors, &mut rng) else {
                    continue;
                };
                let fresh = check_feasibility(&build_subproblem(c, &flows, cut.period))
                    .expect("subproblem");
                if fresh.mismatch > 1e-9 {
                    continue;
                }
                samples += 1;
                let v = cut.lifted_value(&flows);
                worst = worst.max(v);
                violations += usize::from(v > 1e-6);
            }
            starved += usize::from(samples < 200);
        }
    }
    Verdict::new(
        cuts > 0 && violations == 0 && starved == 0,
        format!(
            "{cuts} cuts x 200 samples, {violations} violations, worst cut value {worst:.2e}, {starved} cuts short of samples"
        ),
    )
}

/// Random bounded LP that is feasible by construction: rows are tight or
/// slack at a point drawn inside the box.
fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.gen_range(2..=10);
    let m = rng.gen_range(1..=8);
    let mut lp = LinearProgram::new();
    let mut x0 = Vec::new();
    for _ in 0..n {
        let lo = rng.gen_range(-10.0..0.0);
        let hi = rng.gen_range(0.5..10.0);
        lp.add_var(rng.gen_range(-5.0..5.0), lo, hi);
        x0.push(rng.gen_range(lo..hi));
    }
    for _ in 0..m {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                terms.push((j, rng.gen_range(-4.0..4.0)));
            }
        }
        let ax: f64 = terms.iter().map(|&(j, a): &(usize, f64)| a * x0[j]).sum();
        let (sense, rhs) = match rng.gen_range(0..3) {
            0 => (Sense::Le, ax + rng.gen_range(0.0..3.0)),
            1 => (Sense::Ge, ax - rng.gen_range(0.0..3.0)),
            _ => (Sense::Eq, ax),
        };
        lp.add_row(terms, sense, rhs);
    }
    lp
}

/// Lagrangian bound of `lp` at the multipliers `y`, computed from the data
/// alone: `y.b + sum_j min over the box of (c - A'y)_j x_j`. `None` when `y`
/// has the wrong sign for some row.
fn lagrangian_bound(lp: &LinearProgram, y: &[f64]) -> Option<f64> {
    let mut d = lp.objective.clone();
    let mut bound = lp.objective_offset;
    for (row, &yi) in lp.rows.iter().zip(y) {
        let sign_ok = match row.sense {
            Sense::Le => yi <= 1e-9,
            Sense::Ge => yi >= -1e-9,
            Sense::Eq => true,
        };
        if !sign_ok {
            return None;
        }
        bound += yi * row.rhs;
        for &(j, a) in &row.terms {
            d[j] -= yi * a;
        }
    }
    for (j, dj) in d.iter().enumerate() {
        bound += (dj * lp.lower[j]).min(dj * lp.upper[j]);
    }
    Some(bound)
}

fn kernel_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut duality_gap = 0.0f64;
    let mut lp_fail = 0;
    for _ in 0..100 {
        let lp = random_lp(&mut rng);
        let s = solve_lp(&lp).expect("lp");
        let ok = s.status == LpStatus::Optimal
            && lp.max_violation(&s.x) <= 1e-8
            && lagrangian_bound(&lp, &s.duals).is_some_and(|b| {
                let gap = (s.objective - b).abs() / (1.0 + s.objective.abs());
                duality_gap = duality_gap.max(gap);
                gap <= 1e-8
            });
        lp_fail += usize::from(!ok);
    }

    let mut mip_fail = 0;
    let mut worst_mip = 0.0f64;
    let opts = MipOptions {
        gap: 0.0,
        node_limit: 1_000_000,
        ..MipOptions::default()
    };
    for _ in 0..50 {
        let nb = rng.gen_range(4..=12);
        let mut mip = MixedIntegerProgram::default();
        let bins: Vec<usize> = (0..nb)
            .map(|_| mip.add_binary(rng.gen_range(-9.0..9.0)))
            .collect();
        let y = mip.lp.add_var(rng.gen_range(-3.0..3.0), 0.0, 4.0);
        for _ in 0..rng.gen_range(1..=5) {
            let mut terms: Vec<(usize, f64)> = bins
                .iter()
                .map(|&b| (b, f64::from(rng.gen_range(-4..=4))))
                .collect();
            terms.push((y, rng.gen_range(-2.0..2.0)));
            let sense = if rng.gen_bool(0.5) {
                Sense::Le
            } else {
                Sense::Ge
            };
            mip.lp
                .add_row(terms, sense, f64::from(rng.gen_range(-4..=8)));
        }
        let got = solve_mip(&mip, &opts, None).expect("mip");
        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << nb) {
            let mut fixed = mip.lp.clone();
            for (i, &b) in bins.iter().enumerate() {
                let v = f64::from((mask >> i) & 1);
                fixed.lower[b] = v;
                fixed.upper[b] = v;
            }
            let s = solve_lp(&fixed).expect("lp");
            if s.is_optimal() {
                best = Some(best.map_or(s.objective, |b: f64| b.min(s.objective)));
            }
        }
        let ok = match (best, got.status) {
            (None, MipStatus::Infeasible) => true,
            (Some(b), MipStatus::Optimal) => {
                let err = (got.objective().unwrap() - b).abs() / (1.0 + b.abs());
                worst_mip = worst_mip.max(err);
                err <= 1e-9
            }
            _ => false,
        };
        mip_fail += usize::from(!ok);
    }

    let mut oa_violations = 0;
    let mut oa_cuts = 0;
    for c in [generate_case(8, 1), generate_case(12, 1)] {
        for u in &c.power.coal_units {
            for _ in 0..5 {
                let q = |p: f64| u.a * p * p + u.b * p + u.c;
                let cut = oa_refine(u.a, u.b, u.c, rng.gen_range(u.p_min..=u.p_max));
                oa_cuts += 1;
                for _ in 0..1000 {
                    let p = rng.gen_range(u.p_min - 50.0..=u.p_max + 50.0);
                    oa_violations += usize::from(cut.eval(p) > q(p) + 1e-9 * (1.0 + q(p).abs()));
                }
            }
        }
    }

    Verdict::new(
        lp_fail == 0 && mip_fail == 0 && oa_violations == 0 && oa_cuts > 0,
        format!(
            "lp {}/100 (worst duality gap {duality_gap:.1e}), mip {}/50 (worst {worst_mip:.1e}), \
             {oa_cuts} tangents x 1000 points with {oa_violations} overestimates",
            100 - lp_fail,
            50 - mip_fail
        ),
    )
}

fn determinism() -> Verdict {
    let mut diffs = Vec::new();
    for (p, s) in [(8, 1), (4, 2)] {
        let c = generate_case(p, s);
        let runs: Vec<_> = [1, 2, 8]
            .into_iter()
            .map(|w| {
                run_ibd(
                    &c,
                    &IbdConfig {
                        workers: w,
                        ..IbdConfig::default()
                    },
                )
                .expect("ibd run")
            })
            .collect();
        for (r, w) in runs[1..].iter().zip([2, 8]) {
            let same = r.cuts == runs[0].cuts
                && r.iterations == runs[0].iterations
                && r.schedule.objective.to_bits() == runs[0].schedule.objective.to_bits()
                && r.log.to_csv_untimed() == runs[0].log.to_csv_untimed();
            if !same {
                diffs.push(format!("{p}-pipe/{s} workers {w}"));
            }
        }
    }
    Verdict::new(
        diffs.is_empty(),
        if diffs.is_empty() {
            "workers 1, 2 and 8 give identical cuts, iterations, objectives and logs on 2 cases"
                .to_string()
        } else {
            format!("differs from 1 worker: {}", diffs.join(", "))
        },
    )
}

fn structural_counts(runs: &Runs) -> Verdict {
    let mut bad = Vec::new();
    let (mut max_ibd_cuts, mut max_bd_cuts) = (0, 0);
    for (((name, c), a), b) in runs.cases.iter().zip(&runs.ibd).zip(&runs.bd) {
        let g = &c.gas;
        let sp = build_subproblem(c, &vec![0.0; g.pipelines.len()], 0);
        if sp.num_vars() != g.nodes.len() + 2 * g.pipelines.len() {
            bad.push(format!("{name} subproblem size {}", sp.num_vars()));
        }
        let expect = c.n_periods()
            * (2 * g.compressors.len()
                + g.nodes.len()
                + 2 * g.storages.len()
                + g.pipelines.len()
                + g.wells.len());
        if BdLayout::new(c).num_vars() != expect {
            bad.push(format!(
                "{name} bd size {} != {expect}",
                BdLayout::new(c).num_vars()
            ));
        }
        let ibd_cuts = a
            .log
            .records
            .iter()
            .map(|r| r.cuts_added)
            .max()
            .unwrap_or(0);
        let bd_cuts = b
            .log
            .records
            .iter()
            .map(|r| r.cuts_added)
            .max()
            .unwrap_or(0);
        if ibd_cuts > c.n_periods() || bd_cuts > 1 {
            bad.push(format!(
                "{name} cuts per iteration ibd {ibd_cuts} bd {bd_cuts}"
            ));
        }
        max_ibd_cuts = max_ibd_cuts.max(ibd_cuts);
        max_bd_cuts = max_bd_cuts.max(bd_cuts);
    }
    Verdict::new(
        bad.is_empty(),
        format!(
            "subproblem and Newton system sizes match on {} cases, most cuts per iteration ibd {max_ibd_cuts} (of 24) bd {max_bd_cuts}{}",
            runs.cases.len(),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join(", ")) }
        ),
    )
}

fn main() -> ExitCode {
    let mut report = Report::default();
    report.check("oracle-equivalence", oracle_equivalence);
    let runs = Runs::new();
    report.check("ibd-pwl-agreement", || pwl_agreement(&runs));
    report.check("iteration-dominance", || iteration_dominance(&runs));
    report.check("runtime-ordering", runtime_ordering);
    report.check("feasibility-certificate", || feasibility_certificate(&runs));
    report.check("cut-validity", || cut_validity(&runs));
    report.check("kernel-suite", kernel_suite);
    report.check("determinism", determinism);
    report.check("structural-counts", || structural_counts(&runs));
    let failed = report.failed();
    if failed.is_empty() {
        println!("acceptance: all checks passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} failed: {}", failed.len(), failed.join(", "));
        ExitCode::FAILURE
    }
}
