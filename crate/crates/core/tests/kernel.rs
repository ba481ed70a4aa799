//! LP and MIP kernel checked against brute-force oracles.

use iegs_core::solvecore::{
    solve_lp, solve_mip, LinearProgram, LpStatus, MipOptions, MipStatus, MixedIntegerProgram, Sense,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Minimum over all vertices of a bounded polyhedron, by enumerating every
/// choice of `n` tight constraints (rows or bounds).
fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut hyper: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.rows {
        let mut a = vec![0.0; n];
        for &(c, v) in &row.terms {
            a[c] = v;
        }
        hyper.push((a, row.rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        hyper.push((e.clone(), lp.lower[j]));
        hyper.push((e, lp.upper[j]));
    }
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |r, c| hyper[idx[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| hyper[idx[r]].1);
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            if x.iter().all(|v| v.is_finite()) && lp.max_violation(&x) <= 1e-7 {
                let obj = lp.objective_value(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // next combination
        let total = hyper.len();
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] < total - n + k {
                idx[k] += 1;
                for i in k + 1..n {
                    idx[i] = idx[i - 1] + 1;
                }
                break;
            }
        }
    }
}

fn build_lp(n: usize, costs: &[f64], rows: &[(Vec<f64>, u8, f64)]) -> LinearProgram {
    let mut lp = LinearProgram::new();
    for &c in &costs[..n] {
        lp.add_var(c, -5.0, 5.0);
    }
    for (a, s, rhs) in rows {
        let sense = match s % 3 {
            0 => Sense::Le,
            1 => Sense::Ge,
            _ => Sense::Eq,
        };
        lp.add_row(a[..n].iter().enumerate().map(|(j, &v)| (j, v)), sense, *rhs);
    }
    lp
}

fn row_strategy() -> impl Strategy<Value = (Vec<f64>, u8, f64)> {
    (prop::collection::vec(-3i32..=3, 4), 0u8..6, -6i32..=6).prop_map(|(a, s, r)| {
        (
            a.into_iter().map(f64::from).collect(),
            s % 4 % 3,
            f64::from(r),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lp_matches_vertex_enumeration(
        n in 1usize..=4,
        costs in prop::collection::vec(-4i32..=4, 4),
        rows in prop::collection::vec(row_strategy(), 0..5),
    ) {
        let costs: Vec<f64> = costs.into_iter().map(f64::from).collect();
        let lp = build_lp(n, &costs, &rows);
        let sol = solve_lp(&lp).unwrap();
        match vertex_oracle(&lp) {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() <= 1e-7 * (1.0 + best.abs()), "{} vs {}", sol.objective, best);
                prop_assert!(lp.max_violation(&sol.x) <= 1e-8);
            }
        }
    }

    #[test]
    fn duals_predict_rhs_perturbation(
        n in 1usize..=4,
        costs in prop::collection::vec(-4i32..=4, 4),
        rows in prop::collection::vec(row_strategy(), 1..5),
        which in 0usize..5,
    ) {
        let costs: Vec<f64> = costs.into_iter().map(f64::from).collect();
        let lp = build_lp(n, &costs, &rows);
        let sol = solve_lp(&lp).unwrap();
        prop_assume!(sol.status == LpStatus::Optimal);
        let i = which % lp.num_rows();
        // the value function is piecewise linear in the rhs: the dual is a
        // subgradient, so both one-sided differences bracket it
        let h = 1e-4;
        let mut up = lp.clone();
        up.rows[i].rhs += h;
        let mut dn = lp.clone();
        dn.rows[i].rhs -= h;
        let (su, sd) = (solve_lp(&up).unwrap(), solve_lp(&dn).unwrap());
        let y = sol.duals[i];
        if su.is_optimal() {
            prop_assert!(su.objective >= sol.objective + y * h - 1e-7);
        }
        if sd.is_optimal() {
            prop_assert!(sd.objective >= sol.objective - y * h - 1e-7);
        }
        // strong duality with box bounds: c.x = y.b + sum(d_j * x_j)
        let yb: f64 = lp.rows.iter().zip(&sol.duals).map(|(r, y)| r.rhs * y).sum();
        let dx: f64 = sol.reduced_costs.iter().zip(&sol.x).map(|(d, x)| d * x).sum();
        prop_assert!((sol.objective - yb - dx).abs() <= 1e-7 * (1.0 + sol.objective.abs()));
    }

    #[test]
    fn mip_matches_binary_enumeration(
        nb in 1usize..=10,
        costs in prop::collection::vec(-9i32..=9, 12),
        rows in prop::collection::vec((prop::collection::vec(-4i32..=4, 12), 0u8..3, -5i32..=8), 1..5),
    ) {
        let mut mip = MixedIntegerProgram::default();
        let bins: Vec<usize> = (0..nb).map(|i| mip.add_binary(f64::from(costs[i]))).collect();
        // one continuous variable coupled to the binaries
        let y = mip.lp.add_var(f64::from(costs[11]) * 0.5, 0.0, 3.0);
        for (a, s, rhs) in &rows {
            let sense = [Sense::Le, Sense::Ge, Sense::Le][*s as usize];
            let mut terms: Vec<(usize, f64)> = bins.iter().map(|&b| (b, f64::from(a[b]))).collect();
            terms.push((y, f64::from(a[11])));
            mip.lp.add_row(terms, sense, f64::from(*rhs));
        }
        let got = solve_mip(&mip, &MipOptions { gap: 0.0, ..MipOptions::default() }, None).unwrap();

        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << nb) {
            let mut fixed = mip.lp.clone();
            for (i, &b) in bins.iter().enumerate() {
                let v = f64::from((mask >> i) & 1);
                fixed.lower[b] = v;
                fixed.upper[b] = v;
            }
            let s = solve_lp(&fixed).unwrap();
            if s.is_optimal() {
                best = Some(best.map_or(s.objective, |b: f64| b.min(s.objective)));
            }
        }
        match best {
            None => prop_assert_eq!(got.status, MipStatus::Infeasible),
            Some(b) => {
                prop_assert_eq!(got.status, MipStatus::Optimal);
                let o = got.objective().unwrap();
                prop_assert!((o - b).abs() <= 1e-7 * (1.0 + b.abs()), "{} vs {}", o, b);
                let x = &got.solution.as_ref().unwrap().x;
                prop_assert!(bins.iter().all(|&j| x[j] == 0.0 || x[j] == 1.0));
                prop_assert!(mip.lp.max_violation(x) <= 1e-7);
            }
        }
    }
}

#[test]
fn degenerate_transportation_problem() {
    // 3 supplies, 3 demands, balanced; many degenerate vertices
    let supply = [20.0, 30.0, 25.0];
    let demand = [10.0, 35.0, 30.0];
    let cost = [[8.0, 6.0, 10.0], [9.0, 12.0, 13.0], [14.0, 9.0, 16.0]];
    let mut lp = LinearProgram::new();
    let mut x = [[0usize; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            x[i][j] = lp.add_var(cost[i][j], 0.0, f64::INFINITY);
        }
    }
    for i in 0..3 {
        lp.add_row((0..3).map(|j| (x[i][j], 1.0)), Sense::Eq, supply[i]);
    }
    for j in 0..3 {
        lp.add_row((0..3).map(|i| (x[i][j], 1.0)), Sense::Eq, demand[j]);
    }
    let s = solve_lp(&lp).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    // optimum found by enumerating over the box of each cell
    let oracle = {
        let mut boxed = lp.clone();
        for j in 0..9 {
            boxed.upper[j] = 35.0;
        }
        vertex_oracle(&boxed).unwrap()
    };
    assert!(
        (s.objective - oracle).abs() < 1e-7,
        "{} vs {oracle}",
        s.objective
    );
}
