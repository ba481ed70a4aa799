//! Bounded-variable revised primal simplex.
//!
//! Every row gets a logical column so that the working system is
//! `A x + s = b` with bounds on all columns. Phase 1 minimises the sum of
//! bound violations of the basic variables (composite method, so any starting
//! basis works); phase 2 minimises the true objective. Rows and columns are
//! equilibrated to unit max-norm before solving. A streak of degenerate
//! pivots switches pricing and the ratio test to Bland's rule until progress
//! resumes.

use log::trace;

use super::factor::LuFactor;
use super::lp::{Basis, LinearProgram, LpSolution, LpStatus, Sense, VarStatus};
use super::SolveError;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-10;
const DEGENERATE_STREAK: usize = 40;
const REFACTOR_EVERY: usize = 100;

/// Knobs for one solve.
#[derive(Clone, Debug)]
pub struct SimplexOptions {
    pub max_iterations: Option<usize>,
    pub scale: bool,
    /// Alternating row/column equilibration sweeps.
    pub scale_passes: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: None,
            scale: true,
            scale_passes: 1,
        }
    }
}

pub(crate) struct Simplex {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    cost_scale: f64,
    cost: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    factor: Option<LuFactor>,
    iterations: usize,
    max_iterations: usize,
}

impl Simplex {
    pub fn new(
        lp: &LinearProgram,
        lower: &[f64],
        upper: &[f64],
        hint: Option<&Basis>,
        opts: &SimplexOptions,
    ) -> Self {
        let m = lp.num_rows();
        let n = lp.num_vars();

        // equilibration
        let mut row_scale = vec![1.0; m];
        let mut col_scale = vec![1.0; n];
        if opts.scale {
            for _ in 0..opts.scale_passes.max(1) {
                for (i, row) in lp.rows.iter().enumerate() {
                    let mx = row
                        .terms
                        .iter()
                        .map(|t| (t.1 * col_scale[t.0]).abs())
                        .fold(0.0f64, f64::max);
                    if mx > 0.0 {
                        row_scale[i] = 1.0 / mx;
                    }
                }
                let mut cmax = vec![0.0f64; n];
                for (i, row) in lp.rows.iter().enumerate() {
                    for &(c, v) in &row.terms {
                        cmax[c] = cmax[c].max((v * row_scale[i]).abs());
                    }
                }
                for j in 0..n {
                    if cmax[j] > 0.0 {
                        col_scale[j] = 1.0 / cmax[j];
                    }
                }
            }
        }

        let mut counts = vec![0usize; n];
        for row in &lp.rows {
            for &(c, _) in &row.terms {
                counts[c] += 1;
            }
        }
        let mut col_start = vec![0usize; n + 1];
        for j in 0..n {
            col_start[j + 1] = col_start[j] + counts[j];
        }
        let nnz = col_start[n];
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = col_start.clone();
        for (i, row) in lp.rows.iter().enumerate() {
            for &(c, v) in &row.terms {
                let k = fill[c];
                col_row[k] = i;
                col_val[k] = v * row_scale[i] * col_scale[c];
                fill[c] += 1;
            }
        }

        let mut cost = vec![0.0; n + m];
        let mut cmax = 0.0f64;
        for j in 0..n {
            cost[j] = lp.objective[j] * col_scale[j];
            cmax = cmax.max(cost[j].abs());
        }
        let cost_scale = if opts.scale && cmax > 0.0 {
            1.0 / cmax
        } else {
            1.0
        };
        for c in cost.iter_mut() {
            *c *= cost_scale;
        }

        let mut lo = vec![0.0; n + m];
        let mut up = vec![0.0; n + m];
        for j in 0..n {
            lo[j] = lower[j] / col_scale[j];
            up[j] = upper[j] / col_scale[j];
        }
        let mut b = vec![0.0; m];
        for (i, row) in lp.rows.iter().enumerate() {
            b[i] = row.rhs * row_scale[i];
            let (l, u) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lo[n + i] = l;
            up[n + i] = u;
        }

        let mut status = vec![VarStatus::AtLower; n + m];
        for j in 0..n + m {
            status[j] = default_status(lo[j], up[j]);
        }
        for i in 0..m {
            status[n + i] = VarStatus::Basic;
        }
        if let Some(h) = hint {
            for (j, &s) in h.structural.iter().enumerate().take(n) {
                status[j] = sanitize(s, lo[j], up[j]);
            }
            for (i, &s) in h.logical.iter().enumerate().take(m) {
                status[n + i] = sanitize(s, lo[n + i], up[n + i]);
            }
            // rows beyond the hint start with their logical basic
        }

        let max_iterations = opts.max_iterations.unwrap_or(50 * (n + m) + 10_000);
        let mut s = Self {
            m,
            n,
            col_start,
            col_row,
            col_val,
            row_scale,
            col_scale,
            cost_scale,
            cost,
            lo,
            up,
            b,
            x: vec![0.0; n + m],
            status,
            head: Vec::new(),
            factor: None,
            iterations: 0,
            max_iterations,
        };
        for j in 0..n + m {
            if s.status[j] != VarStatus::Basic {
                s.x[j] = s.nonbasic_value(j);
            }
        }
        s
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lo[j],
            VarStatus::AtUpper => self.up[j],
            VarStatus::Free | VarStatus::Basic => 0.0,
        }
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|k| (self.col_row[k], self.col_val[k]))
                .collect()
        } else {
            vec![(j - self.n, 1.0)]
        }
    }

    fn scatter_column(&self, j: usize, dense: &mut [f64]) {
        dense.iter_mut().for_each(|v| *v = 0.0);
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                dense[self.col_row[k]] = self.col_val[k];
            }
        } else {
            dense[j - self.n] = 1.0;
        }
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            let mut s = 0.0;
            for k in self.col_start[j]..self.col_start[j + 1] {
                s += self.col_val[k] * y[self.col_row[k]];
            }
            s
        } else {
            y[j - self.n]
        }
    }

    /// Builds the basis from `status` (columns marked Basic), repairing
    /// singularity by swapping in logicals, then recomputes basic values.
    fn refactor(&mut self) -> Result<(), SolveError> {
        let m = self.m;
        let mut basic: Vec<usize> = (0..self.n + m)
            .filter(|&j| self.status[j] == VarStatus::Basic)
            .collect();
        // structurals first ordered by sparsity; logicals fill the rest
        if basic.len() > m {
            // keep logicals preferentially dropped: prefer structurals with fewer entries
            let mut structs: Vec<usize> = basic.iter().copied().filter(|&j| j < self.n).collect();
            let logs: Vec<usize> = basic.iter().copied().filter(|&j| j >= self.n).collect();
            structs.sort_by_key(|&j| self.col_start[j + 1] - self.col_start[j]);
            let keep_logs = m.saturating_sub(structs.len());
            structs.truncate(m);
            let mut b = structs;
            b.extend(logs.into_iter().take(keep_logs));
            for j in 0..self.n + m {
                if self.status[j] == VarStatus::Basic && !b.contains(&j) {
                    self.status[j] = default_status(self.lo[j], self.up[j]);
                    self.x[j] = self.nonbasic_value(j);
                }
            }
            basic = b;
        }
        if basic.len() < m {
            // fill with logicals of rows not covered; the LU will sort out which
            let mut in_basis = vec![false; self.n + m];
            for &j in &basic {
                in_basis[j] = true;
            }
            for i in 0..m {
                if basic.len() == m {
                    break;
                }
                if !in_basis[self.n + i] {
                    basic.push(self.n + i);
                    in_basis[self.n + i] = true;
                }
            }
        }
        for attempt in 0..3 {
            let cols: Vec<Vec<(usize, f64)>> = basic.iter().map(|&j| self.column(j)).collect();
            match LuFactor::factorize(m, &cols) {
                Ok(f) => {
                    for &j in &basic {
                        self.status[j] = VarStatus::Basic;
                    }
                    self.head = basic;
                    self.factor = Some(f);
                    self.compute_basic_values();
                    return Ok(());
                }
                Err(sing) => {
                    trace!(
                        "basis singular, repairing {} positions (attempt {attempt})",
                        sing.pairs.len()
                    );
                    let in_basis: std::collections::HashSet<usize> =
                        basic.iter().copied().collect();
                    for (pos, row) in sing.pairs {
                        let old = basic[pos];
                        let mut replacement = self.n + row;
                        if in_basis.contains(&replacement) {
                            // find any logical not in the basis
                            replacement = (0..m)
                                .map(|i| self.n + i)
                                .find(|j| !in_basis.contains(j) && !basic.contains(j))
                                .unwrap_or(replacement);
                        }
                        self.status[old] = default_status(self.lo[old], self.up[old]);
                        self.x[old] = self.nonbasic_value(old);
                        basic[pos] = replacement;
                    }
                }
            }
        }
        Err(SolveError::NumericalFailure(
            "basis repair did not produce a nonsingular basis".into(),
        ))
    }

    fn compute_basic_values(&mut self) {
        let m = self.m;
        let mut rhs = self.b.clone();
        for j in 0..self.n + m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.x[j];
            if v == 0.0 {
                continue;
            }
            if j < self.n {
                for k in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.col_row[k]] -= self.col_val[k] * v;
                }
            } else {
                rhs[j - self.n] -= v;
            }
        }
        let mut out = vec![0.0; m];
        self.factor
            .as_ref()
            .expect("factor")
            .ftran(&mut rhs, &mut out);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = out[p];
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - PRIMAL_TOL {
            self.lo[j] - v
        } else if v > self.up[j] + PRIMAL_TOL {
            v - self.up[j]
        } else {
            0.0
        }
    }

    pub fn solve(&mut self) -> Result<LpStatus, SolveError> {
        self.refactor()?;
        let m = self.m;
        let ncol = self.n + m;
        let mut cb = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut col = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut verify_rounds = 0usize;

        loop {
            if self.iterations >= self.max_iterations {
                return Err(SolveError::NumericalFailure(format!(
                    "iteration limit {} reached",
                    self.max_iterations
                )));
            }
            let needs_refactor = {
                let f = self.factor.as_ref().expect("factor");
                f.num_updates() >= REFACTOR_EVERY || f.update_nnz() > 2 * f.factor_nnz() + 10 * m
            };
            if needs_refactor {
                self.refactor()?;
            }

            // phase selection
            let mut phase_one = false;
            for (p, &j) in self.head.iter().enumerate() {
                let v = self.x[j];
                cb[p] = if v < self.lo[j] - PRIMAL_TOL {
                    phase_one = true;
                    -1.0
                } else if v > self.up[j] + PRIMAL_TOL {
                    phase_one = true;
                    1.0
                } else {
                    0.0
                };
            }
            if !phase_one {
                for (p, &j) in self.head.iter().enumerate() {
                    cb[p] = self.cost[j];
                }
            }
            self.factor.as_ref().expect("factor").btran(&mut cb, &mut y);

            // pricing
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..ncol {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let cj = if phase_one { 0.0 } else { self.cost[j] };
                let d = cj - self.dot_column(j, &y);
                let eligible = match st {
                    VarStatus::AtLower => d < -DUAL_TOL,
                    VarStatus::AtUpper => d > DUAL_TOL,
                    VarStatus::Free => d.abs() > DUAL_TOL,
                    VarStatus::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, d));
                }
            }

            let Some((j, d)) = entering else {
                // no improving column: verify from a fresh factorisation
                self.refactor()?;
                let infeasible = self.head.iter().any(|&b| self.infeasibility(b) > 0.0);
                if phase_one {
                    if infeasible {
                        if verify_rounds >= 2 {
                            return Ok(LpStatus::Infeasible);
                        }
                        verify_rounds += 1;
                        // recheck reduced costs against the refreshed basis
                        continue;
                    }
                    continue;
                }
                if infeasible {
                    verify_rounds += 1;
                    if verify_rounds > 5 {
                        return Err(SolveError::NumericalFailure(
                            "lost primal feasibility at optimum".into(),
                        ));
                    }
                    continue;
                }
                return Ok(LpStatus::Optimal);
            };

            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            self.scatter_column(j, &mut col);
            self.factor
                .as_ref()
                .expect("factor")
                .ftran(&mut col, &mut alpha);

            // ratio test
            let flip = if dir > 0.0 {
                self.up[j] - self.x[j]
            } else {
                self.x[j] - self.lo[j]
            };
            let mut theta_max = f64::INFINITY;
            // pass 1: relaxed bounds
            for p in 0..m {
                let a = alpha[p];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let r = -dir * a;
                let bj = self.head[p];
                if let Some((target, _)) = self.blocking_target(bj, r, phase_one) {
                    let relax = if bland { 0.0 } else { HARRIS_TOL };
                    let t = if r > 0.0 {
                        (target + relax - self.x[bj]) / r
                    } else {
                        (target - relax - self.x[bj]) / r
                    };
                    if t < theta_max {
                        theta_max = t;
                    }
                }
            }
            let theta_max = theta_max.max(0.0);

            if flip.is_finite() && flip <= theta_max {
                // bound flip, no basis change
                let theta = flip;
                self.apply_step(j, dir, theta, &alpha);
                self.status[j] = if dir > 0.0 {
                    VarStatus::AtUpper
                } else {
                    VarStatus::AtLower
                };
                self.x[j] = if dir > 0.0 { self.up[j] } else { self.lo[j] };
                self.iterations += 1;
                degenerate = 0;
                bland = false;
                continue;
            }

            // pass 2: among ratios within theta_max pick the largest pivot
            let mut leave: Option<(usize, f64, f64, bool)> = None; // (pos, theta, |alpha|, to_upper)
            for p in 0..m {
                let a = alpha[p];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let r = -dir * a;
                let bj = self.head[p];
                if let Some((target, to_upper)) = self.blocking_target(bj, r, phase_one) {
                    let t = ((target - self.x[bj]) / r).max(0.0);
                    if t <= theta_max + 1e-15 {
                        let better = match leave {
                            None => true,
                            Some((q, tq, aq, _)) => {
                                if bland {
                                    t < tq - 1e-12 || ((t - tq).abs() <= 1e-12 && bj < self.head[q])
                                } else {
                                    a.abs() > aq
                                }
                            }
                        };
                        if better {
                            leave = Some((p, t, a.abs(), to_upper));
                        }
                    }
                }
            }

            let Some((q, theta, _, to_upper)) = leave else {
                if phase_one {
                    return Err(SolveError::NumericalFailure(
                        "phase 1 ray without blocking variable".into(),
                    ));
                }
                return Ok(LpStatus::Unbounded);
            };

            self.apply_step(j, dir, theta, &alpha);
            let leaving = self.head[q];
            self.status[leaving] = if to_upper {
                VarStatus::AtUpper
            } else {
                VarStatus::AtLower
            };
            self.x[leaving] = if to_upper {
                self.up[leaving]
            } else {
                self.lo[leaving]
            };
            self.status[j] = VarStatus::Basic;
            self.head[q] = j;
            self.factor.as_mut().expect("factor").update(q, &alpha);
            self.iterations += 1;
            verify_rounds = 0;

            if theta < 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
        }
    }

    /// Bound a basic variable moving at rate `r` runs into, with whether it is the upper one.
    fn blocking_target(&self, j: usize, r: f64, phase_one: bool) -> Option<(f64, bool)> {
        let v = self.x[j];
        let (l, u) = (self.lo[j], self.up[j]);
        if r > 0.0 {
            if phase_one && v < l - PRIMAL_TOL {
                Some((l, false))
            } else if v > u + PRIMAL_TOL {
                None
            } else if u.is_finite() {
                Some((u, true))
            } else {
                None
            }
        } else if phase_one && v > u + PRIMAL_TOL {
            Some((u, true))
        } else if v < l - PRIMAL_TOL {
            None
        } else if l.is_finite() {
            Some((l, false))
        } else {
            None
        }
    }

    fn apply_step(&mut self, j: usize, dir: f64, theta: f64, alpha: &[f64]) {
        if theta == 0.0 {
            return;
        }
        self.x[j] += dir * theta;
        for (p, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                let bj = self.head[p];
                self.x[bj] -= dir * a * theta;
            }
        }
    }

    /// Unscaled primal values, row duals and reduced costs at the current basis.
    pub fn extract(
        &mut self,
        lp: &LinearProgram,
        lower: &[f64],
        upper: &[f64],
        status: LpStatus,
    ) -> LpSolution {
        let (n, m) = (self.n, self.m);
        if status != LpStatus::Optimal {
            let mut s = LpSolution::without_point(status, n, m, self.iterations);
            s.basis = Some(self.basis());
            return s;
        }
        let mut cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        let mut y = vec![0.0; m];
        self.factor.as_ref().expect("factor").btran(&mut cb, &mut y);
        let mut x = vec![0.0; n];
        let mut rc = vec![0.0; n];
        for j in 0..n {
            let mut v = self.x[j] * self.col_scale[j];
            if self.status[j] != VarStatus::Basic {
                // exact bound values for nonbasic columns
                v = match self.status[j] {
                    VarStatus::AtLower => lower[j],
                    VarStatus::AtUpper => upper[j],
                    _ => v,
                };
            }
            x[j] = v;
            let d = self.cost[j] - self.dot_column(j, &y);
            rc[j] = if self.status[j] == VarStatus::Basic {
                0.0
            } else {
                d / self.col_scale[j] / self.cost_scale
            };
        }
        let duals: Vec<f64> = (0..m)
            .map(|i| y[i] * self.row_scale[i] / self.cost_scale)
            .collect();
        let objective = lp.objective_value(&x);
        LpSolution {
            status,
            x,
            duals,
            reduced_costs: rc,
            objective,
            iterations: self.iterations,
            basis: Some(self.basis()),
        }
    }

    pub fn basis(&self) -> Basis {
        Basis {
            structural: self.status[..self.n].to_vec(),
            logical: self.status[self.n..].to_vec(),
        }
    }
}

fn default_status(lo: f64, up: f64) -> VarStatus {
    if lo.is_finite() {
        VarStatus::AtLower
    } else if up.is_finite() {
        VarStatus::AtUpper
    } else {
        VarStatus::Free
    }
}

fn sanitize(s: VarStatus, lo: f64, up: f64) -> VarStatus {
    match s {
        VarStatus::Basic => VarStatus::Basic,
        VarStatus::AtLower if lo.is_finite() => VarStatus::AtLower,
        VarStatus::AtUpper if up.is_finite() => VarStatus::AtUpper,
        VarStatus::Free if !lo.is_finite() && !up.is_finite() => VarStatus::Free,
        _ => default_status(lo, up),
    }
}
