//! Linear program container, solution record and the plain-text debug dump.

use std::fmt::Write as _;

use super::SolveError;

/// Row sense.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

/// One constraint row `sum(coef * x[col]) <sense> rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimisation LP over bounded variables.
///
/// Rows are kept in sparse form; [`LinearProgram::triplets`] exposes the
/// `(row, col, value)` view.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
    /// Constant added to the reported objective.
    pub objective_offset: f64,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds a variable and returns its column index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    /// Adds a row and returns its index. Duplicate columns are merged.
    pub fn add_row(
        &mut self,
        terms: impl IntoIterator<Item = (usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        let mut terms: Vec<(usize, f64)> = terms.into_iter().collect();
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (c, v) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.rows.push(Row {
            terms: merged,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.terms.iter().map(move |&(c, v)| (r, c, v)))
    }

    /// Checks index ranges, finiteness and bound consistency.
    pub fn validate(&self) -> Result<(), SolveError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(SolveError::Malformed(
                "bound vectors do not match variable count".into(),
            ));
        }
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(SolveError::Malformed(format!(
                    "objective coefficient of x{j} is not finite"
                )));
            }
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(SolveError::Malformed(format!(
                    "inconsistent bounds [{l}, {u}] on x{j}"
                )));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(SolveError::Malformed(format!(
                    "rhs of row {r} is not finite"
                )));
            }
            for &(c, v) in &row.terms {
                if c >= n {
                    return Err(SolveError::Malformed(format!(
                        "row {r} references column {c} >= {n}"
                    )));
                }
                if !v.is_finite() {
                    return Err(SolveError::Malformed(format!(
                        "row {r} has a non-finite coefficient"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Row activity `a_i x` for every row.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.terms.iter().map(|&(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset
            + self
                .objective
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    /// Largest absolute violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for (row, act) in self.rows.iter().zip(self.row_activity(x)) {
            let viol = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Plain-text dump: objective, rows, bounds and (optionally) binaries.
    ///
    /// ```text
    /// MINIMIZE offset <c>
    ///   <coef> x<j> ...
    /// ROWS <m>
    ///   r<i>: <coef> x<j> ... <sense> <rhs>
    /// BOUNDS
    ///   <lb> <= x<j> <= <ub>
    /// BINARIES
    ///   x<j> ...
    /// END
    /// ```
    pub fn dump(&self, binaries: &[usize]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "MINIMIZE offset {}", fmt_num(self.objective_offset));
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                let _ = writeln!(out, "  {} x{j}", fmt_num(c));
            }
        }
        let _ = writeln!(out, "ROWS {}", self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "  r{i}:");
            for &(c, v) in &row.terms {
                let _ = write!(out, " {} x{c}", fmt_num(v));
            }
            let _ = writeln!(out, " {} {}", row.sense.symbol(), fmt_num(row.rhs));
        }
        let _ = writeln!(out, "BOUNDS");
        for j in 0..self.num_vars() {
            let _ = writeln!(
                out,
                "  {} <= x{j} <= {}",
                fmt_num(self.lower[j]),
                fmt_num(self.upper[j])
            );
        }
        if !binaries.is_empty() {
            let _ = writeln!(out, "BINARIES");
            let names: Vec<String> = binaries.iter().map(|b| format!("x{b}")).collect();
            let _ = writeln!(out, "  {}", names.join(" "));
        }
        let _ = writeln!(out, "END");
        out
    }
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:e}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Status of one column (structural or row logical) in a simplex basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Free,
}

/// A simplex basis: statuses of the structural columns followed by one
/// logical per row. Used to warm-start re-solves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    pub structural: Vec<VarStatus>,
    pub logical: Vec<VarStatus>,
}

/// Result of [`super::solve_lp`].
///
/// `duals[i]` is the sensitivity of the optimal objective to the right-hand
/// side of row `i`; `reduced_costs[j]` is `c_j - y^T a_j`.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub basis: Option<Basis>,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        Self {
            status,
            x: vec![0.0; n],
            duals: vec![0.0; m],
            reduced_costs: vec![0.0; n],
            objective: match status {
                LpStatus::Infeasible => f64::INFINITY,
                LpStatus::Unbounded => f64::NEG_INFINITY,
                LpStatus::Optimal => 0.0,
            },
            iterations,
            basis: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
