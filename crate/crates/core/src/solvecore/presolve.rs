//! Activity-based bound propagation.
//!
//! For a row `sum a_j x_j <= b` the smallest activity of the other terms caps
//! each `a_j x_j`; `>=` rows work on the largest activity. Binary bounds are
//! rounded inward, which is what lets a chain like `d_{k+1} <= z_k <= d_k`
//! fill whole prefixes of an incremental encoding once its argument is bounded.
//! Incremental groups get one more rule the rows alone cannot express: when a
//! link row is monotone in the fill, a bounded value fills every segment below
//! its lower bound and empties every segment above its upper bound.
//! Rows are processed from a work queue seeded with every row (or the rows of
//! the columns that changed) until nothing moves by more than a small step.

use std::collections::VecDeque;

use super::lp::{LinearProgram, Row, Sense};
use super::mip::IncrementalGroup;

const FEAS_TOL: f64 = 1e-7;
/// Continuous bounds only move when the step is worth a fraction of the domain.
const MIN_STEP: f64 = 1e-3;

/// Static incidence data, built once per problem.
pub(crate) struct Incidence {
    col_rows: Vec<Vec<usize>>,
    /// Group whose link row this is.
    link_group: Vec<Option<usize>>,
}

impl Incidence {
    pub fn new(lp: &LinearProgram, groups: &[IncrementalGroup]) -> Self {
        let mut col_rows = vec![Vec::new(); lp.num_vars()];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, _) in &row.terms {
                col_rows[j].push(i);
            }
        }
        let mut link_group = vec![None; lp.num_rows()];
        for (g, grp) in groups.iter().enumerate() {
            for &r in &grp.links {
                link_group[r] = Some(g);
            }
        }
        Self {
            col_rows,
            link_group,
        }
    }

    /// Registers row `i`, appended after construction.
    pub fn push_row(&mut self, i: usize, row: &Row) {
        for &(j, _) in &row.terms {
            self.col_rows[j].push(i);
        }
        self.link_group.resize(i + 1, None);
    }
}

/// Tightens `lower`/`upper` in place. `seeds` restricts the initial queue to
/// the rows of those columns; `None` starts from every row. Returns `false`
/// when a row is proven infeasible under the bounds.
pub(crate) fn propagate(
    lp: &LinearProgram,
    groups: &[IncrementalGroup],
    inc: &Incidence,
    is_binary: &[bool],
    lower: &mut [f64],
    upper: &mut [f64],
    seeds: Option<&[usize]>,
) -> bool {
    let m = lp.num_rows();
    let col_rows = &inc.col_rows;
    let mut queued = vec![false; m];
    let mut queue = VecDeque::new();
    let push = |i: usize, queued: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
        if !queued[i] {
            queued[i] = true;
            queue.push_back(i);
        }
    };
    match seeds {
        None => (0..m).for_each(|i| push(i, &mut queued, &mut queue)),
        Some(cols) => {
            for &j in cols {
                for &i in &col_rows[j] {
                    push(i, &mut queued, &mut queue);
                }
            }
        }
    }
    let nnz: usize = lp.rows.iter().map(|r| r.terms.len()).sum();
    let mut budget = 20 * nnz + 1000;

    while let Some(i) = queue.pop_front() {
        queued[i] = false;
        let row = &lp.rows[i];
        if budget < row.terms.len() {
            break;
        }
        budget -= row.terms.len();

        // activity bounds with a count of unbounded contributions
        let (mut min_act, mut max_act) = (0.0, 0.0);
        let (mut min_inf, mut max_inf) = (0usize, 0usize);
        let mut scale = row.rhs.abs();
        for &(j, a) in &row.terms {
            let (lo, hi) = if a > 0.0 {
                (a * lower[j], a * upper[j])
            } else {
                (a * upper[j], a * lower[j])
            };
            if lo.is_finite() {
                min_act += lo;
                scale = scale.max(lo.abs());
            } else {
                min_inf += 1;
            }
            if hi.is_finite() {
                max_act += hi;
                scale = scale.max(hi.abs());
            } else {
                max_inf += 1;
            }
        }
        let tol = FEAS_TOL * (1.0 + scale);
        let upper_side = matches!(row.sense, Sense::Le | Sense::Eq);
        let lower_side = matches!(row.sense, Sense::Ge | Sense::Eq);
        if upper_side && min_inf == 0 && min_act > row.rhs + tol {
            return false;
        }
        if lower_side && max_inf == 0 && max_act < row.rhs - tol {
            return false;
        }

        for &(j, a) in &row.terms {
            let (lo_c, hi_c) = if a > 0.0 {
                (a * lower[j], a * upper[j])
            } else {
                (a * upper[j], a * lower[j])
            };
            // bounds on a * x_j implied by the rest of the row
            let mut cap_hi = f64::INFINITY;
            let mut cap_lo = f64::NEG_INFINITY;
            if upper_side {
                let rest = if min_inf == 0 {
                    Some(min_act - lo_c)
                } else if min_inf == 1 && !lo_c.is_finite() {
                    Some(min_act)
                } else {
                    None
                };
                if let Some(r) = rest {
                    cap_hi = row.rhs - r;
                }
            }
            if lower_side {
                let rest = if max_inf == 0 {
                    Some(max_act - hi_c)
                } else if max_inf == 1 && !hi_c.is_finite() {
                    Some(max_act)
                } else {
                    None
                };
                if let Some(r) = rest {
                    cap_lo = row.rhs - r;
                }
            }
            let (mut new_lo, mut new_hi) = if a > 0.0 {
                (cap_lo / a, cap_hi / a)
            } else {
                (cap_hi / a, cap_lo / a)
            };
            let slack = tol / a.abs();
            new_lo -= slack;
            new_hi += slack;
            if is_binary[j] {
                new_lo = (new_lo - 1e-6).ceil();
                new_hi = (new_hi + 1e-6).floor();
            }
            let range = upper[j] - lower[j];
            let step = if is_binary[j] {
                0.5
            } else {
                MIN_STEP * range.min(1e12).max(1.0)
            };
            let mut changed = false;
            if new_hi < upper[j] - step {
                if new_hi < lower[j] - FEAS_TOL * (1.0 + lower[j].abs()) {
                    return false;
                }
                upper[j] = new_hi.max(lower[j]);
                changed = true;
            }
            if new_lo > lower[j] + step {
                if new_lo > upper[j] + FEAS_TOL * (1.0 + upper[j].abs()) {
                    return false;
                }
                lower[j] = new_lo.min(upper[j]);
                changed = true;
            }
            if changed {
                for &r in &col_rows[j] {
                    if r != i {
                        push(r, &mut queued, &mut queue);
                    }
                }
            }
        }

        if let Some(g) = inc.link_group[i] {
            match fill_prefix(row, &groups[g], lower, upper) {
                None => return false,
                Some(changed) => {
                    for j in changed {
                        for &r in &col_rows[j] {
                            push(r, &mut queued, &mut queue);
                        }
                    }
                }
            }
        }
    }
    true
}

/// Fill bounds implied by the range of the outside terms of a link row
/// `sum(terms) - sum(w_k d_k) = c`. With every `w_k > 0` the row value is
/// monotone in the ordered fill, so a range on it pins a prefix of full and a
/// suffix of empty segments. Rows with mixed-sign widths are skipped. `None`
/// on an empty range.
fn fill_prefix(
    row: &Row,
    grp: &IncrementalGroup,
    lower: &mut [f64],
    upper: &mut [f64],
) -> Option<Vec<usize>> {
    if row.sense != Sense::Eq {
        return Some(Vec::new());
    }
    let mut widths = vec![0.0; grp.deltas.len()];
    let (mut lo, mut hi) = (0.0, 0.0);
    for &(j, a) in &row.terms {
        if let Some(k) = grp.deltas.iter().position(|&d| d == j) {
            widths[k] = -a;
            continue;
        }
        let (l, u) = if a > 0.0 {
            (a * lower[j], a * upper[j])
        } else {
            (a * upper[j], a * lower[j])
        };
        lo += l;
        hi += u;
    }
    if widths.iter().any(|&w| w <= 0.0) {
        return Some(Vec::new());
    }
    let total: f64 = widths.iter().sum();
    let tol = FEAS_TOL * (1.0 + total);
    let (f_lo, f_hi) = (lo - row.rhs - tol, hi - row.rhs + tol);
    if f_lo > total + tol || f_hi < -tol {
        return None;
    }
    let mut changed = Vec::new();
    let mut set = |j: usize, l: f64, u: f64, changed: &mut Vec<usize>| -> bool {
        let (nl, nu) = (lower[j].max(l), upper[j].min(u));
        if nl > nu + 1e-9 {
            return false;
        }
        if nl > lower[j] + 1e-9 || nu < upper[j] - 1e-9 {
            lower[j] = nl;
            upper[j] = nu.max(nl);
            changed.push(j);
        }
        true
    };
    let mut start = 0.0;
    for (k, &w) in widths.iter().enumerate() {
        let d_lo = ((f_lo - start) / w).clamp(0.0, 1.0);
        let d_hi = ((f_hi - start) / w).clamp(0.0, 1.0);
        // only snap to full/empty, partial fills are left to the rows
        let l = if d_lo >= 1.0 { 1.0 } else { 0.0 };
        let u = if d_hi <= 0.0 { 0.0 } else { 1.0 };
        if !set(grp.deltas[k], l, u, &mut changed) {
            return None;
        }
        if k + 1 < widths.len() {
            let z = grp.orders[k];
            // segment k+1 starts filling only past the end of segment k
            let end = start + w;
            let zl = if f_lo > end { 1.0 } else { 0.0 };
            let zu = if f_hi < end { 0.0 } else { 1.0 };
            if !set(z, zl, zu, &mut changed) {
                return None;
            }
        }
        start += w;
    }
    Some(changed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_of_rows_tightens_through() {
        // x + y <= 4, y >= 3 (via y - z >= 0 with z >= 3)
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 0.0, 10.0);
        let y = lp.add_var(0.0, 0.0, 10.0);
        let z = lp.add_var(0.0, 3.0, 10.0);
        lp.add_row([(x, 1.0), (y, 1.0)], Sense::Le, 4.0);
        lp.add_row([(y, 1.0), (z, -1.0)], Sense::Ge, 0.0);
        let inc = Incidence::new(&lp, &[]);
        let (mut lo, mut hi) = (lp.lower.clone(), lp.upper.clone());
        assert!(propagate(
            &lp,
            &[],
            &inc,
            &[false; 3],
            &mut lo,
            &mut hi,
            None
        ));
        // bounds carry a relative feasibility slack
        assert!(hi[x] <= 1.0 + 1e-5);
        assert!(lo[y] >= 3.0 - 1e-5);
        assert!(hi[y] <= 4.0 + 1e-5);
    }

    #[test]
    fn binaries_round_inward() {
        let mut lp = LinearProgram::new();
        let z = lp.add_var(0.0, 0.0, 1.0);
        let d = lp.add_var(0.0, 0.25, 1.0);
        lp.add_row([(d, 1.0), (z, -1.0)], Sense::Le, 0.0);
        let inc = Incidence::new(&lp, &[]);
        let (mut lo, mut hi) = (lp.lower.clone(), lp.upper.clone());
        assert!(propagate(
            &lp,
            &[],
            &inc,
            &[true, false],
            &mut lo,
            &mut hi,
            None
        ));
        assert_eq!(lo[z], 1.0);
    }

    #[test]
    fn detects_infeasible_row() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 0.0, 1.0);
        let y = lp.add_var(0.0, 0.0, 1.0);
        lp.add_row([(x, 1.0), (y, 1.0)], Sense::Ge, 3.0);
        let inc = Incidence::new(&lp, &[]);
        let (mut lo, mut hi) = (lp.lower.clone(), lp.upper.clone());
        assert!(!propagate(
            &lp,
            &[],
            &inc,
            &[false, false],
            &mut lo,
            &mut hi,
            None
        ));
    }
}
