//! Sparse LU factorisation of a simplex basis with product-form eta updates.
//!
//! The basis is the `m x m` matrix whose column `k` is the column of the
//! variable sitting at basis position `k`. Vectors handed to [`LuFactor::ftran`]
//! live in row space and come back in position space; [`LuFactor::btran`] goes
//! the other way.
//!
//! Pivot order: column singletons, row singletons, then Markowitz search with
//! threshold partial pivoting on the remaining bump.

const MARKOWITZ_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;

#[derive(Debug)]
struct UStep {
    row: usize,
    pos: usize,
    pivot: f64,
    rest: Vec<(usize, f64)>,
}

#[derive(Debug)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

/// Basis columns could not all be pivoted. `pairs` gives, for each dropped
/// position, a row whose unit (logical) column can replace it.
#[derive(Debug)]
pub(crate) struct Singular {
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug)]
pub(crate) struct LuFactor {
    m: usize,
    lower: Vec<(usize, Vec<(usize, f64)>)>,
    upper: Vec<UStep>,
    etas: Vec<Eta>,
    lu_nnz: usize,
    eta_nnz: usize,
}

impl LuFactor {
    /// Factorises the basis given as sparse columns `(row, value)`, one per position.
    pub fn factorize(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (pos, col) in columns.iter().enumerate() {
            for &(r, v) in col {
                if v != 0.0 {
                    rows[r].push((pos, v));
                    col_rows[pos].push(r);
                }
            }
        }
        let mut col_count: Vec<usize> = col_rows.iter().map(|c| c.len()).collect();
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut col_stack: Vec<usize> = (0..m).filter(|&c| col_count[c] == 1).collect();
        let mut row_stack: Vec<usize> = (0..m).filter(|&r| rows[r].len() == 1).collect();
        // lazily maintained: a column may sit in stale buckets; checked on pop
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); m + 1];
        for c in (0..m).rev() {
            buckets[col_count[c].min(m)].push(c);
        }
        let mut dropped: Vec<usize> = Vec::new();

        let mut lower = Vec::new();
        let mut upper = Vec::with_capacity(m);
        let mut lu_nnz = 0usize;
        // scatter map col -> index within the row being updated
        let mut slot = vec![usize::MAX; m];

        let mut steps = 0usize;
        while steps + dropped.len() < m {
            let mut choice: Option<(usize, usize)> = None;

            while let Some(c) = col_stack.pop() {
                if col_done[c] || col_count[c] != 1 {
                    continue;
                }
                let r = col_rows[c]
                    .iter()
                    .copied()
                    .find(|&r| !row_done[r] && rows[r].iter().any(|e| e.0 == c));
                match r {
                    Some(r) => {
                        let v = rows[r]
                            .iter()
                            .find(|e| e.0 == c)
                            .map(|e| e.1)
                            .unwrap_or(0.0);
                        if v.abs() > SINGULAR_TOL {
                            choice = Some((r, c));
                        } else {
                            col_done[c] = true;
                            dropped.push(c);
                            Self::retire_column(c, &mut rows, &col_rows, &row_done, &mut row_stack);
                        }
                    }
                    None => {
                        col_done[c] = true;
                        dropped.push(c);
                    }
                }
                if choice.is_some() {
                    break;
                }
            }

            if choice.is_none() && dropped.len() + steps < m {
                while let Some(r) = row_stack.pop() {
                    if row_done[r] || rows[r].len() != 1 {
                        continue;
                    }
                    let (c, v) = rows[r][0];
                    if col_done[c] {
                        continue;
                    }
                    // threshold test against the column maximum
                    let cmax = col_rows[c]
                        .iter()
                        .filter(|&&i| !row_done[i])
                        .filter_map(|&i| rows[i].iter().find(|e| e.0 == c).map(|e| e.1.abs()))
                        .fold(0.0f64, f64::max);
                    if v.abs() > SINGULAR_TOL && v.abs() >= MARKOWITZ_THRESHOLD * cmax {
                        choice = Some((r, c));
                        break;
                    }
                }
            }

            if choice.is_none() && dropped.len() + steps < m {
                let mut best_col = None;
                'scan: for cnt in 0..buckets.len() {
                    while let Some(&c) = buckets[cnt].last() {
                        if col_done[c] || col_count[c] != cnt {
                            buckets[cnt].pop();
                            continue;
                        }
                        best_col = Some(c);
                        break 'scan;
                    }
                }
                let Some(c) = best_col else { break };
                let entries: Vec<(usize, f64)> = col_rows[c]
                    .iter()
                    .filter(|&&i| !row_done[i])
                    .filter_map(|&i| rows[i].iter().find(|e| e.0 == c).map(|e| (i, e.1)))
                    .collect();
                let cmax = entries.iter().map(|e| e.1.abs()).fold(0.0f64, f64::max);
                if cmax <= SINGULAR_TOL {
                    col_done[c] = true;
                    dropped.push(c);
                    Self::retire_column(c, &mut rows, &col_rows, &row_done, &mut row_stack);
                    continue;
                }
                let r = entries
                    .iter()
                    .filter(|e| e.1.abs() >= MARKOWITZ_THRESHOLD * cmax)
                    .min_by(|a, b| rows[a.0].len().cmp(&rows[b.0].len()).then(a.0.cmp(&b.0)))
                    .map(|e| e.0)
                    .expect("column maximum is a candidate");
                choice = Some((r, c));
            }

            let Some((r, c)) = choice else { break };

            // pivot (r, c)
            let pivot_row = std::mem::take(&mut rows[r]);
            let pivot = pivot_row
                .iter()
                .find(|e| e.0 == c)
                .map(|e| e.1)
                .expect("pivot entry");
            row_done[r] = true;
            col_done[c] = true;
            for &(cc, _) in &pivot_row {
                if cc != c {
                    col_count[cc] -= 1;
                    buckets[col_count[cc]].push(cc);
                    if col_count[cc] == 1 {
                        col_stack.push(cc);
                    }
                }
            }
            let mut multipliers = Vec::new();
            let targets: Vec<usize> = col_rows[c]
                .iter()
                .copied()
                .filter(|&i| i != r && !row_done[i])
                .collect();
            for i in targets {
                let Some(k) = rows[i].iter().position(|e| e.0 == c) else {
                    continue;
                };
                let aic = rows[i].swap_remove(k).1;
                let l = aic / pivot;
                multipliers.push((i, l));
                for (idx, e) in rows[i].iter().enumerate() {
                    slot[e.0] = idx;
                }
                for &(cc, v) in &pivot_row {
                    if cc == c {
                        continue;
                    }
                    let s = slot[cc];
                    if s != usize::MAX {
                        rows[i][s].1 -= l * v;
                    } else {
                        rows[i].push((cc, -l * v));
                        slot[cc] = rows[i].len() - 1;
                        col_rows[cc].push(i);
                        col_count[cc] += 1;
                        buckets[col_count[cc].min(m)].push(cc);
                    }
                }
                for e in &rows[i] {
                    slot[e.0] = usize::MAX;
                }
                // drop numerical zeros created by cancellation
                let mut k = 0;
                while k < rows[i].len() {
                    let (cc, v) = rows[i][k];
                    if v.abs() > DROP_TOL {
                        k += 1;
                        continue;
                    }
                    rows[i].swap_remove(k);
                    col_count[cc] -= 1;
                    buckets[col_count[cc]].push(cc);
                    if col_count[cc] == 1 {
                        col_stack.push(cc);
                    }
                }
                if rows[i].len() == 1 {
                    row_stack.push(i);
                }
            }
            lu_nnz += multipliers.len() + pivot_row.len();
            if !multipliers.is_empty() {
                lower.push((r, multipliers));
            }
            let rest: Vec<(usize, f64)> = pivot_row.into_iter().filter(|e| e.0 != c).collect();
            upper.push(UStep {
                row: r,
                pos: c,
                pivot,
                rest,
            });
            steps += 1;
        }

        if steps < m {
            let mut free_rows: Vec<usize> = (0..m).filter(|&r| !row_done[r]).collect();
            let mut positions: Vec<usize> = (0..m).filter(|&c| !col_done[c]).collect();
            positions.extend(dropped.iter().copied());
            positions.sort_unstable();
            positions.dedup();
            free_rows.truncate(positions.len());
            return Err(Singular {
                pairs: positions.into_iter().zip(free_rows).collect(),
            });
        }

        Ok(Self {
            m,
            lower,
            upper,
            etas: Vec::new(),
            lu_nnz,
            eta_nnz: 0,
        })
    }

    fn retire_column(
        c: usize,
        rows: &mut [Vec<(usize, f64)>],
        col_rows: &[Vec<usize>],
        row_done: &[bool],
        row_stack: &mut Vec<usize>,
    ) {
        for &i in &col_rows[c] {
            if row_done[i] {
                continue;
            }
            let before = rows[i].len();
            rows[i].retain(|e| e.0 != c);
            if rows[i].len() != before && rows[i].len() == 1 {
                row_stack.push(i);
            }
        }
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub fn update_nnz(&self) -> usize {
        self.eta_nnz
    }

    pub fn factor_nnz(&self) -> usize {
        self.lu_nnz
    }

    /// Solves `B alpha = a`. `a` (row space) is consumed as scratch; result in `out` (position space).
    pub fn ftran(&self, a: &mut [f64], out: &mut [f64]) {
        for (r, list) in &self.lower {
            let t = a[*r];
            if t != 0.0 {
                for &(i, l) in list {
                    a[i] -= l * t;
                }
            }
        }
        for step in self.upper.iter().rev() {
            let mut v = a[step.row];
            for &(c, u) in &step.rest {
                v -= u * out[c];
            }
            out[step.pos] = v / step.pivot;
        }
        for eta in &self.etas {
            let t = out[eta.pos];
            if t != 0.0 {
                let t = t / eta.pivot;
                out[eta.pos] = t;
                for &(i, e) in &eta.entries {
                    out[i] -= e * t;
                }
            }
        }
    }

    /// Solves `B^T y = c`. `c` (position space) is consumed as scratch; result in `y` (row space).
    pub fn btran(&self, c: &mut [f64], y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for &(i, e) in &eta.entries {
                s -= e * c[i];
            }
            c[eta.pos] = s / eta.pivot;
        }
        for step in &self.upper {
            let w = c[step.pos] / step.pivot;
            y[step.row] = w;
            if w != 0.0 {
                for &(cc, u) in &step.rest {
                    c[cc] -= u * w;
                }
            }
        }
        for (r, list) in self.lower.iter().rev() {
            let mut s = y[*r];
            for &(i, l) in list {
                s -= l * y[i];
            }
            y[*r] = s;
        }
    }

    /// Records the replacement of the column at `pos` by a column whose
    /// FTRAN image is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        debug_assert_eq!(alpha.len(), self.m);
        let entries: Vec<(usize, f64)> = alpha
            .iter()
            .enumerate()
            .filter(|&(i, v)| i != pos && v.abs() > DROP_TOL)
            .map(|(i, &v)| (i, v))
            .collect();
        self.eta_nnz += entries.len() + 1;
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}
