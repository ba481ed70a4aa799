//! Branch and bound over binary variables.
//!
//! Node selection is best-bound with deeper nodes first on ties; branching
//! picks the most fractional binary. Children are warm-started from the
//! parent's optimal basis. Incremental piecewise-linear groups registered on
//! the problem get a repair step: when the fill variables of every group are
//! already in fill order, the ordering binaries can be set to 0/1 without
//! changing any other value, which closes the node without branching.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::{debug, trace};

use super::lp::{Basis, LinearProgram, LpSolution, LpStatus, Row};
use super::presolve::{propagate, Incidence};
use super::simplex::{Simplex, SimplexOptions};
use super::SolveError;

/// Column indices of one incremental encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncrementalGroup {
    pub deltas: Vec<usize>,
    pub orders: Vec<usize>,
    /// Rows tying the fills to the rest of the model. The first one defines
    /// the encoded argument; branching weighs all of them by their duals.
    pub links: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    pub binaries: Vec<usize>,
    pub groups: Vec<IncrementalGroup>,
}

impl MixedIntegerProgram {
    pub fn new(lp: LinearProgram) -> Self {
        Self {
            lp,
            binaries: Vec::new(),
            groups: Vec::new(),
        }
    }

    pub fn add_binary(&mut self, cost: f64) -> usize {
        let j = self.lp.add_var(cost, 0.0, 1.0);
        self.binaries.push(j);
        j
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        self.lp.validate()?;
        let n = self.lp.num_vars();
        if let Some(&b) = self.binaries.iter().find(|&&b| b >= n) {
            return Err(SolveError::Malformed(format!(
                "binary index {b} out of range"
            )));
        }
        Ok(())
    }

    pub fn dump(&self) -> String {
        self.lp.dump(&self.binaries)
    }
}

#[derive(Clone, Debug)]
pub struct MipOptions {
    /// Relative optimality gap.
    pub gap: f64,
    pub node_limit: usize,
    pub integrality_tol: f64,
    /// Maximum LP resolves of the root dive for incremental groups.
    pub dive_limit: usize,
    /// Strong-branching candidates evaluated at the root and at other nodes.
    pub strong_root: usize,
    pub strong_node: usize,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self {
            gap: 1e-6,
            node_limit: 100_000,
            integrality_tol: 1e-6,
            dive_limit: 2000,
            strong_root: 400,
            strong_node: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum MipStatus {
    Optimal,
    NodeLimit,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct MipSolution {
    pub status: MipStatus,
    /// Incumbent (primal values with the LP duals of the node that produced it).
    pub solution: Option<LpSolution>,
    pub best_bound: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Optimal basis of the root relaxation, for warm starts.
    pub root_basis: Option<Basis>,
    /// Rows added by the separator, in the order they were appended.
    pub cuts: Vec<Row>,
}

impl MipSolution {
    pub fn objective(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.objective)
    }

    pub fn gap(&self) -> f64 {
        match self.objective() {
            Some(obj) => ((obj - self.best_bound) / obj.abs().max(1.0)).max(0.0),
            None => f64::INFINITY,
        }
    }
}

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    fixes: Vec<(usize, f64, f64)>,
    basis: Option<Basis>,
    /// Pseudo-cost key, branch direction and parent objective.
    origin: Option<(usize, bool, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: "greater" = explored first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(self.seq.cmp(&other.seq))
    }
}

/// Solves an LP with explicit bound vectors, retrying once with iterated
/// scaling and no warm start when the first attempt fails numerically.
pub(crate) fn solve_with_bounds(
    lp: &LinearProgram,
    lower: &[f64],
    upper: &[f64],
    hint: Option<&Basis>,
) -> Result<LpSolution, SolveError> {
    let opts = SimplexOptions::default();
    let mut s = Simplex::new(lp, lower, upper, hint, &opts);
    match s.solve() {
        Ok(st) => Ok(s.extract(lp, lower, upper, st)),
        Err(e) => {
            debug!("LP failed ({e}); retrying cold with iterated scaling");
            let opts = SimplexOptions {
                scale_passes: 4,
                ..SimplexOptions::default()
            };
            let mut s = Simplex::new(lp, lower, upper, None, &opts);
            let st = s.solve()?;
            Ok(s.extract(lp, lower, upper, st))
        }
    }
}

/// Branch and bound. `hint` warm-starts the root relaxation.
pub fn solve_mip(
    mip: &MixedIntegerProgram,
    opts: &MipOptions,
    hint: Option<&Basis>,
) -> Result<MipSolution, SolveError> {
    solve_mip_with(mip, opts, hint, None)
}

/// Lazy constraint generation: returns globally valid rows violated by `x`,
/// or nothing when `x` is acceptable.
pub type Separator<'a> = &'a mut dyn FnMut(&[f64]) -> Vec<Row>;

/// Separation rounds per node before the node LP is taken as is.
const MAX_SEPARATION_ROUNDS: usize = 50;

/// [`solve_mip`] with an optional separator. Every node LP is re-solved until
/// the separator has nothing to add, and incumbents must pass it; the rows it
/// returns are kept for the rest of the search and reported in
/// [`MipSolution::cuts`].
pub fn solve_mip_with(
    mip: &MixedIntegerProgram,
    opts: &MipOptions,
    hint: Option<&Basis>,
    mut separator: Option<Separator>,
) -> Result<MipSolution, SolveError> {
    mip.validate()?;
    let mut work = mip.clone();
    let lp = &mip.lp;
    let n = lp.num_vars();
    let mut base_lower = lp.lower.clone();
    let mut base_upper = lp.upper.clone();
    let mut is_binary = vec![false; n];
    for &b in &mip.binaries {
        is_binary[b] = true;
        base_lower[b] = base_lower[b].max(0.0);
        base_upper[b] = base_upper[b].min(1.0);
        if base_lower[b] > base_upper[b] {
            return Ok(MipSolution {
                status: MipStatus::Infeasible,
                solution: None,
                best_bound: f64::INFINITY,
                nodes: 0,
                lp_iterations: 0,
                root_basis: None,
                cuts: Vec::new(),
            });
        }
    }
    let tol = opts.integrality_tol;
    let mut group_of = vec![usize::MAX; n];
    for (g, grp) in mip.groups.iter().enumerate() {
        for &z in &grp.orders {
            group_of[z] = g;
        }
    }

    let mut inc = Incidence::new(lp, &mip.groups);
    if !mip.binaries.is_empty()
        && !propagate(
            lp,
            &mip.groups,
            &inc,
            &is_binary,
            &mut base_lower,
            &mut base_upper,
            None,
        )
    {
        return Ok(MipSolution {
            status: MipStatus::Infeasible,
            solution: None,
            best_bound: f64::INFINITY,
            nodes: 0,
            lp_iterations: 0,
            root_basis: None,
            cuts: Vec::new(),
        });
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        seq: 0,
        fixes: Vec::new(),
        basis: hint.cloned(),
        origin: None,
    });
    let mut seq = 1usize;
    let mut incumbent: Option<LpSolution> = None;
    let mut nodes = 0usize;
    let mut lp_iterations = 0usize;
    let mut root_basis = None;
    let mut lower = base_lower.clone();
    let mut upper = base_upper.clone();
    let mut hit_limit = false;
    let mut pseudo = PseudoCosts::new(mip.groups.len() + n);
    let key_of = |j: usize| {
        if group_of[j] != usize::MAX {
            group_of[j]
        } else {
            mip.groups.len() + j
        }
    };

    let cutoff = |inc: &Option<LpSolution>| -> f64 {
        match inc {
            Some(s) => s.objective - opts.gap * s.objective.abs().max(1.0),
            None => f64::INFINITY,
        }
    };

    while let Some(node) = heap.pop() {
        if node.bound >= cutoff(&incumbent) {
            // best-bound order: every remaining node is at least as bad
            heap.clear();
            break;
        }
        if nodes >= opts.node_limit {
            heap.push(node);
            hit_limit = true;
            break;
        }
        nodes += 1;
        if nodes % 100 == 0 {
            debug!(
                "b&b: {nodes} nodes, {} open, bound {:.6}, incumbent {:?}",
                heap.len(),
                node.bound,
                incumbent.as_ref().map(|s| s.objective)
            );
        }

        lower.copy_from_slice(&base_lower);
        upper.copy_from_slice(&base_upper);
        for &(j, l, u) in &node.fixes {
            lower[j] = l;
            upper[j] = u;
        }
        if !node.fixes.is_empty() {
            let fixed: Vec<usize> = node.fixes.iter().map(|f| f.0).collect();
            if !propagate(
                &work.lp,
                &work.groups,
                &inc,
                &is_binary,
                &mut lower,
                &mut upper,
                Some(&fixed),
            ) {
                continue;
            }
        }
        let (sol, iters, separated) = solve_separated(
            &mut work,
            &mut inc,
            &mut separator,
            &lower,
            &upper,
            node.basis.as_ref(),
        )?;
        lp_iterations += iters;
        if node.depth == 0 {
            root_basis = sol.basis.clone();
        }
        if let Some((key, up, parent_obj)) = node.origin {
            let gain = if sol.status == LpStatus::Optimal {
                sol.objective - parent_obj
            } else {
                f64::INFINITY
            };
            pseudo.record(key, up, gain);
        }
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Ok(MipSolution {
                    status: MipStatus::Unbounded,
                    solution: None,
                    best_bound: f64::NEG_INFINITY,
                    nodes,
                    lp_iterations,
                    root_basis,
                    cuts: work.lp.rows.split_off(mip.lp.num_rows()),
                })
            }
            LpStatus::Optimal => {}
        }
        if sol.objective >= cutoff(&incumbent) {
            continue;
        }
        if node.depth == 0 && incumbent.is_none() && !work.groups.is_empty() {
            let (found, iters) = dive(
                &mut work,
                &mut inc,
                &mut separator,
                &sol,
                &is_binary,
                &lower,
                &upper,
                &group_of,
                tol,
                opts.dive_limit,
            )?;
            lp_iterations += iters;
            if let Some(d) = found {
                debug!("dive incumbent {:.6}", d.objective);
                incumbent = Some(d);
            }
        }

        let candidates = branch_candidates(&work, &sol, &group_of, tol);
        if candidates.is_empty() {
            if separated {
                incumbent = Some(round_binaries(sol, &work.binaries));
            } else {
                // separation did not settle; revisit with the rows added so far
                heap.push(Node {
                    bound: sol.objective,
                    seq,
                    basis: sol.basis.clone(),
                    origin: None,
                    ..node
                });
                seq += 1;
            }
            continue;
        }
        if let Some(repaired) = repair_groups(&work, &sol, &is_binary, &lower, &upper, tol) {
            // same objective as the node LP, so only admissibility can fail
            if admissible(&mut work, &mut inc, &mut separator, &repaired.x) {
                incumbent = Some(repaired);
                continue;
            }
        }

        let budget = if node.depth == 0 {
            opts.strong_root
        } else {
            opts.strong_node
        };
        let ctx = StrongContext {
            mip: &work,
            inc: &inc,
            is_binary: &is_binary,
            lower: &lower,
            upper: &upper,
            parent: &sol,
        };
        let (choice, iters) = pick_branch(&ctx, &candidates, &mut pseudo, &key_of, budget)?;
        lp_iterations += iters;
        let Branch {
            implied,
            var,
            up_first,
            bounds,
        } = choice;
        if !implied.is_empty() {
            // an empty interval marks a node with both children infeasible
            if implied.iter().any(|&(_, l, u)| l > u) {
                continue;
            }
            let mut fixes = node.fixes.clone();
            fixes.extend(implied);
            heap.push(Node {
                bound: sol.objective,
                depth: node.depth,
                seq,
                fixes,
                basis: sol.basis.clone(),
                origin: None,
            });
            seq += 1;
            continue;
        }
        debug!(
            "node {nodes}: depth {} obj {:.6} branch x{var} children {bounds:?}",
            node.depth, sol.objective
        );
        let order = if up_first { [1.0, 0.0] } else { [0.0, 1.0] };
        for v in order {
            let child_bound = bounds[v as usize].max(sol.objective);
            if child_bound >= cutoff(&incumbent) {
                continue;
            }
            let mut fixes = node.fixes.clone();
            fixes.push((var, v, v));
            heap.push(Node {
                bound: child_bound,
                depth: node.depth + 1,
                seq,
                fixes,
                basis: sol.basis.clone(),
                origin: Some((key_of(var), v == 1.0, sol.objective)),
            });
            seq += 1;
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let status = if hit_limit {
        MipStatus::NodeLimit
    } else if incumbent.is_some() {
        MipStatus::Optimal
    } else {
        MipStatus::Infeasible
    };
    let best_bound = match &incumbent {
        Some(s) => open_bound.min(s.objective),
        None => open_bound,
    };
    let cuts = work.lp.rows.split_off(mip.lp.num_rows());
    Ok(MipSolution {
        status,
        solution: incumbent,
        best_bound,
        nodes,
        lp_iterations,
        root_basis,
        cuts,
    })
}

fn add_cuts(work: &mut MixedIntegerProgram, inc: &mut Incidence, rows: Vec<Row>) {
    for row in rows {
        let i = work.lp.rows.len();
        inc.push_row(i, &row);
        work.lp.rows.push(row);
    }
}

/// Branching candidate: a variable, the side the LP point leans to, and a
/// cheap score used to order strong-branching work.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    var: usize,
    up_first: bool,
    score: f64,
}

/// Out-of-order incremental groups (split at the middle of the ambiguous
/// range, so repeated splits bisect the segment index) plus fractional
/// binaries outside any group. Empty when nothing needs branching; group
/// binaries may then still be fractional but repairable.
fn branch_candidates(
    mip: &MixedIntegerProgram,
    sol: &LpSolution,
    group_of: &[usize],
    tol: f64,
) -> Vec<Candidate> {
    let x = &sol.x;
    let mut out = Vec::new();
    for grp in &mip.groups {
        let Some(st) = group_state(mip, grp, x, tol) else {
            continue;
        };
        let k = st.split;
        let beyond: f64 = grp.deltas[k + 1..].iter().map(|&j| x[j]).sum();
        let before: f64 = grp.deltas[..=k].iter().map(|&j| 1.0 - x[j]).sum();
        out.push(Candidate {
            var: grp.orders[k],
            up_first: beyond >= before,
            score: st.score,
        });
    }
    for &b in &mip.binaries {
        if group_of[b] != usize::MAX {
            continue;
        }
        let f = x[b] - x[b].floor();
        let dist = f.min(1.0 - f);
        if dist > tol {
            out.push(Candidate {
                var: b,
                up_first: x[b] >= 0.5,
                score: dist,
            });
        }
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.var.cmp(&b.var)));
    out
}

/// Running averages of the objective gain per branch direction.
struct PseudoCosts {
    sum: Vec<[f64; 2]>,
    count: Vec<[usize; 2]>,
}

impl PseudoCosts {
    fn new(keys: usize) -> Self {
        Self {
            sum: vec![[0.0; 2]; keys],
            count: vec![[0; 2]; keys],
        }
    }

    fn record(&mut self, key: usize, up: bool, gain: f64) {
        let side = up as usize;
        // infeasible children count as a large but finite gain
        let g = if gain.is_finite() {
            gain.max(0.0)
        } else {
            1e12
        };
        self.sum[key][side] += g;
        self.count[key][side] += 1;
    }

    fn reliable(&self, key: usize) -> bool {
        self.count[key][0] > 0 && self.count[key][1] > 0
    }

    fn estimate(&self, key: usize) -> [f64; 2] {
        let avg = |side: usize| {
            if self.count[key][side] > 0 {
                self.sum[key][side] / self.count[key][side] as f64
            } else {
                0.0
            }
        };
        [avg(0), avg(1)]
    }
}

fn product_score(gains: [f64; 2]) -> f64 {
    gains[0].max(1e-6) * gains[1].max(1e-6)
}

struct StrongContext<'a> {
    mip: &'a MixedIntegerProgram,
    inc: &'a Incidence,
    is_binary: &'a [bool],
    lower: &'a [f64],
    upper: &'a [f64],
    parent: &'a LpSolution,
}

struct Branch {
    /// Fixings proven by infeasible strong-branching children; when non-empty
    /// the node is re-solved with them instead of branching.
    implied: Vec<(usize, f64, f64)>,
    var: usize,
    up_first: bool,
    /// Lower bounds known for the down and up child.
    bounds: [f64; 2],
}

/// Reliability branching: candidates without pseudo-costs on both sides are
/// strong-branched (up to `budget` of them, in cheap-score order); the rest
/// are scored from their pseudo-costs. Highest product of gains wins.
fn pick_branch(
    ctx: &StrongContext,
    candidates: &[Candidate],
    pseudo: &mut PseudoCosts,
    key_of: &dyn Fn(usize) -> usize,
    budget: usize,
) -> Result<(Branch, usize), SolveError> {
    let mut iters = 0;
    let mut evaluated = 0;
    let mut best: Option<(f64, usize, bool, [f64; 2])> = None;
    let mut implied = Vec::new();
    for c in candidates {
        let key = key_of(c.var);
        let mut bounds = [f64::NEG_INFINITY; 2];
        let gains = if !pseudo.reliable(key) && evaluated < budget {
            evaluated += 1;
            let mut g = [0.0; 2];
            for side in 0..2 {
                let (obj, it) = child_bound(ctx, c.var, side as f64)?;
                iters += it;
                bounds[side] = obj;
                g[side] = obj - ctx.parent.objective;
            }
            match (bounds[0].is_finite(), bounds[1].is_finite()) {
                (false, false) if bounds[0] > 0.0 && bounds[1] > 0.0 => {
                    // both sides infeasible: the node itself is
                    implied = vec![(c.var, 1.0, 0.0)];
                    break;
                }
                (false, true) if bounds[0] > 0.0 => {
                    implied.push((c.var, 1.0, 1.0));
                    continue;
                }
                (true, false) if bounds[1] > 0.0 => {
                    implied.push((c.var, 0.0, 0.0));
                    continue;
                }
                _ => {}
            }
            pseudo.record(key, false, g[0]);
            pseudo.record(key, true, g[1]);
            g
        } else {
            pseudo.estimate(key)
        };
        let score = product_score(gains) + c.score * 1e-12;
        if best.as_ref().map_or(true, |b| score > b.0) {
            best = Some((score, c.var, c.up_first, bounds));
        }
    }
    if !implied.is_empty() {
        debug!(
            "strong branching: {evaluated} evaluated, {} implied fixings",
            implied.len()
        );
        return Ok((
            Branch {
                implied,
                var: 0,
                up_first: false,
                bounds: [f64::NEG_INFINITY; 2],
            },
            iters,
        ));
    }
    let (score, var, up_first, bounds) = best.expect("candidates are non-empty");
    trace!("strong branching: {evaluated} evaluated, best score {score:.3e}");
    Ok((
        Branch {
            implied,
            var,
            up_first,
            bounds,
        },
        iters,
    ))
}

/// LP bound of the child with `var` fixed to `value`; `+inf` if infeasible.
fn child_bound(ctx: &StrongContext, var: usize, value: f64) -> Result<(f64, usize), SolveError> {
    let mut lo = ctx.lower.to_vec();
    let mut up = ctx.upper.to_vec();
    lo[var] = value;
    up[var] = value;
    if !propagate(
        &ctx.mip.lp,
        &ctx.mip.groups,
        ctx.inc,
        ctx.is_binary,
        &mut lo,
        &mut up,
        Some(&[var]),
    ) {
        return Ok((f64::INFINITY, 0));
    }
    let s = solve_with_bounds(&ctx.mip.lp, &lo, &up, ctx.parent.basis.as_ref())?;
    let obj = match s.status {
        LpStatus::Optimal => s.objective,
        LpStatus::Infeasible => f64::INFINITY,
        LpStatus::Unbounded => f64::NEG_INFINITY,
    };
    Ok((obj, s.iterations))
}

struct GroupState {
    score: f64,
    /// Order binary to branch on.
    split: usize,
}

/// `None` when the group's fills are already in order.
fn group_state(
    mip: &MixedIntegerProgram,
    grp: &IncrementalGroup,
    x: &[f64],
    tol: f64,
) -> Option<GroupState> {
    let d: Vec<f64> = grp.deltas.iter().map(|&j| x[j]).collect();
    let lo = d.iter().position(|&v| v < 1.0 - tol)?;
    let hi = d.iter().rposition(|&v| v > tol)?;
    if hi <= lo {
        return None;
    }
    let mass: f64 = d[lo..=hi].iter().map(|&v| v.min(1.0 - v).max(0.0)).sum();
    let Some(&arg_row) = grp.links.first() else {
        return Some(GroupState {
            score: mass * 1e-9,
            split: (lo + hi) / 2,
        });
    };
    let coef = |row: usize| -> (Vec<f64>, f64) {
        let mut c = vec![0.0; grp.deltas.len()];
        let mut outside = 0.0f64;
        for &(j, v) in &mip.lp.rows[row].terms {
            match grp.deltas.iter().position(|&dj| dj == j) {
                Some(k) => c[k] = v,
                None => outside = outside.max(v.abs()),
            }
        }
        (c, outside)
    };
    // fill-ordered assignment with the same argument
    let widths: Vec<f64> = coef(arg_row).0.iter().map(|v| v.abs()).collect();
    let mut remaining: f64 = widths.iter().zip(&d).map(|(w, v)| w * v).sum();
    let mut seg = 0;
    let mut ordered = vec![0.0; d.len()];
    for (k, &w) in widths.iter().enumerate() {
        if w <= 0.0 || remaining <= 0.0 {
            break;
        }
        ordered[k] = (remaining / w).min(1.0);
        remaining -= ordered[k] * w;
        seg = k;
    }
    let mut score = mass * 1e-9;
    for &r in &grp.links[1..] {
        let (c, outside) = coef(r);
        let change: f64 = c
            .iter()
            .zip(ordered.iter().zip(&d))
            .map(|(a, (o, v))| a * (o - v))
            .sum();
        score += change.abs() / outside.max(1e-12);
    }
    // nearest breakpoint to the argument: end of `seg` (order seg) or its start (order seg-1)
    let k = if ordered[seg] >= 0.5 || seg == 0 {
        seg
    } else {
        seg - 1
    };
    Some(GroupState {
        score,
        split: k.clamp(lo, hi - 1),
    })
}

/// Depth-first plunge from a node solution following the preferred side of
/// each branch, falling back to the other side when the preferred one is
/// infeasible. Returns an integer-feasible point if it reaches one.
#[allow(clippy::too_many_arguments)]
fn dive(
    work: &mut MixedIntegerProgram,
    inc: &mut Incidence,
    separator: &mut Option<Separator>,
    start: &LpSolution,
    is_binary: &[bool],
    lower: &[f64],
    upper: &[f64],
    group_of: &[usize],
    tol: f64,
    limit: usize,
) -> Result<(Option<LpSolution>, usize), SolveError> {
    let mut lo = lower.to_vec();
    let mut up = upper.to_vec();
    let mut sol = start.clone();
    let mut iters = 0;
    for _ in 0..limit {
        let mut candidates = Vec::new();
        let found = match repair_groups(work, &sol, is_binary, &lo, &up, tol) {
            Some(r) => Some(r),
            None => {
                candidates = branch_candidates(work, &sol, group_of, tol);
                candidates
                    .is_empty()
                    .then(|| round_binaries(sol.clone(), &work.binaries))
            }
        };
        if let Some(f) = found {
            if admissible(work, inc, separator, &f.x) {
                return Ok((Some(f), iters));
            }
            // cut off by new rows: re-solve and keep diving
            let (s, it, _) = solve_separated(work, inc, separator, &lo, &up, sol.basis.as_ref())?;
            iters += it;
            if s.status != LpStatus::Optimal {
                return Ok((None, iters));
            }
            sol = s;
            continue;
        }
        let Candidate {
            var: j, up_first, ..
        } = candidates[0];
        let mut next = None;
        for v in if up_first { [1.0, 0.0] } else { [0.0, 1.0] } {
            lo[j] = v;
            up[j] = v;
            let (s, it, _) = solve_separated(work, inc, separator, &lo, &up, sol.basis.as_ref())?;
            iters += it;
            if s.status == LpStatus::Optimal {
                next = Some(s);
                break;
            }
        }
        match next {
            Some(s) => sol = s,
            None => return Ok((None, iters)),
        }
    }
    Ok((None, iters))
}

/// Solves the LP under the given bounds, adding separator rows until none
/// are violated or the round limit is hit. The flag is false in the latter
/// case.
fn solve_separated(
    work: &mut MixedIntegerProgram,
    inc: &mut Incidence,
    separator: &mut Option<Separator>,
    lower: &[f64],
    upper: &[f64],
    basis: Option<&Basis>,
) -> Result<(LpSolution, usize, bool), SolveError> {
    let mut sol = solve_with_bounds(&work.lp, lower, upper, basis)?;
    let mut iters = sol.iterations;
    let Some(sep) = separator.as_mut() else {
        return Ok((sol, iters, true));
    };
    for _ in 0..MAX_SEPARATION_ROUNDS {
        if sol.status != LpStatus::Optimal {
            return Ok((sol, iters, true));
        }
        let rows = sep(&sol.x);
        if rows.is_empty() {
            return Ok((sol, iters, true));
        }
        add_cuts(work, inc, rows);
        sol = solve_with_bounds(&work.lp, lower, upper, sol.basis.as_ref())?;
        iters += sol.iterations;
    }
    let done = sol.status != LpStatus::Optimal || sep(&sol.x).is_empty();
    Ok((sol, iters, done))
}

/// True when the separator accepts `x`; otherwise its rows are added.
fn admissible(
    work: &mut MixedIntegerProgram,
    inc: &mut Incidence,
    separator: &mut Option<Separator>,
    x: &[f64],
) -> bool {
    let Some(sep) = separator.as_mut() else {
        return true;
    };
    let rows = sep(x);
    let ok = rows.is_empty();
    add_cuts(work, inc, rows);
    ok
}

fn round_binaries(mut sol: LpSolution, binaries: &[usize]) -> LpSolution {
    for &b in binaries {
        sol.x[b] = sol.x[b].round();
    }
    sol
}

/// Sets the ordering binaries of fill-ordered groups; `None` if any group
/// is out of order or a non-group binary is fractional.
fn repair_groups(
    mip: &MixedIntegerProgram,
    sol: &LpSolution,
    is_binary: &[bool],
    lower: &[f64],
    upper: &[f64],
    tol: f64,
) -> Option<LpSolution> {
    if mip.groups.is_empty() {
        return None;
    }
    let mut x = sol.x.clone();
    let mut in_group = vec![false; x.len()];
    for g in &mip.groups {
        for (k, &z) in g.orders.iter().enumerate() {
            in_group[z] = true;
            let (dk, dnext) = (x[g.deltas[k]], x[g.deltas[k + 1]]);
            let val = if dk >= 1.0 - tol {
                1.0
            } else if dnext <= tol {
                0.0
            } else {
                return None;
            };
            if val < lower[z] || val > upper[z] {
                return None;
            }
            x[z] = val;
        }
    }
    for (j, &bin) in is_binary.iter().enumerate() {
        if bin && !in_group[j] {
            let f = x[j] - x[j].round();
            if f.abs() > tol {
                return None;
            }
            x[j] = x[j].round();
        }
    }
    let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if mip.lp.max_violation(&x) > 1e-7 * scale {
        return None;
    }
    let mut out = sol.clone();
    out.x = x;
    out.objective = mip.lp.objective_value(&out.x);
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvecore::Sense;

    #[test]
    fn lp_without_binaries_matches_plain_solve() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, 0.0, 4.0);
        let y = lp.add_var(-2.0, 0.0, 3.0);
        lp.add_row([(x, 1.0), (y, 1.0)], Sense::Le, 5.0);
        let mip = MixedIntegerProgram::new(lp.clone());
        let a = solve_mip(&mip, &MipOptions::default(), None).unwrap();
        let b = crate::solvecore::solve_lp(&lp).unwrap();
        assert_eq!(a.status, MipStatus::Optimal);
        assert!((a.objective().unwrap() - b.objective).abs() < 1e-12);
        assert_eq!(a.nodes, 1);
    }

    #[test]
    fn rounding_is_forced() {
        let mut mip = MixedIntegerProgram::default();
        let a = mip.add_binary(-1.0);
        let b = mip.add_binary(-1.0);
        mip.lp.add_row([(a, 1.0), (b, 1.0)], Sense::Le, 1.5);
        let s = solve_mip(&mip, &MipOptions::default(), None).unwrap();
        assert_eq!(s.status, MipStatus::Optimal);
        assert!((s.objective().unwrap() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn knapsack() {
        let mut mip = MixedIntegerProgram::default();
        let a = mip.add_binary(-5.0);
        let b = mip.add_binary(-4.0);
        let c = mip.add_binary(-3.0);
        mip.lp
            .add_row([(a, 4.0), (b, 3.0), (c, 2.0)], Sense::Le, 5.0);
        let s = solve_mip(&mip, &MipOptions::default(), None).unwrap();
        let sol = s.solution.unwrap();
        assert!((sol.objective + 7.0).abs() < 1e-9);
        assert_eq!((sol.x[a], sol.x[b], sol.x[c]), (0.0, 1.0, 1.0));
    }

    #[test]
    fn infeasible_mip() {
        let mut mip = MixedIntegerProgram::default();
        let a = mip.add_binary(1.0);
        let b = mip.add_binary(1.0);
        mip.lp.add_row([(a, 1.0), (b, 1.0)], Sense::Eq, 1.5);
        let s = solve_mip(&mip, &MipOptions::default(), None).unwrap();
        assert_eq!(s.status, MipStatus::Infeasible);
        assert!(s.solution.is_none());
    }

    #[test]
    fn node_limit_is_reported() {
        let mut mip = MixedIntegerProgram::default();
        let vars: Vec<usize> = (0..8)
            .map(|i| mip.add_binary(-(1.0 + i as f64 * 0.1)))
            .collect();
        mip.lp
            .add_row(vars.iter().map(|&v| (v, 2.0)), Sense::Le, 7.0);
        let opts = MipOptions {
            node_limit: 1,
            ..MipOptions::default()
        };
        let s = solve_mip(&mip, &opts, None).unwrap();
        assert_eq!(s.status, MipStatus::NodeLimit);
    }
}
