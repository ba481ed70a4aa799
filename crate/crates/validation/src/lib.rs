//! Helpers for the acceptance run: a sampler of realizable flows and a
//! pass/fail collector that keeps going after a failed check.

use std::panic::{self, AssertUnwindSafe};

use iegs_core::netmodel::DispatchCase;

/// Flows in one period realizable by some pressure profile, with every flow
/// of the same sign as the matching anchor (anchors within `1e-6` of zero
/// take either sign). Walks the pipeline/compressor graph from each unvisited
/// node and draws every neighbour's pressure from the interval the visited
/// end allows; `None` when a draw hits an empty interval.
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
    fn draw(lo: f64, hi: f64, rng: &mut impl rand::Rng) -> Option<f64> {
        (lo < hi).then(|| rng.gen_range(lo..hi))
    }
    let mut pi = vec![f64::NAN; nn];
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

/// Outcome of one check: whether it held and the measured values behind it.
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Default)]
pub struct Report {
    results: Vec<(String, bool)>,
}

impl Report {
    /// Runs `check` and prints one line for it. A panic counts as a failure
    /// and does not stop the remaining checks.
    pub fn check(&mut self, name: &str, check: impl FnOnce() -> Verdict) {
        let v = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::new(false, format!("panicked: {msg}"))
        });
        println!(
            "{} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        self.results.push((name.to_string(), v.pass));
    }

    pub fn failed(&self) -> Vec<&str> {
        self.results
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(n, _)| n.as_str())
            .collect()
    }
}
