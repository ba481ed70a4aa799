use std::fmt::Write as _;

use serde::Serialize;

/// One outer iteration of a decomposition run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub master_obj: f64,
    /// Mismatch per period (or a single aggregate entry).
    pub mismatches: Vec<f64>,
    pub cuts_added: usize,
    pub t_master_ms: f64,
    pub t_sub_ms: f64,
    /// Wall time since the run started.
    pub t_total_ms: f64,
}

impl IterationRecord {
    pub fn max_mismatch(&self) -> f64 {
        self.mismatches.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConvergenceLog {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceLog {
    pub const CSV_HEADER: &'static str =
        "iter,master_obj,max_mismatch,cuts_added,t_master_ms,t_sub_ms,t_total_ms";

    pub fn push(&mut self, r: IterationRecord) {
        debug_assert!(self.records.last().map_or(true, |l| l.iter < r.iter));
        self.records.push(r);
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:.10e},{:.6e},{},{:.3},{:.3},{:.3}",
                r.iter,
                r.master_obj,
                r.max_mismatch(),
                r.cuts_added,
                r.t_master_ms,
                r.t_sub_ms,
                r.t_total_ms
            );
        }
        out
    }

    /// The CSV with the timing columns removed, for reproducibility checks.
    pub fn to_csv_untimed(&self) -> String {
        self.to_csv()
            .lines()
            .map(|l| l.splitn(5, ',').take(4).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join("\n")
    }
}
