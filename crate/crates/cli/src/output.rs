//! Artifact files. Everything goes through [`write_atomic`], so a crash
//! leaves either the previous file or the complete new one.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use iegs_core::master::MasterStats;
use iegs_core::netmodel::{CostBreakdown, DispatchCase, OperatingPoint};
use serde::Serialize;

use crate::run::{Algo, RunReport};

/// Bumped on any incompatible change to the JSON artifacts.
pub const SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Serialize)]
pub struct SolutionFile<'a> {
    pub schema_version: u32,
    pub algo: Algo,
    pub case: &'a str,
    pub status: &'a str,
    pub converged: bool,
    pub objective: f64,
    pub costs: CostBreakdown,
    pub iterations: usize,
    pub wall_s: f64,
    pub n_binaries: usize,
    pub n_continuous: usize,
    pub master_stats: &'a MasterStats,
    pub point: &'a OperatingPoint,
}

impl<'a> SolutionFile<'a> {
    pub fn new(case: &'a DispatchCase, r: &'a RunReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            algo: r.algo,
            case: &case.meta.name,
            status: &r.status,
            converged: r.converged,
            objective: r.schedule.objective,
            costs: r.schedule.costs,
            iterations: r.iterations,
            wall_s: r.wall_s,
            n_binaries: r.n_binaries,
            n_continuous: r.n_continuous,
            master_stats: &r.schedule.stats,
            point: &r.schedule.point,
        }
    }
}

pub fn summary(case: &DispatchCase, r: &RunReport) -> String {
    let mut s = String::new();
    let c = &r.schedule.costs;
    let _ = writeln!(s, "case        {}", case.meta.name);
    let _ = writeln!(s, "algorithm   {}", r.algo);
    let _ = writeln!(s, "status      {}", r.status);
    let _ = writeln!(s, "iterations  {}", r.iterations);
    let _ = writeln!(s, "objective   {:.4}", r.schedule.objective);
    let _ = writeln!(s, "  coal      {:.4}", c.coal);
    let _ = writeln!(s, "  gas       {:.4}", c.gas);
    let _ = writeln!(s, "  wind      {:.4}", c.curtailment);
    if let Some(last) = r.log.last() {
        let _ = writeln!(s, "mismatch    {:.3e}", last.max_mismatch());
    }
    let _ = writeln!(
        s,
        "variables   {} binary, {} continuous",
        r.n_binaries, r.n_continuous
    );
    let _ = writeln!(s, "wall time   {:.3} s", r.wall_s);
    s
}
