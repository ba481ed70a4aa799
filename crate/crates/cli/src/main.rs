mod output;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use iegs_core::netmodel::{generate_case, generate_tiny_case, parse_case, DispatchCase};
use log::{info, warn};
use serde::Serialize;

use output::{summary, write_atomic, SolutionFile, SCHEMA_VERSION};
use run::{run, Algo, Failure, RunConfig, RunReport};

/// Process exit codes. Stable: scripts may depend on them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
enum Exit {
    Ok = 0,
    /// Unreadable or invalid case, bad arguments (clap also exits with 2).
    Input = 2,
    Infeasible = 3,
    /// Iteration or node limit reached, or the gas solve diverged.
    NotConverged = 4,
    Solver = 5,
    /// An artifact could not be written.
    Output = 6,
}

impl From<Exit> for ExitCode {
    fn from(e: Exit) -> Self {
        ExitCode::from(e as u8)
    }
}

impl From<&Failure> for Exit {
    fn from(f: &Failure) -> Self {
        match f {
            Failure::Infeasible => Exit::Infeasible,
            Failure::Solver => Exit::Solver,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "iegs",
    version,
    about = "Integrated electricity-gas dispatch solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a case with one algorithm.
    Solve {
        #[arg(long)]
        case: PathBuf,
        #[arg(long, value_enum, default_value_t = Algo::Ibd)]
        algo: Algo,
        #[command(flatten)]
        opts: SolverArgs,
    },
    /// Run several algorithms on the same case and tabulate time and cost.
    Compare {
        #[arg(long)]
        case: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "ibd,bd,pwl")]
        algos: Vec<Algo>,
        /// Timed runs per algorithm; the median is reported.
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Skip the untimed warm-up run.
        #[arg(long)]
        no_warmup: bool,
        /// Run the algorithms concurrently; times are then not comparable.
        #[arg(long)]
        parallel: bool,
        #[command(flatten)]
        opts: SolverArgs,
    },
    /// Write a synthetic case.
    Gencase {
        /// Number of pipelines.
        pipelines: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Single-period chain case small enough for exhaustive search.
        #[arg(long)]
        tiny: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Flow-equation mismatch tolerance.
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Segments per pipeline flow-square encoding (monolithic model).
    #[arg(long, default_value_t = 56)]
    segments: usize,
    /// Segments of the gas-unit fuel curve.
    #[arg(long = "segments-eq7", default_value_t = 10)]
    segments_fuel: usize,
    /// Threads for the per-period feasibility checks.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Relative MIP gap; each algorithm's default when absent.
    #[arg(long)]
    mip_gap: Option<f64>,
    /// Branch-and-bound node limit; each algorithm's default when absent.
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl SolverArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            eps_feas: self.eps,
            max_iter: self.max_iter,
            segments: self.segments,
            fuel_segments: self.segments_fuel,
            workers: self.workers,
            mip_gap: self.mip_gap,
            node_limit: self.node_limit,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve { case, algo, opts } => cmd_solve(&case, algo, &opts),
        Command::Compare {
            case,
            algos,
            repeats,
            no_warmup,
            parallel,
            opts,
        } => {
            let timing = Timing {
                repeats,
                warmup: !no_warmup,
                parallel,
            };
            cmd_compare(&case, &algos, timing, &opts)
        }
        Command::Gencase {
            pipelines,
            seed,
            tiny,
            out,
        } => cmd_gencase(pipelines, seed, tiny, &out),
    };
    code.into()
}

fn fail(code: Exit, msg: impl std::fmt::Display) -> Exit {
    eprintln!("error: {msg}");
    code
}

/// Reads the case and checks the configuration; nothing is written yet.
fn load(path: &Path, cfg: &RunConfig) -> Result<DispatchCase, Exit> {
    cfg.validate().map_err(|m| fail(Exit::Input, m))?;
    let raw = fs::read(path).map_err(|e| fail(Exit::Input, format!("{}: {e}", path.display())))?;
    parse_case(&raw).map_err(|e| fail(Exit::Input, format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Exit> {
    write_atomic(path, bytes).map_err(|e| fail(Exit::Output, format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec_pretty(v).expect("artifacts serialise")
}

fn cmd_solve(path: &Path, algo: Algo, opts: &SolverArgs) -> Exit {
    let cfg = opts.config();
    let case = match load(path, &cfg) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let report = match run(&case, algo, &cfg) {
        Ok(r) => r,
        Err(e) => return fail((&e.kind).into(), e.message),
    };
    let text = summary(&case, &report);
    let written = fs::create_dir_all(&opts.out)
        .map_err(|e| fail(Exit::Output, format!("{}: {e}", opts.out.display())))
        .and_then(|_| {
            write(
                &opts.out.join("solution.json"),
                &to_json(&SolutionFile::new(&case, &report)),
            )
        })
        .and_then(|_| {
            write(
                &opts.out.join("convergence.csv"),
                report.log.to_csv().as_bytes(),
            )
        })
        .and_then(|_| write(&opts.out.join("summary.txt"), text.as_bytes()));
    if let Err(code) = written {
        return code;
    }
    print!("{text}");
    if report.converged {
        Exit::Ok
    } else {
        warn!("{algo} stopped without converging ({})", report.status);
        Exit::NotConverged
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
struct Timing {
    repeats: usize,
    warmup: bool,
    parallel: bool,
}

/// One row of the comparison.
#[derive(Clone, Debug, Serialize)]
struct CompareRow {
    algo: Algo,
    time_s: Option<f64>,
    objective: Option<f64>,
    iterations: Option<usize>,
    converged: bool,
    n_binaries: Option<usize>,
    n_continuous: Option<usize>,
    status: String,
    error: Option<String>,
}

#[derive(Serialize)]
struct CompareReport<'a> {
    schema_version: u32,
    case: &'a str,
    timing: Timing,
    /// False when runs overlapped in time.
    times_comparable: bool,
    config: RunConfig,
    rows: Vec<CompareRow>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Warm-up (optional) plus `repeats` timed runs; the last run's results with
/// the median time.
fn timed(
    case: &DispatchCase,
    algo: Algo,
    cfg: &RunConfig,
    t: Timing,
) -> (CompareRow, Option<RunReport>) {
    let mut times = Vec::new();
    let mut last = None;
    let total = t.repeats + usize::from(t.warmup);
    for i in 0..total {
        let started = Instant::now();
        match run(case, algo, cfg) {
            Ok(r) => {
                info!("{algo}: run {} of {total} took {:.3} s", i + 1, r.wall_s);
                if i >= usize::from(t.warmup) {
                    times.push(r.wall_s);
                }
                last = Some(r);
            }
            Err(e) => {
                let row = CompareRow {
                    algo,
                    time_s: Some(started.elapsed().as_secs_f64()),
                    objective: None,
                    iterations: None,
                    converged: false,
                    n_binaries: None,
                    n_continuous: None,
                    status: format!("{:?}", e.kind).to_lowercase(),
                    error: Some(e.message),
                };
                return (row, None);
            }
        }
    }
    let r = last.expect("at least one run");
    let row = CompareRow {
        algo,
        time_s: Some(median(times)),
        objective: Some(r.schedule.objective),
        iterations: Some(r.iterations),
        converged: r.converged,
        n_binaries: Some(r.n_binaries),
        n_continuous: Some(r.n_continuous),
        status: r.status.clone(),
        error: None,
    };
    (row, Some(r))
}

fn cmd_compare(path: &Path, algos: &[Algo], timing: Timing, opts: &SolverArgs) -> Exit {
    if algos
        .iter()
        .enumerate()
        .any(|(i, a)| algos[..i].contains(a))
        || algos.len() < 2
    {
        return fail(
            Exit::Input,
            "compare needs at least two distinct algorithms",
        );
    }
    if timing.repeats == 0 {
        return fail(Exit::Input, "--repeats must be at least 1");
    }
    let cfg = opts.config();
    let case = match load(path, &cfg) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let results: Vec<(CompareRow, Option<RunReport>)> = if timing.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = algos
                .iter()
                .map(|&a| {
                    let (case, cfg) = (&case, &cfg);
                    s.spawn(move || timed(case, a, cfg, timing))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("run thread"))
                .collect()
        })
    } else {
        algos
            .iter()
            .map(|&a| timed(&case, a, &cfg, timing))
            .collect()
    };

    if let Err(code) = fs::create_dir_all(&opts.out)
        .map_err(|e| fail(Exit::Output, format!("{}: {e}", opts.out.display())))
    {
        return code;
    }
    let mut csv = csv::Writer::from_writer(Vec::new());
    let header = [
        "algo",
        "time_s",
        "objective",
        "iterations",
        "converged",
        "n_binaries",
        "n_continuous",
    ];
    csv.write_record(header).expect("in-memory csv");
    let opt = |v: Option<String>| v.unwrap_or_default();
    for (row, report) in &results {
        csv.write_record([
            row.algo.to_string(),
            opt(row.time_s.map(|t| format!("{t:.6}"))),
            opt(row.objective.map(|o| format!("{o:.6}"))),
            opt(row.iterations.map(|i| i.to_string())),
            row.converged.to_string(),
            opt(row.n_binaries.map(|n| n.to_string())),
            opt(row.n_continuous.map(|n| n.to_string())),
        ])
        .expect("in-memory csv");
        if let Some(r) = report {
            let name = format!("convergence_{}.csv", row.algo);
            if let Err(code) = write(&opts.out.join(name), r.log.to_csv().as_bytes()) {
                return code;
            }
        }
    }
    let csv = csv.into_inner().expect("in-memory csv");
    let rows: Vec<CompareRow> = results.iter().map(|(r, _)| r.clone()).collect();
    let report = CompareReport {
        schema_version: SCHEMA_VERSION,
        case: &case.meta.name,
        timing,
        times_comparable: !timing.parallel,
        config: cfg.clone(),
        rows,
    };
    if let Err(code) = write(&opts.out.join("compare.csv"), &csv)
        .and_then(|_| write(&opts.out.join("compare.json"), &to_json(&report)))
    {
        return code;
    }

    println!(
        "{:<5} {:>10} {:>18} {:>6} {:>9}",
        "algo", "time_s", "objective", "iters", "converged"
    );
    for r in &report.rows {
        println!(
            "{:<5} {:>10} {:>18} {:>6} {:>9}",
            r.algo.to_string(),
            r.time_s.map(|t| format!("{t:.3}")).unwrap_or_default(),
            r.objective
                .map(|o| format!("{o:.4}"))
                .unwrap_or_else(|| "-".into()),
            r.iterations
                .map(|i| i.to_string())
                .unwrap_or_else(|| "-".into()),
            r.converged
        );
        if let Some(e) = &r.error {
            println!("      {e}");
        }
    }
    if report.rows.iter().all(|r| r.converged) {
        Exit::Ok
    } else {
        Exit::NotConverged
    }
}

fn cmd_gencase(pipelines: usize, seed: u64, tiny: bool, out: &Path) -> Exit {
    if pipelines == 0 {
        return fail(Exit::Input, "a case needs at least one pipeline");
    }
    if tiny && pipelines > 2 {
        return fail(Exit::Input, "tiny cases have one or two pipelines");
    }
    let case = if tiny {
        generate_tiny_case(pipelines, seed)
    } else {
        generate_case(pipelines, seed)
    };
    let mut text = case.to_json();
    text.push('\n');
    match write(out, text.as_bytes()) {
        Ok(()) => Exit::Ok,
        Err(code) => code,
    }
}
