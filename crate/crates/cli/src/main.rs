//! Command-line front end for the Monge-Ampere transport solver.

mod config;
mod output;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ma_ot::experiments::{self, Experiment, InitStrategy};
use ma_ot::solver::SolverConfig;

use config::ProblemConfig;
use output::{write, write_json, Report, Timing};

/// Environment variable holding the number of assembly threads.
const THREADS_VAR: &str = "MA_OT_THREADS";

#[derive(Parser)]
#[command(name = "ma-ot", about = "Optimal transport maps from the Monge-Ampere equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described by a TOML file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named experiment over several grid sizes and tabulate errors.
    Study {
        #[arg(long)]
        experiment: String,
        #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
        sizes: Vec<usize>,
        #[arg(long)]
        n_dirs: Option<usize>,
        #[arg(long, default_value = "auto")]
        init: String,
        /// Dirac masses for the Pogorelov experiment.
        #[arg(long, default_value_t = 3)]
        n_diracs: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the version.
    Version,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { config, out } => run_solve(config, out),
        Command::Study { experiment, sizes, n_dirs, init, n_diracs, out } => run_study(&experiment, &sizes, n_dirs, &init, n_diracs, out),
        Command::Version => {
            println!("ma-ot {}", env!("CARGO_PKG_VERSION"));
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_VAR} must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Returns `Ok(false)` when the solver fails after the configuration was accepted.
fn run_solve(path: PathBuf, out: Option<PathBuf>) -> Result<bool> {
    let cfg = ProblemConfig::from_path(&path)?;
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    let start = Instant::now();
    let built = cfg.setup()?;
    let setup_seconds = start.elapsed().as_secs_f64();
    let solver = cfg.solver.solver_config();
    let init = cfg.solver.init;
    let outcome = match built.setup.solve_with(&solver, init) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("solver failed: {e}");
            return Ok(false);
        }
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let grid = &built.setup.problem.grid;
    if cfg.output.potential {
        write(&dir, "u.csv", &output::potential_csv(grid, &outcome.u))?;
    }
    if cfg.output.map {
        write(&dir, "map.csv", &output::map_csv(&outcome.map))?;
    }
    if cfg.output.mesh {
        write(&dir, "mesh.csv", &output::mesh_csv(&outcome.map, cfg.output.mesh_stride))?;
    }
    let filter = built.setup.filter_fractions(&outcome.u)?;
    write_json(&dir, "report.json", &Report::new(&built.setup, &outcome, init, built.n_dirs, filter))?;
    write_json(&dir, "timing.json", &Timing::new(setup_seconds, &outcome.report, outcome.warm_start.as_ref()))?;
    match outcome.errors {
        Some((max, rms)) => println!("converged in {} iterations; max error {max:.4e}, rms {rms:.4e}", outcome.report.iterations),
        None => println!("converged in {} iterations", outcome.report.iterations),
    }
    Ok(true)
}

struct Row {
    n: usize,
    iterations: Option<usize>,
    error: Option<f64>,
    status: String,
    seconds: f64,
}

/// Error measure reported by `study`: the max map error when the exact map
/// is known, the composed-map distance for `inverse`, and the largest cell
/// area error in percent for `pogorelov`.
fn study_point(
    exp: Experiment,
    n: usize,
    n_dirs: usize,
    init: InitStrategy,
    n_diracs: usize,
    cfg: &SolverConfig,
) -> ma_ot::Result<(usize, Option<f64>)> {
    match exp {
        Experiment::Inverse => {
            let r = experiments::run_inverse(n, n_dirs, cfg, init)?;
            Ok((r.forward.report.iterations, Some(r.distance)))
        }
        Experiment::Pogorelov => {
            let p = experiments::pogorelov_with_dirs(n, n_diracs, 0, n_dirs)?;
            let r = p.run_with(cfg, init)?;
            Ok((r.outcome.report.iterations, Some(r.cells.linf_error)))
        }
        other => {
            let o = experiments::setup(other, n, n_dirs)?.solve_with(cfg, init)?;
            Ok((o.report.iterations, o.errors.map(|e| e.0)))
        }
    }
}

fn run_study(name: &str, sizes: &[usize], n_dirs: Option<usize>, init: &str, n_diracs: usize, out: PathBuf) -> Result<bool> {
    let exp = Experiment::parse(name)?;
    let init = InitStrategy::parse(init)?;
    anyhow::ensure!(!sizes.is_empty(), "--sizes needs at least one grid size");
    let n_dirs = n_dirs.unwrap_or(exp.default_n_dirs());
    let cfg = SolverConfig::default();
    let mut rows = Vec::new();
    for &n in sizes {
        let start = Instant::now();
        let (iterations, error, status) = match study_point(exp, n, n_dirs, init, n_diracs, &cfg) {
            Ok((it, e)) => (Some(it), e, "converged".to_string()),
            Err(e) => (None, None, e.to_string()),
        };
        let seconds = start.elapsed().as_secs_f64();
        eprintln!("n = {n}: {status}");
        rows.push(Row { n, iterations, error, status, seconds });
    }
    let table = study_table(&rows, n_dirs);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write(&out, "table.csv", &table)?;
    print!("{table}");
    let timing: Vec<_> = rows.iter().map(|r| serde_json::json!({ "n": r.n, "seconds": r.seconds })).collect();
    write_json(&out, "timing.json", &timing)?;
    Ok(rows.iter().all(|r| r.iterations.is_some()))
}

/// Observed order between consecutive rows: `log2(e_prev / e) / log2(n / n_prev)`.
fn study_table(rows: &[Row], n_dirs: usize) -> String {
    let mut s = String::from("n,n_dirs,iterations,error,order,status\n");
    let mut prev: Option<(usize, f64)> = None;
    for r in rows {
        let order = match (prev, r.error) {
            (Some((pn, pe)), Some(e)) if e > 0.0 && pe > 0.0 => format!("{:.3}", (pe / e).log2() / (r.n as f64 / pn as f64).log2()),
            _ => String::new(),
        };
        let it = r.iterations.map(|i| i.to_string()).unwrap_or_default();
        let err = r.error.map(|e| format!("{e:.6e}")).unwrap_or_default();
        writeln!(s, "{},{n_dirs},{it},{err},{order},\"{}\"", r.n, r.status.replace('"', "'")).unwrap();
        prev = r.error.map(|e| (r.n, e));
    }
    s
}
