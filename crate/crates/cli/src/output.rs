use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ma_ot::experiments::{FilterFractions, InitStrategy, Outcome, Setup};
use ma_ot::validation::mesh_polylines;
use ma_ot::{Grid2D, SolveReport, TransportMap};
use serde::Serialize;

/// Rows `i,j,x1,x2,u`.
pub fn potential_csv(grid: &Grid2D, u: &[f64]) -> String {
    let mut s = String::from("i,j,x1,x2,u\n");
    for (k, v) in u.iter().enumerate() {
        let (i, j) = grid.ij(k);
        let p = grid.point(i, j);
        writeln!(s, "{i},{j},{},{},{v}", p[0], p[1]).unwrap();
    }
    s
}

/// Rows `i,j,m1,m2`.
pub fn map_csv(map: &TransportMap) -> String {
    let mut s = String::from("i,j,m1,m2\n");
    for k in 0..map.grid.len() {
        let (i, j) = map.grid.ij(k);
        let m = map.at(k);
        writeln!(s, "{i},{j},{},{}", m[0], m[1]).unwrap();
    }
    s
}

/// Rows `polyline,x,y`: images of every `stride`-th grid line.
pub fn mesh_csv(map: &TransportMap, stride: usize) -> String {
    let mut s = String::from("polyline,x,y\n");
    for (id, line) in mesh_polylines(map, stride).iter().enumerate() {
        for p in line {
            writeln!(s, "{id},{},{}", p[0], p[1]).unwrap();
        }
    }
    s
}

#[derive(Serialize)]
pub struct Params {
    pub n: usize,
    pub n_dirs: usize,
    pub bounds: [f64; 2],
    pub delta: f64,
    pub eps: f64,
    pub dtheta: f64,
    pub x0: usize,
}

impl Params {
    pub fn of(setup: &Setup, n_dirs: usize) -> Self {
        let p = &setup.problem;
        let (lo, hi) = p.grid.bounds();
        Params {
            n: p.grid.n(),
            n_dirs,
            bounds: [lo, hi],
            delta: p.params.delta,
            eps: p.params.eps,
            dtheta: p.params.dtheta,
            x0: p.params.x0,
        }
    }
}

#[derive(Serialize)]
pub struct Errors {
    pub max_error: f64,
    pub rms_error: f64,
}

/// Contents of `report.json`. Holds no timings, so identical runs give
/// identical files.
#[derive(Serialize)]
pub struct Report<'a> {
    pub experiment: Option<&'a str>,
    pub init: InitStrategy,
    /// Initialization that produced the solution; differs from `init` only for `auto`.
    pub init_used: InitStrategy,
    pub converged: bool,
    pub iterations: usize,
    pub warm_start_iterations: Option<usize>,
    pub residual_history: &'a [f64],
    pub damping: &'a [f64],
    pub errors: Option<Errors>,
    pub filter: FilterFractions,
    pub params: Params,
}

impl<'a> Report<'a> {
    pub fn new(setup: &'a Setup, out: &'a Outcome, init: InitStrategy, n_dirs: usize, filter: FilterFractions) -> Self {
        Report {
            experiment: setup.experiment.map(|e| e.name()),
            init,
            init_used: out.init,
            converged: out.report.converged,
            iterations: out.report.iterations,
            warm_start_iterations: out.warm_start.as_ref().map(|r| r.iterations),
            residual_history: &out.report.residual_history,
            damping: &out.report.damping,
            errors: out.errors.map(|(max_error, rms_error)| Errors { max_error, rms_error }),
            filter,
            params: Params::of(setup, n_dirs),
        }
    }
}

#[derive(Serialize)]
pub struct Timing {
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub warm_start_seconds: Option<f64>,
}

impl Timing {
    pub fn new(setup_seconds: f64, report: &SolveReport, warm: Option<&SolveReport>) -> Self {
        Timing { setup_seconds, solve_seconds: report.wall_time.as_secs_f64(), warm_start_seconds: warm.map(|r| r.wall_time.as_secs_f64()) }
    }
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write(dir, name, &s)
}
