//! Ready-made problems with known solutions or diagnostics.

use std::f64::consts::PI;
use std::time::Duration;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::{OtProblem, PointInfo, SystemBuilder};
use crate::density::{estimate_lipschitz, extend_target, normalize_masses, sample_source, DensityFn, DensityPair, Mask, ScalarField};
use crate::error::{Error, Result};
use crate::geometry::TargetShape;
use crate::grid::{Grid2D, Point};
use crate::scheme::{FilterRegion, SchemeParams};
use crate::solver::{initialize, initialize_from_moments, solve, SolveReport, SolverConfig};
use crate::validation::{
    exact_ellipse_map, exact_split_map, exact_square_map, inverse_consistency, map_error, pogorelov_cells, pogorelov_gradient_defect,
    PogorelovResult, TransportMap,
};

pub const ELLIPSE_MX: [[f64; 2]; 2] = [[0.8, 0.0], [0.0, 0.4]];
pub const ELLIPSE_MY: [[f64; 2]; 2] = [[0.6, 0.2], [0.2, 0.8]];
/// Boundary samples used for curved targets.
pub const CURVED_SAMPLES: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Square,
    Ellipse,
    Split,
    Inverse,
    Pogorelov,
    Cshape,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Square => "square",
            Experiment::Ellipse => "ellipse",
            Experiment::Split => "split",
            Experiment::Inverse => "inverse",
            Experiment::Pogorelov => "pogorelov",
            Experiment::Cshape => "cshape",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "square" => Experiment::Square,
            "ellipse" => Experiment::Ellipse,
            "split" => Experiment::Split,
            "inverse" => Experiment::Inverse,
            "pogorelov" => Experiment::Pogorelov,
            "cshape" => Experiment::Cshape,
            other => return Err(Error::Config(format!("unknown experiment '{other}'"))),
        })
    }

    /// Number of target directions used when none is given.
    pub fn default_n_dirs(self) -> usize {
        match self {
            Experiment::Square | Experiment::Inverse => 16,
            Experiment::Cshape => 64,
            Experiment::Ellipse | Experiment::Split | Experiment::Pogorelov => 256,
        }
    }
}

/// Largest target density over a probe lattice of the target bounding box.
fn max_target_density(rho: &DensityFn, shape: &TargetShape) -> f64 {
    if let DensityFn::Constant(c) = rho {
        return *c;
    }
    let (lo, hi) = shape.bounding_box();
    let m = 129;
    let mut best: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            let y = [lo[0] + (hi[0] - lo[0]) * a as f64 / (m - 1) as f64, lo[1] + (hi[1] - lo[1]) * b as f64 / (m - 1) as f64];
            best = best.max(rho.eval(y));
        }
    }
    best
}

/// Extend the target density, normalize masses, estimate `K` and build the
/// problem with default scheme parameters. `floor` defaults to 1% of the
/// largest target density.
pub fn build_problem(grid: Grid2D, rho_x: ScalarField, rho_y: DensityFn, target: TargetShape, floor: Option<f64>) -> Result<OtProblem> {
    let floor = floor.unwrap_or_else(|| 1e-2 * max_target_density(&rho_y, &target));
    let extended = extend_target(rho_y, &target, floor)?;
    let mut pair = normalize_masses(DensityPair::new(rho_x, extended))?;
    pair.lipschitz_k = estimate_lipschitz(&pair, 1e-3 * target.diameter());
    let params = SchemeParams::for_grid(&grid);
    OtProblem::new(grid, pair, target, params)
}

/// How the Newton iterate is started.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitStrategy {
    /// Quadratic fitted to the bounding boxes of the source support and target.
    Quadratic,
    /// Quadratic whose gradient is the optimal map between Gaussian fits of the densities.
    Moments,
    /// Solve the monotone scheme alone from [`InitStrategy::Quadratic`], then the filtered scheme from there.
    Monotone,
    /// Try `Quadratic`, `Moments` and `Monotone` in turn until Newton converges.
    #[default]
    Auto,
}

impl InitStrategy {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "quadratic" => InitStrategy::Quadratic,
            "moments" => InitStrategy::Moments,
            "monotone" => InitStrategy::Monotone,
            "auto" => InitStrategy::Auto,
            other => return Err(Error::Config(format!("unknown init strategy '{other}'"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            InitStrategy::Quadratic => "quadratic",
            InitStrategy::Moments => "moments",
            InitStrategy::Monotone => "monotone",
            InitStrategy::Auto => "auto",
        }
    }
}

/// Failures after which another initialization may succeed.
fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::Stagnation { .. }
            | Error::NotConverged { .. }
            | Error::LinearSolve { .. }
            | Error::DegenerateProblem(_)
            | Error::DegenerateTarget(_)
    )
}

/// Filter scale small enough that the filtered scheme is the monotone one.
const MONOTONE_EPS: f64 = 1e-12;

/// A problem together with its exact map, when one is known.
pub struct Setup {
    /// `None` for problems built from an arbitrary configuration.
    pub experiment: Option<Experiment>,
    pub problem: OtProblem,
    pub exact: Option<fn(Point) -> Point>,
}

fn ellipse_exact(x: Point) -> Point {
    exact_ellipse_map(ELLIPSE_MX, ELLIPSE_MY, x)
}

pub fn square(n: usize, n_dirs: usize) -> Result<Setup> {
    let grid = Grid2D::new(n, (-0.5, 0.5))?;
    let rho_x = sample_source(|x| DensityFn::SquareExample.eval(x), |_| true, &grid)?;
    let target = TargetShape::square(-0.5, 0.5, n_dirs)?;
    let problem = build_problem(grid, rho_x, DensityFn::Constant(1.0), target, None)?;
    Ok(Setup { experiment: Some(Experiment::Square), problem, exact: Some(exact_square_map) })
}

pub fn ellipse(n: usize, n_dirs: usize) -> Result<Setup> {
    let grid = Grid2D::new(n, (-1.0, 1.0))?;
    let mask = Mask::Ellipse { m: ELLIPSE_MX };
    let rho_x = sample_source(|_| 1.0, |x| mask.contains(x), &grid)?;
    let target = TargetShape::ellipse(ELLIPSE_MY, CURVED_SAMPLES, n_dirs)?;
    let problem = build_problem(grid, rho_x, DensityFn::Constant(1.0), target, None)?;
    Ok(Setup { experiment: Some(Experiment::Ellipse), problem, exact: Some(ellipse_exact) })
}

pub fn split(n: usize, n_dirs: usize) -> Result<Setup> {
    let grid = Grid2D::new(n, (-1.1, 1.1))?;
    let mask = Mask::HalfDiscPair { gap_left: 0.2, gap_right: 0.1, radius: 0.85 };
    let rho_x = sample_source(|_| 1.0, |x| mask.contains(x), &grid)?;
    let target = TargetShape::disc([0.0, 0.0], 0.85, CURVED_SAMPLES, n_dirs)?;
    let problem = build_problem(grid, rho_x, DensityFn::Constant(1.0), target, None)?;
    Ok(Setup { experiment: Some(Experiment::Split), problem, exact: Some(exact_split_map) })
}

const GAUSS_SIGMA: f64 = 0.2;
const GAUSS_BASE: f64 = 2.0;

fn corner_gaussians() -> DensityFn {
    DensityFn::QuadrantGaussians { sigma: GAUSS_SIGMA, base: GAUSS_BASE }
}

fn center_gaussian() -> DensityFn {
    DensityFn::Gaussian { center: [0.0, 0.0], sigma: GAUSS_SIGMA, base: GAUSS_BASE }
}

/// Corner Gaussians onto a central Gaussian on `[-1, 1]^2`; `reverse` swaps the roles.
pub fn inverse(n: usize, n_dirs: usize, reverse: bool) -> Result<Setup> {
    let grid = Grid2D::new(n, (-1.0, 1.0))?;
    let (src, dst) = if reverse { (center_gaussian(), corner_gaussians()) } else { (corner_gaussians(), center_gaussian()) };
    let rho_x = sample_source(|x| src.eval(x), |_| true, &grid)?;
    let target = TargetShape::square(-1.0, 1.0, n_dirs)?;
    let problem = build_problem(grid, rho_x, dst, target, None)?;
    Ok(Setup { experiment: Some(Experiment::Inverse), problem, exact: None })
}

pub fn cshape(n: usize, n_dirs: usize) -> Result<Setup> {
    let grid = Grid2D::new(n, (-1.0, 1.0))?;
    let mask = Mask::CShape { r_in: 0.4, r_out: 0.9, opening: PI / 4.0 };
    let rho_x = sample_source(|_| 1.0, |x| mask.contains(x), &grid)?;
    let target = TargetShape::disc([0.0, 0.0], 1.0, CURVED_SAMPLES, n_dirs)?;
    let problem = build_problem(grid, rho_x, DensityFn::Constant(1.0), target, None)?;
    Ok(Setup { experiment: Some(Experiment::Cshape), problem, exact: None })
}

pub fn setup(experiment: Experiment, n: usize, n_dirs: usize) -> Result<Setup> {
    match experiment {
        Experiment::Square => square(n, n_dirs),
        Experiment::Ellipse => ellipse(n, n_dirs),
        Experiment::Split => split(n, n_dirs),
        Experiment::Inverse => inverse(n, n_dirs, false),
        Experiment::Cshape => cshape(n, n_dirs),
        Experiment::Pogorelov => Ok(pogorelov(n, 3, 0)?.setup),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterFractions {
    pub inner: f64,
    pub descending: f64,
    pub outer: f64,
}

/// Result of solving a [`Setup`].
pub struct Outcome {
    pub u: Vec<f64>,
    pub report: SolveReport,
    /// Report of the monotone warm-start solve, when one was run.
    pub warm_start: Option<SolveReport>,
    /// Initialization that produced the solution.
    pub init: InitStrategy,
    pub map: TransportMap,
    /// Max and RMS map error over the source support, when the exact map is known.
    pub errors: Option<(f64, f64)>,
}

impl Setup {
    /// Box-fitted quadratic.
    pub fn initial_iterate(&self) -> Result<Vec<f64>> {
        let p = &self.problem;
        Ok(initialize(&p.grid, &p.densities.rho_x, &p.target)?.sample(&p.grid))
    }

    /// Moment-matched quadratic.
    pub fn moment_iterate(&self) -> Result<Vec<f64>> {
        let p = &self.problem;
        Ok(initialize_from_moments(&p.densities.rho_x, &p.densities.rho_y)?.sample(&p.grid))
    }

    /// Grid points where the source density is positive.
    pub fn support_mask(&self) -> impl Fn(usize) -> bool + '_ {
        let rho = self.problem.densities.rho_x.values();
        move |k| rho[k] > 0.0
    }

    /// Solve with the default [`InitStrategy`].
    pub fn solve(&self, cfg: &SolverConfig) -> Result<Outcome> {
        self.solve_with(cfg, InitStrategy::default())
    }

    pub fn solve_with(&self, cfg: &SolverConfig, init: InitStrategy) -> Result<Outcome> {
        let (u, report, warm_start, used) = match init {
            InitStrategy::Auto => {
                let mut last = None;
                let mut found = None;
                for attempt in [InitStrategy::Quadratic, InitStrategy::Moments, InitStrategy::Monotone] {
                    match self.attempt(cfg, attempt) {
                        Ok((u, r, w)) => {
                            found = Some((u, r, w, attempt));
                            break;
                        }
                        Err(e) if recoverable(&e) => {
                            log::info!("{} start failed: {e}", attempt.name());
                            last = Some(e);
                        }
                        Err(e) => return Err(e),
                    }
                }
                match found {
                    Some(f) => f,
                    None => return Err(last.expect("at least one attempt")),
                }
            }
            other => {
                let (u, r, w) = self.attempt(cfg, other)?;
                (u, r, w, other)
            }
        };
        let map = TransportMap::from_potential(&u, &self.problem.grid);
        let errors = self.exact.map(|f| map_error(&map, f, self.support_mask()));
        Ok(Outcome { u, report, warm_start, init: used, map, errors })
    }

    /// Fractions of interior points in each filter region at `u`.
    pub fn filter_fractions(&self, u: &[f64]) -> Result<FilterFractions> {
        let sys = self.problem.assemble(u, false)?;
        let mut counts = [0usize; 3];
        for info in &sys.info {
            if let PointInfo::Interior { region, .. } = info {
                counts[*region as usize] += 1;
            }
        }
        let total = counts.iter().sum::<usize>().max(1) as f64;
        Ok(FilterFractions {
            inner: counts[FilterRegion::Inner as usize] as f64 / total,
            descending: counts[FilterRegion::Descending as usize] as f64 / total,
            outer: counts[FilterRegion::Outer as usize] as f64 / total,
        })
    }

    fn attempt(&self, cfg: &SolverConfig, init: InitStrategy) -> Result<(Vec<f64>, SolveReport, Option<SolveReport>)> {
        let direct = |u0| solve(cfg, &self.problem, u0).map(|(u, r)| (u, r, None));
        match init {
            InitStrategy::Quadratic => direct(self.initial_iterate()?),
            InitStrategy::Moments => direct(self.moment_iterate()?),
            InitStrategy::Monotone => self.solve_from_monotone(cfg),
            InitStrategy::Auto => unreachable!("auto is expanded by the caller"),
        }
    }

    fn solve_from_monotone(&self, cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport, Option<SolveReport>)> {
        let mut monotone = self.problem.clone();
        monotone.params.eps = MONOTONE_EPS;
        let (w, warm) = solve(cfg, &monotone, self.initial_iterate()?)?;
        let (u, report) = solve(cfg, &self.problem, w)?;
        Ok((u, report, Some(warm)))
    }
}

/// Solve the forward and reverse Gaussian problems and measure how far the
/// composed maps are from the identity.
pub struct InverseOutcome {
    pub forward: Outcome,
    pub backward: Outcome,
    pub distance: f64,
}

pub fn run_inverse(n: usize, n_dirs: usize, cfg: &SolverConfig, init: InitStrategy) -> Result<InverseOutcome> {
    let forward = inverse(n, n_dirs, false)?.solve_with(cfg, init)?;
    let backward = inverse(n, n_dirs, true)?.solve_with(cfg, init)?;
    let distance = inverse_consistency(&forward.map, &backward.map, |_| true);
    Ok(InverseOutcome { forward, backward, distance })
}

/// Swapped Pogorelov problem: Dirac masses on grid nodes as the source,
/// uniform unit disc as the target.
pub struct PogorelovSetup {
    pub setup: Setup,
    pub diracs: Vec<Point>,
    pub dirac_nodes: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Half-width of the box in which Dirac positions are drawn.
const DIRAC_SPREAD: f64 = 0.8;

pub fn pogorelov(n: usize, n_d: usize, seed: u64) -> Result<PogorelovSetup> {
    pogorelov_with_dirs(n, n_d, seed, Experiment::Pogorelov.default_n_dirs())
}

pub fn pogorelov_with_dirs(n: usize, n_d: usize, seed: u64, n_dirs: usize) -> Result<PogorelovSetup> {
    let grid = Grid2D::new(n, (-1.0, 1.0))?;
    let lo = ((1.0 - DIRAC_SPREAD) / grid.dx()).ceil() as usize;
    let hi = n - 1 - lo;
    if n_d == 0 || hi <= lo || (hi - lo + 1).pow(2) < n_d {
        return Err(Error::Config(format!("cannot place {n_d} Dirac masses on a grid with {n} points per side")));
    }
    let side = hi - lo + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<usize> = sample(&mut rng, side * side, n_d).into_vec();
    picks.sort_unstable();
    let dirac_nodes: Vec<usize> = picks.iter().map(|&s| grid.flat_index(lo + s % side, lo + s / side)).collect();
    let target = TargetShape::disc([0.0, 0.0], 1.0, CURVED_SAMPLES, n_dirs)?;
    let mass = target.area()?;
    let mut values = vec![0.0; grid.len()];
    for &k in &dirac_nodes {
        values[k] = mass / (n_d as f64 * grid.dx() * grid.dx());
    }
    let rho_x = ScalarField::new(grid, values)?;
    let problem = build_problem(grid, rho_x, DensityFn::Constant(1.0), target, None)?;
    let diracs = dirac_nodes.iter().map(|&k| grid.point_at(k)).collect();
    let weights = vec![PI / n_d as f64; n_d];
    Ok(PogorelovSetup { setup: Setup { experiment: Some(Experiment::Pogorelov), problem, exact: None }, diracs, dirac_nodes, weights })
}

pub struct PogorelovOutcome {
    pub outcome: Outcome,
    pub cells: PogorelovResult,
    /// Max deviation of reconstructed cell gradients from the Dirac positions.
    pub gradient_defect: f64,
    pub wall_time: Duration,
}

/// Lattice resolution used to measure cell areas.
pub const CELL_RESOLUTION: usize = 1024;

impl PogorelovSetup {
    /// Solve, read `v_j` off the potential at the Dirac nodes and measure the cells.
    pub fn run(&self, cfg: &SolverConfig) -> Result<PogorelovOutcome> {
        self.run_with(cfg, InitStrategy::default())
    }

    pub fn run_with(&self, cfg: &SolverConfig, init: InitStrategy) -> Result<PogorelovOutcome> {
        let outcome = self.setup.solve_with(cfg, init)?;
        let v: Vec<f64> = self.dirac_nodes.iter().map(|&k| outcome.u[k]).collect();
        let disc = |x: Point| x[0] * x[0] + x[1] * x[1] <= 1.0;
        let cells = pogorelov_cells(&v, &self.diracs, &self.weights, disc, (-1.0, 1.0), CELL_RESOLUTION);
        let gradient_defect = pogorelov_gradient_defect(&v, &self.diracs, disc, (-1.0, 1.0), 256);
        let wall_time = outcome.report.wall_time;
        Ok(PogorelovOutcome { outcome, cells, gradient_defect, wall_time })
    }
}
