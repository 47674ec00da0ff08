use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use ma_ot::density::{sample_source, DensityFn, Mask, ScalarField};
use ma_ot::experiments::{self, build_problem, Experiment, InitStrategy, Setup, CURVED_SAMPLES};
use ma_ot::geometry::build_target;
use ma_ot::solver::{Method, SolverConfig};
use ma_ot::{Grid2D, Point, TargetShape};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub experiment: Option<ExperimentConfig>,
    pub grid: Option<GridConfig>,
    pub source: Option<SourceConfig>,
    pub target: Option<TargetConfig>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Experiment,
    pub n: usize,
    pub n_dirs: Option<usize>,
    /// Number of Dirac masses for the Pogorelov experiment.
    #[serde(default = "default_diracs")]
    pub n_diracs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_diracs() -> usize {
    3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub bounds: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub density: DensitySpec,
    #[serde(default)]
    pub support: SupportSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub shape: ShapeSpec,
    #[serde(default = "unit_density")]
    pub density: DensitySpec,
    pub n_dirs: usize,
    /// Lower bound of the extended target density.
    pub floor: Option<f64>,
}

fn unit_density() -> DensitySpec {
    DensitySpec::Constant { value: 1.0 }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySpec {
    Constant {
        value: f64,
    },
    Gaussian {
        center: Point,
        sigma: f64,
        base: f64,
    },
    SquareExample,
    /// Equal point masses placed on the nearest grid nodes.
    DiracList {
        points: Vec<Point>,
    },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SupportSpec {
    #[default]
    All,
    Square {
        lo: f64,
        hi: f64,
    },
    Disc {
        center: Point,
        radius: f64,
    },
    HalfDiscPair {
        gap_left: f64,
        gap_right: f64,
        radius: f64,
    },
    Ellipse {
        m: [[f64; 2]; 2],
    },
    CShape {
        r_in: f64,
        r_out: f64,
        opening: f64,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeSpec {
    Square {
        lo: f64,
        hi: f64,
    },
    Disc {
        center: Point,
        radius: f64,
    },
    Ellipse {
        m: [[f64; 2]; 2],
    },
    Polygon {
        vertices: Vec<Point>,
    },
    /// Text file with one `y1 y2` pair per line.
    Points {
        file: PathBuf,
    },
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub method: Method,
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub alpha_min: f64,
    pub init: InitStrategy,
    pub delta: Option<f64>,
    pub eps: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            method: d.method,
            tol: d.tol,
            max_iter: None,
            alpha_min: d.alpha_min,
            init: InitStrategy::default(),
            delta: None,
            eps: None,
        }
    }
}

impl SolverSection {
    pub fn solver_config(&self) -> SolverConfig {
        let base = match self.method {
            Method::Newton => SolverConfig::default(),
            Method::Euler => SolverConfig::euler(),
            Method::Projection => SolverConfig::projection(),
        };
        SolverConfig { tol: self.tol, max_iter: self.max_iter.unwrap_or(base.max_iter), alpha_min: self.alpha_min, ..base }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub potential: bool,
    pub map: bool,
    pub mesh: bool,
    pub mesh_stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), potential: true, map: true, mesh: true, mesh_stride: 8 }
    }
}

impl ProblemConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ProblemConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Point files are relative to the config file.
        if let Some(TargetConfig { shape: ShapeSpec::Points { file }, .. }) = &mut cfg.target {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    *file = dir.join(&*file);
                }
            }
        }
        Ok(cfg)
    }

    /// Build the problem, applying any scheme overrides.
    pub fn setup(&self) -> Result<Built> {
        let mut built = match &self.experiment {
            Some(e) => {
                ensure!(
                    self.grid.is_none() && self.source.is_none() && self.target.is_none(),
                    "[experiment] cannot be combined with [grid], [source] or [target]"
                );
                let n_dirs = e.n_dirs.unwrap_or(e.name.default_n_dirs());
                let setup = match e.name {
                    Experiment::Pogorelov => experiments::pogorelov_with_dirs(e.n, e.n_diracs, e.seed, n_dirs)?.setup,
                    other => experiments::setup(other, e.n, n_dirs)?,
                };
                Built { setup, n_dirs }
            }
            None => self.custom_setup()?,
        };
        let params = &mut built.setup.problem.params;
        if let Some(d) = self.solver.delta {
            params.delta = d;
        }
        if let Some(e) = self.solver.eps {
            params.eps = e;
        }
        params.validate(&built.setup.problem.grid)?;
        Ok(built)
    }

    fn custom_setup(&self) -> Result<Built> {
        let (Some(g), Some(s), Some(t)) = (&self.grid, &self.source, &self.target) else {
            bail!("config needs either [experiment] or all of [grid], [source] and [target]");
        };
        let grid = Grid2D::new(g.n, (g.bounds[0], g.bounds[1]))?;
        let mask = s.support.mask();
        let rho_x = match &s.density {
            DensitySpec::DiracList { points } => dirac_field(&grid, points, &mask)?,
            other => {
                let f = other.density_fn()?;
                sample_source(|x| f.eval(x), |x| mask.contains(x), &grid)?
            }
        };
        let target = t.shape.build(t.n_dirs)?;
        let rho_y = t.density.density_fn().context("target.density")?;
        let problem = build_problem(grid, rho_x, rho_y, target, t.floor)?;
        Ok(Built { setup: Setup { experiment: None, problem, exact: None }, n_dirs: t.n_dirs })
    }
}

pub struct Built {
    pub setup: Setup,
    pub n_dirs: usize,
}

impl DensitySpec {
    fn density_fn(&self) -> Result<DensityFn> {
        Ok(match self {
            DensitySpec::Constant { value } => {
                ensure!(*value > 0.0 && value.is_finite(), "constant density must be positive, got {value}");
                DensityFn::Constant(*value)
            }
            DensitySpec::Gaussian { center, sigma, base } => {
                ensure!(*sigma > 0.0, "gaussian sigma must be positive, got {sigma}");
                DensityFn::Gaussian { center: *center, sigma: *sigma, base: *base }
            }
            DensitySpec::SquareExample => DensityFn::SquareExample,
            DensitySpec::DiracList { .. } => bail!("dirac-list is only available as a source density"),
        })
    }
}

fn dirac_field(grid: &Grid2D, points: &[Point], mask: &Mask) -> Result<ScalarField> {
    ensure!(!points.is_empty(), "dirac-list needs at least one point");
    let mut values = vec![0.0; grid.len()];
    let w = 1.0 / (points.len() as f64 * grid.dx() * grid.dx());
    for p in points {
        ensure!(mask.contains(*p), "Dirac mass at {p:?} lies outside the source support");
        let (i, j, fx, fy) = grid.locate(*p);
        let i = (i + (fx >= 0.5) as usize).min(grid.n() - 1);
        let j = (j + (fy >= 0.5) as usize).min(grid.n() - 1);
        values[grid.flat_index(i, j)] += w;
    }
    Ok(ScalarField::new(*grid, values)?)
}

impl SupportSpec {
    fn mask(&self) -> Mask {
        match *self {
            SupportSpec::All => Mask::All,
            SupportSpec::Square { lo, hi } => Mask::Square { lo, hi },
            SupportSpec::Disc { center, radius } => Mask::Disc { center, radius },
            SupportSpec::HalfDiscPair { gap_left, gap_right, radius } => Mask::HalfDiscPair { gap_left, gap_right, radius },
            SupportSpec::Ellipse { m } => Mask::Ellipse { m },
            SupportSpec::CShape { r_in, r_out, opening } => Mask::CShape { r_in, r_out, opening },
        }
    }
}

impl ShapeSpec {
    fn build(&self, n_dirs: usize) -> Result<TargetShape> {
        Ok(match self {
            ShapeSpec::Square { lo, hi } => TargetShape::square(*lo, *hi, n_dirs)?,
            ShapeSpec::Disc { center, radius } => TargetShape::disc(*center, *radius, CURVED_SAMPLES, n_dirs)?,
            ShapeSpec::Ellipse { m } => TargetShape::ellipse(*m, CURVED_SAMPLES, n_dirs)?,
            ShapeSpec::Polygon { vertices } => build_target(vertices, n_dirs)?.ordered(),
            ShapeSpec::Points { file } => build_target(&read_points(file)?, n_dirs)?.ordered(),
        })
    }
}

/// Parse a point-cloud file: one `y1 y2` pair per line, blank lines and `#` comments ignored.
pub fn read_points(path: &Path) -> Result<Vec<Point>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("{}:{}: expected two numbers", path.display(), no + 1))?;
        ensure!(nums.len() == 2, "{}:{}: expected two numbers, found {}", path.display(), no + 1, nums.len());
        out.push([nums[0], nums[1]]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ProblemConfig> {
        Ok(toml::from_str(text)?)
    }

    #[test]
    fn points_accept_commas_comments_and_blank_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.txt");
        std::fs::write(&path, "# header\n0 1\n\n2.5, -3 # trailing\n  4\t5\n").unwrap();
        assert_eq!(read_points(&path).unwrap(), vec![[0.0, 1.0], [2.5, -3.0], [4.0, 5.0]]);
        std::fs::write(&path, "0 1\n1 2 3\n").unwrap();
        let err = format!("{:#}", read_points(&path).unwrap_err());
        assert!(err.contains(":2:"), "{err}");
        std::fs::write(&path, "0 x\n").unwrap();
        assert!(read_points(&path).is_err());
    }

    #[test]
    fn dirac_masses_land_on_nearest_nodes() {
        let g = Grid2D::new(5, (0.0, 1.0)).unwrap();
        let field = dirac_field(&g, &[[0.26, 0.49], [0.9, 0.1]], &Mask::All).unwrap();
        let w = 1.0 / (2.0 * 0.25 * 0.25);
        assert_eq!(field.values()[g.flat_index(1, 2)], w);
        assert_eq!(field.values()[g.flat_index(4, 0)], w);
        assert_eq!(field.values().iter().filter(|&&v| v > 0.0).count(), 2);
        assert!(dirac_field(&g, &[[0.5, 0.5]], &Mask::Square { lo: 0.0, hi: 0.2 }).is_err());
        assert!(dirac_field(&g, &[], &Mask::All).is_err());
    }

    #[test]
    fn experiment_and_custom_sections_do_not_mix() {
        let cfg = parse("[experiment]\nname = \"square\"\nn = 17\n[grid]\nn = 17\nbounds = [0.0, 1.0]\n").unwrap();
        let err = cfg.setup().err().expect("mixed sections rejected").to_string();
        assert!(err.contains("cannot be combined"), "{err}");
    }

    #[test]
    fn scheme_overrides_are_applied() {
        let cfg = parse("[experiment]\nname = \"square\"\nn = 17\n[solver]\ndelta = 0.01\neps = 2.0\n").unwrap();
        let built = cfg.setup().unwrap();
        assert_eq!(built.setup.problem.params.delta, 0.01);
        assert_eq!(built.setup.problem.params.eps, 2.0);
        assert_eq!(built.n_dirs, Experiment::Square.default_n_dirs());
    }

    #[test]
    fn solver_section_picks_method_defaults() {
        let cfg = parse("[solver]\nmethod = \"euler\"\n").unwrap();
        let s = cfg.solver.solver_config();
        assert_eq!(s.method, Method::Euler);
        assert_eq!(s.max_iter, SolverConfig::euler().max_iter);
        let cfg = parse("[solver]\nmethod = \"newton\"\nmax_iter = 7\n").unwrap();
        assert_eq!(cfg.solver.solver_config().max_iter, 7);
    }

    #[test]
    fn dirac_target_density_is_rejected() {
        let spec = DensitySpec::DiracList { points: vec![[0.0, 0.0]] };
        assert!(spec.density_fn().is_err());
        assert!(DensitySpec::Constant { value: 0.0 }.density_fn().is_err());
    }
}
