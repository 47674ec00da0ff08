//! Numerical optimal transport in two dimensions.
//!
//! The transport potential solves a Monge-Ampere equation on a Cartesian
//! grid, with a transport boundary condition written as a Hamilton-Jacobi
//! equation on the grid boundary. The interior uses a filtered scheme that
//! blends a monotone wide-stencil discretization with a second-order one.
//!
//! ```no_run
//! use ma_ot::experiments;
//! use ma_ot::solver::SolverConfig;
//!
//! let setup = experiments::square(33, 16).unwrap();
//! let out = setup.solve(&SolverConfig::default()).unwrap();
//! println!("max map error {:e}", out.errors.unwrap().0);
//! ```

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod density;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod grid;
pub mod scheme;
pub mod solver;
pub mod stencil;
pub mod validation;

pub use boundary::{GlobalSystem, OtProblem, SystemBuilder};
pub use density::{DensityFn, DensityPair, Mask, ScalarField, TargetDensity};
pub use error::{Error, Result};
pub use geometry::TargetShape;
pub use grid::{Grid2D, Point, PointClass};
pub use scheme::SchemeParams;
pub use solver::{solve, Method, SolveReport, SolverConfig};
pub use validation::TransportMap;
