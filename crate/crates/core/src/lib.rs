//! Mean field game equilibria, global-planner optima and inefficiency
//! diagnostics on the periodic torus.

pub mod efficiency;
pub mod error;
pub mod grid;
pub mod harness;
pub mod mfg;
pub mod model;
pub mod planner;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{DensityPath, Grid, ScalarPath, VectorPath};
