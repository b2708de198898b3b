//! Configuration, sweeps, result persistence, fits and plot data.

pub mod config;
pub mod fit;
pub mod plot;
pub mod results;
pub mod run;

pub use config::ExperimentConfig;
pub use fit::{fit_scaling, Fit};
pub use plot::{emit_plotdata, read_series};
pub use results::{read_rows, ResultRow, ResultWriter};
pub use run::{run, run_point, RunSummary};
