//! Sweep execution.

use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::results::{ResultRow, ResultWriter};
use crate::efficiency::full_report;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Rows ordered by sweep index.
    pub rows: Vec<ResultRow>,
}

impl RunSummary {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged && r.error.is_empty())
    }
}

/// Evaluates one sweep point. Solver failures end up in the row, not in the result.
pub fn run_point(index: usize, cfg: &ExperimentConfig) -> ResultRow {
    let mut row = ResultRow::from_config(index, cfg);
    let start = Instant::now();
    let outcome = cfg
        .build_problem()
        .and_then(|p| full_report(&p, &cfg.report_params()));
    match outcome {
        Ok(report) => row.fill(&report),
        Err(e) => {
            log::error!("sweep point {index} failed: {e}");
            row.error = e.to_string();
        }
    }
    row.wall_time = start.elapsed().as_secs_f64();
    row
}

/// Runs every sweep point (in parallel) and appends each finished row to
/// `out`, which is recreated first.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    config.validate()?;
    let points = config.expand();
    // surface configuration problems before any work starts
    for p in &points {
        p.build_problem()?;
    }
    let writer = Mutex::new(ResultWriter::create(out)?);
    let rows: Vec<Result<ResultRow>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let row = run_point(i, p);
            writer.lock().expect("writer lock").write(&row)?;
            log::info!("point {i}: gap {:e}, certificate {:e}", row.gap, row.certificate);
            Ok(row)
        })
        .collect();
    let mut rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.index);
    Ok(RunSummary { rows })
}
