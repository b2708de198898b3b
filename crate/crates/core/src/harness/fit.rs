//! Power-law fits of one result column against another.

use super::results::ResultRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Number of rows that entered the fit.
    pub used: usize,
}

/// Least squares of `ln y` on `ln x` over rows with `y > 10 tol` (the row's
/// own fixed-point tolerance) and `x > 0`.
pub fn fit_scaling(rows: &[ResultRow], x_column: &str, y_column: &str) -> Result<Fit> {
    let mut pts = Vec::new();
    for r in rows {
        let x = r
            .get(x_column)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown column `{x_column}`")))?;
        let y = r
            .get(y_column)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown column `{y_column}`")))?;
        if x > 0.0 && x.is_finite() && y > 10.0 * r.tol && y.is_finite() {
            pts.push((x.ln(), y.ln()));
        }
    }
    fit_log_points(&pts)
}

/// Fit on points that are already in log coordinates.
pub fn fit_log_points(pts: &[(f64, f64)]) -> Result<Fit> {
    if pts.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} usable points, need 2", pts.len())));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= f64::EPSILON * k * mx.abs().max(1.0) {
        return Err(Error::DegenerateFit("x values coincide".into()));
    }
    if syy <= f64::EPSILON * k * my.abs().max(1.0) {
        return Err(Error::DegenerateFit("y is constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(Fit {
        slope,
        intercept,
        r2: 1.0 - ss_res / syy,
        used: pts.len(),
    })
}
