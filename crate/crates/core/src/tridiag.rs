//! Periodic (cyclic) tridiagonal systems.
//!
//! Row `i` reads `lower[i] * x[i-1] + diag[i] * x[i] + upper[i] * x[i+1] = rhs[i]`
//! with indices taken modulo `n`. Solved by the Thomas algorithm plus a
//! Sherman-Morrison correction for the two corner entries. No pivoting, so the
//! matrix should be diagonally dominant (all matrices built in this crate are
//! M-matrices).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicTridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl CyclicTridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n < 3 || lower.len() != n || upper.len() != n {
            return Err(Error::InvalidArgument(format!(
                "cyclic tridiagonal bands must share a length >= 3 (got {}, {}, {})",
                lower.len(),
                n,
                upper.len()
            )));
        }
        Ok(Self { lower, diag, upper })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn transpose(&self) -> Self {
        let n = self.len();
        let lower = (0..n).map(|i| self.upper[(i + n - 1) % n]).collect();
        let upper = (0..n).map(|i| self.lower[(i + 1) % n]).collect();
        Self {
            lower,
            diag: self.diag.clone(),
            upper,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                self.lower[i] * x[(i + n - 1) % n]
                    + self.diag[i] * x[i]
                    + self.upper[i] * x[(i + 1) % n]
            })
            .collect()
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if rhs.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                found: rhs.len(),
            });
        }
        // corner couplings: row 0 -> x[n-1], row n-1 -> x[0]
        let beta = self.lower[0];
        let alpha = self.upper[n - 1];
        let gamma = -self.diag[0];

        let mut b = self.diag.clone();
        b[0] -= gamma;
        b[n - 1] -= alpha * beta / gamma;

        let x = thomas(&self.lower, &b, &self.upper, rhs)?;
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = alpha;
        let z = thomas(&self.lower, &b, &self.upper, &u)?;

        let denom = 1.0 + z[0] + beta * z[n - 1] / gamma;
        if denom.abs() < f64::EPSILON || !denom.is_finite() {
            return Err(Error::LinearSolve(
                "singular Sherman-Morrison correction".into(),
            ));
        }
        let fact = (x[0] + beta * x[n - 1] / gamma) / denom;
        let out: Vec<f64> = x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("non-finite solution".into()));
        }
        Ok(out)
    }
}

/// Non-periodic tridiagonal solve; `a[0]` and `c[n-1]` are ignored.
fn thomas(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut piv = b[0];
    if piv.abs() < f64::MIN_POSITIVE {
        return Err(Error::LinearSolve("zero pivot at row 0".into()));
    }
    cp[0] = c[0] / piv;
    dp[0] = r[0] / piv;
    for i in 1..n {
        piv = b[i] - a[i] * cp[i - 1];
        if piv.abs() < f64::MIN_POSITIVE || !piv.is_finite() {
            return Err(Error::LinearSolve(format!("zero pivot at row {i}")));
        }
        cp[i] = c[i] / piv;
        dp[i] = (r[i] - a[i] * dp[i - 1]) / piv;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    Ok(x)
}
