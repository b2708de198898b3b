//! Forward-backward solver for the equilibrium system
//!
//! ```text
//! -u_t - u_xx + h0(x, u_x) = F(x, m(t)),   u(T) = G(., m(T))
//!  m_t - m_xx + (m alpha)_x = 0,           m(t0) = m0,   alpha = -dp_h0(x, u_x)
//! ```
//!
//! Discretization (d = 1, staggered controls):
//!
//! * controls live on faces; `alpha^n_{i+1/2} = -dp_h0(x_{i+1/2}, (u^n_{i+1} - u^n_i)/dx)`;
//! * Fokker-Planck, implicit Euler, `A(alpha^n) m^{n+1} = m^n` with
//!   `A(a) m = m + dt (-lap m + div_face(a * avg(m)))`. Columns of `A` sum to one,
//!   so mass is conserved exactly; `A` is an M-matrix when `|a| dx <= 2`;
//! * HJB, implicit in both diffusion and Hamiltonian (Newton per step):
//!   `(u^n - u^{n+1})/dt - lap u^n + Hnum(u^n) = F(m^{n+1})` with
//!   `Hnum_i = (h0(x_{i+1/2}, D+u_{i+1/2}) + h0(x_{i-1/2}, D+u_{i-1/2})) / 2`.
//!
//! With this pairing the summation-by-parts identity behind the Lasry-Lions
//! estimate holds exactly at the discrete level, and the planner system
//! (source `F + residual_F`) is the exact optimality system of a discrete
//! control problem. The control on the last level is never used.
//!
//! The fixed point iterates `m <- (1 - delta_k) m + delta_k Phi(m)` where `Phi`
//! is one backward HJB sweep followed by one forward FP sweep.

use crate::error::{Error, Result};
use crate::grid::{face_gradient_1d, DensityPath, Grid, ScalarPath, VectorPath, MASS_EPS};
use crate::model::{GridCoupling, Problem};
use crate::tridiag::CyclicTridiagonal;

/// Step-size schedule of the fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Damping {
    /// Constant `delta` in `(0, 1]`; `Fixed(1.0)` is the plain Picard iteration.
    Fixed(f64),
    /// `delta_k = 1 / (k + 1)`
    Averaging,
    /// `delta_k = 2 / (k + 2)`
    FictitiousPlay,
}

impl Damping {
    pub fn delta(&self, k: usize) -> f64 {
        match *self {
            Damping::Fixed(d) => d,
            Damping::Averaging => 1.0 / (k as f64 + 1.0),
            Damping::FictitiousPlay => 2.0 / (k as f64 + 2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub damping: Damping,
    pub max_iters: usize,
    /// Threshold on `sup_t || Phi(m^k)(t) - m^k(t) ||_L1`.
    pub tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            damping: Damping::Fixed(1.0),
            max_iters: 500,
            tol: 1e-8,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if let Damping::Fixed(d) = self.damping {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::InvalidArgument(format!("damping {d} not in (0, 1]")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {} must be > 0", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MfgSolution {
    pub u: ScalarPath,
    pub m: DensityPath,
    /// Face-staggered feedback `-dp_h0(x, D+u)`.
    pub alpha_star: VectorPath,
    pub iterations: usize,
    pub converged: bool,
    /// `sup_t || Phi(m^k)(t) - m^k(t) ||_L1` at the last iterate.
    pub fp_residual: f64,
    pub hjb_residual: f64,
    pub fpk_residual: f64,
}

/// Which backward equation a sweep solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Backward {
    /// Source `F(m)`, terminal value `G(m(T))`.
    Equilibrium,
    /// Source `F(m) + residual_F(m)`, terminal value `delta Ghat / delta m (m(T))`.
    Planner,
}

/// Couplings prepared on the grid, reused across sweeps.
pub(crate) struct Prepared {
    pub coupling: GridCoupling,
    pub terminal: GridCoupling,
    pub diffusion: CyclicTridiagonal,
}

impl Prepared {
    pub fn new(problem: &Problem) -> Result<Self> {
        let grid = &problem.grid;
        let n = grid.n();
        let k = grid.dt() / (grid.dx() * grid.dx());
        let diffusion = CyclicTridiagonal::new(vec![-k; n], vec![1.0 + 2.0 * k; n], vec![-k; n])?;
        Ok(Self {
            coupling: problem.coupling.on_grid(grid)?,
            terminal: problem.terminal.on_grid(grid)?,
            diffusion,
        })
    }

    pub fn source(&self, kind: Backward, m: &[f64]) -> Vec<f64> {
        let f = self.coupling.eval(m);
        match kind {
            Backward::Equilibrium => f,
            Backward::Planner => {
                let r = self.coupling.residual(m);
                f.iter().zip(&r).map(|(a, b)| a + b).collect()
            }
        }
    }

    pub fn terminal_value(&self, kind: Backward, m: &[f64]) -> Vec<f64> {
        match kind {
            Backward::Equilibrium => self.terminal.eval(m),
            Backward::Planner => self.terminal.delta_ghat(m),
        }
    }
}

/// `Hnum` of a value slice.
pub(crate) fn numerical_hamiltonian(u: &[f64], problem: &Problem) -> Vec<f64> {
    let grid = &problem.grid;
    let n = u.len();
    let du = face_gradient_1d(u, grid);
    let hf: Vec<f64> = (0..n)
        .map(|f| problem.hamiltonian.h0(grid.face_coord(f), du[f]))
        .collect();
    (0..n).map(|i| 0.5 * (hf[i] + hf[(i + n - 1) % n])).collect()
}

/// Feedback `alpha = -dp_h0(x_f, D+u)` on every face of one slice.
pub(crate) fn feedback_slice(u: &[f64], problem: &Problem) -> Vec<f64> {
    let grid = &problem.grid;
    face_gradient_1d(u, grid)
        .iter()
        .enumerate()
        .map(|(f, p)| -problem.hamiltonian.dp_h0(grid.face_coord(f), *p))
        .collect()
}

/// Face-staggered feedback of a value path.
pub fn feedback(u: &ScalarPath, problem: &Problem) -> Result<VectorPath> {
    u.matches(&problem.grid)?;
    let mut out = VectorPath::zeros(&problem.grid);
    for k in 0..u.levels() {
        out.level_mut(k).copy_from_slice(&feedback_slice(u.level(k), problem));
    }
    Ok(out)
}

/// Implicit Fokker-Planck step matrix `A(alpha)`.
pub(crate) fn fp_matrix(alpha: &[f64], grid: &Grid) -> Result<CyclicTridiagonal> {
    let n = grid.n();
    let dt = grid.dt();
    let k = dt / (grid.dx() * grid.dx());
    let c = dt / (2.0 * grid.dx());
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let right = alpha[i];
        let left = alpha[(i + n - 1) % n];
        diag[i] = 1.0 + 2.0 * k + c * (right - left);
        upper[i] = -k + c * right;
        lower[i] = -k - c * left;
    }
    CyclicTridiagonal::new(lower, diag, upper)
}

fn suggested_dt(u: &[f64], grid: &Grid) -> f64 {
    let g = face_gradient_1d(u, grid)
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    (grid.dx() / g.max(1.0)).min(grid.dt() / 2.0)
}

/// Solves `v - dt lap v + dt Hnum(v) = rhs` by Newton's method from `start`.
fn implicit_step(rhs: &[f64], start: &[f64], problem: &Problem, level: usize) -> Result<Vec<f64>> {
    let grid = &problem.grid;
    let n = grid.n();
    let dt = grid.dt();
    let dx = grid.dx();
    let k = dt / (dx * dx);
    let scale = 1.0 + rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut v = start.to_vec();
    for _ in 0..50 {
        let h = numerical_hamiltonian(&v, problem);
        let lap = crate::grid::laplacian(&v, grid)?;
        let r: Vec<f64> = (0..n)
            .map(|i| v[i] - dt * lap[i] + dt * h[i] - rhs[i])
            .collect();
        let norm = r.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if !norm.is_finite() {
            break;
        }
        if norm <= 1e-14 * scale {
            return Ok(v);
        }
        let p = face_gradient_1d(&v, grid);
        let dh: Vec<f64> = (0..n)
            .map(|f| problem.hamiltonian.dp_h0(grid.face_coord(f), p[f]))
            .collect();
        let c = dt / (2.0 * dx);
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            let left = dh[(i + n - 1) % n];
            diag[i] = 1.0 + 2.0 * k + c * (left - dh[i]);
            upper[i] = -k + c * dh[i];
            lower[i] = -k - c * left;
        }
        let step = CyclicTridiagonal::new(lower, diag, upper)?.solve(&r)?;
        for (vi, si) in v.iter_mut().zip(&step) {
            *vi -= si;
        }
        let step_norm = step.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if step_norm <= 1e-15 * scale {
            return Ok(v);
        }
    }
    Err(Error::NonFinite {
        stage: "HJB implicit step",
        level,
        suggested_dt: suggested_dt(start, grid),
    })
}

pub(crate) fn backward_sweep(
    m: &ScalarPath,
    problem: &Problem,
    prep: &Prepared,
    kind: Backward,
) -> Result<ScalarPath> {
    let grid = &problem.grid;
    let nt = grid.nt();
    let dt = grid.dt();
    let mut u = ScalarPath::zeros(grid);
    u.level_mut(nt)
        .copy_from_slice(&prep.terminal_value(kind, m.level(nt)));
    for k in (0..nt).rev() {
        let next = u.level(k + 1).to_vec();
        let f = prep.source(kind, m.level(k + 1));
        let rhs: Vec<f64> = next.iter().zip(&f).map(|(a, b)| a + dt * b).collect();
        let cur = implicit_step(&rhs, &next, problem, k)?;
        u.level_mut(k).copy_from_slice(&cur);
    }
    Ok(u)
}

/// Runs the Fokker-Planck equation forward from `m0` with face controls
/// `alpha` (level `n` drives the step from `n` to `n + 1`; the last level is unused).
pub fn fp_forward(alpha: &VectorPath, problem: &Problem) -> Result<DensityPath> {
    let grid = &problem.grid;
    alpha.matches(grid)?;
    let mut m = ScalarPath::zeros(grid);
    m.level_mut(0).copy_from_slice(&problem.m0);
    for k in 1..grid.levels() {
        let a = fp_matrix(alpha.level(k - 1), grid)?;
        let next = a.solve(m.level(k - 1))?;
        let mass = next.iter().sum::<f64>() * grid.dx();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::MassDrift {
                level: k,
                drift: mass - 1.0,
            });
        }
        let min = next.iter().fold(f64::INFINITY, |a, v| a.min(*v));
        if min < -MASS_EPS {
            let peclet = alpha.level(k - 1).iter().fold(0.0f64, |a, v| a.max(v.abs())) * grid.dx();
            return Err(Error::InvalidDensity {
                level: k,
                reason: format!(
                    "negative value {min:e}; max |alpha| dx = {peclet:.3} (positivity needs <= 2, refine the grid)"
                ),
            });
        }
        m.level_mut(k).copy_from_slice(&next);
    }
    DensityPath::new(m, grid)
}

/// Backward HJB sweep for a given density path.
pub fn solve_hjb_backward(m: &DensityPath, problem: &Problem) -> Result<ScalarPath> {
    m.path().matches(&problem.grid)?;
    let prep = Prepared::new(problem)?;
    backward_sweep(m.path(), problem, &prep, Backward::Equilibrium)
}

/// Forward FP sweep driven by the feedback of `u`.
pub fn solve_fp_forward(u: &ScalarPath, problem: &Problem) -> Result<DensityPath> {
    fp_forward(&feedback(u, problem)?, problem)
}

/// `sup_t || a(t) - b(t) ||_L1`.
pub(crate) fn sup_l1(a: &ScalarPath, b: &ScalarPath, grid: &Grid) -> f64 {
    a.iter_levels()
        .zip(b.iter_levels())
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>() * grid.dx())
        .fold(0.0, f64::max)
}

/// Step-form residual of the backward equation,
/// `max_{n,i} |u^n - u^{n+1} + dt (-lap u^n + Hnum(u^n) - S(m^{n+1}))|`,
/// together with the terminal mismatch.
pub(crate) fn backward_residual(
    u: &ScalarPath,
    m: &ScalarPath,
    problem: &Problem,
    prep: &Prepared,
    kind: Backward,
) -> f64 {
    let grid = &problem.grid;
    let nt = grid.nt();
    let dt = grid.dt();
    let term = prep.terminal_value(kind, m.level(nt));
    let mut worst = u
        .level(nt)
        .iter()
        .zip(&term)
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    for k in 0..nt {
        let cur = u.level(k);
        let next = u.level(k + 1);
        let lhs = prep.diffusion.apply(cur);
        let h = numerical_hamiltonian(cur, problem);
        let f = prep.source(kind, m.level(k + 1));
        for i in 0..grid.n() {
            let r = lhs[i] - next[i] + dt * h[i] - dt * f[i];
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Step-form residual of the forward equation in L1,
/// `max_n || A(alpha^n) m^{n+1} - m^n ||_L1`, including the initial slice.
pub fn fpk_residual(m: &ScalarPath, alpha: &VectorPath, problem: &Problem) -> Result<f64> {
    let grid = &problem.grid;
    m.matches(grid)?;
    alpha.matches(grid)?;
    let dx = grid.dx();
    let mut worst = m
        .level(0)
        .iter()
        .zip(&problem.m0)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        * dx;
    for k in 1..grid.levels() {
        let a = fp_matrix(alpha.level(k - 1), grid)?;
        let r = a.apply(m.level(k));
        let l1 = r
            .iter()
            .zip(m.level(k - 1))
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
            * dx;
        worst = worst.max(l1);
    }
    Ok(worst)
}

/// Equilibrium HJB residual of a pair (step form, includes the terminal mismatch).
pub fn hjb_residual(u: &ScalarPath, m: &DensityPath, problem: &Problem) -> Result<f64> {
    u.matches(&problem.grid)?;
    let prep = Prepared::new(problem)?;
    Ok(backward_residual(u, m.path(), problem, &prep, Backward::Equilibrium))
}

/// Density flow of the uncontrolled dynamics; the default initial guess.
pub fn heat_flow(problem: &Problem) -> Result<DensityPath> {
    fp_forward(&VectorPath::zeros(&problem.grid), problem)
}

/// Result of the generic fixed point shared with the planner system.
pub(crate) struct FixedPoint {
    pub u: ScalarPath,
    pub m: DensityPath,
    pub alpha: VectorPath,
    pub iterations: usize,
    pub converged: bool,
    pub fp_residual: f64,
    pub hjb_residual: f64,
    pub fpk_residual: f64,
}

pub(crate) fn fixed_point(
    problem: &Problem,
    params: &SolverParams,
    initial: DensityPath,
    kind: Backward,
) -> Result<FixedPoint> {
    params.validate()?;
    let grid = &problem.grid;
    initial.path().matches(grid)?;
    let prep = Prepared::new(problem)?;
    let mut m = initial.into_path();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iters {
        let u = backward_sweep(&m, problem, &prep, kind)?;
        let best = fp_forward(&feedback(&u, problem)?, problem)?;
        residual = sup_l1(best.path(), &m, grid);
        iterations += 1;
        if residual < params.tol {
            converged = true;
            break;
        }
        let delta = params.damping.delta(iterations - 1);
        let mut next = m.clone();
        for (dst, (old, new)) in next
            .level_mut(0)
            .iter_mut()
            .zip(m.level(0).iter().zip(best.level(0)))
        {
            *dst = (1.0 - delta) * old + delta * new;
        }
        for k in 1..grid.levels() {
            let (old, new) = (m.level(k).to_vec(), best.level(k));
            for (dst, (o, b)) in next.level_mut(k).iter_mut().zip(old.iter().zip(new)) {
                *dst = (1.0 - delta) * o + delta * b;
            }
        }
        m = next;
        log::debug!("fixed point iteration {iterations}: residual {residual:e}");
    }
    // final pair: best response to the last iterate, then the value of that flow
    let u_prev = backward_sweep(&m, problem, &prep, kind)?;
    let m_out = fp_forward(&feedback(&u_prev, problem)?, problem)?;
    if !converged {
        residual = sup_l1(m_out.path(), &m, grid);
    }
    let u = backward_sweep(m_out.path(), problem, &prep, kind)?;
    let alpha = feedback(&u, problem)?;
    let hjb = backward_residual(&u, m_out.path(), problem, &prep, kind);
    let fpk = fpk_residual(m_out.path(), &alpha, problem)?;
    Ok(FixedPoint {
        u,
        m: m_out,
        alpha,
        iterations,
        converged,
        fp_residual: residual,
        hjb_residual: hjb,
        fpk_residual: fpk,
    })
}

/// Solves the equilibrium system starting from the uncontrolled flow.
pub fn solve_mfg(problem: &Problem, params: &SolverParams) -> Result<MfgSolution> {
    solve_mfg_from(problem, params, heat_flow(problem)?)
}

/// Solves the equilibrium system from a given initial density path.
pub fn solve_mfg_from(
    problem: &Problem,
    params: &SolverParams,
    initial: DensityPath,
) -> Result<MfgSolution> {
    let fp = fixed_point(problem, params, initial, Backward::Equilibrium)?;
    if !fp.converged {
        log::warn!(
            "equilibrium fixed point stopped after {} iterations, residual {:e}",
            fp.iterations,
            fp.fp_residual
        );
    }
    Ok(MfgSolution {
        u: fp.u,
        m: fp.m,
        alpha_star: fp.alpha,
        iterations: fp.iterations,
        converged: fp.converged,
        fp_residual: fp.fp_residual,
        hjb_residual: fp.hjb_residual,
        fpk_residual: fp.fpk_residual,
    })
}
