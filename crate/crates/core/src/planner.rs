//! Global planner: the discrete control cost and two independent ways to
//! minimize it.
//!
//! The discrete cost of a pair `(m, alpha)` with `A(alpha^n) m^{n+1} = m^n` is
//!
//! ```text
//! J = sum_{n<N} dt sum_f l0(x_f, alpha^n_f) (avg m^n + avg m^{n+1})_f / 2 dx
//!   + dt sum_{n<=N} w_n int F(., m^n) m^n  +  int G(., m^N) m^N,
//! ```
//!
//! trapezoidal in time (`w_0 = w_N = 1/2`, else 1). The control on the last
//! level does not enter.
//!
//! * [`solve_planner_system`] iterates the optimality system: the equilibrium
//!   fixed point with source `F + residual_F` and terminal value
//!   `delta Ghat / delta m`.
//! * [`solve_planner_descent`] minimizes `J` over the controls with a
//!   preconditioned L-BFGS method; gradients come from the exact discrete
//!   adjoint.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::{face_average_1d, face_gradient_1d, DensityPath, Grid, ScalarPath, VectorPath};
use crate::mfg::{self, fp_forward, fp_matrix, Backward, Prepared, SolverParams};
use crate::model::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    System,
    Descent,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::System => "system",
            Method::Descent => "descent",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlannerSolution {
    pub u_hat: ScalarPath,
    pub m_hat: DensityPath,
    /// Face controls; level `n` drives the step from `n` to `n + 1`.
    pub alpha_hat: VectorPath,
    /// Face fluxes `alpha_hat * avg(m_hat)`.
    pub w_hat: VectorPath,
    pub cost: f64,
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
    pub fp_residual: f64,
    pub hjb_residual: f64,
    pub fpk_residual: f64,
    /// Preconditioned gradient norm at the returned controls (descent only).
    pub grad_norm: f64,
    /// Objective after each accepted step, starting with the initial value (descent only).
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentParams {
    pub max_iters: usize,
    /// Threshold on the preconditioned gradient norm.
    pub grad_tol: f64,
    /// L-BFGS memory; 0 gives preconditioned steepest descent.
    pub memory: usize,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for DescentParams {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            grad_tol: 1e-10,
            memory: 8,
            armijo: 1e-4,
            max_backtracks: 40,
        }
    }
}

impl DescentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidArgument("grad_tol must be > 0".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return Err(Error::InvalidArgument("armijo constant must be in (0, 1/2)".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Face weights `(avg m^n + avg m^{n+1}) / 2` of interval `n`.
fn interval_weights(m: &ScalarPath, n: usize) -> Vec<f64> {
    let a = face_average_1d(m.level(n));
    let b = face_average_1d(m.level(n + 1));
    a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect()
}

fn time_weight(k: usize, grid: &Grid) -> f64 {
    if k == 0 || k == grid.nt() {
        0.5
    } else {
        1.0
    }
}

pub(crate) fn cost_of(m: &ScalarPath, alpha: &VectorPath, problem: &Problem, prep: &Prepared) -> f64 {
    let grid = &problem.grid;
    let dt = grid.dt();
    let dx = grid.dx();
    let mut kinetic = 0.0;
    for n in 0..grid.nt() {
        let w = interval_weights(m, n);
        let a = alpha.level(n);
        for f in 0..grid.n() {
            kinetic += problem.hamiltonian.l0(grid.face_coord(f), a[f]) * w[f];
        }
    }
    let mut running = 0.0;
    for k in 0..grid.levels() {
        running += time_weight(k, grid) * prep.coupling.mean_cost(m.level(k));
    }
    kinetic * dt * dx + running * dt + prep.terminal.mean_cost(m.level(grid.nt()))
}

/// Discrete planner cost of a pair. The pair is not required to satisfy the
/// Fokker-Planck constraint.
pub fn planner_cost(m: &DensityPath, alpha: &VectorPath, problem: &Problem) -> Result<f64> {
    m.path().matches(&problem.grid)?;
    alpha.matches(&problem.grid)?;
    let prep = Prepared::new(problem)?;
    Ok(cost_of(m.path(), alpha, problem, &prep))
}

fn fluxes(m: &ScalarPath, alpha: &VectorPath, grid: &Grid) -> VectorPath {
    let mut w = VectorPath::zeros(grid);
    for k in 0..grid.levels() {
        let avg = face_average_1d(m.level(k));
        for (dst, (a, mf)) in w.level_mut(k).iter_mut().zip(alpha.level(k).iter().zip(&avg)) {
            *dst = a * mf;
        }
    }
    w
}

/// Solves the planner optimality system by the damped fixed point, starting
/// from the uncontrolled flow.
pub fn solve_planner_system(problem: &Problem, params: &SolverParams) -> Result<PlannerSolution> {
    let initial = mfg::heat_flow(problem)?;
    let fp = mfg::fixed_point(problem, params, initial, Backward::Planner)?;
    let prep = Prepared::new(problem)?;
    let cost = cost_of(fp.m.path(), &fp.alpha, problem, &prep);
    if !fp.converged {
        log::warn!(
            "planner system stopped after {} iterations, residual {:e}",
            fp.iterations,
            fp.fp_residual
        );
    }
    Ok(PlannerSolution {
        w_hat: fluxes(fp.m.path(), &fp.alpha, &problem.grid),
        u_hat: fp.u,
        m_hat: fp.m,
        alpha_hat: fp.alpha,
        cost,
        method: Method::System,
        iterations: fp.iterations,
        converged: fp.converged,
        fp_residual: fp.fp_residual,
        hjb_residual: fp.hjb_residual,
        fpk_residual: fp.fpk_residual,
        grad_norm: f64::NAN,
        history: Vec::new(),
    })
}

/// Objective, state, adjoint and gradient at one control.
struct Evaluation {
    alpha: VectorPath,
    m: DensityPath,
    cost: f64,
    /// `P^{n+1}` stored at level `n` for `n < N`; level `N` holds `delta Ghat`.
    adjoint: ScalarPath,
    grad: Vec<f64>,
}

struct Objective<'a> {
    problem: &'a Problem,
    prep: Prepared,
}

impl<'a> Objective<'a> {
    fn new(problem: &'a Problem) -> Result<Self> {
        Ok(Self {
            problem,
            prep: Prepared::new(problem)?,
        })
    }

    fn grid(&self) -> &Grid {
        &self.problem.grid
    }

    /// Cost only; `None` when the controls leave the positivity regime.
    fn value(&self, alpha: &VectorPath) -> Option<f64> {
        let m = fp_forward(alpha, self.problem).ok()?;
        Some(cost_of(m.path(), alpha, self.problem, &self.prep))
    }

    fn evaluate(&self, alpha: VectorPath) -> Result<Evaluation> {
        let problem = self.problem;
        let grid = self.grid();
        let (n, nt, dt, dx) = (grid.n(), grid.nt(), grid.dt(), grid.dx());
        let m = fp_forward(&alpha, problem)?;
        let cost = cost_of(m.path(), &alpha, problem, &self.prep);

        // l^n_i = (l0 on the two faces of i) / 2
        let cell_lagrangian = |lvl: usize| -> Vec<f64> {
            let a = alpha.level(lvl);
            let lf: Vec<f64> = (0..n)
                .map(|f| problem.hamiltonian.l0(grid.face_coord(f), a[f]))
                .collect();
            (0..n).map(|i| 0.5 * (lf[i] + lf[(i + n - 1) % n])).collect()
        };

        let mut adjoint = ScalarPath::zeros(grid);
        let terminal = self.prep.terminal.delta_ghat(m.level(nt));
        adjoint.level_mut(nt).copy_from_slice(&terminal);
        let mut next: Option<Vec<f64>> = None;
        let mut lag_next = cell_lagrangian(nt.saturating_sub(1));
        for k in (1..=nt).rev() {
            let lag_prev = cell_lagrangian(k - 1);
            let src = self.prep.source(Backward::Planner, m.level(k));
            let w = time_weight(k, grid);
            let mut rhs: Vec<f64> = (0..n)
                .map(|i| {
                    let kin = if k < nt { lag_prev[i] + lag_next[i] } else { lag_prev[i] };
                    dt * 0.5 * kin + w * dt * src[i]
                })
                .collect();
            match &next {
                Some(p) => rhs.iter_mut().zip(p).for_each(|(r, v)| *r += v),
                None => rhs.iter_mut().zip(&terminal).for_each(|(r, v)| *r += v),
            }
            let at = fp_matrix(alpha.level(k - 1), grid)?.transpose();
            let p = at.solve(&rhs)?;
            adjoint.level_mut(k - 1).copy_from_slice(&p);
            next = Some(p);
            lag_next = lag_prev;
        }

        let mut grad = vec![0.0; nt * n];
        for lvl in 0..nt {
            let weights = interval_weights(m.path(), lvl);
            let mbar = face_average_1d(m.level(lvl + 1));
            let dp = face_gradient_1d(adjoint.level(lvl), grid);
            let a = alpha.level(lvl);
            for f in 0..n {
                let dl = problem.hamiltonian.dl0(grid.face_coord(f), a[f]);
                grad[lvl * n + f] = dt * dx * (dl * weights[f] + mbar[f] * dp[f]);
            }
        }
        Ok(Evaluation {
            alpha,
            m,
            cost,
            adjoint,
            grad,
        })
    }
}

/// Preconditioner: the metric weights `dt dx (avg m^n + avg m^{n+1}) / 2`.
fn metric(m: &ScalarPath, grid: &Grid) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.nt() * grid.n());
    for lvl in 0..grid.nt() {
        out.extend(
            interval_weights(m, lvl)
                .into_iter()
                .map(|w| grid.dt() * grid.dx() * w.max(1e-12)),
        );
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned gradient norm `sqrt(sum g^2 / omega)`.
fn grad_norm(g: &[f64], omega: &[f64]) -> f64 {
    g.iter().zip(omega).map(|(x, w)| x * x / w).sum::<f64>().sqrt()
}

fn with_controls(base: &VectorPath, flat: &[f64], grid: &Grid) -> VectorPath {
    debug_assert_eq!(flat.len(), grid.nt() * grid.n());
    let mut out = base.clone();
    for lvl in 0..grid.nt() {
        out.level_mut(lvl)
            .copy_from_slice(&flat[lvl * grid.n()..(lvl + 1) * grid.n()]);
    }
    out
}

fn flatten(alpha: &VectorPath, grid: &Grid) -> Vec<f64> {
    alpha.values()[..grid.nt() * grid.n()].to_vec()
}

/// Minimizes the planner cost starting from the equilibrium feedback of
/// [`mfg::solve_mfg`].
pub fn solve_planner_descent(
    problem: &Problem,
    params: &SolverParams,
    descent: &DescentParams,
) -> Result<PlannerSolution> {
    let sol = mfg::solve_mfg(problem, params)?;
    solve_planner_descent_from(problem, descent, sol.alpha_star)
}

/// Minimizes the planner cost starting from the given controls.
pub fn solve_planner_descent_from(
    problem: &Problem,
    params: &DescentParams,
    alpha0: VectorPath,
) -> Result<PlannerSolution> {
    params.validate()?;
    let grid = problem.grid.clone();
    alpha0.matches(&grid)?;
    let obj = Objective::new(problem)?;
    let mut cur = obj.evaluate(alpha0)?;
    let omega = metric(cur.m.path(), &grid);
    let mut history = vec![cur.cost];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut gnorm = grad_norm(&cur.grad, &omega);
    let mut flat_steps = 0;

    // past this point the predicted decrease is below the resolution of J
    let stationary = |g: f64, cost: f64| g <= params.grad_tol || g * g <= 100.0 * f64::EPSILON * cost.abs();
    while iterations < params.max_iters {
        if stationary(gnorm, cur.cost) {
            converged = true;
            break;
        }
        iterations += 1;

        // two-loop recursion with diagonal initial inverse Hessian 1/omega
        let mut q = cur.grad.clone();
        let mut coeffs = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            coeffs.push(a);
        }
        let gamma = memory
            .back()
            .map(|(s, y, _)| {
                let yhy: f64 = y.iter().zip(&omega).map(|(v, w)| v * v / w).sum();
                dot(s, y) / yhy
            })
            .unwrap_or(1.0);
        let mut r: Vec<f64> = q.iter().zip(&omega).map(|(v, w)| gamma * v / w).collect();
        for ((s, y, rho), a) in memory.iter().zip(coeffs.iter().rev()) {
            let b = rho * dot(y, &r);
            r.iter_mut().zip(s).for_each(|(ri, si)| *ri += si * (a - b));
        }
        let mut dir: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut slope = dot(&cur.grad, &dir);
        if !(slope < 0.0) {
            memory.clear();
            dir = cur.grad.iter().zip(&omega).map(|(g, w)| -g / w).collect();
            slope = dot(&cur.grad, &dir);
        }

        let x = flatten(&cur.alpha, &grid);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=params.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let alpha = with_controls(&cur.alpha, &trial, &grid);
            if let Some(value) = obj.value(&alpha) {
                if value <= cur.cost + params.armijo * step * slope {
                    accepted = Some((alpha, trial));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((alpha, trial)) = accepted else {
            log::warn!("planner descent: line search stalled at gradient norm {gnorm:e}");
            break;
        };
        let next = obj.evaluate(alpha)?;
        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if params.memory > 0 && sy > 1e-300 {
            if memory.len() == params.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        let decrease = cur.cost - next.cost;
        cur = next;
        history.push(cur.cost);
        gnorm = grad_norm(&cur.grad, &omega);
        if decrease <= f64::EPSILON * cur.cost.abs().max(1e-300) {
            flat_steps += 1;
            if flat_steps >= 10 {
                log::warn!("planner descent: no measurable decrease at gradient norm {gnorm:e}");
                break;
            }
        } else {
            flat_steps = 0;
        }
    }
    if stationary(gnorm, cur.cost) {
        converged = true;
    }

    let prep = Prepared::new(problem)?;
    let mut u_hat = cur.adjoint.clone();
    let terminal = prep.terminal.delta_ghat(cur.m.level(grid.nt()));
    u_hat.level_mut(grid.nt()).copy_from_slice(&terminal);
    let hjb = mfg::backward_residual(&u_hat, cur.m.path(), problem, &prep, Backward::Planner);
    let fpk = mfg::fpk_residual(cur.m.path(), &cur.alpha, problem)?;
    Ok(PlannerSolution {
        w_hat: fluxes(cur.m.path(), &cur.alpha, &grid),
        u_hat,
        m_hat: cur.m,
        alpha_hat: cur.alpha,
        cost: cur.cost,
        method: Method::Descent,
        iterations,
        converged,
        fp_residual: f64::NAN,
        hjb_residual: hjb,
        fpk_residual: fpk,
        grad_norm: gnorm,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{cosine_density, uniform_density, Coupling, Hamiltonian, Kernel};
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn problem(n: usize, nt: usize, coupling: Coupling, terminal: Coupling, amp: f64) -> Problem {
        let g = Grid::one_d(n, 0.0, 0.25, nt).unwrap();
        let m0 = cosine_density(&g, amp, 1.0).unwrap();
        Problem::new(g, Hamiltonian::quadratic(), coupling, terminal, m0).unwrap()
    }

    #[test]
    fn cost_of_simple_pairs() {
        let p = problem(16, 16, Coupling::zero(), Coupling::zero(), 0.3);
        let g = &p.grid;
        let m = DensityPath::constant(&uniform_density(g), g).unwrap();
        let zero = VectorPath::zeros(g);
        assert_eq!(planner_cost(&m, &zero, &p).unwrap(), 0.0);
        let a = 0.7;
        let alpha = VectorPath::from_values(g, vec![a; g.levels() * g.n()]).unwrap();
        let flow = fp_forward(&alpha, &p).unwrap();
        let c = planner_cost(&flow, &alpha, &p).unwrap();
        assert!((c - g.horizon() * a * a / 2.0).abs() < 1e-13);
    }

    #[test]
    fn cost_matches_extended_precision_oracle() {
        let p = problem(32, 32, Coupling::potential(Kernel::default(), 0.5), Coupling::zero(), 0.5);
        let g = &p.grid;
        let alpha = VectorPath::from_values(
            g,
            (0..g.levels() * g.n())
                .map(|k| 0.3 * ((k % g.n()) as f64 * 2.0 * PI / g.n() as f64).sin())
                .collect(),
        )
        .unwrap();
        let m = fp_forward(&alpha, &p).unwrap();
        let c = planner_cost(&m, &alpha, &p).unwrap();

        // independent re-quadrature with compensated sums
        let mut sum = Neumaier::default();
        let (dt, dx) = (g.dt(), g.dx());
        let x = g.coords();
        for lvl in 0..g.nt() {
            for f in 0..g.n() {
                let j = (f + 1) % g.n();
                let w = 0.25 * (m.level(lvl)[f] + m.level(lvl)[j] + m.level(lvl + 1)[f] + m.level(lvl + 1)[j]);
                sum.add(0.5 * alpha.level(lvl)[f].powi(2) * w * dt * dx);
            }
        }
        for k in 0..g.levels() {
            let wk = if k == 0 || k == g.nt() { 0.5 } else { 1.0 };
            let mk = m.level(k);
            let mut q = Neumaier::default();
            for i in 0..g.n() {
                let mut a = Neumaier::default();
                for j in 0..g.n() {
                    a.add((2.0 * PI * (x[i] - x[j])).cos() * mk[j] * dx);
                }
                q.add(a.value() * mk[i] * dx);
            }
            for i in 0..g.n() {
                let mut a = Neumaier::default();
                for j in 0..g.n() {
                    a.add((2.0 * PI * (x[i] - x[j])).cos() * mk[j] * dx);
                }
                sum.add(wk * dt * 0.5 * (a.value() - q.value()) * mk[i] * dx);
            }
        }
        assert!((c - sum.value()).abs() <= 1e-12 * c.abs().max(1e-3), "{c} {}", sum.value());
    }

    #[derive(Default)]
    struct Neumaier {
        sum: f64,
        comp: f64,
    }

    impl Neumaier {
        fn add(&mut self, v: f64) {
            let t = self.sum + v;
            if self.sum.abs() >= v.abs() {
                self.comp += (self.sum - t) + v;
            } else {
                self.comp += (v - t) + self.sum;
            }
            self.sum = t;
        }

        fn value(&self) -> f64 {
            self.sum + self.comp
        }
    }

    #[test]
    fn adjoint_gradient_matches_finite_differences() {
        let g = Grid::one_d(8, 0.0, 0.25, 6).unwrap();
        let m0 = cosine_density(&g, 0.4, 1.0).unwrap();
        let terminal = Coupling::convolution(Kernel::Custom(std::sync::Arc::new(|x, y| (2.0 * PI * (x - 2.0 * y)).sin())), 0.6);
        for coupling in [
            Coupling::convolution(Kernel::default(), 1.0),
            Coupling::potential(Kernel::default(), 0.8),
            Coupling::xfree(crate::model::Profile::Quadratic, crate::model::Moment::Cos { frequency: 1.0 }, 1.2),
        ] {
            let p = Problem::new(g.clone(), Hamiltonian::quadratic(), coupling, terminal.clone(), m0.clone()).unwrap();
            let obj = Objective::new(&p).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
            let vals: Vec<f64> = (0..g.levels() * g.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let alpha = VectorPath::from_values(&g, vals).unwrap();
            let ev = obj.evaluate(alpha.clone()).unwrap();
            let x = flatten(&alpha, &g);
            let h = 1e-6;
            for idx in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[idx] += h;
                xm[idx] -= h;
                let jp = obj.value(&with_controls(&alpha, &xp, &g)).unwrap();
                let jm = obj.value(&with_controls(&alpha, &xm, &g)).unwrap();
                let fd = (jp - jm) / (2.0 * h);
                assert!((fd - ev.grad[idx]).abs() <= 1e-7 * (1.0 + fd.abs()), "{idx}: {fd} vs {}", ev.grad[idx]);
            }
        }
    }

    #[test]
    fn decoupled_descent_goes_to_zero() {
        let p = problem(16, 16, Coupling::zero(), Coupling::zero(), 0.3);
        let g = &p.grid;
        let alpha = VectorPath::from_values(g, vec![0.4; g.levels() * g.n()]).unwrap();
        let sol = solve_planner_descent_from(&p, &DescentParams::default(), alpha).unwrap();
        assert!(sol.converged);
        assert!(sol.cost.abs() < 1e-18);
        assert!(sol.alpha_hat.values()[..g.nt() * g.n()].iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn system_and_descent_agree() {
        let p = problem(32, 64, Coupling::potential(Kernel::default(), 0.5), Coupling::zero(), 0.5);
        let params = SolverParams::default();
        let sys = solve_planner_system(&p, &params).unwrap();
        let des = solve_planner_descent(&p, &params, &DescentParams::default()).unwrap();
        assert!(sys.converged && des.converged);
        assert!((sys.cost - des.cost).abs() <= 1e-3 * (1.0 + des.cost.abs()));
        for w in des.history.windows(2) {
            assert!(w[1] <= w[0]);
        }
        let mfg = mfg::solve_mfg(&p, &params).unwrap();
        let c = planner_cost(&mfg.m, &mfg.alpha_star, &p).unwrap();
        assert!(des.cost <= c + 1e-12);
        assert!(c - des.cost > 1e-7);
    }

    #[test]
    fn system_flux_consistency() {
        let p = problem(32, 32, Coupling::convolution(Kernel::default(), 1.0), Coupling::zero(), 0.5);
        let sol = solve_planner_system(&p, &SolverParams::default()).unwrap();
        let g = &p.grid;
        for k in 0..g.levels() {
            let du = face_gradient_1d(sol.u_hat.level(k), g);
            let mbar = face_average_1d(sol.m_hat.level(k));
            for f in 0..g.n() {
                let r = sol.w_hat.level(k)[f] + mbar[f] * p.hamiltonian.dp_h0(g.face_coord(f), du[f]);
                assert!(r.abs() <= 1e-10);
            }
        }
        let again = planner_cost(&sol.m_hat, &sol.alpha_hat, &p).unwrap();
        assert_eq!(again, sol.cost);
    }

    #[test]
    fn decoupled_system_matches_equilibrium() {
        let p = problem(16, 16, Coupling::zero(), Coupling::zero(), 0.5);
        let params = SolverParams::default();
        let sys = solve_planner_system(&p, &params).unwrap();
        let eq = mfg::solve_mfg(&p, &params).unwrap();
        assert_eq!(sys.m_hat.path(), eq.m.path());
        assert_eq!(sys.u_hat, eq.u);
    }
}
