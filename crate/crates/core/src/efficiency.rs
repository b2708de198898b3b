//! Social costs, the inefficiency gap and its diagnostics: efficiency
//! residuals, lower/upper bound integrands, the perturbation certificate, the
//! Lasry-Lions duality check and the Holder diagnostic for x-free couplings.

use crate::error::{Error, Result};
use crate::grid::{face_average_1d, face_gradient_1d, reconstruct_flux_1d, DensityPath, Grid, ScalarPath, VectorPath};
use crate::mfg::{self, MfgSolution, Prepared, SolverParams};
use crate::model::{Coupling, Problem, TerminalCost};
use crate::planner::{self, cost_of, DescentParams, PlannerSolution};

/// Social cost of an equilibrium: the planner cost of `(m, alpha*)`.
pub fn social_cost(sol: &MfgSolution, problem: &Problem) -> Result<f64> {
    planner::planner_cost(&sol.m, &sol.alpha_star, problem)
}

/// `r(y) = int delta_m F(x, m, y) m(dx)`.
pub fn residual_f(coupling: &Coupling, m: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    crate::model::residual_f(coupling, m, grid)
}

/// `r(y) = int delta_m G(x, m, y) m(dx)`.
pub fn residual_g(terminal: &TerminalCost, m: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    crate::model::residual_f(terminal, m, grid)
}

/// Residual of the running coupling on every level.
fn residual_path(m: &ScalarPath, problem: &Problem) -> Result<ScalarPath> {
    let gc = problem.coupling.on_grid(&problem.grid)?;
    let mut out = ScalarPath::zeros(&problem.grid);
    for k in 0..m.levels() {
        out.level_mut(k).copy_from_slice(&gc.residual(m.level(k)));
    }
    Ok(out)
}

/// Default window `max(4 dt, (T - t0) / 16)`.
pub fn default_epsilon(grid: &Grid) -> f64 {
    (4.0 * grid.dt()).max(grid.horizon() / 16.0)
}

fn check_epsilon(eps: f64, grid: &Grid) -> Result<()> {
    if !(eps > 0.0 && eps < grid.horizon() / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {eps} not in (0, {})",
            grid.horizon() / 2.0
        )));
    }
    Ok(())
}

/// `int_a^b int f(t, y)^2 dy dt` for `f` piecewise linear in time between levels.
pub(crate) fn time_integral_sq(f: &ScalarPath, grid: &Grid, a: f64, b: f64) -> f64 {
    let dx = grid.dx();
    let mut total = 0.0;
    for n in 0..grid.nt() {
        let (t0, t1) = (grid.time(n), grid.time(n + 1));
        let s0 = t0.max(a);
        let s1 = t1.min(b);
        if s1 <= s0 {
            continue;
        }
        let w0 = (s0 - t0) / (t1 - t0);
        let w1 = (s1 - t0) / (t1 - t0);
        let (lo, hi) = (f.level(n), f.level(n + 1));
        let mut sum = 0.0;
        for (x, y) in lo.iter().zip(hi) {
            let p = x + w0 * (y - x);
            let q = x + w1 * (y - x);
            sum += p * p + p * q + q * q;
        }
        total += (s1 - s0) * sum / 3.0 * dx;
    }
    total
}

/// `(lb_F, lb_G)`: squared residual of `F` over `[t0 + eps, T - eps]` and of `G` at `T`.
pub fn lb_integrands(sol: &MfgSolution, problem: &Problem, eps: f64) -> Result<(f64, f64)> {
    let grid = &problem.grid;
    if eps != 0.0 {
        check_epsilon(eps, grid)?;
    }
    let r = residual_path(sol.m.path(), problem)?;
    let lb_f = time_integral_sq(&r, grid, grid.t0() + eps, grid.t_end() - eps);
    let rg = problem.terminal.on_grid(grid)?.residual(sol.m.level(grid.nt()));
    let lb_g = rg.iter().map(|v| v * v).sum::<f64>() * grid.dx();
    Ok((lb_f, lb_g))
}

/// Square root of the full-horizon residual integral plus the terminal one.
pub fn ub_norm(sol: &MfgSolution, problem: &Problem) -> Result<f64> {
    let (f, g) = lb_integrands(sol, problem, 0.0)?;
    Ok((f + g).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Running,
    Terminal,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Running => "running",
            Variant::Terminal => "terminal",
        }
    }
}

/// A density perturbation `mu` with its flux `beta`, feasible for every
/// `h in [0, tau]` as `(m + h mu, (m alpha + h beta) / (m + h mu))`.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub mu: ScalarPath,
    pub beta: VectorPath,
    /// Ramp value on every level.
    pub gamma: Vec<f64>,
    pub tau: f64,
    pub variant: Variant,
}

/// Ramp of the running perturbation: zero on `[t0, t0 + eps/2]`, linear up to
/// one at `t0 + eps`, one until `T - eps`, linear down to zero at `T`.
pub fn running_ramp(t: f64, grid: &Grid, eps: f64) -> f64 {
    let (t0, t_end) = (grid.t0(), grid.t_end());
    if t <= t0 + eps / 2.0 {
        0.0
    } else if t <= t0 + eps {
        2.0 * (t - t0 - eps / 2.0) / eps
    } else if t <= t_end - eps {
        1.0
    } else {
        ((t_end - t) / eps).max(0.0)
    }
}

/// Ramp of the terminal perturbation: zero until `T - eps`, then linear up to one.
pub fn terminal_ramp(t: f64, grid: &Grid, eps: f64) -> f64 {
    let start = grid.t_end() - eps;
    if t <= start {
        0.0
    } else if t >= grid.t_end() {
        1.0
    } else {
        ((t - start) / eps).min(1.0)
    }
}

fn finish_perturbation(
    mut mu: ScalarPath,
    gamma: Vec<f64>,
    m: &ScalarPath,
    grid: &Grid,
    variant: Variant,
) -> Result<Perturbation> {
    // remove the roundoff mean; tau scales like 1/|mu|, which would amplify it
    for k in 0..grid.levels() {
        let slice = mu.level_mut(k);
        let mean = slice.iter().sum::<f64>() / slice.len() as f64;
        slice.iter_mut().for_each(|v| *v -= mean);
    }
    let beta = reconstruct_flux_1d(&mu, grid)?;
    let mut tau = f64::INFINITY;
    for k in 0..grid.levels() {
        for (mi, ui) in m.level(k).iter().zip(mu.level(k)) {
            if *ui < 0.0 {
                tau = tau.min(mi / (2.0 * -ui));
            }
        }
    }
    if !tau.is_finite() {
        tau = 1.0;
    }
    Ok(Perturbation {
        mu,
        beta,
        gamma,
        tau,
        variant,
    })
}

fn require_positive(m: &ScalarPath, grid: &Grid, from: f64) -> Result<()> {
    for k in 0..grid.levels() {
        if grid.time(k) < from {
            continue;
        }
        let min = m.level(k).iter().fold(f64::INFINITY, |a, v| a.min(*v));
        if !(min > 0.0) {
            return Err(Error::DegenerateDensity { level: k, min });
        }
    }
    Ok(())
}

/// `mu(t, y) = -gamma(t) m(t, y) r_F(m(t))(y)` with the running ramp.
pub fn build_perturbation_running(sol: &MfgSolution, problem: &Problem, eps: f64) -> Result<Perturbation> {
    let grid = &problem.grid;
    grid.require_1d()?;
    check_epsilon(eps, grid)?;
    let m = sol.m.path();
    require_positive(m, grid, grid.t0() + eps / 2.0)?;
    let r = residual_path(m, problem)?;
    let gamma: Vec<f64> = (0..grid.levels())
        .map(|k| running_ramp(grid.time(k), grid, eps))
        .collect();
    let mut mu = ScalarPath::zeros(grid);
    for k in 0..grid.levels() {
        let g = gamma[k];
        for ((dst, mi), ri) in mu.level_mut(k).iter_mut().zip(m.level(k)).zip(r.level(k)) {
            *dst = -g * mi * ri;
        }
    }
    finish_perturbation(mu, gamma, m, grid, Variant::Running)
}

/// `mu(t, y) = -gamma(t) m(T, y) r_G(m(T))(y)` with the terminal ramp.
pub fn build_perturbation_terminal(sol: &MfgSolution, problem: &Problem, eps: f64) -> Result<Perturbation> {
    let grid = &problem.grid;
    grid.require_1d()?;
    check_epsilon(eps, grid)?;
    let m = sol.m.path();
    require_positive(m, grid, grid.t_end() - eps)?;
    let m_end = m.level(grid.nt());
    let r = problem.terminal.on_grid(grid)?.residual(m_end);
    let gamma: Vec<f64> = (0..grid.levels())
        .map(|k| terminal_ramp(grid.time(k), grid, eps))
        .collect();
    let mut mu = ScalarPath::zeros(grid);
    for k in 0..grid.levels() {
        let g = gamma[k];
        for ((dst, mi), ri) in mu.level_mut(k).iter_mut().zip(m_end).zip(&r) {
            *dst = -g * mi * ri;
        }
    }
    finish_perturbation(mu, gamma, m, grid, Variant::Terminal)
}

/// The perturbed pair `(m + h mu, alpha_h)`; `alpha_h` on level `n` carries
/// the flux `avg(m^{n+1}) alpha^n + h beta^{n+1}`.
pub fn perturbed_pair(
    sol: &MfgSolution,
    pert: &Perturbation,
    h: f64,
    problem: &Problem,
) -> Result<(DensityPath, VectorPath)> {
    let grid = &problem.grid;
    if !(h >= 0.0 && h <= pert.tau * (1.0 + 1e-12)) {
        return Err(Error::StepOutOfRange { h, tau: pert.tau });
    }
    let m = sol.m.path();
    let mut mh = m.clone();
    for k in 0..grid.levels() {
        for (dst, u) in mh.level_mut(k).iter_mut().zip(pert.mu.level(k)) {
            *dst += h * u;
        }
    }
    let mut alpha = sol.alpha_star.clone();
    for n in 0..grid.nt() {
        let mbar = face_average_1d(m.level(n + 1));
        let mbar_h = face_average_1d(mh.level(n + 1));
        let beta = pert.beta.level(n + 1);
        for (f, dst) in alpha.level_mut(n).iter_mut().enumerate() {
            *dst = (mbar[f] * *dst + h * beta[f]) / mbar_h[f];
        }
    }
    Ok((DensityPath::new(mh, grid)?, alpha))
}

/// Planner cost of the perturbed pair; equals the social cost at `h = 0`.
pub fn phi_eval(sol: &MfgSolution, pert: &Perturbation, h: f64, problem: &Problem) -> Result<f64> {
    let (m, alpha) = perturbed_pair(sol, pert, h, problem)?;
    planner::planner_cost(&m, &alpha, problem)
}

/// `count` log-spaced steps over `[tau 1e-4, tau]`.
pub fn h_samples(tau: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![tau];
    }
    (0..count)
        .map(|i| {
            let e = -4.0 + 4.0 * i as f64 / (count - 1) as f64;
            if i + 1 == count {
                tau
            } else {
                tau * 10f64.powf(e)
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CertificateSamples {
    pub variant: Variant,
    pub tau: f64,
    /// `(h, phi(h))` pairs.
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub value: f64,
    pub phi0: f64,
    pub variants: Vec<CertificateSamples>,
}

/// Samples `phi` for both perturbation variants; the certificate is
/// `max(0, max_h (phi(0) - phi(h)))`.
pub fn certificate_details(
    sol: &MfgSolution,
    problem: &Problem,
    eps: f64,
    count: usize,
) -> Result<CertificateReport> {
    let prep = Prepared::new(problem)?;
    let phi0 = cost_of(sol.m.path(), &sol.alpha_star, problem, &prep);
    let mut value: f64 = 0.0;
    let mut variants = Vec::with_capacity(2);
    for pert in [
        build_perturbation_running(sol, problem, eps)?,
        build_perturbation_terminal(sol, problem, eps)?,
    ] {
        let mut samples = Vec::with_capacity(count);
        for h in h_samples(pert.tau, count) {
            let (m, alpha) = perturbed_pair(sol, &pert, h, problem)?;
            let phi = cost_of(m.path(), &alpha, problem, &prep);
            value = value.max(phi0 - phi);
            samples.push((h, phi));
        }
        variants.push(CertificateSamples {
            variant: pert.variant,
            tau: pert.tau,
            samples,
        });
    }
    Ok(CertificateReport {
        value,
        phi0,
        variants,
    })
}

/// Certified lower bound on the gap.
pub fn certificate(sol: &MfgSolution, problem: &Problem, eps: f64, count: usize) -> Result<f64> {
    Ok(certificate_details(sol, problem, eps, count)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Both sides of the discrete Lasry-Lions estimate between an equilibrium and
/// a planner pair:
///
/// ```text
/// lhs = 1/(2C) sum_n dt sum_f (avg m + avg m_hat)^{n+1} |D+u^n - D+u_hat^n|^2 dx
/// rhs = -sum_n dt <F(m^{n+1}) - dFhat(m_hat^{n+1}), (m - m_hat)^{n+1}>
///       - <G(m^N) - dGhat(m_hat^N), (m - m_hat)^N>
/// ```
pub fn duality_check(sol: &MfgSolution, plan: &PlannerSolution, problem: &Problem) -> Result<DualityReport> {
    let grid = &problem.grid;
    let prep = Prepared::new(problem)?;
    let (dt, dx, nt) = (grid.dt(), grid.dx(), grid.nt());
    let c = problem.hamiltonian.convexity();
    let (m, mh) = (sol.m.path(), plan.m_hat.path());
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for n in 0..nt {
        let du = face_gradient_1d(sol.u.level(n), grid);
        let dv = face_gradient_1d(plan.u_hat.level(n), grid);
        let a = face_average_1d(m.level(n + 1));
        let b = face_average_1d(mh.level(n + 1));
        for f in 0..grid.n() {
            lhs += dt * (a[f] + b[f]) * (du[f] - dv[f]).powi(2) * dx;
        }
        let f_eq = prep.coupling.eval(m.level(n + 1));
        let f_pl = prep.source(mfg::Backward::Planner, mh.level(n + 1));
        for i in 0..grid.n() {
            rhs -= dt * (f_eq[i] - f_pl[i]) * (m.level(n + 1)[i] - mh.level(n + 1)[i]) * dx;
        }
    }
    let g_eq = prep.terminal.eval(m.level(nt));
    let g_pl = prep.terminal.delta_ghat(mh.level(nt));
    for i in 0..grid.n() {
        rhs -= (g_eq[i] - g_pl[i]) * (m.level(nt)[i] - mh.level(nt)[i]) * dx;
    }
    lhs /= 2.0 * c;
    Ok(DualityReport {
        lhs,
        rhs,
        slack: rhs - lhs,
    })
}

/// `sup |F(m(t2)) - F(m(t1))| / |t2 - t1|^{1/2}` over level pairs inside
/// `[t0 + eps, T - eps]`, for x-free couplings.
pub fn holder_diagnostic(sol: &MfgSolution, problem: &Problem, eps: f64) -> Result<f64> {
    if !problem.coupling.is_xfree() {
        return Err(Error::InvalidArgument(format!(
            "holder diagnostic needs an x-free coupling, got `{}`",
            problem.coupling.label()
        )));
    }
    let grid = &problem.grid;
    check_epsilon(eps, grid)?;
    let gc = problem.coupling.on_grid(grid)?;
    let inside: Vec<(f64, f64)> = (0..grid.levels())
        .filter(|&k| {
            let t = grid.time(k);
            t >= grid.t0() + eps - 1e-12 && t <= grid.t_end() - eps + 1e-12
        })
        .map(|k| (grid.time(k), gc.eval(sol.m.level(k))[0]))
        .collect();
    let mut best: f64 = 0.0;
    for (i, (t1, f1)) in inside.iter().enumerate() {
        for (t2, f2) in &inside[i + 1..] {
            best = best.max((f2 - f1).abs() / (t2 - t1).sqrt());
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport {
    pub cost_mfg: f64,
    /// Descent value of the planner cost.
    pub cost_planner: f64,
    pub cost_planner_system: f64,
    pub gap: f64,
    pub lb_f: f64,
    pub lb_g: f64,
    pub ub_norm: f64,
    pub residual_f_sup: f64,
    pub residual_g_sup: f64,
    pub certificate: f64,
    pub epsilon: f64,
    pub duality_lhs: f64,
    pub duality_rhs: f64,
    pub duality_slack: f64,
    /// NaN unless the coupling is x-free.
    pub holder: f64,
    pub mfg_converged: bool,
    pub mfg_iterations: usize,
    pub fp_residual: f64,
    pub hjb_residual: f64,
    pub fpk_residual: f64,
    pub system_converged: bool,
    pub descent_converged: bool,
    pub descent_iterations: usize,
    pub descent_grad_norm: f64,
    /// Set when the two planner values differ by more than `1e-3 (1 + |cost|)`.
    pub planner_disagreement: bool,
}

impl EfficiencyReport {
    pub fn converged(&self) -> bool {
        self.mfg_converged && self.system_converged && self.descent_converged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportParams {
    pub solver: SolverParams,
    pub descent: DescentParams,
    /// `None` selects [`default_epsilon`].
    pub epsilon: Option<f64>,
    pub h_samples: usize,
}

impl Default for ReportParams {
    fn default() -> Self {
        Self {
            solver: SolverParams::default(),
            descent: DescentParams::default(),
            epsilon: None,
            h_samples: 32,
        }
    }
}

/// Everything at once: equilibrium, both planner solvers, residuals, bounds,
/// certificate and duality.
pub fn full_report(problem: &Problem, params: &ReportParams) -> Result<EfficiencyReport> {
    let grid = &problem.grid;
    let eps = params.epsilon.unwrap_or_else(|| default_epsilon(grid));
    check_epsilon(eps, grid)?;
    let sol = mfg::solve_mfg(problem, &params.solver)?;
    let system = planner::solve_planner_system(problem, &params.solver)?;
    let descent = planner::solve_planner_descent_from(problem, &params.descent, sol.alpha_star.clone())?;

    let cost_mfg = social_cost(&sol, problem)?;
    let (lb_f, lb_g) = lb_integrands(&sol, problem, eps)?;
    let ub = ub_norm(&sol, problem)?;
    let r = residual_path(sol.m.path(), problem)?;
    let residual_f_sup = r.max_abs();
    let rg = problem.terminal.on_grid(grid)?.residual(sol.m.level(grid.nt()));
    let residual_g_sup = rg.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cert = certificate(&sol, problem, eps, params.h_samples)?;
    let dual = duality_check(&sol, &system, problem)?;
    let holder = if problem.coupling.is_xfree() {
        holder_diagnostic(&sol, problem, eps)?
    } else {
        f64::NAN
    };
    let disagreement = (system.cost - descent.cost).abs() > 1e-3 * (1.0 + descent.cost.abs());
    if disagreement {
        log::warn!(
            "planner values disagree: system {} vs descent {}",
            system.cost,
            descent.cost
        );
    }
    Ok(EfficiencyReport {
        cost_mfg,
        cost_planner: descent.cost,
        cost_planner_system: system.cost,
        gap: cost_mfg - descent.cost,
        lb_f,
        lb_g,
        ub_norm: ub,
        residual_f_sup,
        residual_g_sup,
        certificate: cert,
        epsilon: eps,
        duality_lhs: dual.lhs,
        duality_rhs: dual.rhs,
        duality_slack: dual.slack,
        holder,
        mfg_converged: sol.converged,
        mfg_iterations: sol.iterations,
        fp_residual: sol.fp_residual,
        hjb_residual: sol.hjb_residual,
        fpk_residual: sol.fpk_residual,
        system_converged: system.converged,
        descent_converged: descent.converged,
        descent_iterations: descent.iterations,
        descent_grad_norm: descent.grad_norm,
        planner_disagreement: disagreement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::continuity_residual_1d;
    use crate::model::{cosine_density, Hamiltonian, Kernel, Moment, Profile};

    fn problem(n: usize, nt: usize, t_end: f64, coupling: Coupling, terminal: Coupling) -> Problem {
        let g = Grid::one_d(n, 0.0, t_end, nt).unwrap();
        let m0 = cosine_density(&g, 0.5, 1.0).unwrap();
        Problem::new(g, Hamiltonian::quadratic(), coupling, terminal, m0).unwrap()
    }

    #[test]
    fn ramps() {
        let g = Grid::one_d(8, 0.0, 1.0, 16).unwrap();
        let eps = 0.2;
        assert_eq!(running_ramp(0.05, &g, eps), 0.0);
        assert!((running_ramp(0.15, &g, eps) - 0.5).abs() < 1e-12);
        assert_eq!(running_ramp(0.5, &g, eps), 1.0);
        assert!((running_ramp(0.9, &g, eps) - 0.5).abs() < 1e-12);
        assert_eq!(running_ramp(1.0, &g, eps), 0.0);
        assert_eq!(terminal_ramp(0.7, &g, eps), 0.0);
        assert!((terminal_ramp(0.9, &g, eps) - 0.5).abs() < 1e-12);
        assert_eq!(terminal_ramp(1.0, &g, eps), 1.0);
    }

    #[test]
    fn time_integral_is_exact_for_linear_paths() {
        let g = Grid::one_d(4, 0.0, 1.0, 8).unwrap();
        // f(t, y) = t on every point: int_a^b t^2 dt
        let slices: Vec<Vec<f64>> = (0..g.levels()).map(|k| vec![g.time(k); 4]).collect();
        let f = ScalarPath::from_levels(&g, slices).unwrap();
        let v = time_integral_sq(&f, &g, 0.13, 0.77);
        assert!((v - (0.77f64.powi(3) - 0.13f64.powi(3)) / 3.0).abs() < 1e-14);
    }

    #[test]
    fn perturbation_invariants() {
        let p = problem(32, 64, 0.25, Coupling::convolution(Kernel::default(), 1.0), Coupling::convolution(Kernel::default(), 0.5));
        let sol = mfg::solve_mfg(&p, &SolverParams::default()).unwrap();
        let g = &p.grid;
        let eps = default_epsilon(g);
        for pert in [
            build_perturbation_running(&sol, &p, eps).unwrap(),
            build_perturbation_terminal(&sol, &p, eps).unwrap(),
        ] {
            for k in 0..g.levels() {
                assert!(crate::grid::integrate(pert.mu.level(k), g).unwrap().abs() < 1e-10);
            }
            assert!(pert.mu.level(0).iter().all(|v| *v == 0.0));
            let scale = pert.mu.max_abs() / g.dt() + pert.mu.max_abs() / (g.dx() * g.dx());
            assert!(continuity_residual_1d(&pert.mu, &pert.beta, g).unwrap() <= 1e-8 * scale.max(1e-300));
            let (mh, alpha) = perturbed_pair(&sol, &pert, pert.tau, &p).unwrap();
            for k in 0..g.levels() {
                for (a, b) in mh.level(k).iter().zip(sol.m.level(k)) {
                    assert!(*a >= 0.5 * b - 1e-15);
                }
            }
            // the perturbed pair satisfies the discrete constraint as well as (m, alpha*) does
            let base = mfg::fpk_residual(sol.m.path(), &sol.alpha_star, &p).unwrap();
            let pert_res = mfg::fpk_residual(mh.path(), &alpha, &p).unwrap();
            assert!(pert_res <= base + 1e-13, "{pert_res} vs {base}");
            assert_eq!(phi_eval(&sol, &pert, 0.0, &p).unwrap(), social_cost(&sol, &p).unwrap());
            assert!(phi_eval(&sol, &pert, 2.0 * pert.tau, &p).is_err());
        }
        let pert = build_perturbation_terminal(&sol, &p, eps).unwrap();
        let rg = p.terminal.on_grid(g).unwrap().residual(sol.m.level(g.nt()));
        for ((v, mi), ri) in pert.mu.level(g.nt()).iter().zip(sol.m.level(g.nt())).zip(&rg) {
            assert!((v + mi * ri).abs() < 1e-15);
        }
        for k in 0..g.levels() {
            if g.time(k) < g.t_end() - eps {
                assert!(pert.mu.level(k).iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn zero_problem_report() {
        let p = problem(16, 32, 0.25, Coupling::zero(), Coupling::zero());
        let r = full_report(&p, &ReportParams::default()).unwrap();
        for v in [r.cost_mfg, r.cost_planner, r.gap, r.lb_f, r.lb_g, r.ub_norm, r.certificate, r.duality_lhs, r.duality_rhs] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn efficient_coupling_structure() {
        let p = problem(32, 64, 0.25, Coupling::efficient(Kernel::default(), 1.0), Coupling::zero());
        let params = ReportParams::default();
        let sol = mfg::solve_mfg(&p, &params.solver).unwrap();
        let eps = default_epsilon(&p.grid);
        let (f, g) = lb_integrands(&sol, &p, eps).unwrap();
        assert!(f <= 1e-12 && g <= 1e-12);
        assert!(ub_norm(&sol, &p).unwrap() <= 1e-6);
        let pert = build_perturbation_running(&sol, &p, eps).unwrap();
        assert!(pert.mu.max_abs() < 1e-12);
        let plan = planner::solve_planner_system(&p, &params.solver).unwrap();
        let d = duality_check(&sol, &plan, &p).unwrap();
        assert!(d.lhs <= 1e-8);
    }

    #[test]
    fn potential_identities_and_duality() {
        let p = problem(32, 64, 0.25, Coupling::potential(Kernel::default(), 0.5), Coupling::zero());
        let params = ReportParams::default();
        let sol = mfg::solve_mfg(&p, &params.solver).unwrap();
        let g = &p.grid;
        let gc = p.coupling.on_grid(g).unwrap();
        let mut f = ScalarPath::zeros(g);
        for k in 0..g.levels() {
            f.level_mut(k).copy_from_slice(&gc.eval(sol.m.level(k)));
        }
        let (lb, _) = lb_integrands(&sol, &p, 0.0).unwrap();
        let direct = time_integral_sq(&f, g, g.t0(), g.t_end());
        assert!((lb - direct).abs() <= 1e-12 * direct);
        assert!((ub_norm(&sol, &p).unwrap() - direct.sqrt()).abs() <= 1e-12);
        let plan = planner::solve_planner_system(&p, &params.solver).unwrap();
        let d = duality_check(&sol, &plan, &p).unwrap();
        assert!(d.lhs > 0.0);
        assert!(d.slack.abs() <= 1e-9 * (1.0 + d.lhs), "{d:?}");
    }

    #[test]
    fn homogeneity_in_strength() {
        let base = problem(32, 64, 0.25, Coupling::convolution(Kernel::default(), 1.0), Coupling::zero());
        let sol = mfg::solve_mfg(&base, &SolverParams::default()).unwrap();
        let eps = default_epsilon(&base.grid);
        let (f1, _) = lb_integrands(&sol, &base, eps).unwrap();
        let u1 = ub_norm(&sol, &base).unwrap();
        // residuals are linear in lambda along a fixed density path
        let scaled = base.with_coupling(base.coupling.with_strength(3.0));
        let (f3, _) = lb_integrands(&sol, &scaled, eps).unwrap();
        let u3 = ub_norm(&sol, &scaled).unwrap();
        assert!((f3 - 9.0 * f1).abs() <= 1e-12 * f3);
        assert!((u3 - 3.0 * u1).abs() <= 1e-12 * u3);
    }

    #[test]
    fn holder_cases() {
        let xf = Coupling::xfree(Profile::Linear, Moment::Cos { frequency: 1.0 }, 1.0);
        let p = problem(32, 64, 0.25, xf.clone(), Coupling::zero());
        let sol = mfg::solve_mfg(&p, &SolverParams::default()).unwrap();
        let eps = default_epsilon(&p.grid);
        let h1 = holder_diagnostic(&sol, &p, eps).unwrap();
        assert!(h1 > 0.0);
        // along the same flow, a linear profile scales the diagnostic linearly
        let p2 = p.with_coupling(xf.with_strength(2.5));
        assert!((holder_diagnostic(&sol, &p2, eps).unwrap() - 2.5 * h1).abs() <= 1e-12 * h1);
        let flat = p.with_coupling(Coupling::xfree(Profile::Quadratic, Moment::Constant(1.0), 1.0));
        assert!(holder_diagnostic(&sol, &flat, eps).unwrap() < 1e-10);
        let uniform = Problem::new(
            p.grid.clone(),
            Hamiltonian::quadratic(),
            xf.clone(),
            Coupling::zero(),
            crate::model::uniform_density(&p.grid),
        )
        .unwrap();
        let s = mfg::solve_mfg(&uniform, &SolverParams::default()).unwrap();
        assert!(holder_diagnostic(&s, &uniform, eps).unwrap() < 1e-10);
        assert!(holder_diagnostic(&sol, &p.with_coupling(Coupling::zero()), eps).is_err());
    }
}
