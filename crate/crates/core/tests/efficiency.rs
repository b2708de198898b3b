mod common;

use common::{catalog, problem};
use mfg_core::efficiency::{self, *};
use mfg_core::harness::fit::fit_log_points;
use mfg_core::mfg::{self, SolverParams};
use mfg_core::model::{Coupling, Kernel};
use mfg_core::planner::{self, DescentParams};

#[test]
fn phi_bounds_and_certificate_over_catalog() {
    let params = SolverParams::default();
    for (coupling, terminal) in catalog() {
        let label = format!("{} / {}", coupling.label(), terminal.label());
        let p = problem(48, 96, coupling, terminal);
        let sol = mfg::solve_mfg(&p, &params).unwrap();
        let des = planner::solve_planner_descent(&p, &params, &DescentParams::default()).unwrap();
        let c = social_cost(&sol, &p).unwrap();
        let gap = c - des.cost;
        assert!(gap >= -params.tol, "{label}: gap {gap:e}");
        let eps = default_epsilon(&p.grid);
        let details = certificate_details(&sol, &p, eps, 32).unwrap();
        assert_eq!(details.phi0, c, "{label}");
        let floor = des.cost - 1e-6 * (1.0 + des.cost.abs());
        for v in &details.variants {
            assert_eq!(v.samples.len(), 32);
            for (h, phi) in &v.samples {
                assert!(*phi >= floor, "{label} {}: phi({h:e}) = {phi:e} < {floor:e}", v.variant.as_str());
            }
        }
        assert!(details.value >= 0.0);
        assert!(details.value <= gap + 1e-6 * (1.0 + c.abs()), "{label}");
    }
}

#[test]
fn efficient_phi_is_flat_to_second_order() {
    // the efficient residual is zero, so borrow the direction built from a
    // convolution residual; the equilibrium is optimal, so phi is flat at 0
    let k = Kernel::default();
    let eff = problem(64, 128, Coupling::efficient(k.clone(), 1.0), Coupling::zero());
    let params = SolverParams::default();
    let sol = mfg::solve_mfg(&eff, &params).unwrap();
    let conv = eff.with_coupling(Coupling::convolution(k, 1.0));
    let pert = build_perturbation_running(&sol, &conv, default_epsilon(&eff.grid)).unwrap();
    let phi0 = phi_eval(&sol, &pert, 0.0, &eff).unwrap();
    let pts: Vec<(f64, f64)> = efficiency::h_samples(pert.tau, 12)
        .into_iter()
        .take(9)
        .map(|h| (h.ln(), (phi_eval(&sol, &pert, h, &eff).unwrap() - phi0).abs().ln()))
        .collect();
    let fit = fit_log_points(&pts).unwrap();
    assert!((fit.slope - 2.0).abs() < 0.1, "{fit:?}");
}

#[test]
fn bounds_are_consistent() {
    let k = Kernel::default();
    let p = problem(64, 128, Coupling::convolution(k.clone(), 1.0), Coupling::convolution(k, 0.5));
    let sol = mfg::solve_mfg(&p, &SolverParams::default()).unwrap();
    let dt = p.grid.dt();
    let (lb_f, lb_g) = lb_integrands(&sol, &p, dt).unwrap();
    let ub = ub_norm(&sol, &p).unwrap();
    // the two dropped end intervals carry at most 2 dt sup_t ||r(t)||^2
    let gc = p.coupling.on_grid(&p.grid).unwrap();
    let mut sup: f64 = 0.0;
    for k in 0..p.grid.levels() {
        let r = gc.residual(sol.m.level(k));
        sup = sup.max(r.iter().map(|v| v * v).sum::<f64>() * p.grid.dx());
    }
    let diff = ub * ub - (lb_f + lb_g);
    assert!(diff >= -1e-15 && diff <= 2.0 * dt * sup * (1.0 + 1e-12), "{diff:e}");
    assert!(lb_g > 0.0);
}

#[test]
fn report_structure() {
    let k = Kernel::default();
    let p = problem(48, 96, Coupling::efficient(k.clone(), 1.0), Coupling::zero());
    let r = full_report(&p, &ReportParams::default()).unwrap();
    assert!(r.converged());
    assert!(r.gap.abs() <= 1e-3 * (1.0 + r.cost_mfg));
    for v in [r.residual_f_sup, r.residual_g_sup, r.lb_f, r.lb_g, r.ub_norm, r.fp_residual, r.hjb_residual] {
        assert!(v <= 1e-6, "{r:?}");
    }
    assert!(r.holder.is_nan());

    let p = problem(48, 96, Coupling::potential(k, 0.5), Coupling::zero());
    let r = full_report(&p, &ReportParams::default()).unwrap();
    assert!(r.gap > 0.0 && r.certificate > 0.0 && r.certificate <= r.gap);
    assert!(r.duality_slack >= -1e-6 * (1.0 + r.duality_lhs));
    assert!(!r.planner_disagreement);
}
