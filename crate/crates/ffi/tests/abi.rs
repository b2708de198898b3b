use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use mfg_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mfg_last_error_message()) }.to_string_lossy().into_owned()
}

fn small_spec() -> MfgProblemSpec {
    MfgProblemSpec {
        n: 32,
        nt: 64,
        ..mfg_problem_spec_default()
    }
}

fn new_problem(spec: &MfgProblemSpec) -> *mut MfgProblem {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { mfg_problem_new(spec, &mut p) }, MfgStatus::Ok, "{}", last_error());
    p
}

fn copy(sol: *const MfgSolution, field: MfgField) -> Vec<f64> {
    let mut need = 0;
    let st = unsafe { mfg_solution_copy(sol, field, ptr::null_mut(), 0, &mut need) };
    assert_eq!(st, MfgStatus::BufferTooSmall);
    let mut buf = vec![0.0; need];
    let st = unsafe { mfg_solution_copy(sol, field, buf.as_mut_ptr(), buf.len(), ptr::null_mut()) };
    assert_eq!(st, MfgStatus::Ok);
    buf
}

#[test]
fn solve_and_copy_matches_core() {
    let spec = small_spec();
    let p = new_problem(&spec);
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { mfg_solve_mfg(p, ptr::null(), &mut sol) }, MfgStatus::Ok);
    let mut info = MfgSolveInfo::default();
    assert_eq!(unsafe { mfg_solution_info(sol, &mut info) }, MfgStatus::Ok);
    assert_eq!(info.converged, 1);
    assert!(last_error().is_empty());

    let grid = mfg_core::Grid::one_d(32, 0.0, spec.t_end, 64).unwrap();
    let m0 = mfg_core::model::cosine_density(&grid, spec.amplitude, 1.0).unwrap();
    let problem = mfg_core::model::Problem::new(
        grid,
        mfg_core::model::Hamiltonian::quadratic(),
        mfg_core::model::Coupling::potential(mfg_core::model::Kernel::CosDiff { frequency: 1.0 }, spec.strength),
        mfg_core::model::Coupling::zero(),
        m0,
    )
    .unwrap();
    let direct = mfg_core::mfg::solve_mfg(&problem, &Default::default()).unwrap();
    assert_eq!(copy(sol, MfgField::Density), direct.m.path().values());
    assert_eq!(copy(sol, MfgField::Value), direct.u.values());
    assert_eq!(copy(sol, MfgField::Control), direct.alpha_star.values());

    unsafe {
        mfg_solution_free(sol);
        mfg_problem_free(p);
    }
}

#[test]
fn planner_methods_agree() {
    let p = new_problem(&small_spec());
    let mut costs = Vec::new();
    for method in [MfgPlannerMethod::System, MfgPlannerMethod::Descent] {
        let mut sol = ptr::null_mut();
        assert_eq!(unsafe { mfg_solve_planner(p, ptr::null(), method, &mut sol) }, MfgStatus::Ok);
        let mut info = MfgSolveInfo::default();
        unsafe { mfg_solution_info(sol, &mut info) };
        costs.push(info.cost);
        unsafe { mfg_solution_free(sol) };
    }
    assert!((costs[0] - costs[1]).abs() < 1e-8, "{costs:?}");
    unsafe { mfg_problem_free(p) };
}

#[test]
fn report_fields_are_consistent() {
    let p = new_problem(&small_spec());
    let mut r = MfgReport::default();
    assert_eq!(unsafe { mfg_report(p, ptr::null(), &mut r) }, MfgStatus::Ok, "{}", last_error());
    assert_eq!(r.converged, 1);
    assert!((r.gap - (r.cost_mfg - r.cost_planner)).abs() <= 1e-14 * (1.0 + r.cost_mfg.abs()));
    assert!(r.certificate >= 0.0);
    assert!(r.duality_slack.abs() < 1e-10);
    unsafe { mfg_problem_free(p) };
}

#[test]
fn errors_are_reported_not_raised() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { mfg_problem_new(ptr::null(), &mut p) }, MfgStatus::NullPointer);
    assert!(last_error().contains("spec"));

    let bad = MfgProblemSpec { nt: 1, ..small_spec() };
    assert_eq!(unsafe { mfg_problem_new(&bad, &mut p) }, MfgStatus::InvalidGrid);
    assert!(p.is_null());

    let p = new_problem(&small_spec());
    let negative = vec![-1.0; 32];
    assert_eq!(
        unsafe { mfg_problem_set_initial(p, negative.as_ptr(), negative.len()) },
        MfgStatus::InvalidDensity
    );
    let short = vec![1.0; 31];
    assert_ne!(unsafe { mfg_problem_set_initial(p, short.as_ptr(), short.len()) }, MfgStatus::Ok);
    let flat = vec![1.0; 32];
    assert_eq!(unsafe { mfg_problem_set_initial(p, flat.as_ptr(), flat.len()) }, MfgStatus::Ok);
    assert!(last_error().is_empty());

    let opts = MfgSolverOptions {
        tol: -1.0,
        ..mfg_solver_options_default()
    };
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { mfg_solve_mfg(p, &opts, &mut sol) }, MfgStatus::InvalidArgument);

    let missing = CString::new("/nonexistent/config.toml").unwrap();
    let mut q = ptr::null_mut();
    assert_ne!(unsafe { mfg_problem_from_config(missing.as_ptr(), &mut q) }, MfgStatus::Ok);
    assert!(!last_error().is_empty());

    unsafe {
        mfg_problem_free(p);
        mfg_problem_free(ptr::null_mut());
        mfg_solution_free(ptr::null_mut());
    }
}

#[test]
fn run_config_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
output = "results.csv"
[grid]
n = 16
nt = 32
t_end = 0.25
[coupling]
kind = "potential"
strength = 0.5
[initial]
kind = "cosine"
amplitude = 0.5
[sweep]
parameter = "strength"
values = [0.25, 0.5]
"#,
    )
    .unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    let results = dir.path().join("results.csv");
    let out = CString::new(results.to_str().unwrap()).unwrap();
    let mut ok = 0;
    assert_eq!(unsafe { mfg_run_config(path.as_ptr(), out.as_ptr(), &mut ok) }, MfgStatus::Ok, "{}", last_error());
    assert_eq!(ok, 1);
    let rows = mfg_core::harness::read_rows(&results).unwrap();
    assert_eq!(rows.len(), 2);

    let mut p = ptr::null_mut();
    assert_eq!(unsafe { mfg_problem_from_config(path.as_ptr(), &mut p) }, MfgStatus::Ok);
    let (mut n, mut levels) = (0, 0);
    unsafe { mfg_problem_dims(p, &mut n, &mut levels) };
    assert_eq!((n, levels), (16, 33));
    unsafe { mfg_problem_free(p) };
}

/// Compiles the C smoke program against the generated header and the static library.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // test binary lives in target/<profile>/deps
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libmfg_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let out = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.starts_with("ok 0.1.0"), "{stdout}");
}
