//! C ABI over `mfg-core`.
//!
//! Every function returns an [`MfgStatus`]; on failure the message is kept
//! per thread and read with [`mfg_last_error_message`]. Problems and
//! solutions are opaque handles owned by the caller and released with the
//! matching `*_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use mfg_core::efficiency::{full_report, ReportParams};
use mfg_core::harness::{self, ExperimentConfig};
use mfg_core::mfg::{self, Damping, SolverParams};
use mfg_core::model::{cosine_density, Coupling, Hamiltonian, Kernel, Moment, Problem, Profile};
use mfg_core::planner::{self, DescentParams};
use mfg_core::{Error, Grid, ScalarPath, VectorPath};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    InvalidDensity = 4,
    Numerical = 5,
    Config = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfgCouplingKind {
    Zero = 0,
    Convolution = 1,
    Efficient = 2,
    Potential = 3,
    XfreeQuadratic = 4,
    XfreeLinear = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfgDamping {
    Fixed = 0,
    Averaging = 1,
    FictitiousPlay = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfgPlannerMethod {
    System = 0,
    Descent = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfgField {
    /// Density `m`, `levels * n` values.
    Density = 0,
    /// Value function `u`, `levels * n` values.
    Value = 1,
    /// Face controls, `levels * n` values; entry `i` sits at `(i + 1/2) dx`.
    Control = 2,
}

/// Problem on the periodic unit interval with the quadratic Hamiltonian and
/// initial density `1 + amplitude cos(2 pi x)` (normalized).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MfgProblemSpec {
    pub n: usize,
    pub nt: usize,
    pub t0: f64,
    pub t_end: f64,
    pub coupling: MfgCouplingKind,
    pub strength: f64,
    /// Kernel / moment frequency.
    pub frequency: f64,
    pub terminal: MfgCouplingKind,
    pub terminal_strength: f64,
    pub amplitude: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MfgSolverOptions {
    pub damping: MfgDamping,
    /// Used with `Fixed` only.
    pub delta: f64,
    pub max_iters: usize,
    pub tol: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MfgSolveInfo {
    pub iterations: usize,
    pub converged: i32,
    /// Social cost for equilibria, planner cost for planner solutions.
    pub cost: f64,
    pub fp_residual: f64,
    pub hjb_residual: f64,
    pub fpk_residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MfgReport {
    pub cost_mfg: f64,
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
    pub converged: i32,
}

/// Opaque problem handle.
pub struct MfgProblem {
    inner: Problem,
}

/// Opaque solution handle (equilibrium or planner).
pub struct MfgSolution {
    grid: Grid,
    m: ScalarPath,
    u: ScalarPath,
    alpha: VectorPath,
    info: MfgSolveInfo,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MfgStatus {
    match e {
        Error::InvalidGrid(_) | Error::ShapeMismatch { .. } | Error::UnsupportedDimension(_) => MfgStatus::InvalidGrid,
        Error::InvalidDensity { .. }
        | Error::NonZeroMean { .. }
        | Error::MassMismatch(_)
        | Error::DegenerateDensity { .. } => MfgStatus::InvalidDensity,
        Error::LinearSolve(_) | Error::NonFinite { .. } | Error::MassDrift { .. } => MfgStatus::Numerical,
        Error::Config { .. } => MfgStatus::Config,
        Error::Io(_) | Error::Csv(_) | Error::Results(_) => MfgStatus::Io,
        Error::StepOutOfRange { .. } | Error::InvalidArgument(_) | Error::DegenerateFit(_) => {
            MfgStatus::InvalidArgument
        }
    }
}

/// Runs `f`, records failures and contains panics.
fn guard(f: impl FnOnce() -> Result<(), (MfgStatus, String)>) -> MfgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MfgStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            MfgStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (MfgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MfgStatus, String) {
    (MfgStatus::NullPointer, format!("{what} is null"))
}

fn coupling(kind: MfgCouplingKind, strength: f64, frequency: f64) -> Coupling {
    let kernel = Kernel::CosDiff { frequency };
    match kind {
        MfgCouplingKind::Zero => Coupling::zero(),
        MfgCouplingKind::Convolution => Coupling::convolution(kernel, strength),
        MfgCouplingKind::Efficient => Coupling::efficient(kernel, strength),
        MfgCouplingKind::Potential => Coupling::potential(kernel, strength),
        MfgCouplingKind::XfreeQuadratic => Coupling::xfree(Profile::Quadratic, Moment::Cos { frequency }, strength),
        MfgCouplingKind::XfreeLinear => Coupling::xfree(Profile::Linear, Moment::Cos { frequency }, strength),
    }
}

fn solver_params(opts: *const MfgSolverOptions) -> Result<SolverParams, (MfgStatus, String)> {
    if opts.is_null() {
        return Ok(SolverParams::default());
    }
    let o = unsafe { *opts };
    let damping = match o.damping {
        MfgDamping::Fixed => Damping::Fixed(o.delta),
        MfgDamping::Averaging => Damping::Averaging,
        MfgDamping::FictitiousPlay => Damping::FictitiousPlay,
    };
    let p = SolverParams {
        damping,
        max_iters: o.max_iters,
        tol: o.tol,
    };
    p.validate().map_err(core_err)?;
    Ok(p)
}

fn c_path(s: *const c_char, what: &str) -> Result<PathBuf, (MfgStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    let s = unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| (MfgStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

/// Library version, static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mfg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn mfg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn mfg_problem_spec_default() -> MfgProblemSpec {
    MfgProblemSpec {
        n: 128,
        nt: 256,
        t0: 0.0,
        t_end: 0.25,
        coupling: MfgCouplingKind::Potential,
        strength: 0.5,
        frequency: 1.0,
        terminal: MfgCouplingKind::Zero,
        terminal_strength: 0.0,
        amplitude: 0.5,
    }
}

#[no_mangle]
pub extern "C" fn mfg_solver_options_default() -> MfgSolverOptions {
    let d = SolverParams::default();
    MfgSolverOptions {
        damping: MfgDamping::Fixed,
        delta: 1.0,
        max_iters: d.max_iters,
        tol: d.tol,
    }
}

/// # Safety
/// `spec` must point to a valid spec and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mfg_problem_new(spec: *const MfgProblemSpec, out: *mut *mut MfgProblem) -> MfgStatus {
    guard(|| {
        if spec.is_null() {
            return Err(null("spec"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let s = unsafe { *spec };
        let grid = Grid::one_d(s.n, s.t0, s.t_end, s.nt).map_err(core_err)?;
        let m0 = cosine_density(&grid, s.amplitude, 1.0).map_err(core_err)?;
        let p = Problem::new(
            grid,
            Hamiltonian::quadratic(),
            coupling(s.coupling, s.strength, s.frequency),
            coupling(s.terminal, s.terminal_strength, s.frequency),
            m0,
        )
        .map_err(core_err)?;
        unsafe { *out = Box::into_raw(Box::new(MfgProblem { inner: p })) };
        Ok(())
    })
}

/// Builds the base point of a TOML experiment config (the sweep is ignored).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfg_problem_from_config(path: *const c_char, out: *mut *mut MfgProblem) -> MfgStatus {
    guard(|| {
        let path = c_path(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = ExperimentConfig::from_path(&path).map_err(core_err)?;
        let p = cfg.build_problem().map_err(core_err)?;
        unsafe { *out = Box::into_raw(Box::new(MfgProblem { inner: p })) };
        Ok(())
    })
}

/// Replaces the initial density with `len == n` caller values.
///
/// # Safety
/// `problem` must come from this library; `m0` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mfg_problem_set_initial(problem: *mut MfgProblem, m0: *const f64, len: usize) -> MfgStatus {
    guard(|| {
        let p = unsafe { problem.as_mut() }.ok_or_else(|| null("problem"))?;
        if m0.is_null() {
            return Err(null("m0"));
        }
        let values = unsafe { std::slice::from_raw_parts(m0, len) }.to_vec();
        let inner = &p.inner;
        let next = Problem::new(
            inner.grid.clone(),
            inner.hamiltonian.clone(),
            inner.coupling.clone(),
            inner.terminal.clone(),
            values,
        )
        .map_err(core_err)?;
        p.inner = next;
        Ok(())
    })
}

/// Grid size: points per level and number of time levels.
///
/// # Safety
/// `problem` must come from this library; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn mfg_problem_dims(problem: *const MfgProblem, n: *mut usize, levels: *mut usize) -> MfgStatus {
    guard(|| {
        let p = unsafe { problem.as_ref() }.ok_or_else(|| null("problem"))?;
        if let Some(n) = unsafe { n.as_mut() } {
            *n = p.inner.grid.n();
        }
        if let Some(l) = unsafe { levels.as_mut() } {
            *l = p.inner.grid.levels();
        }
        Ok(())
    })
}

/// # Safety
/// `problem` must come from [`mfg_problem_new`] or [`mfg_problem_from_config`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mfg_problem_free(problem: *mut MfgProblem) {
    if !problem.is_null() {
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Solves the equilibrium. `options` may be null for defaults. A solution
/// that did not converge is still returned, flagged in its info.
///
/// # Safety
/// Pointers must be valid; `out` receives a handle to free with [`mfg_solution_free`].
#[no_mangle]
pub unsafe extern "C" fn mfg_solve_mfg(
    problem: *const MfgProblem,
    options: *const MfgSolverOptions,
    out: *mut *mut MfgSolution,
) -> MfgStatus {
    guard(|| {
        let p = unsafe { problem.as_ref() }.ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let params = solver_params(options)?;
        let sol = mfg::solve_mfg(&p.inner, &params).map_err(core_err)?;
        let cost = mfg_core::efficiency::social_cost(&sol, &p.inner).map_err(core_err)?;
        let info = MfgSolveInfo {
            iterations: sol.iterations,
            converged: sol.converged as i32,
            cost,
            fp_residual: sol.fp_residual,
            hjb_residual: sol.hjb_residual,
            fpk_residual: sol.fpk_residual,
        };
        let handle = MfgSolution {
            grid: p.inner.grid.clone(),
            m: sol.m.into_path(),
            u: sol.u,
            alpha: sol.alpha_star,
            info,
        };
        unsafe { *out = Box::into_raw(Box::new(handle)) };
        Ok(())
    })
}

/// Solves the planner problem with the chosen method.
///
/// # Safety
/// As for [`mfg_solve_mfg`].
#[no_mangle]
pub unsafe extern "C" fn mfg_solve_planner(
    problem: *const MfgProblem,
    options: *const MfgSolverOptions,
    method: MfgPlannerMethod,
    out: *mut *mut MfgSolution,
) -> MfgStatus {
    guard(|| {
        let p = unsafe { problem.as_ref() }.ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let params = solver_params(options)?;
        let sol = match method {
            MfgPlannerMethod::System => planner::solve_planner_system(&p.inner, &params),
            MfgPlannerMethod::Descent => planner::solve_planner_descent(&p.inner, &params, &DescentParams::default()),
        }
        .map_err(core_err)?;
        let info = MfgSolveInfo {
            iterations: sol.iterations,
            converged: sol.converged as i32,
            cost: sol.cost,
            fp_residual: sol.fp_residual,
            hjb_residual: sol.hjb_residual,
            fpk_residual: sol.fpk_residual,
        };
        let handle = MfgSolution {
            grid: p.inner.grid.clone(),
            m: sol.m_hat.into_path(),
            u: sol.u_hat,
            alpha: sol.alpha_hat,
            info,
        };
        unsafe { *out = Box::into_raw(Box::new(handle)) };
        Ok(())
    })
}

/// # Safety
/// `solution` must come from this library; `info` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_info(solution: *const MfgSolution, info: *mut MfgSolveInfo) -> MfgStatus {
    guard(|| {
        let s = unsafe { solution.as_ref() }.ok_or_else(|| null("solution"))?;
        let out = unsafe { info.as_mut() }.ok_or_else(|| null("info"))?;
        *out = s.info;
        Ok(())
    })
}

/// Copies a field, level-major, into `buf`. `BufferTooSmall` if
/// `len < levels * n`; the required length is always written to `written`
/// when it is not null.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_copy(
    solution: *const MfgSolution,
    field: MfgField,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> MfgStatus {
    guard(|| {
        let s = unsafe { solution.as_ref() }.ok_or_else(|| null("solution"))?;
        let src = match field {
            MfgField::Density => s.m.values(),
            MfgField::Value => s.u.values(),
            MfgField::Control => s.alpha.values(),
        };
        if let Some(w) = unsafe { written.as_mut() } {
            *w = src.len();
        }
        if len < src.len() {
            return Err((
                MfgStatus::BufferTooSmall,
                format!("need {} values, buffer holds {len}", src.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        unsafe { ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len()) };
        debug_assert_eq!(src.len(), s.grid.levels() * s.grid.n());
        Ok(())
    })
}

/// # Safety
/// `solution` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mfg_solution_free(solution: *mut MfgSolution) {
    if !solution.is_null() {
        drop(unsafe { Box::from_raw(solution) });
    }
}

/// Full efficiency report with default descent settings and window.
///
/// # Safety
/// Pointers must be valid; `options` may be null.
#[no_mangle]
pub unsafe extern "C" fn mfg_report(
    problem: *const MfgProblem,
    options: *const MfgSolverOptions,
    out: *mut MfgReport,
) -> MfgStatus {
    guard(|| {
        let p = unsafe { problem.as_ref() }.ok_or_else(|| null("problem"))?;
        let dst = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let params = ReportParams {
            solver: solver_params(options)?,
            ..ReportParams::default()
        };
        let r = full_report(&p.inner, &params).map_err(core_err)?;
        *dst = MfgReport {
            cost_mfg: r.cost_mfg,
            cost_planner: r.cost_planner,
            cost_planner_system: r.cost_planner_system,
            gap: r.gap,
            lb_f: r.lb_f,
            lb_g: r.lb_g,
            ub_norm: r.ub_norm,
            residual_f_sup: r.residual_f_sup,
            residual_g_sup: r.residual_g_sup,
            certificate: r.certificate,
            epsilon: r.epsilon,
            duality_lhs: r.duality_lhs,
            duality_rhs: r.duality_rhs,
            duality_slack: r.duality_slack,
            holder: r.holder,
            converged: r.converged() as i32,
        };
        Ok(())
    })
}

/// Runs a TOML experiment (with its sweep) and writes the results file to
/// `out_path`, or to the config's `output` when `out_path` is null.
/// `all_converged` (may be null) receives 1 when every point converged.
///
/// # Safety
/// String arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mfg_run_config(
    config_path: *const c_char,
    out_path: *const c_char,
    all_converged: *mut i32,
) -> MfgStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_path(&c_path(config_path, "config_path")?).map_err(core_err)?;
        let out = if out_path.is_null() {
            cfg.output.clone()
        } else {
            c_path(out_path, "out_path")?
        };
        let summary = harness::run(&cfg, &out).map_err(core_err)?;
        if let Some(flag) = unsafe { all_converged.as_mut() } {
            *flag = summary.all_converged() as i32;
        }
        Ok(())
    })
}
