//! Experiment configuration (TOML).
//!
//! ```toml
//! seed = 0
//! output = "results.csv"
//! epsilon = 0.015625        # optional
//! h_samples = 32
//!
//! [grid]
//! n = 128
//! nt = 256
//! t0 = 0.0
//! t_end = 0.25
//! nt_per_n = 2              # optional; nt follows n in sweeps
//!
//! hamiltonian = "quadratic"  # top-level key, listed before the tables
//!
//! [coupling]
//! kind = "potential"        # zero | static_cos | convolution | efficient | potential | xfree
//! strength = 0.5
//! kernel = "cos_diff"       # cos_diff | cos_product
//! frequency = 1.0
//! profile = "quadratic"     # xfree only: quadratic | linear
//! moment = "cos"            # xfree only: cos | constant
//!
//! [terminal]                # same keys as [coupling]; omitted means zero
//! kind = "zero"
//!
//! [initial]
//! kind = "cosine"           # uniform | cosine | file
//! amplitude = 0.5
//! frequency = 1.0
//! path = "m0.txt"           # file only: whitespace-separated values
//!
//! [solver]
//! damping = "fixed"         # fixed | averaging | fictitious_play
//! delta = 1.0
//! max_iters = 500
//! tol = 1e-8
//!
//! [descent]
//! max_iters = 2000
//! grad_tol = 1e-10
//! memory = 8
//!
//! [sweep]
//! parameter = "strength"    # strength | terminal_strength | n | nt | t_end | amplitude | tol
//! values = [0.125, 0.25, 0.5, 1.0]
//!
//! [fit]
//! x = "strength"
//! y = "gap"
//!
//! [plot]
//! x = "strength"
//! y = ["gap", "certificate"]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::efficiency::ReportParams;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mfg::{Damping, SolverParams};
use crate::model::{cosine_density, uniform_density, Coupling, Hamiltonian, Kernel, Moment, Problem, Profile};
use crate::planner::DescentParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_h_samples")]
    pub h_samples: usize,
    #[serde(default = "default_hamiltonian")]
    pub hamiltonian: String,
    pub grid: GridConfig,
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub terminal: CouplingConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub descent: DescentConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub plot: Option<PlotConfig>,
}

fn default_output() -> PathBuf {
    PathBuf::from("results.csv")
}

fn default_h_samples() -> usize {
    32
}

fn default_hamiltonian() -> String {
    "quadratic".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub nt: usize,
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    #[serde(default)]
    pub nt_per_n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKindName {
    Zero,
    StaticCos,
    Convolution,
    Efficient,
    Potential,
    Xfree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    CosDiff,
    CosProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Quadratic,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentName {
    Cos,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub kind: CouplingKindName,
    #[serde(default = "one")]
    pub strength: f64,
    #[serde(default = "default_kernel")]
    pub kernel: KernelName,
    #[serde(default = "one")]
    pub frequency: f64,
    #[serde(default = "default_profile")]
    pub profile: ProfileName,
    #[serde(default = "default_moment")]
    pub moment: MomentName,
}

fn one() -> f64 {
    1.0
}

fn default_kernel() -> KernelName {
    KernelName::CosDiff
}

fn default_profile() -> ProfileName {
    ProfileName::Quadratic
}

fn default_moment() -> MomentName {
    MomentName::Cos
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            kind: CouplingKindName::Zero,
            strength: 1.0,
            kernel: default_kernel(),
            frequency: 1.0,
            profile: default_profile(),
            moment: default_moment(),
        }
    }
}

impl CouplingConfig {
    pub fn build(&self) -> Coupling {
        let f = self.frequency;
        let kernel = match self.kernel {
            KernelName::CosDiff => Kernel::CosDiff { frequency: f },
            KernelName::CosProduct => Kernel::CosProduct { frequency: f },
        };
        let lambda = self.strength;
        match self.kind {
            CouplingKindName::Zero => Coupling::zero(),
            CouplingKindName::StaticCos => Coupling::static_field(
                std::sync::Arc::new(move |x: f64| (2.0 * std::f64::consts::PI * f * x).cos()),
                lambda,
            ),
            CouplingKindName::Convolution => Coupling::convolution(kernel, lambda),
            CouplingKindName::Efficient => Coupling::efficient(kernel, lambda),
            CouplingKindName::Potential => Coupling::potential(kernel, lambda),
            CouplingKindName::Xfree => {
                let profile = match self.profile {
                    ProfileName::Quadratic => Profile::Quadratic,
                    ProfileName::Linear => Profile::Linear,
                };
                let moment = match self.moment {
                    MomentName::Cos => Moment::Cos { frequency: f },
                    MomentName::Constant => Moment::Constant(1.0),
                };
                Coupling::xfree(profile, moment, lambda)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Uniform,
    Cosine,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: InitialKind,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub frequency: f64,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingName {
    Fixed,
    Averaging,
    FictitiousPlay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_damping")]
    pub damping: DampingName,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_damping() -> DampingName {
    DampingName::Fixed
}

fn default_max_iters() -> usize {
    SolverParams::default().max_iters
}

fn default_tol() -> f64 {
    SolverParams::default().tol
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            damping: default_damping(),
            delta: 1.0,
            max_iters: default_max_iters(),
            tol: default_tol(),
        }
    }
}

impl SolverConfig {
    pub fn params(&self) -> SolverParams {
        let damping = match self.damping {
            DampingName::Fixed => Damping::Fixed(self.delta),
            DampingName::Averaging => Damping::Averaging,
            DampingName::FictitiousPlay => Damping::FictitiousPlay,
        };
        SolverParams {
            damping,
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentConfig {
    #[serde(default = "default_descent_iters")]
    pub max_iters: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_memory")]
    pub memory: usize,
}

fn default_descent_iters() -> usize {
    DescentParams::default().max_iters
}

fn default_grad_tol() -> f64 {
    DescentParams::default().grad_tol
}

fn default_memory() -> usize {
    DescentParams::default().memory
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            max_iters: default_descent_iters(),
            grad_tol: default_grad_tol(),
            memory: default_memory(),
        }
    }
}

impl DescentConfig {
    pub fn params(&self) -> DescentParams {
        DescentParams {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            memory: self.memory,
            ..DescentParams::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Strength,
    TerminalStrength,
    N,
    Nt,
    TEnd,
    Amplitude,
    Tol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub x: String,
    pub y: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotConfig {
    pub x: String,
    pub y: Vec<String>,
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the path of the offending field.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // relative paths inside the file resolve against its directory
        if let Some(dir) = path.parent() {
            if let Some(p) = cfg.initial.path.as_mut() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.hamiltonian != "quadratic" {
            return Err(Error::config(
                "hamiltonian",
                format!("unknown hamiltonian `{}` (known: quadratic)", self.hamiltonian),
            ));
        }
        if self.grid.n < 3 {
            return Err(Error::config("grid.n", "need at least 3 points"));
        }
        if self.grid.nt == 0 {
            return Err(Error::config("grid.nt", "need at least one time step"));
        }
        if !(self.grid.t_end > self.grid.t0) {
            return Err(Error::config("grid.t_end", "must exceed grid.t0"));
        }
        for (path, c) in [("coupling", &self.coupling), ("terminal", &self.terminal)] {
            if !c.strength.is_finite() {
                return Err(Error::config(format!("{path}.strength"), "must be finite"));
            }
        }
        match self.initial.kind {
            InitialKind::Cosine if !(self.initial.amplitude.abs() < 1.0) => {
                return Err(Error::config(
                    "initial.amplitude",
                    "|amplitude| must be < 1 to keep the density positive",
                ))
            }
            InitialKind::File if self.initial.path.is_none() => {
                return Err(Error::config("initial.path", "required for kind = \"file\""))
            }
            _ => {}
        }
        match self.solver.damping {
            DampingName::Fixed if !(self.solver.delta > 0.0 && self.solver.delta <= 1.0) => {
                return Err(Error::config("solver.delta", "must lie in (0, 1]"))
            }
            _ => {}
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::config("solver.tol", "must be > 0"));
        }
        if self.h_samples == 0 {
            return Err(Error::config("h_samples", "must be >= 1"));
        }
        if let Some(eps) = self.epsilon {
            let half = (self.grid.t_end - self.grid.t0) / 2.0;
            if !(eps > 0.0 && eps < half) {
                return Err(Error::config("epsilon", format!("must lie in (0, {half})")));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::config("sweep.values", "empty sweep"));
            }
            for (i, v) in s.values.iter().enumerate() {
                let path = format!("sweep.values[{i}]");
                let integral = matches!(s.parameter, SweepParameter::N | SweepParameter::Nt);
                if !v.is_finite() || (integral && (v.fract() != 0.0 || *v < 1.0)) {
                    return Err(Error::config(path, format!("invalid value {v} for {:?}", s.parameter)));
                }
            }
        }
        Ok(())
    }

    /// One config per sweep value, or `[self]` without a sweep.
    pub fn expand(&self) -> Vec<ExperimentConfig> {
        let Some(sweep) = &self.sweep else {
            return vec![self.clone()];
        };
        sweep
            .values
            .iter()
            .map(|&v| {
                let mut c = self.clone();
                c.sweep = None;
                match sweep.parameter {
                    SweepParameter::Strength => c.coupling.strength = v,
                    SweepParameter::TerminalStrength => c.terminal.strength = v,
                    SweepParameter::N => {
                        c.grid.n = v as usize;
                        if let Some(r) = c.grid.nt_per_n {
                            c.grid.nt = r * c.grid.n;
                        }
                    }
                    SweepParameter::Nt => c.grid.nt = v as usize,
                    SweepParameter::TEnd => c.grid.t_end = v,
                    SweepParameter::Amplitude => c.initial.amplitude = v,
                    SweepParameter::Tol => c.solver.tol = v,
                }
                c
            })
            .collect()
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Grid::one_d(self.grid.n, self.grid.t0, self.grid.t_end, self.grid.nt)
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let grid = self.build_grid()?;
        let m0 = match self.initial.kind {
            InitialKind::Uniform => uniform_density(&grid),
            InitialKind::Cosine => cosine_density(&grid, self.initial.amplitude, self.initial.frequency)?,
            InitialKind::File => {
                let path = self.initial.path.as_ref().expect("validated");
                read_density(path, grid.n())?
            }
        };
        Problem::new(
            grid,
            Hamiltonian::quadratic(),
            self.coupling.build(),
            self.terminal.build(),
            m0,
        )
    }

    pub fn report_params(&self) -> ReportParams {
        ReportParams {
            solver: self.solver.params(),
            descent: self.descent.params(),
            epsilon: self.epsilon,
            h_samples: self.h_samples,
        }
    }
}

fn read_density(path: &Path, n: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("initial.path", format!("{}: {e}", path.display())))?;
    let values = text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::config("initial.path", format!("{}: {e}", path.display())))?;
    if values.len() != n {
        return Err(Error::config(
            "initial.path",
            format!("{} holds {} values, grid has {n} points", path.display(), values.len()),
        ));
    }
    Ok(values)
}
