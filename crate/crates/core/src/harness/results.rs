//! Result rows and the CSV results file.
//!
//! The file starts with a `# schema=1` line followed by a CSV header. Rows
//! are appended one complete line at a time and flushed, so a killed run
//! leaves every finished row readable; a torn trailing line is dropped on read.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{CouplingConfig, ExperimentConfig, InitialKind};
use crate::efficiency::EfficiencyReport;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const SCHEMA_LINE: &str = "# schema=1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ResultRow {
    pub index: usize,
    // config echo
    pub hamiltonian: String,
    pub n: usize,
    pub nt: usize,
    pub t0: f64,
    pub t_end: f64,
    pub coupling: String,
    pub kernel: String,
    pub frequency: f64,
    pub profile: String,
    pub moment: String,
    pub strength: f64,
    pub terminal: String,
    pub terminal_kernel: String,
    pub terminal_frequency: f64,
    pub terminal_profile: String,
    pub terminal_moment: String,
    pub terminal_strength: f64,
    pub initial: String,
    pub amplitude: f64,
    pub initial_frequency: f64,
    pub initial_path: String,
    pub damping: String,
    pub delta: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub descent_max_iters: usize,
    pub grad_tol: f64,
    pub memory: usize,
    pub epsilon: f64,
    pub h_samples: usize,
    pub seed: u64,
    // report
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
    pub duality_lhs: f64,
    pub duality_rhs: f64,
    pub duality_slack: f64,
    pub holder: f64,
    pub mfg_iterations: usize,
    pub fp_residual: f64,
    pub hjb_residual: f64,
    pub fpk_residual: f64,
    pub descent_iterations: usize,
    pub descent_grad_norm: f64,
    pub mfg_converged: bool,
    pub system_converged: bool,
    pub descent_converged: bool,
    pub planner_disagreement: bool,
    pub converged: bool,
    pub wall_time: f64,
    /// Empty unless the point failed outright.
    pub error: String,
}

fn label<T: Serialize>(v: &T) -> String {
    // unit enum variants serialize to their snake_case name
    toml::Value::try_from(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn echo_coupling(c: &CouplingConfig) -> (String, String, f64, String, String, f64) {
    (
        label(&c.kind),
        label(&c.kernel),
        c.frequency,
        label(&c.profile),
        label(&c.moment),
        c.strength,
    )
}

impl ResultRow {
    /// Row with the config echo filled in and every report value NaN.
    pub fn from_config(index: usize, cfg: &ExperimentConfig) -> Self {
        let (coupling, kernel, frequency, profile, moment, strength) = echo_coupling(&cfg.coupling);
        let (terminal, terminal_kernel, terminal_frequency, terminal_profile, terminal_moment, terminal_strength) =
            echo_coupling(&cfg.terminal);
        let nan = f64::NAN;
        Self {
            index,
            hamiltonian: cfg.hamiltonian.clone(),
            n: cfg.grid.n,
            nt: cfg.grid.nt,
            t0: cfg.grid.t0,
            t_end: cfg.grid.t_end,
            coupling,
            kernel,
            frequency,
            profile,
            moment,
            strength,
            terminal,
            terminal_kernel,
            terminal_frequency,
            terminal_profile,
            terminal_moment,
            terminal_strength,
            initial: label(&cfg.initial.kind),
            amplitude: cfg.initial.amplitude,
            initial_frequency: cfg.initial.frequency,
            initial_path: match cfg.initial.kind {
                InitialKind::File => cfg
                    .initial
                    .path
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
                _ => String::new(),
            },
            damping: label(&cfg.solver.damping),
            delta: cfg.solver.delta,
            max_iters: cfg.solver.max_iters,
            tol: cfg.solver.tol,
            descent_max_iters: cfg.descent.max_iters,
            grad_tol: cfg.descent.grad_tol,
            memory: cfg.descent.memory,
            epsilon: cfg.epsilon.unwrap_or(nan),
            h_samples: cfg.h_samples,
            seed: cfg.seed,
            cost_mfg: nan,
            cost_planner: nan,
            cost_planner_system: nan,
            gap: nan,
            lb_f: nan,
            lb_g: nan,
            ub_norm: nan,
            residual_f_sup: nan,
            residual_g_sup: nan,
            certificate: nan,
            duality_lhs: nan,
            duality_rhs: nan,
            duality_slack: nan,
            holder: nan,
            fp_residual: nan,
            hjb_residual: nan,
            fpk_residual: nan,
            descent_grad_norm: nan,
            wall_time: nan,
            ..Default::default()
        }
    }

    pub fn fill(&mut self, r: &EfficiencyReport) {
        self.epsilon = r.epsilon;
        self.cost_mfg = r.cost_mfg;
        self.cost_planner = r.cost_planner;
        self.cost_planner_system = r.cost_planner_system;
        self.gap = r.gap;
        self.lb_f = r.lb_f;
        self.lb_g = r.lb_g;
        self.ub_norm = r.ub_norm;
        self.residual_f_sup = r.residual_f_sup;
        self.residual_g_sup = r.residual_g_sup;
        self.certificate = r.certificate;
        self.duality_lhs = r.duality_lhs;
        self.duality_rhs = r.duality_rhs;
        self.duality_slack = r.duality_slack;
        self.holder = r.holder;
        self.mfg_iterations = r.mfg_iterations;
        self.fp_residual = r.fp_residual;
        self.hjb_residual = r.hjb_residual;
        self.fpk_residual = r.fpk_residual;
        self.descent_iterations = r.descent_iterations;
        self.descent_grad_norm = r.descent_grad_norm;
        self.mfg_converged = r.mfg_converged;
        self.system_converged = r.system_converged;
        self.descent_converged = r.descent_converged;
        self.planner_disagreement = r.planner_disagreement;
        self.converged = r.converged();
    }

    /// Numeric value of a column by header name.
    pub fn get(&self, column: &str) -> Option<f64> {
        let v = match column {
            "index" => self.index as f64,
            "n" => self.n as f64,
            "nt" => self.nt as f64,
            "t0" => self.t0,
            "t_end" => self.t_end,
            "frequency" => self.frequency,
            "strength" => self.strength,
            "terminal_frequency" => self.terminal_frequency,
            "terminal_strength" => self.terminal_strength,
            "amplitude" => self.amplitude,
            "initial_frequency" => self.initial_frequency,
            "delta" => self.delta,
            "max_iters" => self.max_iters as f64,
            "tol" => self.tol,
            "descent_max_iters" => self.descent_max_iters as f64,
            "grad_tol" => self.grad_tol,
            "memory" => self.memory as f64,
            "epsilon" => self.epsilon,
            "h_samples" => self.h_samples as f64,
            "seed" => self.seed as f64,
            "cost_mfg" => self.cost_mfg,
            "cost_planner" => self.cost_planner,
            "cost_planner_system" => self.cost_planner_system,
            "gap" => self.gap,
            "lb_f" => self.lb_f,
            "lb_g" => self.lb_g,
            "ub_norm" => self.ub_norm,
            "residual_f_sup" => self.residual_f_sup,
            "residual_g_sup" => self.residual_g_sup,
            "certificate" => self.certificate,
            "duality_lhs" => self.duality_lhs,
            "duality_rhs" => self.duality_rhs,
            "duality_slack" => self.duality_slack,
            "holder" => self.holder,
            "mfg_iterations" => self.mfg_iterations as f64,
            "fp_residual" => self.fp_residual,
            "hjb_residual" => self.hjb_residual,
            "fpk_residual" => self.fpk_residual,
            "descent_iterations" => self.descent_iterations as f64,
            "descent_grad_norm" => self.descent_grad_norm,
            "wall_time" => self.wall_time,
            _ => return None,
        };
        Some(v)
    }

    /// Equality of everything except the wall time; NaN matches NaN.
    pub fn same_results(&self, other: &ResultRow) -> bool {
        let mut a = self.clone();
        let mut b = other.clone();
        a.wall_time = 0.0;
        b.wall_time = 0.0;
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_record(&mut x, &a).is_ok() && write_record(&mut y, &b).is_ok() && x == y
    }
}

fn write_record(out: &mut Vec<u8>, row: &ResultRow) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

/// CSV header line (without the newline).
pub fn header() -> String {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.serialize(ResultRow::default()).expect("header serializes");
        w.flush().expect("in-memory flush");
    }
    let text = String::from_utf8(buf).expect("utf-8");
    text.lines().next().unwrap_or_default().to_string()
}

/// Single appender for a results file.
pub struct ResultWriter {
    file: File,
}

impl ResultWriter {
    /// Starts a fresh file.
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = File::create(path)?;
        writeln!(file, "{SCHEMA_LINE}\n{}", header())?;
        file.sync_data()?;
        Ok(Self { file })
    }

    /// Appends to an existing file, dropping a torn trailing line; creates it if missing.
    pub fn append(path: &Path) -> Result<Self> {
        if !path.exists() || std::fs::metadata(path)?.len() == 0 {
            return Self::create(path);
        }
        let mut file = OpenOptions::new().read(true).write(true).open(path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        check_preamble(&text)?;
        if !text.ends_with('\n') {
            let keep = text.rfind('\n').map_or(0, |i| i + 1);
            file.set_len(keep as u64)?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok(Self { file })
    }

    pub fn write(&mut self, row: &ResultRow) -> Result<()> {
        let mut buf = Vec::new();
        write_record(&mut buf, row)?;
        self.file.write_all(&buf)?;
        self.file.flush()?;
        Ok(())
    }
}

fn check_preamble(text: &str) -> Result<()> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.trim() == SCHEMA_LINE => {}
        Some(l) => return Err(Error::Results(format!("expected `{SCHEMA_LINE}`, found `{l}`"))),
        None => return Err(Error::Results("empty file".into())),
    }
    match lines.next() {
        Some(h) if h == header() => Ok(()),
        Some(_) => Err(Error::Results("header does not match schema 1".into())),
        None if !text.ends_with('\n') => Err(Error::Results("missing header".into())),
        None => Err(Error::Results("missing header".into())),
    }
}

/// Parses a results file; a torn final line (no trailing newline) is ignored.
pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path)?;
    parse_rows(&text)
}

pub fn parse_rows(text: &str) -> Result<Vec<ResultRow>> {
    check_preamble(text)?;
    let complete = match text.rfind('\n') {
        Some(i) if !text.ends_with('\n') => &text[..=i],
        _ => text,
    };
    let body = complete.split_once('\n').map_or("", |(_, rest)| rest);
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}
