use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mfg_core::harness::{self, ExperimentConfig};
use mfg_core::{mfg, planner, Error, Grid, ScalarPath, VectorPath};

#[derive(Parser)]
#[command(name = "mfg", version, about = "Mean field game equilibria, planner optima and their inefficiency gap")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output path; defaults to `output` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    System,
    Descent,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the equilibrium and write the fields (level, t, x, m, u, alpha).
    SolveMfg(Common),
    /// Solve the planner problem and write its fields.
    SolvePlanner {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "descent")]
        method: MethodArg,
    },
    /// Full efficiency report for the base point (the sweep is ignored).
    Report(Common),
    /// Run every sweep point and write the results file.
    Sweep(Common),
    /// Log-log fit over a results file; writes `key = value` lines.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Results file; defaults to `output` from the config.
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        y: Option<String>,
    },
    /// Plot series from a results file into the `--out` directory.
    Emit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long)]
        x: Option<String>,
        #[arg(long, value_delimiter = ',')]
        y: Vec<String>,
    },
}

enum Failure {
    Config(String),
    NotConverged,
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            e => Failure::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let cfg = ExperimentConfig::from_path(&common.config)?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output.clone());
    Ok((cfg, out))
}

fn write_fields(
    out: &Path,
    grid: &Grid,
    m: &ScalarPath,
    u: &ScalarPath,
    alpha: &VectorPath,
) -> Result<(), Failure> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(out)?);
    writeln!(w, "level,t,x,m,u,alpha")?;
    for k in 0..grid.levels() {
        for i in 0..grid.n() {
            writeln!(
                w,
                "{k},{},{},{},{},{}",
                grid.time(k),
                grid.coord(i),
                m.level(k)[i],
                u.level(k)[i],
                alpha.level(k)[i]
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::SolveMfg(common) => {
            let (cfg, out) = load(&common)?;
            let problem = cfg.build_problem()?;
            let sol = mfg::solve_mfg(&problem, &cfg.solver.params())?;
            write_fields(&out, &problem.grid, sol.m.path(), &sol.u, &sol.alpha_star)?;
            println!(
                "iterations = {}\nconverged = {}\nfp_residual = {:e}\nhjb_residual = {:e}\nfpk_residual = {:e}",
                sol.iterations, sol.converged, sol.fp_residual, sol.hjb_residual, sol.fpk_residual
            );
            if !sol.converged {
                return Err(Failure::NotConverged);
            }
        }
        Command::SolvePlanner { common, method } => {
            let (cfg, out) = load(&common)?;
            let problem = cfg.build_problem()?;
            let sol = match method {
                MethodArg::System => planner::solve_planner_system(&problem, &cfg.solver.params())?,
                MethodArg::Descent => {
                    planner::solve_planner_descent(&problem, &cfg.solver.params(), &cfg.descent.params())?
                }
            };
            write_fields(&out, &problem.grid, sol.m_hat.path(), &sol.u_hat, &sol.alpha_hat)?;
            println!(
                "method = {}\ncost = {:e}\niterations = {}\nconverged = {}",
                sol.method.as_str(),
                sol.cost,
                sol.iterations,
                sol.converged
            );
            if !sol.converged {
                return Err(Failure::NotConverged);
            }
        }
        Command::Report(common) => {
            let (mut cfg, out) = load(&common)?;
            cfg.sweep = None;
            finish_run(&cfg, &out)?;
        }
        Command::Sweep(common) => {
            let (cfg, out) = load(&common)?;
            finish_run(&cfg, &out)?;
        }
        Command::Fit { common, results, x, y } => {
            let (cfg, out) = load(&common)?;
            let spec = cfg.fit.clone();
            let x = x.or_else(|| spec.as_ref().map(|f| f.x.clone()));
            let y = y.or_else(|| spec.as_ref().map(|f| f.y.clone()));
            let (Some(x), Some(y)) = (x, y) else {
                return Err(Failure::Config("config error at `fit`: need x and y columns".into()));
            };
            let rows = harness::read_rows(&results.unwrap_or_else(|| cfg.output.clone()))?;
            let fit = harness::fit_scaling(&rows, &x, &y)?;
            let text = format!(
                "x = {x:?}\ny = {y:?}\nslope = {}\nintercept = {}\nr2 = {}\nused = {}\n",
                fit.slope, fit.intercept, fit.r2, fit.used
            );
            std::fs::write(&out, &text)?;
            print!("{text}");
        }
        Command::Emit { common, results, x, y } => {
            let (cfg, out) = load(&common)?;
            let spec = cfg.plot.clone();
            let x = x.or_else(|| spec.as_ref().map(|p| p.x.clone()));
            let y = if y.is_empty() { spec.map(|p| p.y).unwrap_or_default() } else { y };
            let Some(x) = x.filter(|_| !y.is_empty()) else {
                return Err(Failure::Config("config error at `plot`: need x and y columns".into()));
            };
            let rows = harness::read_rows(&results.unwrap_or_else(|| cfg.output.clone()))?;
            for f in harness::emit_plotdata(&rows, &x, &y, &out)? {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn finish_run(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let summary = harness::run(cfg, out)?;
    for r in &summary.rows {
        println!(
            "[{}] gap = {:e}  certificate = {:e}  ub_norm = {:e}  converged = {}{}",
            r.index,
            r.gap,
            r.certificate,
            r.ub_norm,
            r.converged,
            if r.error.is_empty() { String::new() } else { format!("  error: {}", r.error) }
        );
    }
    if summary.all_converged() {
        Ok(())
    } else {
        Err(Failure::NotConverged)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::NotConverged) => {
            eprintln!("error: at least one point did not converge; results were written");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
