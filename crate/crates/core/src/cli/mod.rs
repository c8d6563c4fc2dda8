//! Scenario files, experiment runs, sweeps, and the command-line front end.

pub mod config;
pub mod io;
pub mod run;
pub mod sweep;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;
use crate::solver::{SolveConfig, StepsizeRule};
use config::ScenarioFile;
use run::{InitSource, RunSpec};

#[derive(Debug, Parser)]
#[command(name = "mimo-rgd", version, about = "Joint MIMO radar waveform/filter design by Riemannian gradient descent")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design a waveform/filter pair for one scenario.
    Run(RunArgs),
    /// Run a grid of sizes and stepsize rules.
    Sweep(SweepArgs),
    /// List bundled scenarios, or print one.
    Scenarios {
        name: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario JSON file or bundled scenario name.
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the range-angle response grid.
    #[arg(long)]
    pub ambiguity: bool,
    /// Write range and angle cuts through the target cell.
    #[arg(long)]
    pub slices: bool,
    /// `lfm`, `random`, or a waveform file.
    #[arg(long, default_value = "lfm")]
    pub init: String,
    /// `constant:ALPHA` or `armijo:TAU,BETA,SIGMA[,MAX_BACKTRACKS]`.
    #[arg(long, default_value = "armijo:0.4,0.85,1")]
    pub stepsize: StepsizeRule,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol_obj: Option<f64>,
    #[arg(long)]
    pub stall_window: Option<usize>,
    #[arg(long)]
    pub tol_grad: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Skip the per-iteration trace.
    #[arg(long)]
    pub no_trace: bool,
}

impl RunArgs {
    pub fn to_spec(&self) -> Result<RunSpec> {
        let scenario = ScenarioFile::load_source(&self.scenario)?;
        let d = SolveConfig::default();
        let solver = SolveConfig {
            stepsize: self.stepsize,
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            tol_objective: self.tol_obj.unwrap_or(d.tol_objective),
            stall_window: self.stall_window.unwrap_or(d.stall_window),
            tol_gradnorm: self.tol_grad.unwrap_or(d.tol_gradnorm),
            gamma: self.gamma.unwrap_or(d.gamma),
            record_trace: !self.no_trace,
            seed: self.seed.unwrap_or(d.seed),
        };
        let init = InitSource::parse(&self.init);
        if let InitSource::File(path) = &init {
            if !path.is_file() {
                return Err(crate::Error::config(
                    "init",
                    format!("{} is not a file (expected lfm, random, or a path)", path.display()),
                ));
            }
        }
        Ok(RunSpec {
            scenario,
            solver,
            out_dir: self.out.clone(),
            init,
            ambiguity: self.ambiguity,
            slices: self.slices,
        })
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the environment and the matrix file.
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Executes a parsed command line, returning what to print on stdout.
pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Run(args) => {
            let spec = args.to_spec()?;
            let out = run::run(&spec)?;
            let r = &out.report;
            Ok(format!(
                "{}: {} after {} iterations in {:.3} s; SINR {:.4} dB -> {:.4} dB; report {}",
                r.constraint,
                r.termination,
                r.iterations,
                r.wall_time_s,
                r.initial_sinr_db,
                r.final_sinr_db,
                spec.out_dir.join(run::REPORT_FILE).display()
            ))
        }
        Command::Sweep(args) => {
            let matrix = sweep::SweepMatrix::load(&args.matrix)?;
            let workers = sweep::resolve_workers(args.workers, &matrix)?;
            let out = sweep::sweep(&matrix, &args.out, workers)?;
            let failed = out.rows.iter().filter(|r| r.status != "ok").count();
            Ok(format!(
                "{} runs ({} failed) on {} workers; table {}",
                out.rows.len(),
                failed,
                out.workers,
                out.table.display()
            ))
        }
        Command::Scenarios { name: None } => Ok(config::BUNDLED
            .iter()
            .map(|(n, _)| *n)
            .collect::<Vec<_>>()
            .join("\n")),
        Command::Scenarios { name: Some(name) } => config::bundled_scenario(&name)
            .map(|t| t.trim_end().to_string())
            .ok_or_else(|| crate::Error::config("scenario", format!("no bundled scenario `{name}`"))),
    }
}
