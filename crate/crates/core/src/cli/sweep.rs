//! Size/stepsize sweeps.
//!
//! A matrix file names a base scenario and the axes to vary:
//!
//! ```json
//! {
//!   "scenario": "desk_cm",
//!   "sizes": [[4, 4, 4], [10, 10, 8]],
//!   "stepsizes": ["armijo:0.4,0.85,1", "constant:0.05"],
//!   "solver": { "max_iters": 5000, "tol_objective": 1e-8 },
//!   "workers": 2
//! }
//! ```
//!
//! Sizes are `[n_rx, n_tx, n_samples]`. `scenario` is a bundled name, a path
//! (relative paths resolve against the matrix file), or an inline scenario.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{parse_json, ConstraintFile, ScenarioFile};
use super::run::{run, InitSource, RunSpec};
use crate::error::{Error, Result};
use crate::solver::{SolveConfig, StepsizeRule};

pub const WORKERS_ENV: &str = "MIMO_RGD_WORKERS";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Source(String),
    Inline(Box<ScenarioFile>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iters: Option<usize>,
    pub tol_objective: Option<f64>,
    pub stall_window: Option<usize>,
    pub tol_gradnorm: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: Option<u64>,
    pub record_trace: Option<bool>,
}

impl SolverOptions {
    fn apply(&self, mut config: SolveConfig) -> SolveConfig {
        if let Some(v) = self.max_iters {
            config.max_iters = v;
        }
        if let Some(v) = self.tol_objective {
            config.tol_objective = v;
        }
        if let Some(v) = self.stall_window {
            config.stall_window = v;
        }
        if let Some(v) = self.tol_gradnorm {
            config.tol_gradnorm = v;
        }
        if let Some(v) = self.gamma {
            config.gamma = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.record_trace {
            config.record_trace = v;
        }
        config
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepMatrix {
    pub scenario: ScenarioRef,
    pub sizes: Vec<[usize; 3]>,
    pub stepsizes: Vec<String>,
    /// Defaults to the base scenario's constraint.
    #[serde(default)]
    pub constraints: Option<Vec<ConstraintFile>>,
    #[serde(default)]
    pub solver: SolverOptions,
    /// `lfm` (default), `random`, or a waveform file path.
    #[serde(default)]
    pub init: Option<String>,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepMatrix {
    pub fn load(path: &Path) -> Result<SweepMatrix> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut matrix: SweepMatrix = parse_json(&text)?;
        // Resolve a relative scenario path against the matrix file.
        if let ScenarioRef::Source(src) = &matrix.scenario {
            let candidate = path.parent().map(|d| d.join(src));
            if let Some(c) = candidate.filter(|c| Path::new(src).is_relative() && c.exists()) {
                matrix.scenario = ScenarioRef::Source(c.display().to_string());
            }
        }
        Ok(matrix)
    }

    fn base(&self) -> Result<ScenarioFile> {
        match &self.scenario {
            ScenarioRef::Source(src) => ScenarioFile::load_source(src),
            ScenarioRef::Inline(file) => Ok((**file).clone()),
        }
    }

    /// Expands the axes in deterministic order: sizes, then constraints, then
    /// stepsizes.
    pub fn expand(&self, out_dir: &Path) -> Result<Vec<SweepCase>> {
        let base = self.base()?;
        let rules = self
            .stepsizes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.parse::<StepsizeRule>()
                    .map_err(|e| Error::config(format!("stepsizes[{i}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        if self.sizes.is_empty() || rules.is_empty() {
            return Err(Error::config("sizes", "sizes and stepsizes must be non-empty"));
        }
        let constraints = self
            .constraints
            .clone()
            .unwrap_or_else(|| vec![base.constraint.clone()]);
        let base_config = self.solver.apply(SolveConfig::default());
        base_config
            .validate()
            .map_err(|e| Error::config("solver", e.to_string()))?;
        let init = InitSource::parse(self.init.as_deref().unwrap_or("lfm"));

        let mut cases = Vec::new();
        for &[n_rx, n_tx, n_samples] in &self.sizes {
            for constraint in &constraints {
                for rule in &rules {
                    let index = cases.len();
                    let mut scenario = base.with_sizes(n_rx, n_tx, n_samples);
                    scenario.constraint = constraint.clone();
                    let dir_name = format!(
                        "{index:03}_{n_rx}x{n_tx}x{n_samples}_{}_{}",
                        constraint.kind(),
                        sanitize(&rule.to_string())
                    );
                    let mut spec = RunSpec::new(scenario, out_dir.join("runs").join(dir_name));
                    spec.solver = SolveConfig {
                        stepsize: *rule,
                        ..base_config.clone()
                    };
                    spec.init = init.clone();
                    cases.push(SweepCase { index, spec });
                }
            }
        }
        Ok(cases)
    }
}

fn sanitize(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepCase {
    pub index: usize,
    pub spec: RunSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub n_rx: usize,
    pub n_tx: usize,
    pub n_samples: usize,
    pub constraint: String,
    pub stepsize: String,
    pub gamma: f64,
    pub max_iters: usize,
    pub tol_objective: f64,
    pub stall_window: usize,
    pub tol_gradnorm: f64,
    pub seed: u64,
    pub status: String,
    pub termination: Option<String>,
    pub iterations: Option<usize>,
    pub wall_s: Option<f64>,
    pub initial_sinr_db: Option<f64>,
    pub final_sinr_db: Option<f64>,
    pub feasibility_residual: Option<f64>,
    pub run_dir: String,
    pub error: Option<String>,
}

fn execute(case: &SweepCase) -> SweepRow {
    let spec = &case.spec;
    let a = &spec.scenario.array;
    let mut row = SweepRow {
        index: case.index,
        n_rx: a.n_rx,
        n_tx: a.n_tx,
        n_samples: a.n_samples,
        constraint: spec.scenario.constraint.kind().into(),
        stepsize: spec.solver.stepsize.to_string(),
        gamma: spec.solver.gamma,
        max_iters: spec.solver.max_iters,
        tol_objective: spec.solver.tol_objective,
        stall_window: spec.solver.stall_window,
        tol_gradnorm: spec.solver.tol_gradnorm,
        seed: spec.solver.seed,
        status: "ok".into(),
        termination: None,
        iterations: None,
        wall_s: None,
        initial_sinr_db: None,
        final_sinr_db: None,
        feasibility_residual: None,
        run_dir: spec.out_dir.display().to_string(),
        error: None,
    };
    match run(spec) {
        Ok(out) => {
            let r = out.report;
            row.termination = Some(r.termination);
            row.iterations = Some(r.iterations);
            row.wall_s = Some(r.wall_time_s);
            row.initial_sinr_db = Some(r.initial_sinr_db);
            row.final_sinr_db = Some(r.final_sinr_db);
            row.feasibility_residual = Some(r.feasibility_residual);
        }
        Err(e) => {
            row.status = "error".into();
            row.error = Some(e.to_string());
        }
    }
    row
}

/// Worker count: explicit argument, then the environment, then the matrix
/// file, then 1.
pub fn resolve_workers(cli: Option<usize>, matrix: &SweepMatrix) -> Result<usize> {
    let env = match std::env::var(WORKERS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|e| Error::config(WORKERS_ENV, format!("`{v}`: {e}")))?,
        ),
        Err(_) => None,
    };
    let workers = cli.or(env).or(matrix.workers).unwrap_or(1);
    if workers == 0 {
        return Err(Error::config("workers", "worker count must be >= 1"));
    }
    Ok(workers)
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub table: PathBuf,
    pub workers: usize,
}

/// Runs every case, then writes `sweep.csv` ordered by case index. Failed
/// runs become rows with `status = error`.
pub fn sweep(matrix: &SweepMatrix, out_dir: &Path, workers: usize) -> Result<SweepOutput> {
    let cases = matrix.expand(out_dir)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let mut rows: Vec<SweepRow> = pool.install(|| cases.par_iter().map(execute).collect());
    rows.sort_by_key(|r| r.index);

    let table = out_dir.join(SWEEP_FILE);
    let mut w = csv::Writer::from_path(&table)?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(&table, e))?;
    Ok(SweepOutput {
        rows,
        table,
        workers,
    })
}

pub fn read_table(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
