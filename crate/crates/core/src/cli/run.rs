//! Single experiment runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::ScenarioFile;
use super::io;
use crate::ambiguity::{ambiguity_map, default_angles, default_ranges, slices, AmbiguityGrid};
use crate::error::{Error, Result};
use crate::manifolds::{random_feasible, Waveform};
use crate::solver::{final_residual, lfm_start, solve, SolveConfig, SolveResult};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum InitSource {
    Lfm,
    /// Uniform feasible draw seeded by the solver seed.
    Random,
    File(PathBuf),
}

impl InitSource {
    /// `lfm`, `random`, or a path to a waveform file.
    pub fn parse(text: &str) -> InitSource {
        match text {
            "lfm" => InitSource::Lfm,
            "random" => InitSource::Random,
            path => InitSource::File(PathBuf::from(path)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            InitSource::Lfm => "lfm".into(),
            InitSource::Random => "random".into(),
            InitSource::File(p) => p.display().to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub scenario: ScenarioFile,
    pub solver: SolveConfig,
    pub out_dir: PathBuf,
    pub init: InitSource,
    pub ambiguity: bool,
    pub slices: bool,
}

impl RunSpec {
    pub fn new(scenario: ScenarioFile, out_dir: impl Into<PathBuf>) -> Self {
        RunSpec {
            scenario,
            solver: SolveConfig::default(),
            out_dir: out_dir.into(),
            init: InitSource::Lfm,
            ambiguity: false,
            slices: false,
        }
    }
}

/// Solver settings as echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverEcho {
    pub stepsize: String,
    pub gamma: f64,
    pub max_iters: usize,
    pub tol_objective: f64,
    pub stall_window: usize,
    pub tol_gradnorm: f64,
    pub seed: u64,
    pub init: String,
    pub record_trace: bool,
    /// Plain-language statement of the stopping rule in force.
    pub stopping_rule: String,
}

impl SolverEcho {
    pub fn new(config: &SolveConfig, init: &InitSource) -> Self {
        SolverEcho {
            stepsize: config.stepsize.to_string(),
            gamma: config.gamma,
            max_iters: config.max_iters,
            tol_objective: config.tol_objective,
            stall_window: config.stall_window,
            tol_gradnorm: config.tol_gradnorm,
            seed: config.seed,
            init: init.describe(),
            record_trace: config.record_trace,
            stopping_rule: stopping_rule(config),
        }
    }
}

pub fn stopping_rule(config: &SolveConfig) -> String {
    format!(
        "stop when relative decrease of g < {} for {} consecutive iterations, \
         or Riemannian gradient norm <= {}, or after {} iterations \
         (tool default rule, not taken from a reference)",
        io::fmt_f64(config.tol_objective),
        config.stall_window,
        io::fmt_f64(config.tol_gradnorm),
        config.max_iters
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub timestamp: String,
    pub scenario: ScenarioFile,
    pub solver: SolverEcho,
    pub constraint: String,
    pub termination: String,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub initial_sinr_db: f64,
    pub final_sinr_db: f64,
    pub feasibility_residual: f64,
    pub artifacts: Vec<Artifact>,
}

impl RunReport {
    pub fn load(path: &Path) -> Result<RunReport> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        super::config::parse_json(&text)
    }

    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}

/// Everything a run produced, in memory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub result: SolveResult,
    pub ambiguity: Option<AmbiguityGrid>,
}

pub const SCENARIO_FILE: &str = "scenario.json";
pub const WAVEFORM_FILE: &str = "waveform.txt";
pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_FILE: &str = "report.json";
pub const AMBIGUITY_CSV: &str = "ambiguity.csv";
pub const AMBIGUITY_JSON: &str = "ambiguity.json";
pub const SLICES_FILE: &str = "slices.csv";

fn initial_waveform(spec: &RunSpec, scenario: &crate::Scenario) -> Result<Waveform> {
    let constraint = Arc::new(scenario.constraint.clone());
    match &spec.init {
        InitSource::Lfm => lfm_start(&scenario.array, &constraint),
        InitSource::Random => random_feasible(&constraint, scenario.array.waveform_len(), spec.solver.seed),
        InitSource::File(path) => {
            let data = io::read_waveform(path)?;
            if data.len() != scenario.array.waveform_len() {
                return Err(Error::config(
                    "init",
                    format!(
                        "{} holds {} entries, expected N_t·N = {}",
                        path.display(),
                        data.len(),
                        scenario.array.waveform_len()
                    ),
                ));
            }
            Waveform::new(data, constraint)
        }
    }
}

/// Solves, writes every artifact into `spec.out_dir`, and returns the report.
pub fn run(spec: &RunSpec) -> Result<RunOutput> {
    let resolved = spec.scenario.resolved()?;
    let scenario = resolved.to_scenario()?;
    spec.solver.validate()?;
    let init = initial_waveform(spec, &scenario)?;

    fs::create_dir_all(&spec.out_dir).map_err(|e| Error::io(&spec.out_dir, e))?;
    let result = solve(&scenario, &spec.solver, Some(init))?;

    let dir = &spec.out_dir;
    let mut written: Vec<&str> = Vec::new();

    fs::write(dir.join(SCENARIO_FILE), resolved.to_json_string() + "\n")
        .map_err(|e| Error::io(dir.join(SCENARIO_FILE), e))?;
    written.push(SCENARIO_FILE);
    io::write_waveform(&dir.join(WAVEFORM_FILE), &result.waveform.data)?;
    written.push(WAVEFORM_FILE);
    if spec.solver.record_trace {
        io::write_trace(&dir.join(TRACE_FILE), &result.trace)?;
        written.push(TRACE_FILE);
    }

    let mut grid = None;
    if spec.ambiguity || spec.slices {
        let mut angles = default_angles();
        let target_angle = scenario.target.angle;
        if !angles.iter().any(|a| (a - target_angle).abs() <= 1e-9) {
            angles.push(target_angle);
            angles.sort_by(f64::total_cmp);
        }
        let g = ambiguity_map(
            &scenario.array,
            &result.waveform.data,
            &result.filter,
            &default_ranges(&scenario.array),
            &angles,
        )?;
        if spec.ambiguity {
            let csv_path = dir.join(AMBIGUITY_CSV);
            fs::write(&csv_path, g.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
            io::write_json(&dir.join(AMBIGUITY_JSON), &g.to_json())?;
            written.extend([AMBIGUITY_CSV, AMBIGUITY_JSON]);
        }
        if spec.slices {
            write_slices(&dir.join(SLICES_FILE), &g, scenario.target.range_bin, target_angle)?;
            written.push(SLICES_FILE);
        }
        grid = Some(g);
    }

    let mut artifacts = Vec::new();
    for name in written {
        artifacts.push(artifact(dir, name)?);
    }
    let mut report = RunReport {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        scenario: resolved,
        solver: SolverEcho::new(&spec.solver, &spec.init),
        constraint: scenario.constraint.name().into(),
        termination: result.termination.as_str().into(),
        iterations: result.iterations,
        wall_time_s: result.wall_time_s,
        initial_sinr_db: result.initial_sinr_db,
        final_sinr_db: result.final_sinr_db,
        feasibility_residual: final_residual(&result),
        artifacts,
    };
    let report_path = dir.join(REPORT_FILE);
    // The manifest lists the report itself; iterate until its recorded size
    // matches the serialized length.
    report.artifacts.push(Artifact {
        name: REPORT_FILE.into(),
        path: report_path.display().to_string(),
        bytes: 0,
    });
    let mut text = String::new();
    for _ in 0..8 {
        text = serde_json::to_string_pretty(&report)? + "\n";
        let last = report.artifacts.last_mut().expect("report entry pushed");
        if last.bytes == text.len() as u64 {
            break;
        }
        last.bytes = text.len() as u64;
    }
    fs::write(&report_path, &text).map_err(|e| Error::io(&report_path, e))?;

    Ok(RunOutput {
        report,
        result,
        ambiguity: grid,
    })
}

fn artifact(dir: &Path, name: &str) -> Result<Artifact> {
    let path = dir.join(name);
    let bytes = fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
    Ok(Artifact {
        name: name.into(),
        path: path.display().to_string(),
        bytes,
    })
}

/// Long-format slice table: `cut,coordinate,value_db`, where `cut` is
/// `angle_deg` for the cut at the target range and `range_bin` for the cut
/// at the target angle.
fn write_slices(path: &Path, grid: &AmbiguityGrid, range: usize, angle: f64) -> Result<()> {
    let cuts = slices(grid, range, angle)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cut", "coordinate", "value_db", "at"])?;
    let at_range = format!("range_bin={range}");
    let at_angle = format!("angle_deg={}", angle.to_degrees());
    for (a, v) in grid.angles.iter().zip(&cuts.angle_slice_db) {
        w.write_record(["angle_deg", &a.to_degrees().to_string(), &v.to_string(), &at_range])?;
    }
    for (r, v) in grid.ranges.iter().zip(&cuts.range_slice_db) {
        w.write_record(["range_bin", &r.to_string(), &v.to_string(), &at_angle])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
