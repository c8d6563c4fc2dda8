//! Python bindings: scenarios, the SINR objective, the RGD solver and the
//! ambiguity surface. Complex vectors cross the boundary as `list[complex]`.

use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mimo_rgd::ambiguity::{ambiguity_map, default_angles, default_ranges};
use mimo_rgd::cli::config::{ScenarioFile, BUNDLED};
use mimo_rgd::cli::run::{run as run_experiment, InitSource, RunSpec};
use mimo_rgd::manifolds::{feasibility_residual, random_feasible, retract as retract_onto, Waveform};
use mimo_rgd::objective::{self, ProblemOperators, ReceiveFilter};
use mimo_rgd::solver::{self, SolveConfig, StepsizeRule};
use mimo_rgd::{CVector, Error};

fn py_err(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyOSError::new_err(err.to_string()),
        Error::BacktrackExhausted { .. } => PyRuntimeError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn cvec(values: Vec<Complex64>) -> CVector {
    CVector::from_vec(values)
}

fn to_list(v: &CVector) -> Vec<Complex64> {
    v.iter().copied().collect()
}

/// A validated scenario, built from JSON text, a file, or a bundled name.
#[pyclass(name = "Scenario", module = "mimo_rgd_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    file: ScenarioFile,
    scenario: mimo_rgd::Scenario,
}

impl PyScenario {
    fn from_file(file: ScenarioFile) -> PyResult<Self> {
        let file = file.resolved().map_err(py_err)?;
        let scenario = file.to_scenario().map_err(py_err)?;
        Ok(PyScenario { file, scenario })
    }

    fn operators(&self, gamma: f64) -> PyResult<ProblemOperators> {
        ProblemOperators::from_scenario(&self.scenario, gamma).map_err(py_err)
    }
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::from_file(ScenarioFile::from_json_str(text).map_err(py_err)?)
    }

    /// Bundled scenario name or path to a JSON file.
    #[staticmethod]
    fn load(source: &str) -> PyResult<Self> {
        Self::from_file(ScenarioFile::load_source(source).map_err(py_err)?)
    }

    #[staticmethod]
    fn bundled_names() -> Vec<&'static str> {
        BUNDLED.iter().map(|(n, _)| *n).collect()
    }

    /// Same scenario with different array sizes.
    fn with_sizes(&self, n_rx: usize, n_tx: usize, n_samples: usize) -> PyResult<Self> {
        Self::from_file(self.file.with_sizes(n_rx, n_tx, n_samples))
    }

    fn to_json(&self) -> String {
        self.file.to_json_string()
    }

    #[getter]
    fn n_tx(&self) -> usize {
        self.scenario.array.n_tx
    }

    #[getter]
    fn n_rx(&self) -> usize {
        self.scenario.array.n_rx
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.scenario.array.n_samples
    }

    #[getter]
    fn waveform_len(&self) -> usize {
        self.scenario.array.waveform_len()
    }

    #[getter]
    fn filter_len(&self) -> usize {
        self.scenario.array.filter_len()
    }

    #[getter]
    fn constraint(&self) -> &'static str {
        self.scenario.constraint.name()
    }

    fn __repr__(&self) -> String {
        let a = &self.scenario.array;
        format!(
            "Scenario(n_tx={}, n_rx={}, n_samples={}, interferers={}, constraint={:?})",
            a.n_tx,
            a.n_rx,
            a.n_samples,
            self.scenario.interferers.len(),
            self.scenario.constraint.name()
        )
    }
}

/// LFM starting waveform mapped onto the scenario's constraint.
#[pyfunction]
fn lfm_init(scenario: &PyScenario) -> PyResult<Vec<Complex64>> {
    let constraint = Arc::new(scenario.scenario.constraint.clone());
    let w = solver::lfm_start(&scenario.scenario.array, &constraint).map_err(py_err)?;
    Ok(to_list(&w.data))
}

/// Seeded random feasible waveform.
#[pyfunction]
#[pyo3(signature = (scenario, seed=0))]
fn random_init(scenario: &PyScenario, seed: u64) -> PyResult<Vec<Complex64>> {
    let constraint = Arc::new(scenario.scenario.constraint.clone());
    let w = random_feasible(&constraint, scenario.scenario.array.waveform_len(), seed).map_err(py_err)?;
    Ok(to_list(&w.data))
}

/// Nearest point of the scenario's constraint set.
#[pyfunction]
fn retract(scenario: &PyScenario, z: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    let constraint = Arc::new(scenario.scenario.constraint.clone());
    let w = retract_onto(&cvec(z), &constraint).map_err(py_err)?;
    Ok(to_list(&w.data))
}

#[pyfunction]
fn residual(scenario: &PyScenario, s: Vec<Complex64>) -> f64 {
    feasibility_residual(&cvec(s), &scenario.scenario.constraint)
}

#[pyfunction]
#[pyo3(signature = (scenario, s, gamma=0.0))]
fn tx_objective(scenario: &PyScenario, s: Vec<Complex64>, gamma: f64) -> PyResult<f64> {
    objective::tx_objective(&scenario.operators(gamma)?, &cvec(s)).map_err(py_err)
}

/// Euclidean gradient, scaled so that `dg = Re<grad, ds>`.
#[pyfunction]
#[pyo3(signature = (scenario, s, gamma=0.0))]
fn tx_gradient(scenario: &PyScenario, s: Vec<Complex64>, gamma: f64) -> PyResult<Vec<Complex64>> {
    let g = objective::tx_gradient(&scenario.operators(gamma)?, &cvec(s)).map_err(py_err)?;
    Ok(to_list(&g))
}

#[pyfunction]
fn rx_optimal(scenario: &PyScenario, s: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    let w = objective::rx_optimal(&scenario.operators(0.0)?, &cvec(s)).map_err(py_err)?;
    Ok(to_list(&w.data))
}

#[pyfunction]
fn sinr_db(scenario: &PyScenario, s: Vec<Complex64>, w: Vec<Complex64>) -> PyResult<f64> {
    let w = ReceiveFilter { data: cvec(w) };
    objective::sinr_db(&scenario.operators(0.0)?, &cvec(s), &w).map_err(py_err)
}

fn solve_config(
    stepsize: &str,
    max_iters: usize,
    tol_obj: f64,
    tol_grad: f64,
    gamma: f64,
    seed: u64,
) -> PyResult<SolveConfig> {
    let config = SolveConfig {
        stepsize: stepsize.parse::<StepsizeRule>().map_err(py_err)?,
        max_iters,
        tol_objective: tol_obj,
        tol_gradnorm: tol_grad,
        gamma,
        seed,
        ..SolveConfig::default()
    };
    config.validate().map_err(py_err)?;
    Ok(config)
}

/// Runs RGD. `init` is `"lfm"`, `"random"` (seeded by `seed`), or a list of
/// complex values. Returns a dict with the design, SINRs and the trace.
#[pyfunction]
#[pyo3(signature = (
    scenario, init=None, stepsize="armijo:0.4,0.85,1", max_iters=5000,
    tol_obj=1e-8, tol_grad=1e-6, gamma=0.0, seed=0
))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    init: Option<&Bound<'py, PyAny>>,
    stepsize: &str,
    max_iters: usize,
    tol_obj: f64,
    tol_grad: f64,
    gamma: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = solve_config(stepsize, max_iters, tol_obj, tol_grad, gamma, seed)?;
    let sc = &scenario.scenario;
    let constraint = Arc::new(sc.constraint.clone());
    let start = match init {
        None => None,
        Some(obj) => match obj.extract::<String>() {
            Ok(kind) if kind == "lfm" => None,
            Ok(kind) if kind == "random" => {
                Some(random_feasible(&constraint, sc.array.waveform_len(), seed).map_err(py_err)?)
            }
            Ok(kind) => return Err(PyValueError::new_err(format!("unknown init `{kind}`"))),
            Err(_) => {
                let values: Vec<Complex64> = obj.extract()?;
                Some(Waveform::new_unchecked(cvec(values), constraint.clone()))
            }
        },
    };
    let result = py
        .detach(|| solver::solve(sc, &config, start))
        .map_err(py_err)?;

    let out = PyDict::new(py);
    out.set_item("waveform", to_list(&result.waveform.data))?;
    out.set_item("filter", to_list(&result.filter.data))?;
    out.set_item("initial_sinr_db", result.initial_sinr_db)?;
    out.set_item("final_sinr_db", result.final_sinr_db)?;
    out.set_item("iterations", result.iterations)?;
    out.set_item("termination", result.termination.as_str())?;
    out.set_item("wall_time_s", result.wall_time_s)?;
    out.set_item("residual", solver::final_residual(&result))?;
    let trace = PyDict::new(py);
    let records = &result.trace.records;
    trace.set_item("iteration", records.iter().map(|r| r.iteration).collect::<Vec<_>>())?;
    trace.set_item("g", records.iter().map(|r| r.objective).collect::<Vec<_>>())?;
    trace.set_item("sinr_db", records.iter().map(|r| r.sinr_db).collect::<Vec<_>>())?;
    trace.set_item("stepsize", records.iter().map(|r| r.stepsize).collect::<Vec<_>>())?;
    trace.set_item("backtracks", records.iter().map(|r| r.backtracks).collect::<Vec<_>>())?;
    trace.set_item("gradnorm", records.iter().map(|r| r.gradnorm).collect::<Vec<_>>())?;
    trace.set_item("residual", records.iter().map(|r| r.residual).collect::<Vec<_>>())?;
    trace.set_item("elapsed_s", records.iter().map(|r| r.elapsed_s).collect::<Vec<_>>())?;
    out.set_item("trace", trace)?;
    Ok(out)
}

/// Normalized range-angle response `|w^H A(r, θ) s|²` (peak 1). Defaults to
/// ranges `0..=N` and −90°..90° in 1° steps.
#[pyfunction]
#[pyo3(signature = (scenario, s, w, ranges=None, angles_deg=None))]
fn ambiguity<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    s: Vec<Complex64>,
    w: Vec<Complex64>,
    ranges: Option<Vec<usize>>,
    angles_deg: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let array = &scenario.scenario.array;
    let ranges = ranges.unwrap_or_else(|| default_ranges(array));
    let angles = match angles_deg {
        Some(a) => a.into_iter().map(f64::to_radians).collect(),
        None => default_angles(),
    };
    let filter = ReceiveFilter { data: cvec(w) };
    let grid = ambiguity_map(array, &cvec(s), &filter, &ranges, &angles).map_err(py_err)?;
    let (peak_range, peak_angle) = grid.argmax();
    let values: Vec<Vec<f64>> = (0..grid.ranges.len())
        .map(|i| grid.values.row(i).iter().copied().collect())
        .collect();
    let out = PyDict::new(py);
    out.set_item("ranges", grid.ranges.clone())?;
    out.set_item("angles_deg", grid.angles.iter().map(|a| a.to_degrees()).collect::<Vec<_>>())?;
    out.set_item("values", values)?;
    out.set_item("peak", (peak_range, peak_angle.to_degrees()))?;
    out.set_item("definition", mimo_rgd::ambiguity::DEFINITION)?;
    Ok(out)
}

/// Full experiment run writing artifacts to `out_dir`; returns the report as
/// JSON text.
#[pyfunction]
#[pyo3(signature = (
    scenario, out_dir, stepsize="armijo:0.4,0.85,1", max_iters=5000, tol_obj=1e-8,
    tol_grad=1e-6, gamma=0.0, seed=0, init="lfm", ambiguity=false, slices=false
))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    scenario: &PyScenario,
    out_dir: PathBuf,
    stepsize: &str,
    max_iters: usize,
    tol_obj: f64,
    tol_grad: f64,
    gamma: f64,
    seed: u64,
    init: &str,
    ambiguity: bool,
    slices: bool,
) -> PyResult<String> {
    let mut spec = RunSpec::new(scenario.file.clone(), out_dir);
    spec.solver = solve_config(stepsize, max_iters, tol_obj, tol_grad, gamma, seed)?;
    spec.init = InitSource::parse(init);
    spec.ambiguity = ambiguity;
    spec.slices = slices;
    let out = py.detach(|| run_experiment(&spec)).map_err(py_err)?;
    Ok(mimo_rgd::cli::io::to_json_string(&out.report))
}

#[pymodule]
fn mimo_rgd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(lfm_init, m)?)?;
    m.add_function(wrap_pyfunction!(random_init, m)?)?;
    m.add_function(wrap_pyfunction!(retract, m)?)?;
    m.add_function(wrap_pyfunction!(residual, m)?)?;
    m.add_function(wrap_pyfunction!(tx_objective, m)?)?;
    m.add_function(wrap_pyfunction!(tx_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(rx_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(sinr_db, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(ambiguity, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
