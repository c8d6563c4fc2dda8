//! Riemannian gradient descent on the waveform constraint set.
//!
//! Each iteration projects the Euclidean gradient of `g` onto the tangent
//! space, takes a descent step of constant or Armijo-backtracked length, and
//! retracts back onto the set. The optimal receiver is computed once at the
//! end.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::manifolds::{feasibility_residual, project_tangent, retract, ConstraintSpec, Waveform};
use crate::objective::{rx_from_evaluation, Evaluation, ProblemOperators, ReceiveFilter};
use crate::scene::{linear_to_db, ArrayConfig, Scenario};
use crate::CVector;


#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepsizeRule {
    Constant {
        alpha: f64,
    },
    Armijo {
        tau: f64,
        beta: f64,
        sigma: f64,
        max_backtracks: usize,
    },
}

impl StepsizeRule {
    pub const DEFAULT_MAX_BACKTRACKS: usize = 200;
    pub const DEFAULT_CONSTANT_ALPHA: f64 = 0.05;

    /// τ = 0.4, β = 0.85, σ = 1.
    pub fn armijo_default() -> Self {
        StepsizeRule::Armijo {
            tau: 0.4,
            beta: 0.85,
            sigma: 1.0,
            max_backtracks: Self::DEFAULT_MAX_BACKTRACKS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepsizeRule::Constant { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::InvalidSolver(format!("alpha must be positive, got {alpha}")));
                }
            }
            StepsizeRule::Armijo {
                tau,
                beta,
                sigma,
                max_backtracks,
            } => {
                if !(tau > 0.0 && tau.is_finite()) {
                    return Err(Error::InvalidSolver(format!("tau must be positive, got {tau}")));
                }
                if !(beta > 0.0 && beta < 1.0) {
                    return Err(Error::InvalidSolver(format!("beta must lie in (0, 1), got {beta}")));
                }
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidSolver(format!("sigma must be positive, got {sigma}")));
                }
                if max_backtracks == 0 {
                    return Err(Error::InvalidSolver("max_backtracks must be >= 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn is_armijo(&self) -> bool {
        matches!(self, StepsizeRule::Armijo { .. })
    }
}

/// Parses `constant[:ALPHA]` or `armijo[:TAU,BETA,SIGMA[,MAX_BACKTRACKS]]`.
impl FromStr for StepsizeRule {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidSolver(format!("stepsize `{text}`: {msg}"));
        let (kind, args) = match text.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a)),
            None => (text.trim(), None),
        };
        let nums = |args: &str| -> Result<Vec<f64>> {
            args.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| bad(format!("`{x}`: {e}"))))
                .collect()
        };
        let rule = match (kind, args) {
            ("constant", None) => StepsizeRule::Constant {
                alpha: Self::DEFAULT_CONSTANT_ALPHA,
            },
            ("constant", Some(a)) => match nums(a)?[..] {
                [alpha] => StepsizeRule::Constant { alpha },
                _ => return Err(bad("expected constant:ALPHA".into())),
            },
            ("armijo", None) => Self::armijo_default(),
            ("armijo", Some(a)) => {
                let v = nums(a)?;
                let max_backtracks = match v.len() {
                    3 => Self::DEFAULT_MAX_BACKTRACKS,
                    4 if v[3] >= 1.0 && v[3].fract() == 0.0 => v[3] as usize,
                    _ => return Err(bad("expected armijo:TAU,BETA,SIGMA[,MAX_BACKTRACKS]".into())),
                };
                StepsizeRule::Armijo {
                    tau: v[0],
                    beta: v[1],
                    sigma: v[2],
                    max_backtracks,
                }
            }
            _ => return Err(bad("expected `constant` or `armijo`".into())),
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl fmt::Display for StepsizeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepsizeRule::Constant { alpha } => write!(f, "constant:{alpha}"),
            StepsizeRule::Armijo {
                tau, beta, sigma, ..
            } => write!(f, "armijo:{tau},{beta},{sigma}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub stepsize: StepsizeRule,
    pub max_iters: usize,
    /// Relative decrease of `g` below which an iteration counts as stalled.
    pub tol_objective: f64,
    /// Number of consecutive stalled iterations that stops the solve.
    pub stall_window: usize,
    pub tol_gradnorm: f64,
    pub gamma: f64,
    pub record_trace: bool,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            stepsize: StepsizeRule::armijo_default(),
            max_iters: 5000,
            tol_objective: 1e-8,
            stall_window: 5,
            tol_gradnorm: 1e-6,
            gamma: 0.0,
            record_trace: true,
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        self.stepsize.validate()?;
        if !(self.tol_objective >= 0.0) || !(self.tol_gradnorm >= 0.0) {
            return Err(Error::InvalidSolver("tolerances must be nonnegative".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidSolver(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.stall_window == 0 {
            return Err(Error::InvalidSolver("stall_window must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub sinr_db: f64,
    /// Stepsize that produced this iterate (0 for the initial point).
    pub stepsize: f64,
    pub backtracks: usize,
    /// Norm of the tangent-projected gradient at this iterate.
    pub gradnorm: f64,
    pub residual: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.objective)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    ObjectiveTol,
    GradTol,
    MaxIters,
    BacktrackExhausted,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::ObjectiveTol => "objective_tol",
            Termination::GradTol => "grad_tol",
            Termination::MaxIters => "max_iters",
            Termination::BacktrackExhausted => "backtrack_exhausted",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub waveform: Waveform,
    pub filter: ReceiveFilter,
    pub initial_sinr_db: f64,
    pub final_sinr_db: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: SolveTrace,
    pub wall_time_s: f64,
}

/// Outcome of a single accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub stepsize: f64,
    pub backtracks: usize,
    pub objective_before: f64,
    /// `g` at the accepted Armijo trial point `s − α∇ḡ(s)`; `None` for
    /// constant steps.
    pub objective_probe: Option<f64>,
    pub objective_after: f64,
    pub gradnorm: f64,
}

/// Current iterate with its cached objective data.
struct Iterate {
    point: Waveform,
    eval: Evaluation,
    gradient: CVector,
    direction: CVector,
    gradnorm: f64,
}

impl Iterate {
    fn new(ops: &ProblemOperators, point: Waveform) -> Result<Self> {
        let eval = Evaluation::new(ops, &point.data)?;
        Iterate::with_evaluation(ops, point, eval)
    }

    fn with_evaluation(ops: &ProblemOperators, point: Waveform, eval: Evaluation) -> Result<Self> {
        let gradient = eval.gradient(ops, &point.data);
        let direction = project_tangent(&point, &gradient)?;
        let gradnorm = direction.norm();
        Ok(Iterate {
            point,
            eval,
            gradient,
            direction,
            gradnorm,
        })
    }

    /// `s − t·v`.
    fn offset(&self, t: f64, v: &CVector) -> CVector {
        let mut p = self.point.data.clone();
        p.axpy(Complex64::new(-t, 0.0), v, Complex64::new(1.0, 0.0));
        p
    }
}

enum StepOutcome {
    Accepted(Iterate, StepDiagnostics),
    Exhausted,
}

/// Backtracks `t = τβ^m` from `m = 0` until both
/// `g(s) − g(s − t∇ḡ(s)) ≥ σt‖Proj_s ∇ḡ(s)‖²` and
/// `g(Retr(s − t·Proj_s ∇ḡ(s))) ≤ g(s)` hold.
fn armijo_step(
    ops: &ProblemOperators,
    current: &Iterate,
    tau: f64,
    beta: f64,
    sigma: f64,
    max_backtracks: usize,
) -> Result<Option<(f64, usize, f64, Waveform, Evaluation)>> {
    let g0 = current.eval.objective;
    let d_norm2 = current.gradnorm * current.gradnorm;
    let mut t = tau;
    for m in 0..=max_backtracks {
        let probe = current.offset(t, &current.gradient);
        let g_probe = Evaluation::new(ops, &probe)?.objective;
        if g0 - g_probe >= sigma * t * d_norm2 {
            let next = retract(&current.offset(t, &current.direction), &current.point.constraint)?;
            let eval = Evaluation::new(ops, &next.data)?;
            if eval.objective <= g0 {
                return Ok(Some((t, m, g_probe, next, eval)));
            }
        }
        t *= beta;
    }
    Ok(None)
}

fn take_step(ops: &ProblemOperators, current: &Iterate, rule: &StepsizeRule) -> Result<StepOutcome> {
    let g0 = current.eval.objective;
    let (stepsize, backtracks, probe, next, eval) = match *rule {
        StepsizeRule::Constant { alpha } => {
            let next = retract(&current.offset(alpha, &current.direction), &current.point.constraint)?;
            let eval = Evaluation::new(ops, &next.data)?;
            (alpha, 0, None, next, eval)
        }
        StepsizeRule::Armijo {
            tau,
            beta,
            sigma,
            max_backtracks,
        } => match armijo_step(ops, current, tau, beta, sigma, max_backtracks)? {
            Some((t, m, g_probe, next, eval)) => (t, m, Some(g_probe), next, eval),
            None => return Ok(StepOutcome::Exhausted),
        },
    };
    let objective_after = eval.objective;
    let next = Iterate::with_evaluation(ops, next, eval)?;
    let diag = StepDiagnostics {
        stepsize,
        backtracks,
        objective_before: g0,
        objective_probe: probe,
        objective_after,
        gradnorm: current.gradnorm,
    };
    Ok(StepOutcome::Accepted(next, diag))
}

/// One RGD update `s⁺ = Retr(s − α·Proj_s(∇ḡ(s)))`.
pub fn rgd_step(
    ops: &ProblemOperators,
    s: &Waveform,
    rule: &StepsizeRule,
) -> Result<(Waveform, StepDiagnostics)> {
    rule.validate()?;
    let current = Iterate::new(ops, s.clone())?;
    let unchanged = StepDiagnostics {
        stepsize: 0.0,
        backtracks: 0,
        objective_before: current.eval.objective,
        objective_probe: None,
        objective_after: current.eval.objective,
        gradnorm: current.gradnorm,
    };
    if current.gradnorm == 0.0 {
        return Ok((s.clone(), unchanged));
    }
    match take_step(ops, &current, rule)? {
        StepOutcome::Accepted(next, diag) => Ok((next.point, diag)),
        StepOutcome::Exhausted => Err(Error::BacktrackExhausted {
            backtracks: match rule {
                StepsizeRule::Armijo { max_backtracks, .. } => *max_backtracks,
                StepsizeRule::Constant { .. } => 0,
            },
        }),
    }
}

/// Space-time LFM waveform, `S(k, n) = e^{j2πk(n−1)/N} e^{jπ(n−1)²/N} / √(N·N_t)`,
/// stacked column by column so snapshot `n` is column `n`.
pub fn lfm_init(array: &ArrayConfig) -> Waveform {
    let (nt, n) = (array.n_tx, array.n_samples);
    let scale = 1.0 / ((nt * n) as f64).sqrt();
    let nf = n as f64;
    let data = CVector::from_fn(nt * n, |idx, _| {
        let (col, row) = (idx / nt, idx % nt);
        let k = (row + 1) as f64;
        let m = col as f64;
        let phase = 2.0 * PI * k * m / nf + PI * m * m / nf;
        Complex64::from_polar(scale, phase)
    });
    Waveform::new_unchecked(
        data,
        Arc::new(ConstraintSpec::Cm { modulus: scale }),
    )
}

/// LFM waveform mapped onto `constraint`; untouched when already feasible.
pub fn lfm_start(array: &ArrayConfig, constraint: &Arc<ConstraintSpec>) -> Result<Waveform> {
    let lfm = lfm_init(array).data;
    if feasibility_residual(&lfm, constraint) <= 1e-10 {
        Waveform::new(lfm, constraint.clone())
    } else {
        retract(&lfm, constraint)
    }
}

/// Runs RGD on `scenario` from `init` (LFM when `None`).
pub fn solve(scenario: &Scenario, config: &SolveConfig, init: Option<Waveform>) -> Result<SolveResult> {
    config.validate()?;
    let ops = ProblemOperators::from_scenario(scenario, config.gamma)?;
    let constraint = Arc::new(scenario.constraint.clone());
    let init = match init {
        Some(w) => Waveform::new(w.data, constraint)?,
        None => lfm_start(&scenario.array, &constraint)?,
    };
    solve_with_operators(&ops, config, init)
}

/// Runs RGD with prebuilt operators; `init` must be feasible.
pub fn solve_with_operators(
    ops: &ProblemOperators,
    config: &SolveConfig,
    init: Waveform,
) -> Result<SolveResult> {
    config.validate()?;
    let residual = init.residual();
    if !(residual <= 1e-10) {
        return Err(Error::InfeasibleInit {
            constraint: init.constraint.name(),
            residual,
        });
    }

    let start = Instant::now();
    let mut trace = SolveTrace::default();
    let mut current = Iterate::new(ops, init)?;
    let initial_sinr_db = linear_to_db(current.eval.optimal_sinr(ops));
    let record = |trace: &mut SolveTrace, it: &Iterate, i: usize, step: f64, bt: usize| {
        if config.record_trace || i == 0 {
            trace.records.push(TraceRecord {
                iteration: i,
                objective: it.eval.objective,
                sinr_db: linear_to_db(it.eval.optimal_sinr(ops)),
                stepsize: step,
                backtracks: bt,
                gradnorm: it.gradnorm,
                residual: it.point.residual(),
                elapsed_s: start.elapsed().as_secs_f64(),
            });
        }
    };
    record(&mut trace, &current, 0, 0.0, 0);

    let mut iterations = 0;
    let mut stalled = 0;
    let termination = loop {
        if current.gradnorm <= config.tol_gradnorm {
            break Termination::GradTol;
        }
        if iterations >= config.max_iters {
            break Termination::MaxIters;
        }
        let next = match take_step(ops, &current, &config.stepsize)? {
            StepOutcome::Accepted(next, diag) => {
                iterations += 1;
                record(&mut trace, &next, iterations, diag.stepsize, diag.backtracks);
                let prev = diag.objective_before;
                let rel = (prev - diag.objective_after).abs() / prev.abs().max(f64::MIN_POSITIVE);
                if rel < config.tol_objective {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                next
            }
            StepOutcome::Exhausted => break Termination::BacktrackExhausted,
        };
        current = next;
        if stalled >= config.stall_window {
            break Termination::ObjectiveTol;
        }
    };
    let wall_time_s = start.elapsed().as_secs_f64();

    let filter = rx_from_evaluation(&current.eval)?;
    let final_sinr_db = linear_to_db(current.eval.optimal_sinr(ops));
    Ok(SolveResult {
        waveform: current.point,
        filter,
        initial_sinr_db,
        final_sinr_db,
        iterations,
        termination,
        trace,
        wall_time_s,
    })
}

/// Feasibility residual of the final waveform of a result.
pub fn final_residual(result: &SolveResult) -> f64 {
    feasibility_residual(&result.waveform.data, &result.waveform.constraint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::random_feasible;
    use crate::scene::Emitter;

    fn small_scenario(k: usize) -> Scenario {
        let array = ArrayConfig::new(2, 2, 2).unwrap();
        let interferers = [(0, -50.0), (1, -10.0), (2, 40.0)]
            .iter()
            .take(k)
            .map(|&(r, a)| Emitter::from_degrees(r, a, 20.0))
            .collect();
        Scenario {
            array,
            target: Emitter::from_degrees(0, 15.0, 30.0),
            interferers,
            noise_power_db: 0.0,
            constraint: ConstraintSpec::cm_default(&array),
        }
    }

    #[test]
    fn lfm_first_entry_and_modulus() {
        let array = ArrayConfig::new(3, 1, 5).unwrap();
        let s = lfm_init(&array);
        let c = 1.0 / 15f64.sqrt();
        assert!((s.data[0] - Complex64::new(c, 0.0)).norm() < 1e-15);
        assert!(s.residual() < 1e-15);
        assert!(s.data.iter().all(|x| (x.norm() - c).abs() < 1e-15));
    }

    #[test]
    fn lfm_two_samples_single_antenna() {
        let s = lfm_init(&ArrayConfig::new(1, 1, 2).unwrap());
        let h = 1.0 / 2f64.sqrt();
        assert!((s.data[0] - Complex64::new(h, 0.0)).norm() < 1e-15);
        assert!((s.data[1] - Complex64::new(0.0, -h)).norm() < 1e-15);
    }

    #[test]
    fn lfm_is_column_stacked() {
        // Entry (k, n) of the N_t × N matrix lands at index (n−1)·N_t + (k−1).
        let (nt, n) = (3usize, 4usize);
        let s = lfm_init(&ArrayConfig::new(nt, 2, n).unwrap());
        let scale = 1.0 / ((nt * n) as f64).sqrt();
        for k in 1..=nt {
            for col in 1..=n {
                let phase = 2.0 * PI * k as f64 * (col - 1) as f64 / n as f64
                    + PI * ((col - 1) * (col - 1)) as f64 / n as f64;
                let expected = Complex64::from_polar(scale, phase);
                assert!((s.data[(col - 1) * nt + (k - 1)] - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_iterations_returns_init() {
        let sc = small_scenario(3);
        let cfg = SolveConfig {
            max_iters: 0,
            ..SolveConfig::default()
        };
        let r = solve(&sc, &cfg, None).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.termination, Termination::MaxIters);
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.waveform.data, lfm_init(&sc.array).data);
        assert_eq!(r.initial_sinr_db, r.final_sinr_db);
    }

    #[test]
    fn stationary_point_is_fixed() {
        // K = 0, N_t = N_r = 1: g = −‖s‖² is constant on the CM set.
        let array = ArrayConfig::new(1, 1, 3).unwrap();
        let sc = Scenario {
            array,
            target: Emitter::from_degrees(0, 0.0, 10.0),
            interferers: vec![],
            noise_power_db: 0.0,
            constraint: ConstraintSpec::cm_default(&array),
        };
        let ops = ProblemOperators::from_scenario(&sc, 0.0).unwrap();
        let s = lfm_init(&array);
        let (next, diag) = rgd_step(&ops, &s, &StepsizeRule::Constant { alpha: 0.5 }).unwrap();
        assert!(diag.gradnorm < 1e-15);
        assert_eq!(next.data, s.data);
    }

    #[test]
    fn small_constant_step_decreases_objective() {
        let sc = small_scenario(0);
        let ops = ProblemOperators::from_scenario(&sc, 0.0).unwrap();
        let s = Waveform::new(lfm_init(&sc.array).data, Arc::new(sc.constraint.clone())).unwrap();
        let (next, diag) = rgd_step(&ops, &s, &StepsizeRule::Constant { alpha: 1e-3 }).unwrap();
        assert!(diag.gradnorm > 0.0);
        assert!(diag.objective_after < diag.objective_before);
        assert!(next.residual() < 1e-12);
    }

    #[test]
    fn armijo_trace_is_monotone_and_feasible() {
        let sc = small_scenario(3);
        let r = solve(&sc, &SolveConfig::default(), None).unwrap();
        let g: Vec<f64> = r.trace.objectives().collect();
        assert!(g.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.trace.records.iter().all(|t| t.residual <= 1e-10));
        assert!(r.final_sinr_db > r.initial_sinr_db);
        assert_eq!(r.trace.len(), r.iterations + 1);
    }

    #[test]
    fn solve_is_deterministic() {
        let sc = small_scenario(3);
        let cfg = SolveConfig::default();
        let a = solve(&sc, &cfg, None).unwrap();
        let b = solve(&sc, &cfg, None).unwrap();
        let strip = |r: &SolveResult| {
            r.trace
                .records
                .iter()
                .map(|t| TraceRecord { elapsed_s: 0.0, ..*t })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.waveform.data, b.waveform.data);
    }

    #[test]
    fn infeasible_init_rejected() {
        let sc = small_scenario(1);
        let bad = Waveform::new_unchecked(CVector::from_element(4, Complex64::new(1.0, 0.0)), Arc::new(sc.constraint.clone()));
        let err = solve(&sc, &SolveConfig::default(), Some(bad)).unwrap_err();
        assert!(matches!(err, Error::InfeasibleInit { constraint: "CM", .. }));
    }

    #[test]
    fn random_init_under_cms_stays_feasible() {
        let mut sc = small_scenario(3);
        let c = 0.5;
        sc.constraint = ConstraintSpec::Cms {
            modulus: c,
            reference: lfm_init(&sc.array).data,
            eps: 0.3,
        };
        let spec = Arc::new(sc.constraint.clone());
        let init = random_feasible(&spec, 4, 7).unwrap();
        let r = solve(&sc, &SolveConfig::default(), Some(init)).unwrap();
        assert!(r.trace.records.iter().all(|t| t.residual <= 1e-10));
    }

    #[test]
    fn stepsize_validation() {
        assert!(StepsizeRule::Constant { alpha: 0.0 }.validate().is_err());
        assert!(StepsizeRule::Armijo {
            tau: 0.4,
            beta: 1.0,
            sigma: 1.0,
            max_backtracks: 10
        }
        .validate()
        .is_err());
        assert!(StepsizeRule::armijo_default().validate().is_ok());
        assert_eq!(StepsizeRule::armijo_default().to_string(), "armijo:0.4,0.85,1");
    }
}
