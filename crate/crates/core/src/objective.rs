//! SINR, the closed-form MVDR-type receiver, and the reduced transmit
//! objective `g(s) = −s^H A₀^H M(s)⁻¹ A₀ s + γ s^H s` with its gradient.
//!
//! `M(s) = I + Σ_k ϑ_k (A_k s)(A_k s)^H` is the identity plus a rank-K term,
//! so solves go through the K×K capacitance matrix `I + V^H V` with
//! `V = [√ϑ_k A_k s]` (Woodbury). The dense `M(s)` is still available from
//! [`covariance`].

use nalgebra::Cholesky;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scene::{interference_operator, linear_to_db, InterferenceOperator, Scenario};
use crate::{CMatrix, CVector};

/// Below this norm of `A₀ s` the target is considered invisible.
pub const SIGNAL_NULL_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ProblemOperators {
    pub a0: InterferenceOperator,
    /// `(ϑ_k, A_k)` pairs.
    pub interferers: Vec<(f64, InterferenceOperator)>,
    pub gamma: f64,
    /// `σ₀²/σ_v²`; only scales reported SINR.
    pub snr_scale: f64,
}

impl ProblemOperators {
    pub fn new(
        a0: InterferenceOperator,
        interferers: Vec<(f64, InterferenceOperator)>,
        gamma: f64,
        snr_scale: f64,
    ) -> Result<Self> {
        let (rows, cols) = (a0.nrows(), a0.ncols());
        for (k, (ratio, a)) in interferers.iter().enumerate() {
            if !(*ratio > 0.0 && ratio.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "interference ratio {} must be positive, got {ratio}",
                    k + 1
                )));
            }
            if a.nrows() != rows || a.ncols() != cols {
                return Err(Error::DimensionMismatch {
                    expected: rows * cols,
                    got: a.nrows() * a.ncols(),
                });
            }
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidSolver(format!("gamma must be >= 0, got {gamma}")));
        }
        if !(snr_scale > 0.0 && snr_scale.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "target-to-noise ratio must be positive, got {snr_scale}"
            )));
        }
        Ok(ProblemOperators {
            a0,
            interferers,
            gamma,
            snr_scale,
        })
    }

    pub fn from_scenario(scenario: &Scenario, gamma: f64) -> Result<Self> {
        scenario.validate()?;
        let a0 = interference_operator(&scenario.target, &scenario.array)?;
        let interferers = scenario
            .interference_ratios()
            .into_iter()
            .zip(&scenario.interferers)
            .map(|(ratio, e)| Ok((ratio, interference_operator(e, &scenario.array)?)))
            .collect::<Result<Vec<_>>>()?;
        ProblemOperators::new(a0, interferers, gamma, scenario.snr_scale())
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        ProblemOperators::new(self.a0.clone(), self.interferers.clone(), gamma, self.snr_scale)
    }

    pub fn waveform_len(&self) -> usize {
        self.a0.ncols()
    }

    pub fn filter_len(&self) -> usize {
        self.a0.nrows()
    }

    fn check_waveform(&self, s: &CVector) -> Result<()> {
        if s.len() != self.waveform_len() {
            return Err(Error::DimensionMismatch {
                expected: self.waveform_len(),
                got: s.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiveFilter {
    pub data: CVector,
}

/// Everything derived from one waveform that the objective, its gradient and
/// the optimal receiver share.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// `A₀ s`.
    pub target_response: CVector,
    /// `A_k s` per interferer.
    pub interference_responses: Vec<CVector>,
    /// `M(s)⁻¹ A₀ s`.
    pub whitened: CVector,
    /// `s^H A₀^H M(s)⁻¹ A₀ s`, real and nonnegative.
    pub quadratic: f64,
    /// `g(s)`.
    pub objective: f64,
}

impl Evaluation {
    pub fn new(ops: &ProblemOperators, s: &CVector) -> Result<Self> {
        ops.check_waveform(s)?;
        let target_response = ops.a0.apply(s);
        let interference_responses: Vec<CVector> =
            ops.interferers.iter().map(|(_, a)| a.apply(s)).collect();
        let whitened = solve_covariance(ops, &interference_responses, &target_response);
        let quadratic = target_response.dotc(&whitened).re;
        let objective = -quadratic + ops.gamma * s.norm_squared();
        Ok(Evaluation {
            target_response,
            interference_responses,
            whitened,
            quadratic,
            objective,
        })
    }

    /// SINR of the optimal receiver, linear scale.
    pub fn optimal_sinr(&self, ops: &ProblemOperators) -> f64 {
        ops.snr_scale * self.quadratic
    }

    /// `∇ḡ(s) = −2A₀^H z + 2γs + 2Σ_k ϑ_k (z^H A_k s) A_k^H z`, `z = M⁻¹A₀s`.
    pub fn gradient(&self, ops: &ProblemOperators, s: &CVector) -> CVector {
        let z = &self.whitened;
        let mut grad = ops.a0.apply_adjoint(z) * Complex64::new(-2.0, 0.0);
        grad.axpy(Complex64::new(2.0 * ops.gamma, 0.0), s, Complex64::new(1.0, 0.0));
        for ((ratio, a), y) in ops.interferers.iter().zip(&self.interference_responses) {
            let coeff = z.dotc(y) * (2.0 * ratio);
            grad.axpy(coeff, &a.apply_adjoint(z), Complex64::new(1.0, 0.0));
        }
        grad
    }
}

/// Solves `M x = b` with `M = I + Σ ϑ_k y_k y_k^H` via the capacitance matrix.
fn solve_covariance(ops: &ProblemOperators, responses: &[CVector], b: &CVector) -> CVector {
    let k = responses.len();
    if k == 0 {
        return b.clone();
    }
    let n = b.len();
    let v = CMatrix::from_fn(n, k, |i, j| responses[j][i] * ops.interferers[j].0.sqrt());
    let mut capacitance = v.ad_mul(&v);
    for i in 0..k {
        capacitance[(i, i)] += Complex64::new(1.0, 0.0);
    }
    // I + V^H V is Hermitian with eigenvalues >= 1.
    let chol = Cholesky::new(capacitance).expect("capacitance matrix is positive definite");
    let coeffs = chol.solve(&v.ad_mul(b));
    b - v * coeffs
}

/// Dense `M(s) = Σ_k ϑ_k (A_k s)(A_k s)^H + I`.
pub fn covariance(ops: &ProblemOperators, s: &CVector) -> Result<CMatrix> {
    ops.check_waveform(s)?;
    let n = ops.filter_len();
    let mut m = CMatrix::identity(n, n);
    for (ratio, a) in &ops.interferers {
        let y = a.apply(s);
        m.gerc(Complex64::new(*ratio, 0.0), &y, &y, Complex64::new(1.0, 0.0));
    }
    Ok(m)
}

/// `w* = M⁻¹A₀s / (s^H A₀^H M⁻¹ A₀ s)`, normalized so that `w*^H A₀ s = 1`.
pub fn rx_optimal(ops: &ProblemOperators, s: &CVector) -> Result<ReceiveFilter> {
    let eval = Evaluation::new(ops, s)?;
    rx_from_evaluation(&eval)
}

pub fn rx_from_evaluation(eval: &Evaluation) -> Result<ReceiveFilter> {
    let signal = eval.target_response.norm();
    if !(signal >= SIGNAL_NULL_TOL) {
        return Err(Error::SignalNull(signal));
    }
    Ok(ReceiveFilter {
        data: eval.whitened.unscale(eval.quadratic),
    })
}

/// Output SINR (linear) of filter `w` against waveform `s`.
pub fn sinr(ops: &ProblemOperators, s: &CVector, w: &ReceiveFilter) -> Result<f64> {
    ops.check_waveform(s)?;
    let w = &w.data;
    if w.len() != ops.filter_len() {
        return Err(Error::DimensionMismatch {
            expected: ops.filter_len(),
            got: w.len(),
        });
    }
    let noise = w.norm_squared();
    if noise == 0.0 {
        return Err(Error::ZeroFilter);
    }
    let signal = w.dotc(&ops.a0.apply(s)).norm_sqr();
    let interference: f64 = ops
        .interferers
        .iter()
        .map(|(ratio, a)| ratio * w.dotc(&a.apply(s)).norm_sqr())
        .sum();
    Ok(ops.snr_scale * signal / (interference + noise))
}

pub fn sinr_db(ops: &ProblemOperators, s: &CVector, w: &ReceiveFilter) -> Result<f64> {
    Ok(linear_to_db(sinr(ops, s, w)?))
}

/// `g(s)`.
pub fn tx_objective(ops: &ProblemOperators, s: &CVector) -> Result<f64> {
    Ok(Evaluation::new(ops, s)?.objective)
}

/// Euclidean gradient of `g`, scaled so that `dg = Re⟨∇ḡ, ds⟩`.
pub fn tx_gradient(ops: &ProblemOperators, s: &CVector) -> Result<CVector> {
    Ok(Evaluation::new(ops, s)?.gradient(ops, s))
}
