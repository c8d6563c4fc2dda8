//! MIMO radar signal model: ULA steering vectors, range-shift matrices and
//! the per-emitter operators `A(r, θ) = [I_N ⊗ a_r(θ) a_t(θ)^T] J_r`.
//!
//! Waveforms are stacked snapshot-major: `s = [s(1)^T, …, s(N)^T]^T` with
//! each snapshot holding one sample per transmit antenna.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::manifolds::ConstraintSpec;
use crate::{CMatrix, CVector};

/// Transmit/receive array sizes and code length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_samples: usize,
}

impl ArrayConfig {
    pub fn new(n_tx: usize, n_rx: usize, n_samples: usize) -> Result<Self> {
        let cfg = ArrayConfig {
            n_tx,
            n_rx,
            n_samples,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_rx == 0 || self.n_samples == 0 {
            return Err(Error::InvalidArray(format!(
                "all sizes must be >= 1 (n_tx={}, n_rx={}, n_samples={})",
                self.n_tx, self.n_rx, self.n_samples
            )));
        }
        Ok(())
    }

    /// Length of the stacked transmit waveform, `N_t·N`.
    pub fn waveform_len(&self) -> usize {
        self.n_tx * self.n_samples
    }

    /// Length of the stacked receive filter, `N_r·N`.
    pub fn filter_len(&self) -> usize {
        self.n_rx * self.n_samples
    }
}

/// A point scatterer: the target or a signal-dependent interferer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emitter {
    pub range_bin: usize,
    /// Radians.
    pub angle: f64,
    pub power_db: f64,
}

impl Emitter {
    pub fn new(range_bin: usize, angle: f64, power_db: f64) -> Self {
        Emitter {
            range_bin,
            angle,
            power_db,
        }
    }

    pub fn from_degrees(range_bin: usize, angle_deg: f64, power_db: f64) -> Self {
        Emitter::new(range_bin, angle_deg.to_radians(), power_db)
    }

    pub fn power_linear(&self) -> f64 {
        db_to_linear(self.power_db)
    }

    /// Angle folded into (−π/2, π/2] with the same ULA response.
    pub fn normalized_angle(&self) -> f64 {
        normalize_angle(self.angle)
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub array: ArrayConfig,
    pub target: Emitter,
    pub interferers: Vec<Emitter>,
    pub noise_power_db: f64,
    pub constraint: ConstraintSpec,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        let n = self.array.n_samples;
        let check_emitter = |e: &Emitter, label: &str| -> Result<()> {
            if e.range_bin > n {
                return Err(Error::InvalidScenario(format!(
                    "{label} range bin {} exceeds N = {n}",
                    e.range_bin
                )));
            }
            if !e.angle.is_finite() || !e.power_db.is_finite() {
                return Err(Error::InvalidScenario(format!(
                    "{label} has a non-finite angle or power"
                )));
            }
            Ok(())
        };
        check_emitter(&self.target, "target")?;
        if !self.noise_power_db.is_finite() {
            return Err(Error::InvalidScenario("noise power must be finite".into()));
        }
        let theta0 = self.target.normalized_angle();
        for (k, e) in self.interferers.iter().enumerate() {
            let label = format!("interferer {}", k + 1);
            check_emitter(e, &label)?;
            if (e.normalized_angle() - theta0).abs() < 1e-12 {
                return Err(Error::InvalidScenario(format!(
                    "{label} shares the target angle"
                )));
            }
        }
        self.constraint.validate(self.array.waveform_len())?;
        Ok(())
    }

    pub fn noise_power_linear(&self) -> f64 {
        db_to_linear(self.noise_power_db)
    }

    /// `σ₀²/σ_v²`.
    pub fn snr_scale(&self) -> f64 {
        self.target.power_linear() / self.noise_power_linear()
    }

    /// `ϑ_k = σ_k²/σ_v²` for each interferer.
    pub fn interference_ratios(&self) -> Vec<f64> {
        let noise = self.noise_power_linear();
        self.interferers
            .iter()
            .map(|e| e.power_linear() / noise)
            .collect()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn normalize_angle(angle: f64) -> f64 {
    if angle > -FRAC_PI_2 && angle <= FRAC_PI_2 {
        return angle;
    }
    let folded = angle.sin().asin();
    if folded <= -FRAC_PI_2 {
        FRAC_PI_2
    } else {
        folded
    }
}

fn ula_response(angle: f64, n: usize) -> CVector {
    let scale = 1.0 / (n as f64).sqrt();
    let phase_step = -PI * angle.sin();
    CVector::from_fn(n, |m, _| Complex64::from_polar(scale, phase_step * m as f64))
}

/// Transmit steering vector `a_t(θ)`, unit norm.
pub fn steering_tx(angle: f64, n_tx: usize) -> CVector {
    ula_response(angle, n_tx)
}

/// Receive propagation vector `a_r(θ)`, unit norm.
pub fn steering_rx(angle: f64, n_rx: usize) -> CVector {
    ula_response(angle, n_rx)
}

/// Binary shift `J_r` of size `N_t·N`: entry `(m, n)` is one iff
/// `m − n = N_t·r`. Applied to `s`, it delays every snapshot by `r` bins.
pub fn shift_matrix(range_bin: i64, array: &ArrayConfig) -> Result<DMatrix<f64>> {
    let n = array.n_samples;
    if range_bin < 0 || range_bin as usize > n {
        return Err(Error::RangeBinOutOfBounds { range_bin, max: n });
    }
    Ok(offset_matrix(array.n_tx as i64 * range_bin, array.waveform_len()))
}

pub(crate) fn offset_matrix(offset: i64, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |m, n| {
        if m as i64 - n as i64 == offset {
            1.0
        } else {
            0.0
        }
    })
}

/// Dense `A(r, θ)` of shape `(N_r·N) × (N_t·N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceOperator {
    pub matrix: CMatrix,
}

impl InterferenceOperator {
    pub fn apply(&self, s: &CVector) -> CVector {
        &self.matrix * s
    }

    pub fn apply_adjoint(&self, z: &CVector) -> CVector {
        self.matrix.ad_mul(z)
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }
}

pub fn interference_operator(emitter: &Emitter, array: &ArrayConfig) -> Result<InterferenceOperator> {
    array.validate()?;
    if emitter.range_bin > array.n_samples {
        return Err(Error::RangeBinOutOfBounds {
            range_bin: emitter.range_bin as i64,
            max: array.n_samples,
        });
    }
    let (nt, nr, n) = (array.n_tx, array.n_rx, array.n_samples);
    let a_t = steering_tx(emitter.angle, nt);
    let a_r = steering_rx(emitter.angle, nr);
    let r = emitter.range_bin;

    // Block (row snapshot p, column snapshot p - r) holds a_r a_t^T.
    let mut matrix = CMatrix::zeros(nr * n, nt * n);
    for p in r..n {
        let q = p - r;
        for i in 0..nr {
            for j in 0..nt {
                matrix[(p * nr + i, q * nt + j)] = a_r[i] * a_t[j];
            }
        }
    }
    Ok(InterferenceOperator { matrix })
}
