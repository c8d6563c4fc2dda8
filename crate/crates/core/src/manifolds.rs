//! Waveform constraint sets and their Riemannian operators.
//!
//! Three sets are supported:
//!
//! * constant modulus (CM): `|s_n| = c` for every entry, a product of circles;
//! * ε-uncertain constant modulus (ε-CM): `c_m − ε₁ ≤ |s_n| ≤ c_m + ε₂`, a
//!   product of annuli;
//! * constant modulus with similarity (CM&S): CM plus
//!   `‖s − s_ref‖_∞ ≤ ε`, which restricts each phase to an arc centred on
//!   the reference phase.
//!
//! Retractions are Euclidean nearest-point maps onto the set.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scene::ArrayConfig;
use crate::CVector;

/// Tolerance used when checking that a reference waveform is constant modulus.
const REFERENCE_MODULUS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSpec {
    Cm {
        modulus: f64,
    },
    EpsCm {
        center: f64,
        eps_lo: f64,
        eps_hi: f64,
    },
    Cms {
        modulus: f64,
        reference: CVector,
        eps: f64,
    },
}

impl ConstraintSpec {
    /// CM with the energy-normalizing modulus `1/√(N·N_t)`.
    pub fn cm_default(array: &ArrayConfig) -> Self {
        ConstraintSpec::Cm {
            modulus: default_modulus(array),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConstraintSpec::Cm { .. } => "CM",
            ConstraintSpec::EpsCm { .. } => "eps-CM",
            ConstraintSpec::Cms { .. } => "CM&S",
        }
    }

    /// Checks parameter ranges, and the reference length for CM&S.
    pub fn validate(&self, len: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConstraint(msg));
        match self {
            ConstraintSpec::Cm { modulus } => {
                if !(*modulus > 0.0 && modulus.is_finite()) {
                    return bad(format!("CM modulus must be positive, got {modulus}"));
                }
            }
            ConstraintSpec::EpsCm {
                center,
                eps_lo,
                eps_hi,
            } => {
                if !(*center > 0.0 && center.is_finite()) {
                    return bad(format!("eps-CM center modulus must be positive, got {center}"));
                }
                if !(*eps_lo >= 0.0 && eps_lo <= center) {
                    return bad(format!("eps-CM requires 0 <= eps_lo <= center, got {eps_lo}"));
                }
                if !(*eps_hi >= 0.0 && eps_hi.is_finite()) {
                    return bad(format!("eps-CM requires eps_hi >= 0, got {eps_hi}"));
                }
            }
            ConstraintSpec::Cms {
                modulus,
                reference,
                eps,
            } => {
                if !(*modulus > 0.0 && modulus.is_finite()) {
                    return bad(format!("CM&S modulus must be positive, got {modulus}"));
                }
                if !(*eps >= 0.0 && *eps <= 2.0 * modulus) {
                    return bad(format!(
                        "CM&S requires 0 <= eps <= 2*modulus = {}, got {eps}",
                        2.0 * modulus
                    ));
                }
                if reference.len() != len {
                    return Err(Error::DimensionMismatch {
                        expected: len,
                        got: reference.len(),
                    });
                }
                if let Some((n, x)) = reference
                    .iter()
                    .enumerate()
                    .find(|(_, x)| (x.norm() - modulus).abs() > REFERENCE_MODULUS_TOL)
                {
                    return bad(format!(
                        "CM&S reference entry {n} has modulus {} instead of {modulus}",
                        x.norm()
                    ));
                }
            }
        }
        Ok(())
    }

    /// Modulus used to scale tangent projections (`None` for ε-CM).
    fn circle_modulus(&self) -> Option<f64> {
        match self {
            ConstraintSpec::Cm { modulus } | ConstraintSpec::Cms { modulus, .. } => Some(*modulus),
            ConstraintSpec::EpsCm { .. } => None,
        }
    }

    /// Half-width of the admissible phase arc around each CM&S reference
    /// phase: `2·asin(min(ε/(2c), 1))`, capped at π.
    pub fn arc_half_width(&self) -> Option<f64> {
        match self {
            ConstraintSpec::Cms { modulus, eps, .. } => {
                Some(2.0 * (eps / (2.0 * modulus)).min(1.0).asin())
            }
            _ => None,
        }
    }
}

pub fn default_modulus(array: &ArrayConfig) -> f64 {
    1.0 / (array.waveform_len() as f64).sqrt()
}

/// A transmit waveform together with the set it lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub data: CVector,
    pub constraint: Arc<ConstraintSpec>,
}

impl Waveform {
    /// Wraps `data`, rejecting it if it is not feasible to within 1e−10.
    pub fn new(data: CVector, constraint: Arc<ConstraintSpec>) -> Result<Self> {
        check_len(&data, &constraint)?;
        let residual = feasibility_residual(&data, &constraint);
        if !(residual <= 1e-10) {
            return Err(Error::InfeasibleInit {
                constraint: constraint.name(),
                residual,
            });
        }
        Ok(Waveform { data, constraint })
    }

    pub fn new_unchecked(data: CVector, constraint: Arc<ConstraintSpec>) -> Self {
        Waveform { data, constraint }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn residual(&self) -> f64 {
        feasibility_residual(&self.data, &self.constraint)
    }
}

fn check_len(data: &CVector, constraint: &ConstraintSpec) -> Result<()> {
    if let ConstraintSpec::Cms { reference, .. } = constraint {
        if reference.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: reference.len(),
                got: data.len(),
            });
        }
    }
    Ok(())
}

/// Orthogonal projection of `direction` onto the tangent space at `point`.
///
/// For CM and CM&S this is `u − Re{u* ⊙ s} ⊙ s / c²`; for ε-CM the tangent
/// space is the whole ambient space.
pub fn project_tangent(point: &Waveform, direction: &CVector) -> Result<CVector> {
    if point.len() != direction.len() {
        return Err(Error::DimensionMismatch {
            expected: point.len(),
            got: direction.len(),
        });
    }
    let Some(c) = point.constraint.circle_modulus() else {
        return Ok(direction.clone());
    };
    let inv_c2 = 1.0 / (c * c);
    Ok(direction.zip_map(&point.data, |u, s| {
        let radial = (u.conj() * s).re * inv_c2;
        u - s * radial
    }))
}

/// Nearest point of the constraint set to `input` (Euclidean distance).
///
/// Zero entries have no unique nearest point; they map to phase zero (CM),
/// the inner radius at phase zero (ε-CM), or the reference entry (CM&S).
pub fn retract(input: &CVector, constraint: &Arc<ConstraintSpec>) -> Result<Waveform> {
    check_len(input, constraint)?;
    let data = match constraint.as_ref() {
        ConstraintSpec::Cm { modulus } => input.map(|u| {
            let r = u.norm();
            if r == 0.0 {
                Complex64::new(*modulus, 0.0)
            } else {
                u * (*modulus / r)
            }
        }),
        ConstraintSpec::EpsCm {
            center,
            eps_lo,
            eps_hi,
        } => {
            let (lo, hi) = (center - eps_lo, center + eps_hi);
            input.map(|u| {
                let r = u.norm();
                if r == 0.0 {
                    Complex64::new(lo, 0.0)
                } else if r < lo {
                    u * (lo / r)
                } else if r > hi {
                    u * (hi / r)
                } else {
                    u
                }
            })
        }
        ConstraintSpec::Cms {
            modulus,
            reference,
            ..
        } => {
            let delta = constraint.arc_half_width().unwrap_or(PI);
            input.zip_map(reference, |u, s_ref| {
                let ref_phase = s_ref.arg();
                if u.norm() == 0.0 {
                    return Complex64::from_polar(*modulus, ref_phase);
                }
                let offset = wrap_phase(u.arg() - ref_phase).clamp(-delta, delta);
                Complex64::from_polar(*modulus, ref_phase + offset)
            })
        }
    };
    Ok(Waveform {
        data,
        constraint: Arc::clone(constraint),
    })
}

/// Wraps a phase difference into [−π, π).
fn wrap_phase(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Largest constraint violation; zero exactly on the set.
pub fn feasibility_residual(input: &CVector, constraint: &ConstraintSpec) -> f64 {
    match constraint {
        ConstraintSpec::Cm { modulus } => input
            .iter()
            .map(|s| (s.norm() - modulus).abs())
            .fold(0.0, f64::max),
        ConstraintSpec::EpsCm {
            center,
            eps_lo,
            eps_hi,
        } => {
            let (lo, hi) = (center - eps_lo, center + eps_hi);
            input
                .iter()
                .map(|s| {
                    let r = s.norm();
                    (lo - r).max(r - hi).max(0.0)
                })
                .fold(0.0, f64::max)
        }
        ConstraintSpec::Cms {
            modulus,
            reference,
            eps,
        } => {
            assert_eq!(input.len(), reference.len(), "waveform/reference length mismatch");
            input
                .iter()
                .zip(reference.iter())
                .map(|(s, r)| {
                    let modulus_gap = (s.norm() - modulus).abs();
                    let similarity_gap = ((s - r).norm() - eps).max(0.0);
                    modulus_gap.max(similarity_gap)
                })
                .fold(0.0, f64::max)
        }
    }
}

/// Deterministic pseudo-random feasible point of length `len`.
pub fn random_feasible(constraint: &Arc<ConstraintSpec>, len: usize, seed: u64) -> Result<Waveform> {
    constraint.validate(len)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = match constraint.as_ref() {
        ConstraintSpec::Cm { modulus } => CVector::from_fn(len, |_, _| {
            Complex64::from_polar(*modulus, rng.random_range(-PI..PI))
        }),
        ConstraintSpec::EpsCm {
            center,
            eps_lo,
            eps_hi,
        } => {
            let (lo, hi) = (center - eps_lo, center + eps_hi);
            CVector::from_fn(len, |_, _| {
                let r = if hi > lo { rng.random_range(lo..=hi) } else { lo };
                Complex64::from_polar(r, rng.random_range(-PI..PI))
            })
        }
        ConstraintSpec::Cms {
            modulus,
            reference,
            eps,
        } => {
            if *eps == 0.0 {
                reference.clone()
            } else {
                let delta = constraint.arc_half_width().unwrap_or(PI);
                reference.map(|r| {
                    let offset = rng.random_range(-delta..=delta);
                    Complex64::from_polar(*modulus, r.arg() + offset)
                })
            }
        }
    };
    Ok(Waveform {
        data,
        constraint: Arc::clone(constraint),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn cm(c: f64) -> Arc<ConstraintSpec> {
        Arc::new(ConstraintSpec::Cm { modulus: c })
    }

    fn random_vector(len: usize, seed: u64, scale: f64) -> CVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CVector::from_fn(len, |_, _| {
            Complex64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
        })
    }

    #[test]
    fn cm_retraction_example() {
        let c = 1.0 / 2f64.sqrt();
        let u = CVector::from_vec(vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, -3.0)]);
        let s = retract(&u, &cm(c)).unwrap();
        assert!((s.data[0] - Complex64::new(c, 0.0)).norm() < 1e-15);
        assert!((s.data[1] - Complex64::new(0.0, -c)).norm() < 1e-15);
    }

    #[test]
    fn zero_vector_residual_under_cm() {
        let c = 1.0 / 2f64.sqrt();
        let z = CVector::zeros(2);
        assert!((feasibility_residual(&z, &cm(c)) - c).abs() < 1e-15);
    }

    #[test]
    fn zero_entries_use_fixed_tie_break() {
        let z = CVector::zeros(3);
        let s = retract(&z, &cm(0.5)).unwrap();
        assert!(s.data.iter().all(|x| *x == Complex64::new(0.5, 0.0)));

        let e = Arc::new(ConstraintSpec::EpsCm {
            center: 1.0,
            eps_lo: 0.25,
            eps_hi: 0.5,
        });
        let s = retract(&z, &e).unwrap();
        assert!(s.data.iter().all(|x| *x == Complex64::new(0.75, 0.0)));

        let reference = CVector::from_element(3, Complex64::from_polar(0.5, 1.0));
        let m = Arc::new(ConstraintSpec::Cms {
            modulus: 0.5,
            reference: reference.clone(),
            eps: 0.1,
        });
        let s = retract(&z, &m).unwrap();
        assert!((s.data - reference).norm() < 1e-15);
    }

    #[test]
    fn projection_examples_under_cm() {
        let c = 0.3;
        let s = random_feasible(&cm(c), 6, 1).unwrap();
        let p = project_tangent(&s, &s.data).unwrap();
        assert!(p.norm() < 1e-15);

        let js = s.data.map(|x| x * Complex64::i());
        let p = project_tangent(&s, &js).unwrap();
        assert!((p - js).norm() < 1e-15);
    }

    #[test]
    fn eps_cm_projection_is_identity() {
        let e = Arc::new(ConstraintSpec::EpsCm {
            center: 1.0,
            eps_lo: 0.5,
            eps_hi: 0.5,
        });
        let s = random_feasible(&e, 5, 3).unwrap();
        let u = random_vector(5, 4, 1.0);
        assert_eq!(project_tangent(&s, &u).unwrap(), u);
    }

    #[test]
    fn projection_rejects_length_mismatch() {
        let s = random_feasible(&cm(1.0), 4, 0).unwrap();
        assert!(matches!(
            project_tangent(&s, &CVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    /// Oracle: real least-squares projection onto span{ j·s_n e_n } in R^{2n}.
    #[test]
    fn projection_matches_dense_least_squares() {
        for (seed, c) in [(10u64, 0.2), (11, 1.0), (12, 3.5)] {
            let n = 7;
            let s = random_feasible(&cm(c), n, seed).unwrap();
            let u = random_vector(n, seed + 100, 2.0);

            // Basis columns in real coordinates [re; im].
            let mut basis = DMatrix::<f64>::zeros(2 * n, n);
            for k in 0..n {
                let t = s.data[k] * Complex64::i();
                basis[(k, k)] = t.re;
                basis[(n + k, k)] = t.im;
            }
            let u_real = DVector::from_fn(2 * n, |i, _| if i < n { u[i].re } else { u[i - n].im });
            let gram = basis.transpose() * &basis;
            let coeffs = gram.lu().solve(&(basis.transpose() * &u_real)).unwrap();
            let proj_real = &basis * coeffs;

            let p = project_tangent(&s, &u).unwrap();
            for k in 0..n {
                assert!((p[k].re - proj_real[k]).abs() < 1e-12);
                assert!((p[k].im - proj_real[n + k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn feasible_points_are_fixed_by_retraction() {
        let len = 8;
        let reference = random_feasible(&cm(0.4), len, 5).unwrap().data;
        let specs = [
            cm(0.4),
            Arc::new(ConstraintSpec::EpsCm {
                center: 0.4,
                eps_lo: 0.1,
                eps_hi: 0.2,
            }),
            Arc::new(ConstraintSpec::Cms {
                modulus: 0.4,
                reference,
                eps: 0.3,
            }),
        ];
        for spec in &specs {
            let s = random_feasible(spec, len, 9).unwrap();
            let r = retract(&s.data, spec).unwrap();
            assert!((r.data - &s.data).norm() < 1e-14, "{}", spec.name());
        }
    }

    #[test]
    fn cms_with_zero_eps_is_the_reference() {
        let reference = random_feasible(&cm(0.25), 6, 2).unwrap().data;
        let spec = Arc::new(ConstraintSpec::Cms {
            modulus: 0.25,
            reference: reference.clone(),
            eps: 0.0,
        });
        assert_eq!(random_feasible(&spec, 6, 77).unwrap().data, reference);
        assert_eq!(feasibility_residual(&reference, &spec), 0.0);
    }

    #[test]
    fn random_feasible_is_deterministic_and_feasible() {
        let spec = cm(0.1);
        let a = random_feasible(&spec, 20, 42).unwrap();
        let b = random_feasible(&spec, 20, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.data.iter().all(|x| (x.norm() - 0.1).abs() < 1e-15));
        assert_ne!(a, random_feasible(&spec, 20, 43).unwrap());
    }

    #[test]
    fn eps_cm_random_magnitudes_cover_the_annulus() {
        let (lo, hi) = (0.5, 1.5);
        let spec = Arc::new(ConstraintSpec::EpsCm {
            center: 1.0,
            eps_lo: 0.5,
            eps_hi: 0.5,
        });
        let bins = 10;
        let mut hist = vec![0usize; bins];
        for seed in 0..200 {
            let s = random_feasible(&spec, 50, seed).unwrap();
            assert!(s.residual() == 0.0);
            for x in s.data.iter() {
                let b = (((x.norm() - lo) / (hi - lo)) * bins as f64) as usize;
                hist[b.min(bins - 1)] += 1;
            }
        }
        // 10_000 draws over 10 bins; each bin expects ~1000.
        assert!(hist.iter().all(|&h| h > 800), "{hist:?}");
    }

    #[test]
    fn nesting_cm_inside_eps_cm() {
        let spec = Arc::new(ConstraintSpec::EpsCm {
            center: 1.0,
            eps_lo: 0.3,
            eps_hi: 0.2,
        });
        for c in [0.7, 0.85, 1.0, 1.2] {
            let s = random_feasible(&cm(c), 10, 8).unwrap();
            assert_eq!(feasibility_residual(&s.data, &spec), 0.0);
        }
    }

    #[test]
    fn constraint_validation() {
        assert!(ConstraintSpec::Cm { modulus: 0.0 }.validate(3).is_err());
        assert!(ConstraintSpec::EpsCm {
            center: 1.0,
            eps_lo: 1.5,
            eps_hi: 0.0
        }
        .validate(3)
        .is_err());
        let reference = CVector::from_element(3, Complex64::new(0.5, 0.0));
        let ok = ConstraintSpec::Cms {
            modulus: 0.5,
            reference: reference.clone(),
            eps: 1.0,
        };
        assert!(ok.validate(3).is_ok());
        assert!(ok.validate(4).is_err());
        let too_wide = ConstraintSpec::Cms {
            modulus: 0.5,
            reference: reference.clone(),
            eps: 1.01,
        };
        assert!(too_wide.validate(3).is_err());
        let off_circle = ConstraintSpec::Cms {
            modulus: 0.6,
            reference,
            eps: 0.1,
        };
        assert!(off_circle.validate(3).is_err());
    }

    #[test]
    fn infeasible_waveform_rejected() {
        let err = Waveform::new(CVector::zeros(2), cm(1.0)).unwrap_err();
        assert!(matches!(err, Error::InfeasibleInit { constraint: "CM", .. }));
    }
}
