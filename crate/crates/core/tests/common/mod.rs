#![allow(dead_code)]

use std::sync::Arc;

use mimo_rgd::manifolds::ConstraintSpec;
use mimo_rgd::objective::ProblemOperators;
use mimo_rgd::scene::{ArrayConfig, Emitter, Scenario};
use mimo_rgd::{CMatrix, CVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cvec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> CVector {
    CVector::from_fn(len, |_, _| {
        Complex64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
    })
}

/// Random small scenario with `k` interferers. The target sits strictly
/// inside the range window so `A₀ ≠ 0`.
pub fn random_scenario(rng: &mut ChaCha8Rng, nt: usize, nr: usize, n: usize, k: usize) -> Scenario {
    let array = ArrayConfig::new(nt, nr, n).unwrap();
    let target_angle = rng.random_range(-80.0..80.0);
    let target = Emitter::from_degrees(rng.random_range(0..n), target_angle, rng.random_range(0.0..30.0));
    let interferers = (0..k)
        .map(|_| {
            let mut angle: f64 = rng.random_range(-89.0..89.0);
            if (angle - target_angle).abs() < 1e-3 {
                angle += 1.0;
            }
            Emitter::from_degrees(rng.random_range(0..=n), angle, rng.random_range(0.0..30.0))
        })
        .collect();
    Scenario {
        array,
        target,
        interferers,
        noise_power_db: rng.random_range(-5.0..5.0),
        constraint: ConstraintSpec::cm_default(&array),
    }
}

/// Dense `M(s)` assembled from explicit operator matrices.
pub fn dense_covariance(ops: &ProblemOperators, s: &CVector) -> CMatrix {
    let n = ops.filter_len();
    let mut m = CMatrix::identity(n, n);
    for (ratio, a) in &ops.interferers {
        let y = &a.matrix * s;
        m += (&y * y.adjoint()) * Complex64::new(*ratio, 0.0);
    }
    m
}

pub fn rel_err(a: &CVector, b: &CVector) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn constraints_for(len: usize, seed: u64) -> Vec<Arc<ConstraintSpec>> {
    let c = 1.0 / (len as f64).sqrt();
    let mut r = rng(seed);
    let reference = CVector::from_fn(len, |_, _| Complex64::from_polar(c, r.random_range(-3.0..3.0)));
    vec![
        Arc::new(ConstraintSpec::Cm { modulus: c }),
        Arc::new(ConstraintSpec::EpsCm {
            center: c,
            eps_lo: 0.3 * c,
            eps_hi: 0.2 * c,
        }),
        Arc::new(ConstraintSpec::Cms {
            modulus: c,
            reference,
            eps: 0.7 * c,
        }),
    ]
}
