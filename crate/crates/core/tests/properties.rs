mod common;

use std::sync::Arc;

use mimo_rgd::manifolds::{feasibility_residual, project_tangent, random_feasible, retract, ConstraintSpec};
use mimo_rgd::objective::{rx_optimal, sinr, tx_gradient, tx_objective, ProblemOperators};
use mimo_rgd::scene::{ArrayConfig, Emitter, Scenario};
use mimo_rgd::solver::{lfm_init, rgd_step, solve, SolveConfig, StepsizeRule};
use mimo_rgd::CVector;
use num_complex::Complex64;
use proptest::prelude::*;

fn cvec(len: usize) -> impl Strategy<Value = CVector> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), len)
        .prop_map(|v| CVector::from_iterator(v.len(), v.into_iter().map(|(re, im)| Complex64::new(re, im))))
}

fn constraint(len: usize, kind: usize, seed: u64) -> Arc<ConstraintSpec> {
    common::constraints_for(len, seed)[kind].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn retraction_is_feasible_and_idempotent(
        (len, z) in (1usize..24).prop_flat_map(|n| (Just(n), cvec(n))),
        kind in 0usize..3,
        seed in any::<u64>(),
    ) {
        let c = constraint(len, kind, seed);
        let r = retract(&z, &c).unwrap();
        prop_assert!(feasibility_residual(&r.data, &c) <= 1e-12);
        let rr = retract(&r.data, &c).unwrap();
        prop_assert!((&rr.data - &r.data).norm() <= 1e-12);
    }

    #[test]
    fn retraction_beats_feasible_points(
        (len, z) in (1usize..24).prop_flat_map(|n| (Just(n), cvec(n))),
        kind in 0usize..3,
        seed in any::<u64>(),
        other in any::<u64>(),
    ) {
        let c = constraint(len, kind, seed);
        let r = retract(&z, &c).unwrap();
        let y = random_feasible(&c, len, other).unwrap();
        prop_assert!((&z - &r.data).norm() <= (&z - &y.data).norm() + 1e-12);
    }

    #[test]
    fn cm_retraction_keeps_phase(
        (len, z) in (1usize..24).prop_flat_map(|n| (Just(n), cvec(n))),
    ) {
        let c = constraint(len, 0, 0);
        let r = retract(&z, &c).unwrap();
        for (a, b) in z.iter().zip(r.data.iter()) {
            if a.norm() > 1e-9 {
                let d = (a.arg() - b.arg()).rem_euclid(std::f64::consts::TAU);
                prop_assert!(d < 1e-12 || std::f64::consts::TAU - d < 1e-12);
            }
        }
    }

    #[test]
    fn projection_is_orthogonal_and_tangent(
        (len, u) in (1usize..24).prop_flat_map(|n| (Just(n), cvec(n))),
        kind in 0usize..3,
        seed in any::<u64>(),
    ) {
        let c = constraint(len, kind, seed);
        let x = random_feasible(&c, len, seed ^ 1).unwrap();
        let pu = project_tangent(&x, &u).unwrap();
        let again = project_tangent(&x, &pu).unwrap();
        prop_assert!((&again - &pu).norm() <= 1e-12 * u.norm().max(1.0));
        prop_assert!(pu.dotc(&(&u - &pu)).re.abs() <= 1e-12 * u.norm_squared().max(1.0));
        if kind != 1 {
            // Tangent directions leave every modulus unchanged to first order.
            for (s, v) in x.data.iter().zip(pu.iter()) {
                prop_assert!((s.conj() * v).re.abs() <= 1e-12 * u.norm().max(1.0));
            }
        }
    }

    #[test]
    fn objective_is_phase_invariant_and_bounded(
        seed in any::<u64>(),
        phase in -3.0f64..3.0,
        k in 0usize..4,
    ) {
        let mut r = common::rng(seed);
        let sc = common::random_scenario(&mut r, 2, 2, 3, k);
        let ops = ProblemOperators::from_scenario(&sc, 0.0).unwrap();
        let s = common::random_cvec(&mut r, 6, 1.0);
        let g = tx_objective(&ops, &s).unwrap();
        let rotated = &s * Complex64::from_polar(1.0, phase);
        let g2 = tx_objective(&ops, &rotated).unwrap();
        prop_assert!((g - g2).abs() <= 1e-12 * g.abs().max(1.0));
        // 0 <= s^H A0^H M^-1 A0 s <= ||A0 s||^2.
        let b = ops.a0.apply(&s);
        prop_assert!(-g >= -1e-12 && -g <= b.norm_squared() * (1.0 + 1e-12));
    }

    #[test]
    fn optimal_receiver_dominates(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let sc = common::random_scenario(&mut r, 2, 3, 2, 3);
        let ops = ProblemOperators::from_scenario(&sc, 0.0).unwrap();
        let s = common::random_cvec(&mut r, 4, 1.0);
        let w = rx_optimal(&ops, &s).unwrap();
        let best = sinr(&ops, &s, &w).unwrap();
        let other = mimo_rgd::ReceiveFilter { data: common::random_cvec(&mut r, 6, 1.0) };
        prop_assert!(sinr(&ops, &s, &other).unwrap() <= best * (1.0 + 1e-12));
    }

    #[test]
    fn directional_derivative_matches(seed in any::<u64>(), gamma in 0.0f64..2.0) {
        let mut r = common::rng(seed);
        let sc = common::random_scenario(&mut r, 2, 2, 2, 2);
        let ops = ProblemOperators::from_scenario(&sc, gamma).unwrap();
        let s = common::random_cvec(&mut r, 4, 1.0);
        let d = common::random_cvec(&mut r, 4, 1.0);
        let grad = tx_gradient(&ops, &s).unwrap();
        let h = 1e-6;
        let fd = (tx_objective(&ops, &(&s + &d * Complex64::new(h, 0.0))).unwrap()
            - tx_objective(&ops, &(&s - &d * Complex64::new(h, 0.0))).unwrap())
            / (2.0 * h);
        let analytic = grad.dotc(&d).re;
        prop_assert!((fd - analytic).abs() <= 1e-6 * (grad.norm() * d.norm()).max(1e-3));
    }
}

fn interference_scene(nt: usize, nr: usize, n: usize) -> Scenario {
    let array = ArrayConfig::new(nt, nr, n).unwrap();
    Scenario {
        array,
        target: Emitter::from_degrees(0, 15.0, 30.0),
        interferers: vec![
            Emitter::from_degrees(0, -50.0, 20.0),
            Emitter::from_degrees(1, -10.0, 20.0),
            Emitter::from_degrees(2, 40.0, 20.0),
        ],
        noise_power_db: 0.0,
        constraint: ConstraintSpec::cm_default(&array),
    }
}

/// Rebuilds each accepted Armijo step and checks that no shorter backtrack
/// count would also have been accepted.
#[test]
fn armijo_takes_the_first_acceptable_step() {
    let sc = interference_scene(2, 2, 2);
    let ops = ProblemOperators::from_scenario(&sc, 0.0).unwrap();
    let rule = StepsizeRule::armijo_default();
    let StepsizeRule::Armijo { tau, beta, sigma, .. } = rule else { unreachable!() };
    let constraint = Arc::new(sc.constraint.clone());
    let mut point = mimo_rgd::Waveform::new(lfm_init(&sc.array).data, constraint.clone()).unwrap();
    let mut saw_backtrack = false;
    for _ in 0..300 {
        // Near a stationary point the sufficient-decrease test can run out of
        // backtracks; the solver reports that as a termination.
        let Ok((next, diag)) = rgd_step(&ops, &point, &rule) else { break };
        let g0 = tx_objective(&ops, &point.data).unwrap();
        let grad = tx_gradient(&ops, &point.data).unwrap();
        let pg = project_tangent(&point, &grad).unwrap();
        let acceptable = |t: f64| {
            let probe = &point.data - &grad * Complex64::new(t, 0.0);
            let retracted = retract(&(&point.data - &pg * Complex64::new(t, 0.0)), &constraint).unwrap();
            g0 - tx_objective(&ops, &probe).unwrap() >= sigma * t * pg.norm_squared()
                && tx_objective(&ops, &retracted.data).unwrap() <= g0
        };
        let trial = |m: usize| (0..m).fold(tau, |t, _| t * beta);
        assert_eq!(diag.stepsize, trial(diag.backtracks));
        assert!(acceptable(diag.stepsize));
        for m in 0..diag.backtracks {
            assert!(!acceptable(trial(m)), "m = {m} was already acceptable");
        }
        saw_backtrack |= diag.backtracks > 0;
        assert!(diag.objective_after <= diag.objective_before);
        point = next;
    }
    assert!(saw_backtrack, "instance never exercised backtracking");
}

#[test]
fn cm_rgd_matches_scalar_global_optimum() {
    // With one transmit and one receive element the optimal SINR over CM can
    // be scanned directly.
    let array = ArrayConfig::new(1, 1, 3).unwrap();
    let sc = Scenario {
        array,
        target: Emitter::from_degrees(1, 0.0, 10.0),
        interferers: vec![Emitter::from_degrees(0, 30.0, 15.0), Emitter::from_degrees(2, -20.0, 15.0)],
        noise_power_db: 0.0,
        constraint: ConstraintSpec::cm_default(&array),
    };
    let ops = ProblemOperators::from_scenario(&sc, 0.0).unwrap();
    let c = 1.0 / 3f64.sqrt();
    let mut grid_best = f64::NEG_INFINITY;
    let steps = 360;
    for i in 0..steps {
        for j in 0..steps {
            let (a, b) = (
                std::f64::consts::TAU * i as f64 / steps as f64,
                std::f64::consts::TAU * j as f64 / steps as f64,
            );
            let s = CVector::from_vec(vec![
                Complex64::new(c, 0.0),
                Complex64::from_polar(c, a),
                Complex64::from_polar(c, b),
            ]);
            grid_best = grid_best.max(-tx_objective(&ops, &s).unwrap());
        }
    }
    let constraint = Arc::new(sc.constraint.clone());
    let best = (0..8)
        .map(|seed| {
            let init = random_feasible(&constraint, 3, seed).unwrap();
            let res = solve(&sc, &SolveConfig::default(), Some(init)).unwrap();
            -tx_objective(&ops, &res.waveform.data).unwrap()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    // The grid is coarse, so RGD should match or beat it.
    assert!(best >= grid_best * (1.0 - 1e-3), "rgd {best} vs grid {grid_best}");
}
