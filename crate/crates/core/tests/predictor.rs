//! Filter behaviour checked against a hand-rolled recurrence and exact
//! fractions.

use proptest::prelude::*;
use relaysim::cli::{replay_example, EXAMPLE_HISTORIES};
use relaysim::hexgeom::RelayId;
use relaysim::predictor::{self, PredictorState, STEADY_BLEND};

/// Scalar recurrence written out directly; returns (a_hat, v, prediction).
fn oracle_run(history: &[f64], eps: f64) -> (f64, f64, f64) {
    let (mut a, mut v) = (0.0f64, 0.0f64);
    let mut pred = history[0];
    for w in history.windows(2) {
        let meas = w[1] - w[0];
        let vm = v + eps;
        let k = vm / (vm + eps);
        a += k * (meas - a);
        v = (1.0 - k) * vm;
        pred = (w[1] + a).max(0.0);
    }
    (a, v, pred)
}

fn run(history: &[f64], eps: f64) -> (PredictorState, f64) {
    let mut s = PredictorState::new(eps).unwrap();
    let mut p = 0.0;
    for &e in history {
        p = s.observe(e, 1.0).unwrap();
    }
    (s, p)
}

#[test]
fn worked_example_frozen_values() {
    // Blending factors 1/2, 3/5, 8/13 give these exact predictions.
    let expect = [7400.0 / 13.0, 770.0, 9050.0 / 13.0];
    for eps in [0.001, 0.01, 0.05, 0.5, 5.0, 50.0] {
        for ((_, hist), want) in EXAMPLE_HISTORIES.iter().zip(expect) {
            let (_, p) = run(hist, eps);
            assert!((p - want).abs() < 1e-9, "eps {eps}: {p} vs {want}");
            let (_, _, op) = oracle_run(hist, eps);
            assert!((p - op).abs() < 1e-9);
        }
    }
}

#[test]
fn worked_example_ordering_and_choice() {
    let r = replay_example(0.05).unwrap();
    let p: Vec<f64> = r.entries.iter().map(|e| e.predicted).collect();
    assert!(p[1] > p[2] && p[2] > p[0]);
    assert_eq!(r.selected, Some(RelayId(2)));
    assert_eq!(r.selected_name(), Some("R2"));
    // By current energy the choice would be R1 (900 > 850 > 800).
    let cur: Vec<f64> = r.entries.iter().map(|e| e.current).collect();
    assert!(cur[0] > cur[2] && cur[2] > cur[1]);
}

#[test]
fn blend_sequence_is_independent_of_eps() {
    for eps in [1e-3, 0.05, 1.0, 10.0] {
        let mut s = PredictorState::primed(eps, 0.0).unwrap();
        let mut seen = Vec::new();
        for _ in 0..3 {
            let (_, vm) = predictor::evolve(&s).unwrap();
            seen.push(predictor::blending_factor(vm, eps).unwrap());
            s = predictor::update(&s, 0.0).unwrap();
        }
        for (b, want) in seen.iter().zip([0.5, 0.6, 8.0 / 13.0]) {
            assert!((b - want).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn matches_oracle_on_random_histories(
        eps in 1e-3f64..10.0,
        hist in prop::collection::vec(0.0f64..5000.0, 2..40),
    ) {
        let (s, p) = run(&hist, eps);
        let (a, v, op) = oracle_run(&hist, eps);
        prop_assert!((s.a_hat - a).abs() <= 1e-9 * (1.0 + a.abs()));
        prop_assert!((s.v - v).abs() <= 1e-12 * (1.0 + v));
        prop_assert!((p - op).abs() <= 1e-9 * (1.0 + op.abs()));
    }

    #[test]
    fn blend_stays_in_unit_interval(v in 0.0f64..1e6, eps in 1e-6f64..1e3) {
        let b = predictor::blending_factor(v, eps).unwrap();
        prop_assert!((0.0..1.0).contains(&b));
    }

    #[test]
    fn blend_converges_to_golden_ratio(v0 in 0.0f64..100.0, eps in 1e-3f64..10.0) {
        let mut s = PredictorState::with_prior(eps, 0.0, v0).unwrap();
        s.initialized = true;
        let mut b = 0.0;
        for _ in 0..100 {
            let (_, vm) = predictor::evolve(&s).unwrap();
            b = predictor::blending_factor(vm, eps).unwrap();
            s = predictor::update(&s, 0.0).unwrap();
        }
        prop_assert!((b - STEADY_BLEND).abs() < 1e-6);
    }

    #[test]
    fn variance_contracts(v in 0.0f64..1e4, eps in 1e-3f64..10.0, a in -1e3f64..1e3) {
        let mut s = PredictorState::with_prior(eps, 0.0, v).unwrap();
        s.initialized = true;
        let next = predictor::update(&s, a).unwrap();
        prop_assert!(next.v < v + eps);
        prop_assert!(next.v >= 0.0);
        // The posterior variance never exceeds the noise constant.
        prop_assert!(next.v < eps);
    }

    #[test]
    fn fixed_point_when_measurement_matches(a in -1e3f64..1e3, v in 0.0f64..10.0, eps in 1e-3f64..10.0) {
        let mut s = PredictorState::with_prior(eps, a, v).unwrap();
        s.initialized = true;
        prop_assert_eq!(predictor::update(&s, a).unwrap().a_hat, a);
    }

    #[test]
    fn estimate_moves_towards_measurement(a0 in -1e3f64..1e3, m in -1e3f64..1e3, v in 0.0f64..10.0, eps in 1e-3f64..10.0) {
        let mut s = PredictorState::with_prior(eps, a0, v).unwrap();
        s.initialized = true;
        let a1 = predictor::update(&s, m).unwrap().a_hat;
        prop_assert!(a1 >= a0.min(m) - 1e-9 && a1 <= a0.max(m) + 1e-9);
        prop_assert!((a1 - m).abs() <= (a0 - m).abs() + 1e-9);
    }

    #[test]
    fn draining_keeps_estimate_non_positive(
        drops in prop::collection::vec(0.0f64..50.0, 1..60),
        eps in 1e-3f64..10.0,
    ) {
        let mut s = PredictorState::new(eps).unwrap();
        let mut e = 1e5;
        s.observe(e, 1.0).unwrap();
        for d in drops {
            e -= d;
            let p = s.observe(e, 1.0).unwrap();
            prop_assert!(s.a_hat <= 0.0);
            prop_assert!(p <= e);
            prop_assert!(p >= 0.0);
        }
    }

    #[test]
    fn constant_trend_is_learned(a in -400.0f64..400.0, eps in 1e-3f64..10.0) {
        let mut s = PredictorState::new(eps).unwrap();
        let mut e = 1e6;
        for _ in 0..101 {
            s.observe(e, 1.0).unwrap();
            e += a;
        }
        prop_assert!((s.a_hat - a).abs() < 1e-6 * a.abs().max(1.0));
    }

    #[test]
    fn prediction_is_clamped(e in 0.0f64..1e4, a in -1e5f64..1e5, dt in 1e-3f64..10.0) {
        let p = predictor::predict_energy(e, a, dt).unwrap();
        prop_assert!(p >= 0.0);
        prop_assert_eq!(p, (e + a * dt).max(0.0));
    }
}
