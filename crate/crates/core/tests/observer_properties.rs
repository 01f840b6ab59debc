use hgo_gp::observer::{check_hurwitz, gain_polynomial_roots, observer_step};
use hgo_gp::{HighGainObserver, ObserverConfig, ObserverState};
use proptest::prelude::*;

fn sup_error(scale: f64) -> f64 {
    let cfg = ObserverConfig::new(vec![8.0, 15.0], scale).unwrap();
    let mut obs = HighGainObserver::new(cfg.clone(), ObserverState::initial(&cfg, 0.0, 0.0), 1e-4).unwrap();
    let mut sup = 0.0f64;
    for _ in 0..80_000 {
        let s = obs.step_with(f64::sin).unwrap();
        if s.time > 3.0 {
            sup = sup.max((s.z_hat[1] - s.time.cos()).abs());
        }
    }
    sup
}

#[test]
fn doubling_the_gain_halves_the_derivative_error() {
    let (e20, e40) = (sup_error(20.0), sup_error(40.0));
    assert!(e40 < e20);
    let ratio = e40 / e20;
    assert!((0.4..=0.7).contains(&ratio), "ratio {ratio}");
}

#[test]
fn default_gains_are_accepted_and_unstable_ones_refused() {
    assert!(ObserverConfig::new(vec![8.0, 15.0], 20.0).is_ok());
    assert!(ObserverConfig::new(vec![8.0, -15.0], 20.0).is_err());
    assert!(ObserverConfig::new(vec![0.0, 15.0], 20.0).is_err());
}

#[test]
fn identical_inputs_give_bit_identical_trajectories() {
    let cfg = ObserverConfig::new(vec![3.0, 3.0, 1.0], 10.0).unwrap();
    let run = || {
        let mut s = ObserverState::initial(&cfg, 0.2, 0.0);
        let mut out = Vec::new();
        for _ in 0..5000 {
            s = observer_step(&cfg, &s, |t| (3.0 * t).sin() + t * t, 1e-4).unwrap();
            out.extend(s.z_hat.iter().map(|v| v.to_bits()));
        }
        out
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn second_order_gate_is_positivity(k1 in -10.0f64..10.0, k2 in -10.0f64..10.0) {
        prop_assume!(k1.abs() > 1e-6 && k2.abs() > 1e-6);
        prop_assert_eq!(check_hurwitz(&[k1, k2]), k1 > 0.0 && k2 > 0.0);
    }

    #[test]
    fn third_order_gate_matches_routh_hurwitz(a1 in -5.0f64..5.0, a2 in -5.0f64..5.0, a3 in -5.0f64..5.0) {
        let margin = a1 * a2 - a3;
        prop_assume!(a1.abs() > 1e-3 && a3.abs() > 1e-3 && margin.abs() > 1e-3);
        prop_assert_eq!(check_hurwitz(&[a1, a2, a3]), a1 > 0.0 && a3 > 0.0 && margin > 0.0);
    }

    #[test]
    fn roots_satisfy_the_gain_polynomial(k in prop::collection::vec(0.1f64..10.0, 1..5)) {
        for root in gain_polynomial_roots(&k) {
            // s^r + k1 s^(r-1) + ... + kr by Horner
            let mut p = nalgebra::Complex::new(1.0, 0.0);
            for ki in &k {
                p = p * root + ki;
            }
            let scale = 1.0 + root.norm().powi(k.len() as i32);
            prop_assert!(p.norm() < 1e-8 * scale, "{root} gives {p}");
        }
    }

    #[test]
    fn constant_output_with_exact_estimate_is_an_equilibrium(c in -100.0f64..100.0, l in 1.0f64..100.0) {
        let cfg = ObserverConfig::new(vec![8.0, 15.0], l).unwrap();
        let mut obs = HighGainObserver::new(cfg.clone(), ObserverState::initial(&cfg, c, 0.0), 1e-4).unwrap();
        for _ in 0..1000 {
            obs.step_held(c).unwrap();
        }
        prop_assert_eq!(obs.estimates(), &[c, 0.0][..]);
    }
}
