use proptest::prelude::*;
use twinbeam_core::fit::{fit_overlap, synthetic_points, VisibilityModel};
use twinbeam_core::schmidt::effective_mode_number;
use twinbeam_core::twinstats::{cross_correlation, klyshko, visibility_approx, visibility_full, TwinBeam};
use twinbeam_core::CountRecord;

fn record(gates: u64, s: u64, i: u64, c: u64) -> CountRecord {
    CountRecord { gates, singles_s: s, singles_i: i, coincidences: c, gate_rate: 1e6 }
}

proptest! {
    #[test]
    fn visibility_is_a_fraction(o in 0.0f64..=1.0, n in 0.0f64..50.0, e1 in 0.01f64..1.0, e2 in 0.01f64..1.0) {
        let a = visibility_approx(o, n);
        let f = visibility_full(o, n, e1, e2).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(f <= a + 1e-15);
        prop_assert!(f > -1.0);
    }

    #[test]
    fn visibility_decreases_with_mean_n(o in 0.0f64..=1.0, n in 0.0f64..5.0, dn in 1e-3f64..1.0) {
        prop_assert!(visibility_approx(o, n + dn) < visibility_approx(o, n));
    }

    #[test]
    fn balanced_arms_give_the_approximate_form(o in 0.0f64..=1.0, n in 0.0f64..5.0, eta in 0.01f64..1.0) {
        let f = visibility_full(o, n, eta, eta).unwrap();
        prop_assert!((f - visibility_approx(o, n)).abs() < 1e-14);
    }

    #[test]
    fn estimators_are_scale_invariant(s in 10u64..10_000, i in 10u64..10_000, c_frac in 0.01f64..1.0, m in 2u64..50) {
        let c = ((s.min(i) as f64) * c_frac).max(1.0) as u64;
        let gates = 20_000;
        let base = record(gates, s, i, c);
        let scaled = record(gates * m, s * m, i * m, c * m);
        let (k0, k1) = (klyshko(&base).unwrap(), klyshko(&scaled).unwrap());
        prop_assert!((k0.signal.value - k1.signal.value).abs() < 1e-12);
        prop_assert!((k0.idler.value - k1.idler.value).abs() < 1e-12);
        prop_assert!(k1.signal.stderr < k0.signal.stderr);
        let (g0, g1) = (cross_correlation(&base).unwrap(), cross_correlation(&scaled).unwrap());
        prop_assert!((g0.value - g1.value).abs() < 1e-9 * g0.value);
        prop_assert!(g1.stderr < g0.stderr);
    }

    #[test]
    fn noiseless_fit_recovers_overlap(o in 0.0f64..=1.0, n0 in 0.0f64..0.5, span in 0.1f64..2.0) {
        let ns: Vec<f64> = (0..8).map(|k| n0 + span * k as f64 / 7.0).collect();
        let report = fit_overlap(&synthetic_points(o, &ns, 0.01), VisibilityModel::Approx).unwrap();
        prop_assert!((report.overlap - o).abs() < 1e-6, "{} vs {}", report.overlap, o);
        prop_assert!(report.chi2 < 1e-6);
    }

    #[test]
    fn mode_number_bounds(raw in proptest::collection::vec(0.0f64..1.0, 1..40)) {
        prop_assume!(raw.iter().any(|x| *x > 1e-3));
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let lambda: Vec<f64> = raw.iter().map(|x| x / norm).collect();
        let k = effective_mode_number(&lambda);
        prop_assert!(k >= 1.0 - 1e-12 && k <= raw.len() as f64 + 1e-9);
    }

    #[test]
    fn thermal_moments_bound_g2(n in 1e-3f64..5.0, k in 1.0f64..200.0) {
        let beam = TwinBeam::new(n, k).unwrap();
        let g20 = beam.glauber(2, 0).unwrap() / (n * n);
        prop_assert!((g20 - (1.0 + 1.0 / k)).abs() < 1e-12);
        prop_assert!(g20 <= 2.0 + 1e-12);
    }
}
