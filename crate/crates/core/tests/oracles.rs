//! Monte Carlo counts against exact threshold-detector probabilities, plus
//! file-format round trips.

use twinbeam_core::config::Config;
use twinbeam_core::io;
use twinbeam_core::schmidt::uniform_coefficients;
use twinbeam_core::{simulate, CountRecord, DetectionSpec, SamplingStrategy, SimConfig};

/// Exact per-gate probabilities `(P_s, P_i, P_c)` for independent thermal
/// modes with occupations `mu`, each pair reaching both arms.
fn exact_click_probabilities(mu: &[f64], det: &DetectionSpec) -> (f64, f64, f64) {
    let dark_free = 1.0 - det.dark_prob;
    // E[(1-η)^n] for a thermal mode is 1/(1 + η μ)
    let none = |eta: f64| mu.iter().map(|m| 1.0 / (1.0 + eta * m)).product::<f64>();
    let q_s = none(det.eta1) * dark_free;
    let q_i = none(det.eta2) * dark_free;
    let both = 1.0 - (1.0 - det.eta1) * (1.0 - det.eta2);
    let q_si = none(both) * dark_free * dark_free;
    (1.0 - q_s, 1.0 - q_i, 1.0 - q_s - q_i + q_si)
}

fn z(observed: u64, p: f64, gates: u64) -> f64 {
    let n = gates as f64;
    (observed as f64 - n * p) / (n * p * (1.0 - p)).sqrt()
}

#[test]
fn counts_match_exact_click_probabilities() {
    let gates = 2_000_000;
    let cases = [
        (uniform_coefficients(1), 0.3, 0.5, 0.4, 0.0),
        (uniform_coefficients(4), 0.8, 0.2, 0.3, 1e-3),
        (vec![0.8f64.sqrt(), 0.2f64.sqrt()], 0.5, 0.1, 0.1, 1e-4),
        (uniform_coefficients(60), 0.2, 0.05, 0.06, 5e-5),
    ];
    for (k, (coeffs, mean_n, eta1, eta2, dark)) in cases.into_iter().enumerate() {
        let det = DetectionSpec::new(eta1, eta2, 1.19e6, dark).unwrap();
        for strategy in [SamplingStrategy::PerMode, SamplingStrategy::ThermalMixture] {
            if strategy == SamplingStrategy::ThermalMixture && coeffs.len() == 2 {
                // the mixture shortcut only matches two moments for unequal weights
                continue;
            }
            let cfg = SimConfig::new(coeffs.clone(), 0.0, det, gates, 100 + k as u64)
                .unwrap()
                .with_mean_n(mean_n)
                .unwrap()
                .with_strategy(strategy);
            let mu = cfg.occupations();
            let (ps, pi, pc) = exact_click_probabilities(&mu, &det);
            let r = simulate(&cfg).unwrap().record;
            for (label, observed, p) in [("S_s", r.singles_s, ps), ("S_i", r.singles_i, pi), ("C", r.coincidences, pc)] {
                let zz = z(observed, p, gates);
                assert!(zz.abs() < 4.0, "case {k} {strategy:?} {label}: observed {observed}, expected {:.1}, z {zz:.2}", p * gates as f64);
            }
        }
    }
}

#[test]
fn count_records_round_trip() {
    let records = [
        CountRecord { gates: 1_000_000, singles_s: 6012, singles_i: 5540, coincidences: 412, gate_rate: 1_190_625.0 },
        CountRecord { gates: 17, singles_s: 0, singles_i: 3, coincidences: 0, gate_rate: 0.5 },
    ];
    let mut buf = Vec::new();
    io::write_count_records(&mut buf, &records, &["seed 3".to_string()]).unwrap();
    assert!(String::from_utf8_lossy(&buf).starts_with("# seed 3\n"));
    assert_eq!(io::read_count_records(buf.as_slice()).unwrap(), records);
}

#[test]
fn inconsistent_count_records_are_rejected() {
    let text = "gates,S_s,S_i,C,R\n100,5,4,9,1000.0\n";
    assert!(io::read_count_records(text.as_bytes()).is_err());
}

#[test]
fn config_survives_serialization() {
    let cfg = Config::reference();
    assert_eq!(Config::parse(&cfg.to_toml()).unwrap(), cfg);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    let mut edited = cfg.clone();
    edited.sim.seed = 99;
    edited.filter.width_nm = Some(12.0);
    std::fs::write(&path, edited.to_toml()).unwrap();
    assert_eq!(Config::load(&path).unwrap(), edited);
}

#[test]
fn grid_dump_round_trips_bit_exact() {
    let mut cfg = Config::reference();
    cfg.grid.points = 64;
    cfg.grid.half_span_thz = 0.3;
    let jsa = twinbeam_core::build_jsa(
        &cfg.device_spec().unwrap(),
        &cfg.pump_spec().unwrap(),
        cfg.grid().unwrap(),
        cfg.approximation(),
    )
    .unwrap();
    let mut buf = Vec::new();
    io::write_grid_dump(&mut buf, &jsa, &[]).unwrap();
    let back = io::read_grid_dump(buf.as_slice()).unwrap();
    assert_eq!(back.grid(), jsa.grid());
    assert_eq!(back.values(), jsa.values());
}
