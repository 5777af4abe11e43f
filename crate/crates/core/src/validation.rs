//! Reference-device checks with fixed tolerances, shared by the acceptance
//! test target and the `report` command.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::Config;
use crate::dispersion::DeviceSpec;
use crate::error::Result;
use crate::fit::{fit_overlap, synthetic_points, VisibilityModel};
use crate::jsa::{self, apply_filter, build_jsa, Cut, FilterShape, FilterSpec, FrequencyGrid, JointAmplitude};
use crate::montecarlo::{efficiency_sweep, extrapolate_klyshko, simulate, SimConfig};
use crate::schmidt::{self, decompose, delay_compensated_overlap, spectral_overlap};
use crate::twinstats::{cross_correlation, visibility_approx, visibility_full, DetectionSpec, VisibilityPoint};
use crate::units;
use crate::Complex64;

pub const UNFILTERED_OVERLAP: (f64, f64) = (0.26, 0.02);
pub const DOUBLING_STABILITY: f64 = 0.003;
pub const COMPENSATED_OVERLAP: (f64, f64) = (0.76, 0.02);
pub const G12_OVERLAP: (f64, f64) = (0.98, 0.02);
pub const SG40_OVERLAP: (f64, f64) = (0.83, 0.02);
pub const LINEWIDTH_NM: (f64, f64) = (0.6, 0.1);
pub const MARGINAL_FWHM_NM: (f64, f64) = (90.0, 10.0);
pub const SIGNAL_CENTER_NM: (f64, f64) = (1567.0, 3.0);
pub const IDLER_CENTER_NM: (f64, f64) = (1535.0, 3.0);
pub const TILT_DEG: (f64, f64) = (0.5, 0.1);
pub const IDENTITY_TOL: f64 = 1e-12;
pub const ESTIMATOR_SIGMAS: f64 = 3.0;
pub const ESTIMATOR_GATES: u64 = 1_000_000;
pub const KLYSHKO_TRUTH: (f64, f64) = (0.060, 0.056);
pub const KLYSHKO_TOL: f64 = 0.002;
pub const KLYSHKO_GATES: u64 = 100_000_000;
pub const FIT_NOISELESS_TOL: f64 = 1e-6;
pub const FIT_RMS_MAX: f64 = 0.01;
pub const FIT_COVERAGE: (f64, f64) = (0.60, 0.76);
pub const FIT_SEEDS: u64 = 100;
pub const K_SEPARABLE_TOL: f64 = 1e-6;
pub const K_TWO_MODE: (f64, f64) = (1.0 / 0.68, 1e-4);
pub const K_REFERENCE_MIN: f64 = 10.0;
pub const OVERLAP_ROUTES_TOL: f64 = 1e-3;

/// Seed used by the acceptance run.
pub const ACCEPTANCE_SEED: u64 = 1;

/// Outcome of one numbered acceptance criterion.
#[derive(Debug, Clone)]
pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{mark}] {}. {}: {}", self.id, self.title, self.details.join("; "))
    }
}

struct Tally {
    passed: bool,
    details: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self { passed: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.passed &= ok;
        self.details.push(if ok { detail } else { format!("{detail} <-- out of tolerance") });
    }

    fn within(&mut self, label: &str, value: f64, (target, tol): (f64, f64)) {
        self.check((value - target).abs() <= tol, format!("{label} = {value:.4} (want {target} +/- {tol})"));
    }

    fn error(&mut self, label: &str, e: crate::Error) {
        self.check(false, format!("{label}: error {e}"));
    }

    fn finish(self, id: u8, title: &'static str) -> Criterion {
        Criterion { id, title, passed: self.passed, details: self.details }
    }
}

/// Unfiltered reference JSA shared by the spectral criteria.
pub struct Reference {
    pub config: Config,
    pub spec: DeviceSpec,
    pub jsa: JointAmplitude,
}

impl Reference {
    pub fn build(config: &Config) -> Result<Self> {
        let spec = config.device_spec()?;
        let jsa = build_jsa(&spec, &config.pump_spec()?, config.grid()?, config.approximation())?;
        Ok(Self { config: config.clone(), spec, jsa })
    }

    fn filtered(&self, shape: FilterShape, width_nm: f64) -> Result<JointAmplitude> {
        let filter = FilterSpec::from_nm(shape, width_nm, units::rad_per_ps_to_thz(self.spec.signal_center))?;
        Ok(apply_filter(&self.jsa, &filter)?.jsa)
    }
}

pub fn unfiltered_overlap(r: &Reference) -> Criterion {
    let mut t = Tally::new();
    let coarse = match spectral_overlap(&r.jsa) {
        Ok(o) => {
            t.within("|O|", o.norm(), UNFILTERED_OVERLAP);
            Some(o.norm())
        }
        Err(e) => {
            t.error("|O|", e);
            None
        }
    };
    let refined = r.jsa.grid().refined();
    let fine = r
        .config
        .pump_spec()
        .and_then(|pump| build_jsa(&r.spec, &pump, refined, r.config.approximation()))
        .and_then(|jsa| spectral_overlap(&jsa))
        .map(|o| o.norm());
    match (coarse, fine) {
        (Some(c), Ok(f)) => t.check(
            (c - f).abs() <= DOUBLING_STABILITY,
            format!("doubled grid {}x{} |O| = {f:.5}, change {:.1e} (want <= {DOUBLING_STABILITY})", refined.n_s, refined.n_i, (c - f).abs()),
        ),
        (_, Err(e)) => t.error("doubled grid", e),
        (None, Ok(_)) => {}
    }
    t.finish(1, "unfiltered spectral overlap")
}

pub fn compensated_overlap(r: &Reference) -> Criterion {
    let mut t = Tally::new();
    match delay_compensated_overlap(&r.jsa, schmidt::default_delay_range(&r.spec)) {
        Ok(d) => {
            t.within("max_tau |O(tau)|", d.overlap, COMPENSATED_OVERLAP);
            t.details.push(format!("at tau = {:.4} ps", d.tau));
        }
        Err(e) => t.error("delay scan", e),
    }
    t.finish(2, "delay-compensated overlap")
}

pub fn filtered_overlaps(r: &Reference) -> Criterion {
    let mut t = Tally::new();
    let cases = [
        ("12 nm Gaussian |O|", FilterShape::Gaussian, 12.0, G12_OVERLAP),
        (
            "40 nm super-Gaussian |O|",
            FilterShape::SuperGaussian { order: jsa::DEFAULT_SUPERGAUSSIAN_ORDER },
            40.0,
            SG40_OVERLAP,
        ),
    ];
    for (label, shape, width, target) in cases {
        match r.filtered(shape, width).and_then(|j| spectral_overlap(&j)) {
            Ok(o) => t.within(label, o.norm(), target),
            Err(e) => t.error(label, e),
        }
    }
    t.details.push(format!("super-Gaussian order m = {}", jsa::DEFAULT_SUPERGAUSSIAN_ORDER));
    t.finish(3, "filtered overlaps")
}

pub fn jsi_geometry(r: &Reference) -> Criterion {
    let mut t = Tally::new();
    let center_thz = units::rad_per_ps_to_thz(r.spec.signal_center);
    let linewidth = r
        .config
        .pump_spec()
        .and_then(|pump| build_jsa(&r.spec, &pump, r.config.cut_grid()?, r.config.approximation()))
        .and_then(|fine| jsa::jsi_linewidth(&fine, Cut::AntiDiagonal));
    match linewidth {
        Ok(w) => t.within("anti-diagonal linewidth [nm]", units::angular_width_to_nm(w, center_thz), LINEWIDTH_NM),
        Err(e) => t.error("linewidth", e),
    }
    match jsa::spectral_summary(&r.jsa, &r.spec) {
        Ok(s) => {
            t.within("signal FWHM [nm]", s.signal_fwhm_nm, MARGINAL_FWHM_NM);
            t.within("idler FWHM [nm]", s.idler_fwhm_nm, MARGINAL_FWHM_NM);
            t.within("signal center [nm]", s.signal_center_nm, SIGNAL_CENTER_NM);
            t.within("idler center [nm]", s.idler_center_nm, IDLER_CENTER_NM);
        }
        Err(e) => t.error("marginals", e),
    }
    match r.spec.pm_tilt_deviation() {
        Ok(d) => t.within("PM tilt deviation [deg]", d, TILT_DEG),
        Err(e) => t.error("tilt", e),
    }
    t.finish(4, "JSI geometry")
}

pub fn visibility_identities() -> Criterion {
    let mut t = Tally::new();
    let mut worst: f64 = 0.0;
    for a in 0..100 {
        for b in 0..100 {
            let o = a as f64 / 99.0;
            let n = b as f64 / 99.0 * 2.0;
            for eta in [0.05, 0.3, 1.0] {
                let full = visibility_full(o, n, eta, eta).unwrap_or(f64::NAN);
                worst = worst.max((full - visibility_approx(o, n)).abs());
            }
        }
    }
    t.check(worst <= IDENTITY_TOL, format!("max |V_full(eta1 = eta2) - V_approx| = {worst:.1e} on 100x100 grid"));
    let classical = visibility_approx(0.0, 0.0);
    t.check(classical == 1.0 / 3.0, format!("V(O=0, n=0) = {classical:.17}"));
    let ideal = visibility_approx(1.0, 0.0);
    t.check(ideal == 1.0, format!("V(O=1, n=0) = {ideal}"));
    t.finish(5, "visibility model identities")
}

/// Cells `(⟨n⟩, η, K)` of the estimator matrix, all in the low-efficiency
/// regime where threshold detection leaves `C/A` unbiased.
pub const ESTIMATOR_MEAN_N: [f64; 3] = [0.1, 0.2, 0.4];
pub const ESTIMATOR_ETA: [f64; 3] = [0.01, 0.02, 0.04];
pub const ESTIMATOR_K: [usize; 3] = [1, 5, 50];

/// Pump powers (µW) and squared-gain calibration of the Klyshko sweep, giving
/// ⟨n⟩ from about 0.1 to 0.5.
pub const KLYSHKO_POWERS_UW: [f64; 5] = [34.0, 68.0, 102.0, 136.0, 170.0];
pub const KLYSHKO_GAIN_SQ_PER_UW: f64 = 0.5 / 170.0;
pub const KLYSHKO_MODES: usize = 88;
pub const KLYSHKO_DARK_RATE_HZ: f64 = 70.0;

pub fn estimator_suite(seed: u64) -> Criterion {
    let mut t = Tally::new();
    let gate_rate = 76.2e6 / 64.0;
    let mut worst: f64 = 0.0;
    let mut worst_obs: f64 = 0.0;
    let mut failures = 0;
    let mut cell = 0u64;
    for &n in &ESTIMATOR_MEAN_N {
        for &eta in &ESTIMATOR_ETA {
            for &k in &ESTIMATOR_K {
                cell += 1;
                let outcome = DetectionSpec::new(eta, eta, gate_rate, 0.0)
                    .and_then(|det| SimConfig::new(schmidt::uniform_coefficients(k), 0.0, det, ESTIMATOR_GATES, seed + cell))
                    .and_then(|cfg| cfg.with_mean_n(n))
                    .and_then(|cfg| simulate(&cfg))
                    .and_then(|out| Ok((out.record, cross_correlation(&out.record)?)));
                match outcome {
                    Ok((rec, g)) => {
                        let truth = 1.0 + 1.0 / k as f64 + 1.0 / n;
                        // standard error with the coincidences the closed form predicts
                        let expected_c = truth * rec.accidentals();
                        let se = truth
                            * (1.0 / expected_c + 1.0 / rec.singles_s as f64 + 1.0 / rec.singles_i as f64).sqrt();
                        let z = (g.value - truth) / se;
                        let z_obs = (g.value - truth) / g.stderr;
                        worst = worst.max(z.abs());
                        worst_obs = worst_obs.max(z_obs.abs());
                        if z.abs() > ESTIMATOR_SIGMAS {
                            failures += 1;
                            t.details.push(format!("cell n={n} eta={eta} K={k}: C/A {:.3} vs {truth:.3} (z = {z:.2})", g.value));
                        }
                    }
                    Err(e) => {
                        failures += 1;
                        t.details.push(format!("cell n={n} eta={eta} K={k}: {e}"));
                    }
                }
            }
        }
    }
    t.check(failures == 0, format!(
            "27 cells at {ESTIMATOR_GATES} gates, max |z| = {worst:.2} (want <= {ESTIMATOR_SIGMAS}; \
             {worst_obs:.2} with observed-count errors)"
        ));

    let sweep = DetectionSpec::gated(KLYSHKO_TRUTH.0, KLYSHKO_TRUTH.1, 76.2e6, 64, KLYSHKO_DARK_RATE_HZ)
        .and_then(|det| SimConfig::new(schmidt::uniform_coefficients(KLYSHKO_MODES), 0.0, det, KLYSHKO_GATES, seed ^ 0x6b6c_7973))
        .and_then(|cfg| efficiency_sweep(&cfg, &KLYSHKO_POWERS_UW, KLYSHKO_GAIN_SQ_PER_UW))
        .and_then(|pts| extrapolate_klyshko(&pts));
    match sweep {
        Ok(x) => {
            for (label, fit, truth) in [("eta_s", x.signal, KLYSHKO_TRUTH.0), ("eta_i", x.idler, KLYSHKO_TRUTH.1)] {
                t.check(
                    (fit.intercept - truth).abs() <= KLYSHKO_TOL,
                    format!(
                        "zero-power {label} = {:.3}% +/- {:.3}% (want {:.1}% +/- {:.1} pp)",
                        100.0 * fit.intercept,
                        100.0 * fit.intercept_se,
                        100.0 * truth,
                        100.0 * KLYSHKO_TOL
                    ),
                );
            }
        }
        Err(e) => t.error("Klyshko sweep", e),
    }
    t.finish(6, "estimator oracle suite")
}

/// ⟨n⟩ abscissae of the synthetic fit studies.
pub fn fit_mean_ns() -> Vec<f64> {
    (0..10).map(|k| 0.05 + 0.05 * k as f64).collect()
}

pub fn fit_round_trip(seed: u64) -> Criterion {
    let mut t = Tally::new();
    let ns = fit_mean_ns();
    let mut worst: f64 = 0.0;
    for o in [0.95, 0.816, 0.5] {
        match fit_overlap(&synthetic_points(o, &ns, 0.01), VisibilityModel::Approx) {
            Ok(f) => worst = worst.max((f.overlap - o).abs()),
            Err(_) => worst = f64::INFINITY,
        }
    }
    t.check(worst <= FIT_NOISELESS_TOL, format!("noiseless max error {worst:.1e}"));

    let noise = Normal::new(0.0, 0.01).expect("valid normal");
    let mut covered = 0;
    let mut total = 0;
    for (idx, o) in [0.95, 0.816].into_iter().enumerate() {
        let mut sq = 0.0;
        let mut fits = 0;
        for s in 0..FIT_SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64 * FIT_SEEDS + s);
            let pts: Vec<VisibilityPoint> = synthetic_points(o, &ns, 0.01)
                .into_iter()
                .map(|p| VisibilityPoint { visibility: p.visibility + noise.sample(&mut rng), ..p })
                .collect();
            match fit_overlap(&pts, VisibilityModel::Approx) {
                Ok(f) => {
                    sq += (f.overlap - o).powi(2);
                    fits += 1;
                    total += 1;
                    if (f.overlap - o).abs() <= f.overlap_stderr {
                        covered += 1;
                    }
                }
                Err(e) => t.error("noisy fit", e),
            }
        }
        let rms = (sq / fits.max(1) as f64).sqrt();
        t.check(rms <= FIT_RMS_MAX, format!("O = {o}: RMS error {rms:.4} over {FIT_SEEDS} seeds (want <= {FIT_RMS_MAX})"));
    }
    let coverage = covered as f64 / total.max(1) as f64;
    t.check(
        coverage >= FIT_COVERAGE.0 && coverage <= FIT_COVERAGE.1,
        format!("1-sigma coverage {:.1}% of {total} fits (want {:.0}-{:.0}%)", 100.0 * coverage, 100.0 * FIT_COVERAGE.0, 100.0 * FIT_COVERAGE.1),
    );
    t.finish(7, "fit round trip")
}

fn hermite_gauss(n: usize, x: f64) -> f64 {
    let h = match n {
        0 => 1.0,
        1 => 2.0 * x,
        _ => unreachable!(),
    };
    let norm = ((1u32 << n) as f64 * std::f64::consts::PI.sqrt()).sqrt();
    h * (-0.5 * x * x).exp() / norm
}

pub fn schmidt_properties(r: &Reference) -> Criterion {
    let mut t = Tally::new();
    let sep = FrequencyGrid::square(128, 8.0).and_then(|g| {
        JointAmplitude::from_fn(g, |s, i| {
            Complex64::new((-0.5 * s * s).exp() * (-(i - 0.3).powi(2)).exp(), 0.0) * Complex64::from_polar(1.0, 0.4 * i)
        })
        .normalize()
    });
    match sep.and_then(|j| decompose(&j, schmidt::DEFAULT_RESIDUAL_WEIGHT)) {
        Ok(sd) => t.check((sd.k_eff() - 1.0).abs() <= K_SEPARABLE_TOL, format!("separable K = {:.9}", sd.k_eff())),
        Err(e) => t.error("separable", e),
    }
    let two = FrequencyGrid::square(128, 8.0).and_then(|g| {
        let (a, b) = (0.8f64.sqrt(), 0.2f64.sqrt());
        JointAmplitude::from_fn(g, move |s, i| {
            Complex64::new(a * hermite_gauss(0, s) * hermite_gauss(0, i) + b * hermite_gauss(1, s) * hermite_gauss(1, i), 0.0)
        })
        .normalize()
    });
    match two.and_then(|j| decompose(&j, 1e-12)) {
        Ok(sd) => t.within("(0.8, 0.2) K", sd.k_eff(), K_TWO_MODE),
        Err(e) => t.error("two-mode", e),
    }
    match decompose(&r.jsa, schmidt::DEFAULT_RESIDUAL_WEIGHT) {
        Ok(sd) => {
            t.check(sd.k_eff() > K_REFERENCE_MIN, format!("reference K = {:.2} (want > {K_REFERENCE_MIN})", sd.k_eff()));
            match (sd.overlap(), spectral_overlap(&r.jsa)) {
                (Ok(a), Ok(b)) => {
                    let diff = (a.norm() - b.norm()).abs();
                    t.check(
                        diff <= OVERLAP_ROUTES_TOL,
                        format!("Schmidt-basis |O| {:.5} vs grid {:.5} (diff {diff:.1e})", a.norm(), b.norm()),
                    );
                }
                (Err(e), _) | (_, Err(e)) => t.error("overlap routes", e),
            }
        }
        Err(e) => t.error("reference decomposition", e),
    }
    t.finish(8, "Schmidt properties")
}

/// Runs all eight criteria against `config` (normally the bundled reference).
pub fn run_all(config: &Config, seed: u64) -> Result<Vec<Criterion>> {
    let r = Reference::build(config)?;
    Ok(vec![
        unfiltered_overlap(&r),
        compensated_overlap(&r),
        filtered_overlaps(&r),
        jsi_geometry(&r),
        visibility_identities(),
        estimator_suite(seed),
        fit_round_trip(seed),
        schmidt_properties(&r),
    ])
}
