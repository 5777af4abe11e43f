//! Gated click-detector Monte Carlo of the multimode twin-beam source.
//!
//! Every gate draws a total pair number from the multimode squeezed state,
//! thins it binomially in each arm and records threshold clicks. Gates are
//! grouped into fixed-size batches, each with its own ChaCha stream, so a
//! record is a pure function of seed and configuration regardless of the
//! thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Geometric, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::schmidt::{effective_mode_number, GainSpec, SchmidtData};
use crate::twinstats::{klyshko, mean_n_from_cross, CountRecord, DetectionSpec, Estimate, KlyshkoEstimate};

/// Gates per RNG stream.
pub const BATCH_GATES: u64 = 1 << 16;

/// Retained fraction of the Schmidt weight.
pub const MODE_WEIGHT_COVERAGE: f64 = 1.0 - 1e-4;

/// Per-mode occupation above which click saturation spoils low-gain checks.
pub const SATURATION_WARNING: f64 = 0.9;

/// Above this many modes `Auto` switches to the thermal-mixture shortcut.
pub const PER_MODE_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingStrategy {
    #[default]
    Auto,
    /// One geometric draw per Schmidt mode.
    PerMode,
    /// Negative-binomial total with matched mean and variance; exact for a flat spectrum.
    ThermalMixture,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Schmidt coefficients `λ_k` (squared sum normalized internally).
    pub coefficients: Vec<f64>,
    pub gain: f64,
    pub detection: DetectionSpec,
    pub gates: u64,
    pub seed: u64,
    pub strategy: SamplingStrategy,
}

impl SimConfig {
    pub fn new(coefficients: Vec<f64>, gain: f64, detection: DetectionSpec, gates: u64, seed: u64) -> Result<Self> {
        let cfg = Self { coefficients, gain, detection, gates, seed, strategy: SamplingStrategy::Auto };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_schmidt(schmidt: &SchmidtData, gain: f64, detection: DetectionSpec, gates: u64, seed: u64) -> Result<Self> {
        Self::new(schmidt.coefficients().to_vec(), gain, detection, gates, seed)
    }

    /// Gain chosen so that the full spectrum yields `mean_n`.
    pub fn with_mean_n(mut self, mean_n: f64) -> Result<Self> {
        self.gain = GainSpec::for_mean_n(mean_n, &normalized(&self.coefficients))?.gain;
        Ok(self)
    }

    pub fn with_strategy(mut self, strategy: SamplingStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.gates == 0 {
            return Err(Error::Range("gate count must be positive".into()));
        }
        if self.coefficients.is_empty() || self.coefficients.iter().all(|&l| l == 0.0) {
            return Err(Error::Range("Schmidt spectrum is empty".into()));
        }
        if self.coefficients.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::Range("Schmidt coefficients must be finite and non-negative".into()));
        }
        if !(self.gain >= 0.0) || !self.gain.is_finite() {
            return Err(Error::Range(format!("gain must be non-negative, got {}", self.gain)));
        }
        Ok(())
    }

    /// Per-mode occupations `sinh²(Bλ_k)` of the retained modes.
    pub fn occupations(&self) -> Vec<f64> {
        truncate_spectrum(&normalized(&self.coefficients))
            .iter()
            .map(|l| (self.gain * l).sinh().powi(2))
            .collect()
    }
}

fn normalized(coefficients: &[f64]) -> Vec<f64> {
    let norm = coefficients.iter().map(|l| l * l).sum::<f64>().sqrt();
    coefficients.iter().map(|l| l / norm).collect()
}

/// Largest modes covering [`MODE_WEIGHT_COVERAGE`] of the weight, renormalized.
pub fn truncate_spectrum(coefficients: &[f64]) -> Vec<f64> {
    let mut sorted = coefficients.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sorted.iter().map(|l| l * l).sum();
    let mut acc = 0.0;
    let mut keep = sorted.len();
    for (k, l) in sorted.iter().enumerate() {
        acc += l * l;
        if acc >= MODE_WEIGHT_COVERAGE * total {
            keep = k + 1;
            break;
        }
    }
    sorted.truncate(keep);
    normalized(&sorted)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub record: CountRecord,
    /// Strategy actually used after resolving `Auto`.
    pub strategy: SamplingStrategy,
    pub modes: usize,
    pub mean_n: f64,
    pub k_eff: f64,
    pub warnings: Vec<String>,
}

enum PairSampler {
    Vacuum,
    PerMode(Vec<Geometric>),
    Mixture(Gamma<f64>),
}

impl PairSampler {
    fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        match self {
            PairSampler::Vacuum => 0,
            PairSampler::PerMode(modes) => modes.iter().map(|g| g.sample(rng)).sum(),
            PairSampler::Mixture(gamma) => {
                let rate = gamma.sample(rng);
                if rate > 0.0 {
                    // rate > 0 is the only precondition of Poisson::new
                    Poisson::new(rate).expect("positive Poisson rate").sample(rng) as u64
                } else {
                    0
                }
            }
        }
    }
}

pub fn simulate(cfg: &SimConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    let mu = cfg.occupations();
    let mean_n: f64 = mu.iter().sum();
    let second: f64 = mu.iter().map(|m| m * m).sum();
    let k_eff = effective_mode_number(&truncate_spectrum(&normalized(&cfg.coefficients)));

    let mut warnings = Vec::new();
    let peak = mu.iter().cloned().fold(0.0, f64::max);
    if peak > SATURATION_WARNING {
        let msg = format!(
            "mode occupation {peak:.3} exceeds {SATURATION_WARNING}: click saturation invalidates low-gain estimator checks"
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let strategy = match cfg.strategy {
        SamplingStrategy::Auto if mu.len() <= PER_MODE_LIMIT => SamplingStrategy::PerMode,
        SamplingStrategy::Auto => SamplingStrategy::ThermalMixture,
        s => s,
    };
    let sampler = if mean_n == 0.0 {
        PairSampler::Vacuum
    } else {
        match strategy {
            SamplingStrategy::PerMode => PairSampler::PerMode(
                mu.iter()
                    .filter(|&&m| m > 0.0)
                    .map(|m| Geometric::new(1.0 / (1.0 + m)).map_err(|e| Error::Range(e.to_string())))
                    .collect::<Result<_>>()?,
            ),
            _ => {
                let shape = mean_n * mean_n / second;
                PairSampler::Mixture(Gamma::new(shape, mean_n / shape).map_err(|e| Error::Range(e.to_string()))?)
            }
        }
    };

    let det = cfg.detection;
    let batches = cfg.gates.div_ceil(BATCH_GATES);
    let counts = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b);
            let n = BATCH_GATES.min(cfg.gates - b * BATCH_GATES);
            let mut c = [0u64; 3];
            for _ in 0..n {
                let pairs = sampler.sample(&mut rng).min(i32::MAX as u64) as i32;
                let dark_free = 1.0 - det.dark_prob;
                let p1 = 1.0 - (1.0 - det.eta1).powi(pairs) * dark_free;
                let p2 = 1.0 - (1.0 - det.eta2).powi(pairs) * dark_free;
                let click1 = rng.random::<f64>() < p1;
                let click2 = rng.random::<f64>() < p2;
                c[0] += click1 as u64;
                c[1] += click2 as u64;
                c[2] += (click1 && click2) as u64;
            }
            c
        })
        .reduce(|| [0; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);

    Ok(SimOutcome {
        record: CountRecord {
            gates: cfg.gates,
            singles_s: counts[0],
            singles_i: counts[1],
            coincidences: counts[2],
            gate_rate: det.gate_rate,
        },
        strategy,
        modes: mu.len(),
        mean_n,
        k_eff,
        warnings,
    })
}

/// One pump-power setting of an efficiency sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub power: f64,
    /// Mean photon number implied by the configured gain.
    pub mean_n: f64,
    pub record: CountRecord,
    pub klyshko: KlyshkoEstimate,
    /// `None` when the record shows no excess correlation.
    pub mean_n_estimate: Option<Estimate>,
}

/// Simulates each pump power with `B² = gain_sq_per_power · P`. Every point
/// gets its own seed derived from the configured one.
pub fn efficiency_sweep(cfg: &SimConfig, powers: &[f64], gain_sq_per_power: f64) -> Result<Vec<SweepPoint>> {
    if powers.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::Range("pump powers must be positive".into()));
    }
    if !(gain_sq_per_power > 0.0) {
        return Err(Error::Range("power calibration must be positive".into()));
    }
    powers
        .iter()
        .enumerate()
        .map(|(k, &power)| {
            let point = SimConfig {
                gain: (gain_sq_per_power * power).sqrt(),
                seed: cfg.seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                ..cfg.clone()
            };
            let out = simulate(&point)?;
            Ok(SweepPoint {
                power,
                mean_n: out.mean_n,
                record: out.record,
                klyshko: klyshko(&out.record)?,
                mean_n_estimate: mean_n_from_cross(&out.record).ok(),
            })
        })
        .collect()
}

/// Weighted straight-line fit `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub r_squared: f64,
}

/// With `sigma` the standard errors are absolute; without it they are
/// scaled by the residual variance.
pub fn linear_fit(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<LinearFit> {
    if x.len() != y.len() || sigma.is_some_and(|s| s.len() != x.len()) {
        return Err(Error::Shape("linear fit inputs differ in length".into()));
    }
    if x.len() < 3 {
        return Err(Error::IllPosed("linear fit needs at least three points".into()));
    }
    let w: Vec<f64> = match sigma {
        Some(s) => s.iter().map(|s| 1.0 / (s * s)).collect(),
        None => vec![1.0; x.len()],
    };
    if w.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::Range("fit uncertainties must be positive".into()));
    }
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ym = y.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(x, w)| w * (x - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::IllPosed("all abscissae are equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).zip(&w).map(|((x, y), w)| w * (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = x.iter().zip(y).zip(&w).map(|((x, y), w)| w * (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = y.iter().zip(&w).map(|(y, w)| w * (y - ym).powi(2)).sum();
    let scale = if sigma.is_some() { 1.0 } else { ss_res / (x.len() - 2) as f64 };
    let slope_var = scale / sxx;
    let intercept_var = scale * (1.0 / sw + xm * xm / sxx);
    Ok(LinearFit {
        slope,
        intercept,
        slope_se: slope_var.sqrt(),
        intercept_se: intercept_var.sqrt(),
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
    })
}

/// Zero-power intercepts of the Klyshko ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlyshkoExtrapolation {
    pub signal: LinearFit,
    pub idler: LinearFit,
}

pub fn extrapolate_klyshko(points: &[SweepPoint]) -> Result<KlyshkoExtrapolation> {
    let x: Vec<f64> = points.iter().map(|p| p.power).collect();
    let fit = |pick: fn(&KlyshkoEstimate) -> Estimate| {
        let y: Vec<f64> = points.iter().map(|p| pick(&p.klyshko).value).collect();
        let s: Vec<f64> = points.iter().map(|p| pick(&p.klyshko).stderr).collect();
        linear_fit(&x, &y, Some(&s))
    };
    Ok(KlyshkoExtrapolation { signal: fit(|k| k.signal)?, idler: fit(|k| k.idler)? })
}
