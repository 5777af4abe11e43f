//! Closed-form photon statistics of the multimode twin-beam state: Glauber
//! correlations, bunching and splitting coincidence rates, visibility models
//! and count-record estimators.
//!
//! Rates are per gate with the overall proportionality constant dropped;
//! only ratios are physically meaningful.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schmidt::{GainSpec, SchmidtData};

/// End-to-end arm transmissions, gate rate and per-gate dark probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSpec {
    pub eta1: f64,
    pub eta2: f64,
    /// Hz
    pub gate_rate: f64,
    pub dark_prob: f64,
}

impl DetectionSpec {
    pub fn new(eta1: f64, eta2: f64, gate_rate: f64, dark_prob: f64) -> Result<Self> {
        for (name, eta) in [("eta1", eta1), ("eta2", eta2)] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::Range(format!("{name} must lie in [0, 1], got {eta}")));
            }
        }
        if !(gate_rate > 0.0) || !gate_rate.is_finite() {
            return Err(Error::Range(format!("gate rate must be positive, got {gate_rate}")));
        }
        if !(0.0..1.0).contains(&dark_prob) {
            return Err(Error::Range(format!("dark probability must lie in [0, 1), got {dark_prob}")));
        }
        Ok(Self { eta1, eta2, gate_rate, dark_prob })
    }

    /// Gated detection at `laser_rep / divisor` with dark-count rates
    /// converted to per-gate probabilities.
    pub fn gated(eta1: f64, eta2: f64, laser_rep_hz: f64, divisor: u32, dark_rate_hz: f64) -> Result<Self> {
        if divisor == 0 {
            return Err(Error::Range("gate divisor must be at least 1".into()));
        }
        let gate_rate = laser_rep_hz / divisor as f64;
        Self::new(eta1, eta2, gate_rate, dark_prob_from_rate(dark_rate_hz, gate_rate))
    }
}

/// Per-gate probability of at least one dark event for a Poissonian dark
/// rate sampled once per gate.
pub fn dark_prob_from_rate(dark_rate_hz: f64, gate_rate_hz: f64) -> f64 {
    -(-dark_rate_hz / gate_rate_hz).exp_m1()
}

/// Accumulated gated counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub gates: u64,
    pub singles_s: u64,
    pub singles_i: u64,
    pub coincidences: u64,
    /// Hz
    pub gate_rate: f64,
}

impl CountRecord {
    pub fn validate(&self) -> Result<()> {
        let min_singles = self.singles_s.min(self.singles_i);
        if self.coincidences > min_singles || self.singles_s.max(self.singles_i) > self.gates {
            return Err(Error::Format(format!(
                "inconsistent counts: gates {}, singles {}/{}, coincidences {}",
                self.gates, self.singles_s, self.singles_i, self.coincidences
            )));
        }
        if !(self.gate_rate > 0.0) {
            return Err(Error::Format(format!("gate rate must be positive, got {}", self.gate_rate)));
        }
        Ok(())
    }

    /// Expected accidental coincidences `S_s S_i / gates`, i.e. `A = S_s S_i / R` in rate form.
    pub fn accidentals(&self) -> f64 {
        self.singles_s as f64 * self.singles_i as f64 / self.gates as f64
    }

    pub fn duration_s(&self) -> f64 {
        self.gates as f64 / self.gate_rate
    }

    pub fn merge(&self, other: &CountRecord) -> CountRecord {
        CountRecord {
            gates: self.gates + other.gates,
            singles_s: self.singles_s + other.singles_s,
            singles_i: self.singles_i + other.singles_i,
            coincidences: self.coincidences + other.coincidences,
            gate_rate: self.gate_rate,
        }
    }
}

/// A measured fringe visibility at a given mean photon number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityPoint {
    pub mean_n: f64,
    pub visibility: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Mean photon number per beam and effective mode number (may be infinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwinBeam {
    pub mean_n: f64,
    pub k_eff: f64,
}

impl TwinBeam {
    pub fn new(mean_n: f64, k_eff: f64) -> Result<Self> {
        if !(mean_n >= 0.0) {
            return Err(Error::Range(format!("mean photon number must be non-negative, got {mean_n}")));
        }
        if !(k_eff >= 1.0) {
            return Err(Error::Range(format!("effective mode number must be at least 1, got {k_eff}")));
        }
        Ok(Self { mean_n, k_eff })
    }

    pub fn from_schmidt(schmidt: &SchmidtData, gain: &GainSpec) -> Self {
        Self { mean_n: gain.mean_n, k_eff: schmidt.k_eff() }
    }

    fn bunching(&self) -> f64 {
        1.0 + 1.0 / self.k_eff
    }

    /// Normally ordered moment `G(w, υ)` of the twin beams, for
    /// `(w, υ)` in `{(1,0), (0,1), (2,0), (0,2), (1,1)}`.
    pub fn glauber(&self, w: u32, v: u32) -> Result<f64> {
        let n = self.mean_n;
        match (w, v) {
            (1, 0) | (0, 1) => Ok(n),
            (2, 0) | (0, 2) => Ok(n * n * self.bunching()),
            (1, 1) => Ok(n * n * self.bunching() + n),
            _ => Err(Error::UnsupportedOrder(w, v)),
        }
    }
}

/// Coincidence rates for bunching at a balanced splitter (`min`) and for
/// deterministic separation (`max`), up to a common constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceRates {
    pub min: f64,
    pub max: f64,
}

impl CoincidenceRates {
    pub fn visibility(&self) -> f64 {
        (self.max - self.min) / (self.max + self.min)
    }
}

pub fn coincidence_rates(
    beam: &TwinBeam,
    det: &DetectionSpec,
    overlap: f64,
    density_overlap: f64,
) -> Result<CoincidenceRates> {
    if det.eta1 == 0.0 && det.eta2 == 0.0 {
        return Err(Error::DegenerateDetection("both arm efficiencies are zero".into()));
    }
    let n = beam.mean_n;
    let (e1, e2) = (det.eta1, det.eta2);
    let pair = n + n * n * beam.bunching();
    let min = 0.25 * n * n * beam.bunching() * (e1 * e1 + e2 * e2) + 0.5 * pair * e1 * e2
        - 0.5 * (n * overlap + n * n * density_overlap) * e1 * e2;
    let max = pair * e1 * e2;
    Ok(CoincidenceRates { min, max })
}

/// Coincidence rate behind a splitter of transmission `t`; `t = 1/2` and
/// `t = 1` reproduce [`coincidence_rates`].
pub fn coincidence_rate_at(beam: &TwinBeam, det: &DetectionSpec, overlap: f64, density_overlap: f64, t: f64) -> f64 {
    let n = beam.mean_n;
    let (e1, e2) = (det.eta1, det.eta2);
    let g20 = n * n * beam.bunching();
    let g11 = g20 + n;
    let mix = t * (1.0 - t);
    mix * (e1 * e1 + e2 * e2) * g20 + (1.0 - 2.0 * mix) * e1 * e2 * g11
        - 2.0 * mix * e1 * e2 * (n * overlap + n * n * density_overlap)
}

/// Multimode visibility including unequal arm transmissions.
pub fn visibility_full(overlap: f64, mean_n: f64, eta1: f64, eta2: f64) -> Result<f64> {
    if eta1 <= 0.0 || eta2 <= 0.0 {
        return Err(Error::DegenerateDetection(format!("efficiency ratio undefined for eta1={eta1}, eta2={eta2}")));
    }
    let imbalance = 0.5 * (eta1 / eta2 + eta2 / eta1);
    Ok(((1.0 + overlap) + mean_n * (1.0 - imbalance)) / ((3.0 - overlap) + 3.0 * mean_n + mean_n * imbalance))
}

/// Balanced-arm visibility `(1 + 𝒪) / (3 − 𝒪 + 4⟨n⟩)`.
#[inline]
pub fn visibility_approx(overlap: f64, mean_n: f64) -> f64 {
    (1.0 + overlap) / (3.0 - overlap + 4.0 * mean_n)
}

/// Coincidence rate against half-wave-plate angle (degrees from the
/// deterministic-splitting orientation); effective transmission `cos²(2θ)`.
pub fn fringe_curve(
    beam: &TwinBeam,
    det: &DetectionSpec,
    overlap: f64,
    density_overlap: f64,
    hwp_angles_deg: &[f64],
) -> Vec<f64> {
    hwp_angles_deg
        .iter()
        .map(|deg| {
            let t = (2.0 * deg.to_radians()).cos().powi(2);
            coincidence_rate_at(beam, det, overlap, density_overlap, t)
        })
        .collect()
}

/// `(C_max − C_min)/(C_max + C_min)` with Poissonian errors on both counts.
pub fn visibility_from_counts(c_max: f64, c_min: f64) -> Result<Estimate> {
    let sum = c_max + c_min;
    if !(sum > 0.0) {
        return Err(Error::Range("visibility needs positive counts".into()));
    }
    let value = (c_max - c_min) / sum;
    // ∂V/∂Cmax = 2 Cmin / sum², ∂V/∂Cmin = −2 Cmax / sum²
    let stderr = 2.0 * (c_min * c_min * c_max + c_max * c_max * c_min).sqrt() / (sum * sum);
    Ok(Estimate { value, stderr })
}

/// Klyshko efficiencies `η_s = C/S_i`, `η_i = C/S_s` with binomial errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlyshkoEstimate {
    pub signal: Estimate,
    pub idler: Estimate,
}

pub fn klyshko(rec: &CountRecord) -> Result<KlyshkoEstimate> {
    if rec.singles_s == 0 || rec.singles_i == 0 || rec.coincidences == 0 {
        return Err(Error::Range("Klyshko efficiency needs non-zero singles and coincidences".into()));
    }
    let c = rec.coincidences as f64;
    let ratio = |singles: u64| {
        let s = singles as f64;
        let eta = c / s;
        Estimate { value: eta, stderr: (eta * (1.0 - eta) / s).max(0.0).sqrt() }
    };
    Ok(KlyshkoEstimate { signal: ratio(rec.singles_i), idler: ratio(rec.singles_s) })
}

/// Cross-correlation `C/A` with Poissonian errors propagated to first order.
pub fn cross_correlation(rec: &CountRecord) -> Result<Estimate> {
    if rec.singles_s == 0 || rec.singles_i == 0 || rec.coincidences == 0 {
        return Err(Error::Range("cross-correlation needs non-zero singles and coincidences".into()));
    }
    let c = rec.coincidences as f64;
    let value = c / rec.accidentals();
    let rel = (1.0 / c + 1.0 / rec.singles_s as f64 + 1.0 / rec.singles_i as f64).sqrt();
    Ok(Estimate { value, stderr: value * rel })
}

/// `⟨n⟩ = 1/(C/A − 1)`.
///
/// For a finite mode number `C/A = 1 + 1/K + 1/⟨n⟩`, so this is a lower bound
/// on the true mean photon number that becomes exact as `K → ∞`.
pub fn mean_n_from_cross(rec: &CountRecord) -> Result<Estimate> {
    let g = cross_correlation(rec)?;
    if g.value <= 1.0 {
        return Err(Error::NonPhysicalCorrelation { ratio: g.value });
    }
    let excess = g.value - 1.0;
    Ok(Estimate { value: 1.0 / excess, stderr: g.stderr / (excess * excess) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced() -> DetectionSpec {
        DetectionSpec::new(0.3, 0.3, 1.19e6, 0.0).unwrap()
    }

    #[test]
    fn glauber_limits() {
        let inf = TwinBeam::new(0.5, f64::INFINITY).unwrap();
        assert_eq!(inf.glauber(2, 0).unwrap(), 0.25);
        let single = TwinBeam::new(0.5, 1.0).unwrap();
        assert_eq!(single.glauber(2, 0).unwrap(), 0.5);
        assert_eq!(single.glauber(0, 2).unwrap(), 0.5);
        assert_eq!(single.glauber(1, 0).unwrap(), 0.5);
        for (n, k) in [(0.01, 3.0), (0.4, 12.0), (2.0, 1.0)] {
            let b = TwinBeam::new(n, k).unwrap();
            assert!((b.glauber(1, 1).unwrap() - b.glauber(2, 0).unwrap() - n).abs() < 1e-15);
        }
        assert!(matches!(single.glauber(2, 1), Err(Error::UnsupportedOrder(2, 1))));
    }

    #[test]
    fn perfect_bunching_and_classical_limit() {
        let det = balanced();
        let beam = TwinBeam::new(1e-9, 1e9).unwrap();
        let r = coincidence_rates(&beam, &det, 1.0, 1.0 / beam.k_eff).unwrap();
        assert!(r.min / r.max < 1e-6);
        let r = coincidence_rates(&beam, &det, 0.0, 0.0).unwrap();
        assert!((r.min / r.max - 0.5).abs() < 1e-6);
        assert!((r.visibility() - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn arm_imbalance_degrades_visibility() {
        let det = DetectionSpec::new(0.2, 0.1, 1.0, 0.0).unwrap();
        let n = 1e-4;
        let beam = TwinBeam::new(n, f64::INFINITY).unwrap();
        let rates = coincidence_rates(&beam, &det, 1.0, 0.0).unwrap();
        let full = visibility_full(1.0, n, 0.2, 0.1).unwrap();
        assert!(full < 1.0);
        assert!((rates.visibility() - full).abs() < 1e-12);
        // η ratio 2: V = (2 + n(1 - 1.25)) / (2 + 3n + 1.25 n)
        assert!((full - (2.0 - 0.25 * n) / (2.0 + 4.25 * n)).abs() < 1e-15);
    }

    #[test]
    fn visibility_reference_values() {
        assert_eq!(visibility_approx(1.0, 0.0), 1.0);
        assert_eq!(visibility_approx(0.0, 0.0), 1.0 / 3.0);
        assert_eq!(visibility_full(0.0, 0.0, 0.4, 0.4).unwrap(), 1.0 / 3.0);
        assert!((visibility_approx(0.95, 0.0) - 0.951_22).abs() < 1e-5);
        // invert V = 0.83 at 𝒪 = 0.95
        let n: f64 = (1.95 / 0.83 - 2.05) / 4.0;
        assert!((n - 0.0748).abs() < 1e-4);
        assert!((visibility_approx(0.95, n) - 0.83).abs() < 1e-12);
        assert!(visibility_full(0.5, 0.1, 0.0, 0.2).is_err());
    }

    #[test]
    fn rates_without_interference_factorize() {
        let det = DetectionSpec::new(0.05, 0.07, 1.0, 0.0).unwrap();
        let beam = TwinBeam::new(0.2, 5.0).unwrap();
        let r = coincidence_rates(&beam, &det, 0.0, 0.0).unwrap();
        // independent arms: splitting halves each arm's contribution
        let g20 = beam.glauber(2, 0).unwrap();
        let g11 = beam.glauber(1, 1).unwrap();
        let expected = 0.25 * g20 * (0.05f64.powi(2) + 0.07f64.powi(2)) + 0.5 * g11 * 0.05 * 0.07;
        assert!((r.min - expected).abs() < 1e-15);
        assert!(coincidence_rates(&beam, &DetectionSpec::new(0.0, 0.0, 1.0, 0.0).unwrap(), 0.0, 0.0).is_err());
    }

    #[test]
    fn fringe_endpoints_and_period() {
        let det = DetectionSpec::new(0.06, 0.056, 1.0, 0.0).unwrap();
        let beam = TwinBeam::new(0.1, f64::INFINITY).unwrap();
        let (o, a) = (0.95, 0.0);
        let rates = coincidence_rates(&beam, &det, o, a).unwrap();
        let curve = fringe_curve(&beam, &det, o, a, &[0.0, 22.5, 45.0, 67.5, 90.0, 10.0, 100.0]);
        assert!((curve[0] - rates.max).abs() < 1e-15);
        assert!((curve[1] - rates.min).abs() < 1e-15);
        assert!((curve[2] - rates.max).abs() < 1e-15);
        assert!((curve[4] - curve[0]).abs() < 1e-15);
        assert!((curve[5] - curve[6]).abs() < 1e-15);

        let angles: Vec<f64> = (0..=360).map(|k| k as f64 * 0.5).collect();
        let c = fringe_curve(&beam, &det, o, a, &angles);
        let hi = c.iter().cloned().fold(f64::MIN, f64::max);
        let lo = c.iter().cloned().fold(f64::MAX, f64::min);
        let v = (hi - lo) / (hi + lo);
        let expected = visibility_full(o, beam.mean_n, det.eta1, det.eta2).unwrap();
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
    }

    #[test]
    fn klyshko_and_cross_estimators() {
        let rec = CountRecord { gates: 1000, singles_s: 40, singles_i: 40, coincidences: 40, gate_rate: 1.0 };
        let k = klyshko(&rec).unwrap();
        assert_eq!(k.signal.value, 1.0);
        assert_eq!(k.idler.value, 1.0);

        // C/A = 3  →  ⟨n⟩ = 0.5
        let rec = CountRecord { gates: 10_000, singles_s: 1000, singles_i: 500, coincidences: 150, gate_rate: 1.19e6 };
        assert!((cross_correlation(&rec).unwrap().value - 3.0).abs() < 1e-12);
        assert!((mean_n_from_cross(&rec).unwrap().value - 0.5).abs() < 1e-12);

        let flat = CountRecord { gates: 10_000, singles_s: 1000, singles_i: 500, coincidences: 50, gate_rate: 1.0 };
        assert!(matches!(mean_n_from_cross(&flat), Err(Error::NonPhysicalCorrelation { .. })));
        let empty = CountRecord { coincidences: 0, ..flat };
        assert!(klyshko(&empty).is_err());
    }

    #[test]
    fn estimators_are_scale_invariant() {
        let rec = CountRecord { gates: 100_000, singles_s: 2300, singles_i: 2100, coincidences: 130, gate_rate: 1.19e6 };
        let scaled = CountRecord {
            gates: rec.gates * 7,
            singles_s: rec.singles_s * 7,
            singles_i: rec.singles_i * 7,
            coincidences: rec.coincidences * 7,
            ..rec
        };
        let (a, b) = (klyshko(&rec).unwrap(), klyshko(&scaled).unwrap());
        assert!((a.signal.value - b.signal.value).abs() < 1e-15);
        assert!((a.idler.value - b.idler.value).abs() < 1e-15);
        let (a, b) = (mean_n_from_cross(&rec).unwrap(), mean_n_from_cross(&scaled).unwrap());
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn count_record_invariants() {
        let ok = CountRecord { gates: 10, singles_s: 5, singles_i: 4, coincidences: 3, gate_rate: 1.0 };
        assert!(ok.validate().is_ok());
        assert!(CountRecord { coincidences: 5, ..ok }.validate().is_err());
        assert!(CountRecord { singles_s: 11, ..ok }.validate().is_err());
        assert!(DetectionSpec::new(1.2, 0.1, 1.0, 0.0).is_err());
        assert!(DetectionSpec::new(0.2, 0.1, 0.0, 0.0).is_err());
        assert!(DetectionSpec::new(0.2, 0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn counts_visibility_error() {
        let v = visibility_from_counts(900.0, 100.0).unwrap();
        assert!((v.value - 0.8).abs() < 1e-15);
        // finite-difference check of the propagated error
        let h = 1e-3;
        let dvmax = (visibility_from_counts(900.0 + h, 100.0).unwrap().value - v.value) / h;
        let dvmin = (visibility_from_counts(900.0, 100.0 + h).unwrap().value - v.value) / h;
        let expected = (dvmax * dvmax * 900.0 + dvmin * dvmin * 100.0).sqrt();
        assert!((v.stderr - expected).abs() < 1e-6);
    }
}
