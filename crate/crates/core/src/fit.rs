//! Weighted least-squares extraction of the spectral overlap from
//! visibility-versus-⟨n⟩ data.

use crate::error::{Error, Result};
use crate::optimize::brent_minimize;
use crate::twinstats::{visibility_approx, VisibilityPoint};

const TOL: f64 = 1e-11;
const MAX_ITER: usize = 500;

/// Distance from 0 or 1 at which an estimate counts as boundary-constrained.
pub const BOUNDARY_TOL: f64 = 1e-6;

/// Upper end of the η-ratio search. The model is symmetric under `r → 1/r`,
/// so only `r ≥ 1` is searched.
pub const MAX_ETA_RATIO: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaRatio {
    Fixed(f64),
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VisibilityModel {
    /// `(1 + 𝒪)/(3 − 𝒪 + 4⟨n⟩)`
    Approx,
    /// Unequal arm transmissions with ratio `r = η₁/η₂`.
    Full { eta_ratio: EtaRatio },
}

impl VisibilityModel {
    pub fn name(&self) -> &'static str {
        match self {
            VisibilityModel::Approx => "approx",
            VisibilityModel::Full { .. } => "full",
        }
    }
}

/// Visibility with arm-transmission ratio `r`; `r = 1` reduces to
/// [`visibility_approx`].
#[inline]
pub fn visibility_with_ratio(overlap: f64, mean_n: f64, r: f64) -> f64 {
    let imbalance = 0.5 * (r + 1.0 / r);
    ((1.0 + overlap) + mean_n * (1.0 - imbalance)) / ((3.0 - overlap) + 3.0 * mean_n + mean_n * imbalance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: VisibilityModel,
    pub overlap: f64,
    pub overlap_stderr: f64,
    /// Fitted or fixed `η₁/η₂` for the full model.
    pub eta_ratio: Option<f64>,
    pub chi2: f64,
    pub dof: usize,
    /// `V_i − V_model(⟨n⟩_i)`
    pub residuals: Vec<f64>,
    pub at_boundary: bool,
    pub iterations: usize,
}

impl FitReport {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "model {}: overlap = {:.6} +/- {:.6}, chi2 = {:.4} ({} dof)",
            self.model.name(),
            self.overlap,
            self.overlap_stderr,
            self.chi2,
            self.dof
        );
        if let Some(r) = self.eta_ratio {
            s.push_str(&format!(", eta ratio = {r:.4}"));
        }
        if self.at_boundary {
            s.push_str(" [boundary solution]");
        }
        s
    }
}

fn check_points(points: &[VisibilityPoint]) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::IllPosed(format!("need at least 3 points, got {}", points.len())));
    }
    for p in points {
        if !(p.sigma > 0.0) || !p.sigma.is_finite() {
            return Err(Error::Range(format!("visibility uncertainty must be positive, got {}", p.sigma)));
        }
        if !(p.mean_n >= 0.0) || !p.visibility.is_finite() {
            return Err(Error::Range(format!("invalid point (n = {}, V = {})", p.mean_n, p.visibility)));
        }
    }
    let first = points[0].mean_n;
    if points.iter().all(|p| p.mean_n == first) {
        return Err(Error::IllPosed("all points share the same mean photon number".into()));
    }
    Ok(())
}

pub fn chi2(points: &[VisibilityPoint], overlap: f64, ratio: f64) -> f64 {
    points
        .iter()
        .map(|p| ((p.visibility - visibility_with_ratio(overlap, p.mean_n, ratio)) / p.sigma).powi(2))
        .sum()
}

fn best_overlap(points: &[VisibilityPoint], ratio: f64) -> Result<(f64, f64, usize)> {
    let objective = |o: f64| chi2(points, o, ratio);
    let m = brent_minimize(objective, 0.0, 1.0, TOL, MAX_ITER)?;
    let mut best = (m.x, m.value);
    for edge in [0.0, 1.0] {
        let v = objective(edge);
        if v <= best.1 {
            best = (edge, v);
        }
    }
    Ok((best.0, best.1, m.iterations))
}

pub fn fit_overlap(points: &[VisibilityPoint], model: VisibilityModel) -> Result<FitReport> {
    check_points(points)?;
    let (overlap, ratio, iterations, free_ratio) = match model {
        VisibilityModel::Approx => {
            let (o, _, it) = best_overlap(points, 1.0)?;
            (o, 1.0, it, false)
        }
        VisibilityModel::Full { eta_ratio: EtaRatio::Fixed(r) } => {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::Range(format!("eta ratio must be positive, got {r}")));
            }
            let (o, _, it) = best_overlap(points, r)?;
            (o, r, it, false)
        }
        VisibilityModel::Full { eta_ratio: EtaRatio::Free } => {
            let mut inner_failure = None;
            let outer = brent_minimize(
                |log_r| match best_overlap(points, log_r.exp()) {
                    Ok((_, v, _)) => v,
                    Err(e) => {
                        inner_failure.get_or_insert(e);
                        f64::INFINITY
                    }
                },
                0.0,
                MAX_ETA_RATIO.ln(),
                1e-9,
                MAX_ITER,
            )?;
            if let Some(e) = inner_failure {
                return Err(e);
            }
            let mut log_r = outer.x;
            if best_overlap(points, 1.0)?.1 <= outer.value {
                log_r = 0.0;
            }
            let r = log_r.exp();
            let (o, _, it) = best_overlap(points, r)?;
            (o, r, outer.iterations + it, true)
        }
    };

    let residuals: Vec<f64> =
        points.iter().map(|p| p.visibility - visibility_with_ratio(overlap, p.mean_n, ratio)).collect();
    let chi2 = chi2(points, overlap, ratio);
    let n_params = if free_ratio { 2 } else { 1 };
    let overlap_stderr = overlap_stderr(points, overlap, ratio, free_ratio);
    Ok(FitReport {
        model,
        overlap,
        overlap_stderr,
        eta_ratio: matches!(model, VisibilityModel::Full { .. }).then_some(ratio),
        chi2,
        dof: points.len().saturating_sub(n_params),
        residuals,
        at_boundary: overlap < BOUNDARY_TOL || overlap > 1.0 - BOUNDARY_TOL,
        iterations,
    })
}

/// Gauss-Newton standard error of `𝒪`, marginalized over a free η ratio.
fn overlap_stderr(points: &[VisibilityPoint], overlap: f64, ratio: f64, free_ratio: bool) -> f64 {
    let h = 1e-6;
    let grad = |p: &VisibilityPoint| {
        let d_o = (visibility_with_ratio(overlap + h, p.mean_n, ratio)
            - visibility_with_ratio(overlap - h, p.mean_n, ratio))
            / (2.0 * h);
        let hr = h * ratio;
        let d_r = (visibility_with_ratio(overlap, p.mean_n, ratio + hr)
            - visibility_with_ratio(overlap, p.mean_n, ratio - hr))
            / (2.0 * hr);
        (d_o, d_r)
    };
    let (mut f_oo, mut f_or, mut f_rr) = (0.0, 0.0, 0.0);
    for p in points {
        let (a, b) = grad(p);
        let w = 1.0 / (p.sigma * p.sigma);
        f_oo += w * a * a;
        f_or += w * a * b;
        f_rr += w * b * b;
    }
    let det = f_oo * f_rr - f_or * f_or;
    if free_ratio && det > 1e-12 * f_oo * f_rr {
        (f_rr / det).sqrt()
    } else {
        (1.0 / f_oo).sqrt()
    }
}

/// Noiseless points of the approximate model.
pub fn synthetic_points(overlap: f64, mean_ns: &[f64], sigma: f64) -> Vec<VisibilityPoint> {
    mean_ns
        .iter()
        .map(|&n| VisibilityPoint { mean_n: n, visibility: visibility_approx(overlap, n), sigma })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(k: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..k).map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64).collect()
    }

    #[test]
    fn noiseless_round_trip() {
        for o in [0.0, 0.3, 0.816, 0.95] {
            let pts = synthetic_points(o, &grid(8, 0.05, 0.5), 0.01);
            let fit = fit_overlap(&pts, VisibilityModel::Approx).unwrap();
            assert!((fit.overlap - o).abs() < 1e-6, "{o}: {}", fit.overlap);
            assert!(fit.chi2 < 1e-10);
        }
    }

    #[test]
    fn perfect_overlap_is_a_flagged_boundary() {
        assert_eq!(visibility_approx(1.0, 0.0), 1.0);
        let pts = synthetic_points(1.0, &grid(6, 0.0, 0.5), 0.01);
        let fit = fit_overlap(&pts, VisibilityModel::Approx).unwrap();
        assert_eq!(fit.overlap, 1.0);
        assert!(fit.at_boundary);
        let inner = fit_overlap(&synthetic_points(0.9, &grid(6, 0.0, 0.5), 0.01), VisibilityModel::Approx).unwrap();
        assert!(!inner.at_boundary);
    }

    #[test]
    fn ill_posed_inputs() {
        let same = synthetic_points(0.9, &[0.2, 0.2, 0.2], 0.01);
        assert!(matches!(fit_overlap(&same, VisibilityModel::Approx), Err(Error::IllPosed(_))));
        let two = synthetic_points(0.9, &[0.1, 0.2], 0.01);
        assert!(matches!(fit_overlap(&two, VisibilityModel::Approx), Err(Error::IllPosed(_))));
        let zero_sigma = synthetic_points(0.9, &[0.1, 0.2, 0.3], 0.0);
        assert!(fit_overlap(&zero_sigma, VisibilityModel::Approx).is_err());
    }

    #[test]
    fn full_model_with_unit_ratio_matches_approx() {
        for (o, n) in [(0.9, 0.1), (0.2, 0.7), (1.0, 0.0)] {
            assert!((visibility_with_ratio(o, n, 1.0) - visibility_approx(o, n)).abs() < 1e-15);
        }
        let pts = synthetic_points(0.8, &grid(5, 0.05, 0.5), 0.01);
        let a = fit_overlap(&pts, VisibilityModel::Approx).unwrap();
        let b = fit_overlap(&pts, VisibilityModel::Full { eta_ratio: EtaRatio::Fixed(1.0) }).unwrap();
        assert!((a.overlap - b.overlap).abs() < 1e-9);
    }

    #[test]
    fn free_ratio_recovers_imbalance() {
        let ns = grid(10, 0.0, 1.5);
        let pts: Vec<VisibilityPoint> = ns
            .iter()
            .map(|&n| VisibilityPoint { mean_n: n, visibility: visibility_with_ratio(0.85, n, 3.0), sigma: 0.01 })
            .collect();
        let fit = fit_overlap(&pts, VisibilityModel::Full { eta_ratio: EtaRatio::Free }).unwrap();
        assert!((fit.overlap - 0.85).abs() < 1e-5, "{fit:?}");
        assert!((fit.eta_ratio.unwrap() - 3.0).abs() < 1e-3, "{fit:?}");
        let approx = fit_overlap(&pts, VisibilityModel::Approx).unwrap();
        assert!(fit.overlap_stderr > approx.overlap_stderr);
    }

    #[test]
    fn approx_objective_is_unimodal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let k = rng.random_range(3..12);
            let pts: Vec<VisibilityPoint> = (0..k)
                .map(|_| VisibilityPoint {
                    mean_n: rng.random_range(0.0..2.0),
                    visibility: rng.random_range(-0.2..1.2),
                    sigma: rng.random_range(0.001..0.2),
                })
                .collect();
            let samples: Vec<f64> = (0..=2000).map(|j| chi2(&pts, j as f64 / 2000.0, 1.0)).collect();
            let minima = (1..samples.len() - 1)
                .filter(|&j| samples[j] < samples[j - 1] && samples[j] < samples[j + 1])
                .count();
            assert!(minima <= 1, "{pts:?}");
        }
    }

    #[test]
    fn stderr_matches_analytic_derivative() {
        let ns = grid(6, 0.05, 0.5);
        let pts = synthetic_points(0.9, &ns, 0.02);
        let fit = fit_overlap(&pts, VisibilityModel::Approx).unwrap();
        // dV/dO = 4(1 + n)/(3 - O + 4n)^2
        let info: f64 = ns.iter().map(|n| (4.0 * (1.0 + n) / (2.1 + 4.0 * n).powi(2) / 0.02).powi(2)).sum();
        assert!((fit.overlap_stderr - info.sqrt().recip()).abs() < 1e-6);
    }
}
