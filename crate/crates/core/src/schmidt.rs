//! Schmidt decomposition of a discretized JSA and the overlaps that govern
//! two-photon interference between signal and idler.
//!
//! On a uniform grid the amplitude matrix scaled by `√(Δν_s Δν_i)` has the
//! Schmidt coefficients as its singular values. Mode functions are stored
//! with the discrete normalization `Σ |φ_k|² Δν = 1`.

use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jsa::{FrequencyGrid, JointAmplitude};
use crate::optimize;

/// Discarded Schmidt weight `Σ_{k>r} λ_k²` tolerated by default.
pub const DEFAULT_RESIDUAL_WEIGHT: f64 = 1e-6;

/// Refinement tolerance for the delay search (ps).
pub const DELAY_TOLERANCE_PS: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SchmidtData {
    grid: FrequencyGrid,
    coefficients: Vec<f64>,
    /// Column-major `n_s × rank`.
    signal_modes: Vec<Complex64>,
    /// Column-major `n_i × rank`.
    idler_modes: Vec<Complex64>,
    k_eff: f64,
    truncation_residual: f64,
}

/// Factorizes `jsa`, keeping the leading modes until the discarded weight is
/// at most `residual_weight`. The L2 reconstruction error is then at most
/// `√residual_weight`.
pub fn decompose(jsa: &JointAmplitude, residual_weight: f64) -> Result<SchmidtData> {
    jsa.require_normalized()?;
    if !(0.0..1.0).contains(&residual_weight) {
        return Err(Error::Range(format!("residual weight must lie in [0, 1), got {residual_weight}")));
    }
    let g = *jsa.grid();
    let scale = g.cell_area().sqrt();
    let a = Mat::<Complex64>::from_fn(g.n_s, g.n_i, |s, i| jsa.get(s, i) * scale);
    let svd = a.thin_svd().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let sv: Vec<f64> = svd.S().column_vector().iter().map(|c| c.re).collect();

    let total: f64 = sv.iter().map(|l| l * l).sum();
    let fourth: f64 = sv.iter().map(|l| l.powi(4)).sum();
    let k_eff = total * total / fourth;

    let mut kept = 0.0;
    let mut rank = 0;
    for l in &sv {
        kept += l * l;
        rank += 1;
        if total - kept <= residual_weight {
            break;
        }
    }
    let truncation_residual = (total - kept).max(0.0);

    let (ds, di) = (g.step_s().sqrt(), g.step_i().sqrt());
    let u = svd.U();
    let v = svd.V();
    let mut signal_modes = Vec::with_capacity(g.n_s * rank);
    let mut idler_modes = Vec::with_capacity(g.n_i * rank);
    for k in 0..rank {
        signal_modes.extend((0..g.n_s).map(|s| u[(s, k)] / ds));
        idler_modes.extend((0..g.n_i).map(|i| v[(i, k)].conj() / di));
    }
    Ok(SchmidtData {
        grid: g,
        coefficients: sv[..rank].to_vec(),
        signal_modes,
        idler_modes,
        k_eff,
        truncation_residual,
    })
}

impl SchmidtData {
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Retained coefficients, in descending order.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }

    /// `K = 1/Σλ⁴`, from the full singular spectrum.
    pub fn k_eff(&self) -> f64 {
        self.k_eff
    }

    pub fn purity(&self) -> f64 {
        1.0 / self.k_eff
    }

    pub fn truncation_residual(&self) -> f64 {
        self.truncation_residual
    }

    pub fn signal_mode(&self, k: usize) -> &[Complex64] {
        let n = self.grid.n_s;
        &self.signal_modes[k * n..(k + 1) * n]
    }

    pub fn idler_mode(&self, k: usize) -> &[Complex64] {
        let n = self.grid.n_i;
        &self.idler_modes[k * n..(k + 1) * n]
    }

    fn signal_mat(&self) -> MatRef<'_, Complex64> {
        MatRef::from_column_major_slice(&self.signal_modes, self.grid.n_s, self.rank())
    }

    fn idler_mat(&self) -> MatRef<'_, Complex64> {
        MatRef::from_column_major_slice(&self.idler_modes, self.grid.n_i, self.rank())
    }

    /// Largest deviation of either Gram matrix from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let gram_dev = |m: MatRef<'_, Complex64>, step: f64| {
            let gram = m.adjoint() * m;
            let mut worst: f64 = 0.0;
            for a in 0..gram.nrows() {
                for b in 0..gram.ncols() {
                    let target = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((gram[(a, b)] * step - target).norm());
                }
            }
            worst
        };
        gram_dev(self.signal_mat(), self.grid.step_s()).max(gram_dev(self.idler_mat(), self.grid.step_i()))
    }

    /// `X[k, n] = ⟨ϕ_k | φ_n⟩` between idler and signal modes; needs a square grid.
    fn cross_overlaps(&self, rank: usize) -> Result<Mat<Complex64>> {
        if !self.grid.is_square() {
            return Err(Error::Shape("signal/idler mode overlaps need a square grid".into()));
        }
        let phi = self.signal_mat().subcols(0, rank);
        let psi = self.idler_mat().subcols(0, rank);
        let step = self.grid.step_s();
        let mut x = psi.adjoint() * phi;
        for k in 0..rank {
            for n in 0..rank {
                x[(k, n)] *= step;
            }
        }
        Ok(x)
    }

    /// Spectral overlap from the mode expansion,
    /// `Σ λ_n λ_k ⟨ϕ_k|φ_n⟩ ⟨φ_k|ϕ_n⟩`.
    pub fn overlap(&self) -> Result<Complex64> {
        self.overlap_truncated(self.rank())
    }

    /// Same as [`overlap`](Self::overlap) using only the leading `rank` modes,
    /// without renormalizing.
    pub fn overlap_truncated(&self, rank: usize) -> Result<Complex64> {
        let r = rank.min(self.rank());
        let x = self.cross_overlaps(r)?;
        let l = &self.coefficients;
        let mut sum = Complex64::new(0.0, 0.0);
        for n in 0..r {
            for k in 0..r {
                sum += x[(k, n)] * x[(n, k)].conj() * (l[n] * l[k]);
            }
        }
        Ok(sum)
    }

    /// Density overlap from the mode expansion, `Σ λ_n² λ_k² |⟨φ_n|ϕ_k⟩|²`.
    pub fn density_overlap(&self) -> Result<f64> {
        let r = self.rank();
        let x = self.cross_overlaps(r)?;
        let l = &self.coefficients;
        let mut sum = 0.0;
        for n in 0..r {
            for k in 0..r {
                sum += (l[n] * l[k]).powi(2) * x[(k, n)].norm_sqr();
            }
        }
        Ok(sum)
    }

    /// `Σ_k λ_k φ_k(ν_s) ϕ_k(ν_i)` over the retained modes.
    pub fn reconstruct(&self) -> JointAmplitude {
        let phi = self.signal_mat();
        let psi = self.idler_mat();
        let mut weighted = psi.to_owned();
        for k in 0..self.rank() {
            for i in 0..self.grid.n_i {
                weighted[(i, k)] *= self.coefficients[k];
            }
        }
        let f = phi * weighted.transpose();
        let g = self.grid;
        let values = (0..g.n_s).flat_map(|s| (0..g.n_i).map(move |i| (s, i))).map(|(s, i)| f[(s, i)]).collect();
        JointAmplitude::from_values(g, values).expect("grid shape matches")
    }
}

/// Direct grid evaluation of `𝒪 = ∫∫ f(ν_s, ν_i) f*(ν_i, ν_s)`.
pub fn spectral_overlap(jsa: &JointAmplitude) -> Result<Complex64> {
    Ok(OverlapProfile::new(jsa)?.at(0.0))
}

/// `𝒪(τ)` for a signal delay `τ`, grouped by the index difference `s − i`
/// so each evaluation is linear in the grid size.
#[derive(Debug, Clone)]
pub struct OverlapProfile {
    step: f64,
    n: usize,
    diagonals: Vec<Complex64>,
}

impl OverlapProfile {
    pub fn new(jsa: &JointAmplitude) -> Result<Self> {
        jsa.require_square()?;
        let g = jsa.grid();
        let n = g.n_s;
        let mut diagonals = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
        for s in 0..n {
            let row = jsa.row(s);
            for (i, v) in row.iter().enumerate() {
                diagonals[s + n - 1 - i] += v * jsa.get(i, s).conj();
            }
        }
        let area = g.cell_area();
        diagonals.iter_mut().for_each(|d| *d *= area);
        Ok(Self { step: g.step_s(), n, diagonals })
    }

    pub fn at(&self, tau: f64) -> Complex64 {
        let n = self.n as isize;
        self.diagonals
            .iter()
            .enumerate()
            .map(|(idx, d)| {
                let diff = (idx as isize - (n - 1)) as f64 * self.step;
                d * Complex64::from_polar(1.0, tau * diff)
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayOptimum {
    /// Signal delay maximizing `|𝒪(τ)|` (ps).
    pub tau: f64,
    pub overlap: f64,
}

/// Symmetric delay search interval `±3·L·|κ_s − κ_i|` (ps), falling back to
/// ±1 ps when signal and idler share a group velocity.
pub fn default_delay_range(spec: &crate::dispersion::DeviceSpec) -> (f64, f64) {
    let walkoff = spec.twin_walkoff_ps();
    let half = if walkoff > 0.0 { 3.0 * walkoff } else { 1.0 };
    (-half, half)
}

/// Maximizes `|𝒪(τ)|` after multiplying the signal axis by `exp(iν_s τ)`.
pub fn delay_compensated_overlap(jsa: &JointAmplitude, tau_range: (f64, f64)) -> Result<DelayOptimum> {
    let (lo, hi) = tau_range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Range(format!("invalid delay range [{lo}, {hi}]")));
    }
    let profile = OverlapProfile::new(jsa)?;
    let best = optimize::scan_then_maximize(|t| profile.at(t).norm(), lo, hi, 121, DELAY_TOLERANCE_PS)?;
    Ok(DelayOptimum { tau: best.x, overlap: best.value })
}

/// Direct grid evaluation of `𝒜 = ∫∫ g_s(ω, ω̃) g_i(ω̃, ω)` with
/// `g_s(ω, ω̃) = ∫ f*(ω, ω_i) f(ω̃, ω_i)` and `g_i(ω̃, ω) = ∫ f*(ω_s, ω̃) f(ω_s, ω)`.
pub fn density_overlap(jsa: &JointAmplitude) -> Result<f64> {
    jsa.require_square()?;
    let g = jsa.grid();
    let f = Mat::<Complex64>::from_fn(g.n_s, g.n_i, |s, i| jsa.get(s, i));
    let rows = &f * f.adjoint(); // Σ_i f(a,i) f*(b,i)
    let cols = f.adjoint() * &f; // Σ_s f*(s,a) f(s,b)
    let mut acc = Complex64::new(0.0, 0.0);
    for b in 0..g.n_s {
        for a in 0..g.n_s {
            // g_s(a,b) = conj(rows[a,b]) Δ, g_i(b,a) = cols[b,a] Δ
            acc += rows[(a, b)].conj() * cols[(b, a)];
        }
    }
    let area = g.cell_area();
    Ok(acc.re * area * area)
}

/// Optical gain and the resulting squeezing parameters `r_k = B·λ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSpec {
    pub gain: f64,
    pub squeezing: Vec<f64>,
    /// `⟨n⟩ = Σ sinh²(r_k)`
    pub mean_n: f64,
}

impl GainSpec {
    pub fn new(gain: f64, coefficients: &[f64]) -> Result<Self> {
        if !(gain >= 0.0) || !gain.is_finite() {
            return Err(Error::Range(format!("gain must be non-negative, got {gain}")));
        }
        let squeezing: Vec<f64> = coefficients.iter().map(|l| gain * l).collect();
        let mean_n = squeezing.iter().map(|r| r.sinh().powi(2)).sum();
        Ok(Self { gain, squeezing, mean_n })
    }

    /// Gain whose spectrum yields the requested `⟨n⟩`.
    pub fn for_mean_n(mean_n: f64, coefficients: &[f64]) -> Result<Self> {
        if !(mean_n >= 0.0) || !mean_n.is_finite() {
            return Err(Error::Range(format!("mean photon number must be non-negative, got {mean_n}")));
        }
        if coefficients.iter().all(|&l| l == 0.0) {
            return Err(Error::Range("empty Schmidt spectrum".into()));
        }
        let n_of = |b: f64| coefficients.iter().map(|l| (b * l).sinh().powi(2)).sum::<f64>();
        let mut hi = mean_n.sqrt().max(1e-3);
        while n_of(hi) < mean_n {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if n_of(mid) < mean_n {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self::new(0.5 * (lo + hi), coefficients)
    }
}

/// `K` equal Schmidt coefficients `1/√K`.
pub fn uniform_coefficients(k: usize) -> Vec<f64> {
    vec![1.0 / (k as f64).sqrt(); k]
}

/// Effective mode number `(Σλ²)²/Σλ⁴` of a coefficient list.
pub fn effective_mode_number(coefficients: &[f64]) -> f64 {
    let two: f64 = coefficients.iter().map(|l| l * l).sum();
    let four: f64 = coefficients.iter().map(|l| l.powi(4)).sum();
    two * two / four
}
