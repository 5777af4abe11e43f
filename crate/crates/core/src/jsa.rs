//! Joint spectral amplitude on a uniform detuning grid.
//!
//! `f(ν_s, ν_i) = α(ν_s + ν_i) · φ(ν_s, ν_i) / 𝒩`, with a Gaussian pump
//! envelope `α` and the waveguide phasematching function `φ`, sampled on a
//! rectangular grid centred on the degeneracy point and normalized so that
//! `Σ |f|² Δν_s Δν_i = 1`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dispersion::DeviceSpec;
use crate::error::{Error, Result};
use crate::units;

/// Minimum number of grid points across the narrower of the pump and PM widths.
pub const MIN_POINTS_PER_WIDTH: f64 = 8.0;

/// Transmitted fraction below which a filtered JSA is flagged as unreliable.
pub const LOW_TRANSMISSION: f64 = 1e-6;

/// Super-Gaussian order used for the 40 nm band-pass filter.
pub const DEFAULT_SUPERGAUSSIAN_ORDER: u32 = 2;

/// `sinc(x)` crosses `1/√2` here, i.e. `sinc²` reaches half maximum.
const SINC_SQ_HALF_MAX: f64 = 1.391_557_377_373_2;

/// Gaussian pump envelope `exp(−(ν_s+ν_i)²/σ_p²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSpec {
    /// Field-envelope width σ_p in rad/ps.
    pub sigma: f64,
}

impl PumpSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidSpec(format!("pump width must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    /// Pump with the given intensity FWHM (nm) at `center_nm`.
    ///
    /// `|α|² = exp(−2ν²/σ_p²)` has FWHM `σ_p·√(2 ln 2)`.
    pub fn from_fwhm_nm(fwhm_nm: f64, center_nm: f64) -> Result<Self> {
        if !(fwhm_nm > 0.0) || !(center_nm > fwhm_nm) {
            return Err(Error::InvalidSpec(format!("bad pump bandwidth {fwhm_nm} nm at {center_nm} nm")));
        }
        let fwhm = units::thz_to_rad_per_ps(units::bandwidth_nm_to_thz(fwhm_nm, center_nm));
        Self::new(fwhm / (2.0 * std::f64::consts::LN_2).sqrt())
    }

    /// Intensity FWHM of the envelope in the sum detuning (rad/ps).
    pub fn intensity_fwhm(&self) -> f64 {
        self.sigma * (2.0 * std::f64::consts::LN_2).sqrt()
    }

    #[inline]
    pub fn envelope(&self, nu_s: f64, nu_i: f64) -> f64 {
        let sum = nu_s + nu_i;
        (-(sum * sum) / (self.sigma * self.sigma)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PmApproximation {
    Sinc,
    #[default]
    Gaussian,
}

/// Phasematching amplitude including the propagation phase `exp(iLΔk/2)`.
#[inline]
pub fn pm_function(spec: &DeviceSpec, nu_s: f64, nu_i: f64, approximation: PmApproximation) -> Complex64 {
    let half_phase = 0.5 * spec.length_um * spec.delta_k(nu_s, nu_i);
    let magnitude = match approximation {
        PmApproximation::Sinc => sinc(half_phase),
        PmApproximation::Gaussian => (-spec.gamma * half_phase * half_phase).exp(),
    };
    Complex64::from_polar(1.0, half_phase) * magnitude
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Uniform grid centred on `(ν_s, ν_i) = (0, 0)` with half-widths in rad/ps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub n_s: usize,
    pub n_i: usize,
    pub span_s: f64,
    pub span_i: f64,
}

impl FrequencyGrid {
    pub fn new(n_s: usize, n_i: usize, span_s: f64, span_i: f64) -> Result<Self> {
        if n_s < 2 || n_i < 2 {
            return Err(Error::Range(format!("grid needs at least 2 points per axis, got {n_s}x{n_i}")));
        }
        if !(span_s > 0.0 && span_i > 0.0) {
            return Err(Error::Range(format!("grid spans must be positive, got {span_s}, {span_i}")));
        }
        Ok(Self { n_s, n_i, span_s, span_i })
    }

    pub fn square(n: usize, span: f64) -> Result<Self> {
        Self::new(n, n, span, span)
    }

    pub fn step_s(&self) -> f64 {
        2.0 * self.span_s / (self.n_s - 1) as f64
    }

    pub fn step_i(&self) -> f64 {
        2.0 * self.span_i / (self.n_i - 1) as f64
    }

    #[inline]
    pub fn nu_s(&self, j: usize) -> f64 {
        -self.span_s + j as f64 * self.step_s()
    }

    #[inline]
    pub fn nu_i(&self, j: usize) -> f64 {
        -self.span_i + j as f64 * self.step_i()
    }

    pub fn axis_s(&self) -> Vec<f64> {
        (0..self.n_s).map(|j| self.nu_s(j)).collect()
    }

    pub fn axis_i(&self) -> Vec<f64> {
        (0..self.n_i).map(|j| self.nu_i(j)).collect()
    }

    pub fn cell_area(&self) -> f64 {
        self.step_s() * self.step_i()
    }

    pub fn is_square(&self) -> bool {
        self.n_s == self.n_i && self.span_s == self.span_i
    }

    /// Same spans with each step halved.
    pub fn refined(&self) -> Self {
        Self { n_s: 2 * self.n_s - 1, n_i: 2 * self.n_i - 1, ..*self }
    }

    fn transposed(&self) -> Self {
        Self { n_s: self.n_i, n_i: self.n_s, span_s: self.span_i, span_i: self.span_s }
    }
}

/// Complex amplitude sampled on a [`FrequencyGrid`], row-major with the
/// signal index running slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAmplitude {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
    normalized: bool,
}

impl JointAmplitude {
    /// Samples `f` on the grid without normalizing.
    pub fn from_fn<F>(grid: FrequencyGrid, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Sync,
    {
        let mut values = vec![Complex64::new(0.0, 0.0); grid.n_s * grid.n_i];
        values.par_chunks_mut(grid.n_i).enumerate().for_each(|(js, row)| {
            let nu_s = grid.nu_s(js);
            for (ji, v) in row.iter_mut().enumerate() {
                *v = f(nu_s, grid.nu_i(ji));
            }
        });
        Self { grid, values, normalized: false }
    }

    pub fn from_values(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_s * grid.n_i {
            return Err(Error::Shape(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.n_s,
                grid.n_i
            )));
        }
        Ok(Self { grid, values, normalized: false })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    #[inline]
    pub fn get(&self, js: usize, ji: usize) -> Complex64 {
        self.values[js * self.grid.n_i + ji]
    }

    pub fn row(&self, js: usize) -> &[Complex64] {
        &self.values[js * self.grid.n_i..(js + 1) * self.grid.n_i]
    }

    /// Discrete `∫∫ |f|²`.
    pub fn norm_sq(&self) -> f64 {
        self.values.par_iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn normalize(mut self) -> Result<Self> {
        let norm = self.norm_sq();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Range(format!("cannot normalize amplitude with norm {norm}")));
        }
        let scale = 1.0 / norm.sqrt();
        self.values.par_iter_mut().for_each(|v| *v *= scale);
        self.normalized = true;
        Ok(self)
    }

    /// Marks the amplitude normalized after checking the discrete norm.
    pub fn assume_normalized(mut self) -> Result<Self> {
        let norm = self.norm_sq();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!("amplitude norm is {norm}, expected 1")));
        }
        self.normalized = true;
        Ok(self)
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        if !self.normalized {
            return Err(Error::Contract("operation requires a normalized JSA".into()));
        }
        Ok(())
    }

    pub(crate) fn require_square(&self) -> Result<()> {
        if !self.grid.is_square() {
            return Err(Error::Shape(format!(
                "signal/idler swap needs a square grid, got {}x{} with spans {} and {}",
                self.grid.n_s, self.grid.n_i, self.grid.span_s, self.grid.span_i
            )));
        }
        Ok(())
    }

    /// Swaps the roles of signal and idler, `f'(ν_s, ν_i) = f(ν_i, ν_s)`.
    pub fn transposed(&self) -> Self {
        let g = self.grid;
        let mut values = vec![Complex64::new(0.0, 0.0); g.n_s * g.n_i];
        for js in 0..g.n_s {
            for ji in 0..g.n_i {
                values[ji * g.n_s + js] = self.get(js, ji);
            }
        }
        Self { grid: g.transposed(), values, normalized: self.normalized }
    }

    /// Multiplies every value by `exp(i ν_s τ)`, a signal delay of `τ` ps.
    pub fn with_signal_delay(&self, tau: f64) -> Self {
        let g = self.grid;
        let mut out = self.clone();
        out.values.par_chunks_mut(g.n_i).enumerate().for_each(|(js, row)| {
            let phase = Complex64::from_polar(1.0, g.nu_s(js) * tau);
            row.iter_mut().for_each(|v| *v *= phase);
        });
        out
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }
}

/// Samples and normalizes the JSA of `spec` pumped by `pump`.
pub fn build_jsa(
    spec: &DeviceSpec,
    pump: &PumpSpec,
    grid: FrequencyGrid,
    approximation: PmApproximation,
) -> Result<JointAmplitude> {
    check_resolution(spec, pump, &grid, approximation)?;
    JointAmplitude::from_fn(grid, |nu_s, nu_i| {
        pm_function(spec, nu_s, nu_i, approximation) * pump.envelope(nu_s, nu_i)
    })
    .normalize()
}

/// Intensity FWHM of the PM function in `Δk` (rad/µm).
fn pm_delta_k_fwhm(spec: &DeviceSpec, approximation: PmApproximation) -> f64 {
    let half = match approximation {
        // exp(-γ x²)² = 1/2 with x = LΔk/2
        PmApproximation::Gaussian => (std::f64::consts::LN_2 / (2.0 * spec.gamma)).sqrt(),
        PmApproximation::Sinc => SINC_SQ_HALF_MAX,
    };
    4.0 * half / spec.length_um
}

/// Rejects grids with fewer than [`MIN_POINTS_PER_WIDTH`] points across the
/// narrower of the pump and PM widths along either axis.
pub fn check_resolution(
    spec: &DeviceSpec,
    pump: &PumpSpec,
    grid: &FrequencyGrid,
    approximation: PmApproximation,
) -> Result<()> {
    let pump_width = pump.intensity_fwhm();
    let dk_width = pm_delta_k_fwhm(spec, approximation);
    for (axis, kappa, step) in [
        ("signal", spec.signal.kappa, grid.step_s()),
        ("idler", spec.idler.kappa, grid.step_i()),
    ] {
        let pm_width = if kappa == 0.0 { f64::INFINITY } else { dk_width / kappa.abs() };
        let narrow = pump_width.min(pm_width);
        let points = narrow / step;
        if points < MIN_POINTS_PER_WIDTH {
            return Err(Error::Resolution(format!(
                "{axis} axis has {points:.2} points across the {narrow:.4} rad/ps feature \
                 (step {step:.4} rad/ps, need {MIN_POINTS_PER_WIDTH})"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterShape {
    Gaussian,
    SuperGaussian { order: u32 },
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterAxes {
    Signal,
    Idler,
    Both,
}

/// Band-pass filter with intensity FWHM `bandwidth` (rad/ps) at detuning `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub shape: FilterShape,
    pub center: f64,
    pub bandwidth: f64,
    pub applies_to: FilterAxes,
}

impl FilterSpec {
    pub fn new(shape: FilterShape, center: f64, bandwidth: f64, applies_to: FilterAxes) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::InvalidSpec(format!("filter bandwidth must be positive, got {bandwidth}")));
        }
        if let FilterShape::SuperGaussian { order } = shape {
            if order < 1 {
                return Err(Error::InvalidSpec("super-Gaussian order must be at least 1".into()));
            }
        }
        Ok(Self { shape, center, bandwidth, applies_to })
    }

    /// Filter of `width_nm` centred on the degeneracy wavelength `center_thz`.
    pub fn from_nm(shape: FilterShape, width_nm: f64, center_thz: f64) -> Result<Self> {
        let center_nm = units::thz_to_wavelength_nm(center_thz);
        let bw = units::thz_to_rad_per_ps(units::bandwidth_nm_to_thz(width_nm, center_nm));
        Self::new(shape, 0.0, bw, FilterAxes::Both)
    }

    pub fn intensity_transmission(&self, nu: f64) -> f64 {
        let x = (nu - self.center) / self.bandwidth;
        match self.shape {
            FilterShape::Gaussian => (-4.0 * std::f64::consts::LN_2 * x * x).exp(),
            FilterShape::SuperGaussian { order } => {
                (-std::f64::consts::LN_2 * (2.0 * x).abs().powi(2 * order as i32)).exp()
            }
            FilterShape::Rectangular => {
                if x.abs() <= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn amplitude_transmission(&self, nu: f64) -> f64 {
        self.intensity_transmission(nu).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct FilteredJsa {
    pub jsa: JointAmplitude,
    /// Fraction of `∫∫|f|²` passed before renormalization.
    pub transmitted_fraction: f64,
    /// Set when the transmitted fraction is below [`LOW_TRANSMISSION`].
    pub low_transmission: bool,
}

pub fn apply_filter(jsa: &JointAmplitude, filter: &FilterSpec) -> Result<FilteredJsa> {
    jsa.require_normalized()?;
    let g = *jsa.grid();
    let (on_s, on_i) = match filter.applies_to {
        FilterAxes::Signal => (true, false),
        FilterAxes::Idler => (false, true),
        FilterAxes::Both => (true, true),
    };
    for (on, step, axis) in [(on_s, g.step_s(), "signal"), (on_i, g.step_i(), "idler")] {
        if on && filter.bandwidth < 2.0 * step {
            return Err(Error::Resolution(format!(
                "filter bandwidth {:.4} rad/ps is narrower than two {axis} grid steps ({:.4} rad/ps)",
                filter.bandwidth, step
            )));
        }
    }
    let t_s: Vec<f64> = g.axis_s().iter().map(|&nu| if on_s { filter.amplitude_transmission(nu) } else { 1.0 }).collect();
    let t_i: Vec<f64> = g.axis_i().iter().map(|&nu| if on_i { filter.amplitude_transmission(nu) } else { 1.0 }).collect();
    let mut values = jsa.values().to_vec();
    values.par_chunks_mut(g.n_i).enumerate().for_each(|(js, row)| {
        for (v, &ti) in row.iter_mut().zip(&t_i) {
            *v *= t_s[js] * ti;
        }
    });
    let filtered = JointAmplitude::from_values(g, values)?;
    let transmitted_fraction = filtered.norm_sq();
    if transmitted_fraction <= 0.0 {
        return Err(Error::Range("filter blocks the entire JSA".into()));
    }
    let low_transmission = transmitted_fraction < LOW_TRANSMISSION;
    if low_transmission {
        log::warn!("filter transmits only {transmitted_fraction:.3e} of the JSA; renormalized result is unreliable");
    }
    Ok(FilteredJsa { jsa: filtered.normalize()?, transmitted_fraction, low_transmission })
}

/// Signal and idler marginal spectra, each summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub signal: Vec<f64>,
    pub idler: Vec<f64>,
}

pub fn marginals(jsa: &JointAmplitude) -> Marginals {
    let g = jsa.grid();
    let mut signal = vec![0.0; g.n_s];
    let mut idler = vec![0.0; g.n_i];
    for js in 0..g.n_s {
        for (ji, v) in jsa.row(js).iter().enumerate() {
            let p = v.norm_sqr();
            signal[js] += p;
            idler[ji] += p;
        }
    }
    let total: f64 = signal.iter().sum();
    if total > 0.0 {
        signal.iter_mut().for_each(|p| *p /= total);
        idler.iter_mut().for_each(|p| *p /= total);
    }
    Marginals { signal, idler }
}

/// Half-maximum crossings `(lo, hi)` of a sampled profile, linearly
/// interpolated between the outermost samples above and below half maximum.
pub fn half_max_crossings(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    debug_assert_eq!(x.len(), y.len());
    let peak = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Range("profile has no positive maximum".into()));
    }
    let half = 0.5 * peak;
    let first = y.iter().position(|&v| v >= half).expect("peak exists");
    let last = y.iter().rposition(|&v| v >= half).expect("peak exists");
    if first == 0 || last == y.len() - 1 {
        return Err(Error::Range("profile does not fall below half maximum inside the grid".into()));
    }
    let cross = |a: usize, b: usize| x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
    Ok((cross(first - 1, first), cross(last, last + 1)))
}

pub fn fwhm(x: &[f64], y: &[f64]) -> Result<f64> {
    let (lo, hi) = half_max_crossings(x, y)?;
    Ok(hi - lo)
}

/// Direction of a straight cut through the degeneracy point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cut {
    /// Across the anti-correlated ridge, along `ν_s = ν_i`.
    AntiDiagonal,
    /// Along the ridge, `ν_s = −ν_i`.
    Diagonal,
}

/// JSI full width at half maximum along `cut`, measured as Euclidean distance
/// in the `(ν_s, ν_i)` plane (rad/ps).
pub fn jsi_linewidth(jsa: &JointAmplitude, cut: Cut) -> Result<f64> {
    let (t, y) = jsi_cut(jsa, cut);
    fwhm(&t, &y)
}

/// Bilinearly interpolated JSI along `cut`; returns `(distance, intensity)`.
pub fn jsi_cut(jsa: &JointAmplitude, cut: Cut) -> (Vec<f64>, Vec<f64>) {
    let g = jsa.grid();
    let dir_i = match cut {
        Cut::AntiDiagonal => 1.0,
        Cut::Diagonal => -1.0,
    };
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let t_max = std::f64::consts::SQRT_2 * g.span_s.min(g.span_i) * (1.0 - 1e-12);
    let dt = 0.25 * g.step_s().min(g.step_i());
    let n = (2.0 * t_max / dt).floor() as usize + 1;
    let mut ts = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for k in 0..n {
        let t = -t_max + k as f64 * dt;
        ts.push(t);
        ys.push(bilinear_intensity(jsa, t * inv_sqrt2, dir_i * t * inv_sqrt2));
    }
    (ts, ys)
}

fn bilinear_intensity(jsa: &JointAmplitude, nu_s: f64, nu_i: f64) -> f64 {
    let g = jsa.grid();
    let fs = ((nu_s + g.span_s) / g.step_s()).clamp(0.0, (g.n_s - 1) as f64);
    let fi = ((nu_i + g.span_i) / g.step_i()).clamp(0.0, (g.n_i - 1) as f64);
    let s0 = (fs.floor() as usize).min(g.n_s - 2);
    let i0 = (fi.floor() as usize).min(g.n_i - 2);
    let (ws, wi) = (fs - s0 as f64, fi - i0 as f64);
    let p = |a: usize, b: usize| jsa.get(a, b).norm_sqr();
    (1.0 - ws) * (1.0 - wi) * p(s0, i0)
        + ws * (1.0 - wi) * p(s0 + 1, i0)
        + (1.0 - ws) * wi * p(s0, i0 + 1)
        + ws * wi * p(s0 + 1, i0 + 1)
}

/// Marginal centres and widths converted to wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSummary {
    pub signal_center_nm: f64,
    pub signal_fwhm_nm: f64,
    pub idler_center_nm: f64,
    pub idler_fwhm_nm: f64,
}

/// Marginal FWHMs (nm) and their midpoints (nm), using the device's
/// degeneracy frequencies to reconstruct absolute axes.
pub fn spectral_summary(jsa: &JointAmplitude, spec: &DeviceSpec) -> Result<SpectralSummary> {
    let m = marginals(jsa);
    let g = jsa.grid();
    let (fs0, fi0) = spec.degeneracy_thz();
    let describe = |axis: Vec<f64>, profile: &[f64], center_thz: f64| -> Result<(f64, f64)> {
        let (lo, hi) = half_max_crossings(&axis, profile)?;
        let lam_lo = units::detuning_to_wavelength_nm(center_thz, hi);
        let lam_hi = units::detuning_to_wavelength_nm(center_thz, lo);
        Ok((units::detuning_to_wavelength_nm(center_thz, 0.5 * (lo + hi)), lam_hi - lam_lo))
    };
    let (signal_center_nm, signal_fwhm_nm) = describe(g.axis_s(), &m.signal, fs0)?;
    let (idler_center_nm, idler_fwhm_nm) = describe(g.axis_i(), &m.idler, fi0)?;
    Ok(SpectralSummary { signal_center_nm, signal_fwhm_nm, idler_center_nm, idler_fwhm_nm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::DispersionTriple;

    fn symmetric_device() -> DeviceSpec {
        let mut spec = DeviceSpec::brw_reference();
        spec.signal = DispersionTriple::from_kappa(-2.4e-3, 0.0);
        spec.idler = DispersionTriple::from_kappa(-2.4e-3, 0.0);
        spec.pump = DispersionTriple::from_kappa(0.0, 0.0);
        spec
    }

    fn gaussian_separable(grid: FrequencyGrid, ws: f64, wi: f64) -> JointAmplitude {
        JointAmplitude::from_fn(grid, |s, i| Complex64::new((-s * s / (ws * ws) - i * i / (wi * wi)).exp(), 0.0))
            .normalize()
            .unwrap()
    }

    #[test]
    fn pump_envelope_values() {
        let pump = PumpSpec::new(0.7).unwrap();
        assert_eq!(pump.envelope(0.3, -0.3), 1.0);
        assert_eq!(pump.envelope(25.0, -25.0), 1.0);
        assert!((pump.envelope(0.4, 0.3) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(PumpSpec::new(0.0).is_err());
    }

    #[test]
    fn pump_fwhm_conversion_measured_on_envelope() {
        let pump = PumpSpec::from_fwhm_nm(0.25, 772.0).unwrap();
        let expected = units::thz_to_rad_per_ps(units::bandwidth_nm_to_thz(0.25, 772.0));
        let x: Vec<f64> = (0..4001).map(|k| -2.0 + k as f64 * 1e-3).collect();
        let y: Vec<f64> = x.iter().map(|&nu| pump.envelope(nu, 0.0).powi(2)).collect();
        let measured = fwhm(&x, &y).unwrap();
        assert!((measured - expected).abs() < 1e-5, "{measured} vs {expected}");
        assert!((pump.sigma - 0.671).abs() < 1e-3, "{}", pump.sigma);
    }

    #[test]
    fn pm_function_at_phasematching_and_first_zero() {
        let spec = DeviceSpec::brw_reference();
        for approx in [PmApproximation::Sinc, PmApproximation::Gaussian] {
            let v = pm_function(&spec, 0.0, 0.0, approx);
            assert_eq!(v, Complex64::new(1.0, 0.0));
        }
        // zero-dispersion-free line: pick ν_s so that L Δk / 2 = π with ν_i = 0
        let mut lin = spec.clone();
        lin.signal.lambda_coeff = 0.0;
        let nu = 2.0 * std::f64::consts::PI / (lin.length_um * lin.signal.kappa);
        let v = pm_function(&lin, nu, 0.0, PmApproximation::Sinc);
        assert!(v.norm() < 1e-12, "{}", v.norm());
    }

    #[test]
    fn gaussian_matches_sinc_at_amplitude_half_maximum() {
        // scan x = LΔk/2 for the sinc crossings, compare the two magnitudes there
        let gamma = 0.193;
        let xs: Vec<f64> = (0..=300_000).map(|k| k as f64 * 1e-5).collect();
        let find = |target: f64| {
            let k = xs.iter().position(|&x| sinc(x) < target).unwrap();
            xs[k]
        };
        let x_amp = find(0.5);
        let g_amp = (-gamma * x_amp * x_amp).exp();
        assert!((g_amp - 0.5).abs() < 1e-3, "{g_amp}");

        let x_int = find(std::f64::consts::FRAC_1_SQRT_2);
        assert!((x_int - SINC_SQ_HALF_MAX).abs() < 2e-5);
        let g_int = (-2.0 * gamma * x_int * x_int).exp();
        // intensities differ by 0.026 at the intensity half maximum
        assert!((g_int - 0.5).abs() < 3e-2, "{g_int}");
    }

    #[test]
    fn symmetric_construction_gives_symmetric_jsi() {
        let spec = symmetric_device();
        let pump = PumpSpec::new(1.2).unwrap();
        let grid = FrequencyGrid::square(129, 4.0).unwrap();
        let jsa = build_jsa(&spec, &pump, grid, PmApproximation::Gaussian).unwrap();
        for js in 0..grid.n_s {
            for ji in 0..grid.n_i {
                assert_eq!(jsa.get(js, ji).norm_sqr(), jsa.get(ji, js).norm_sqr());
            }
        }
    }

    #[test]
    fn build_normalizes_and_keeps_propagation_phase() {
        let spec = DeviceSpec::brw_reference();
        let pump = PumpSpec::from_fwhm_nm(0.25, 772.0).unwrap();
        let grid = FrequencyGrid::square(161, 6.0).unwrap();
        for approx in [PmApproximation::Gaussian, PmApproximation::Sinc] {
            let jsa = build_jsa(&spec, &pump, grid, approx).unwrap();
            assert!((jsa.norm_sq() - 1.0).abs() < 1e-9);
            let js = 40;
            for ji in (0..grid.n_i).step_by(7) {
                let v = jsa.get(js, ji);
                if v.norm() < 1e-200 {
                    continue;
                }
                let half = 0.5 * spec.length_um * spec.delta_k(grid.nu_s(js), grid.nu_i(ji));
                let mut expected = Complex64::from_polar(1.0, half);
                // a negative sinc lobe flips the sign
                if approx == PmApproximation::Sinc && sinc(half) < 0.0 {
                    expected = -expected;
                }
                let diff = (v / v.norm() - expected).norm();
                assert!(diff < 1e-9, "phase mismatch {diff} at ({js}, {ji})");
            }
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let spec = DeviceSpec::brw_reference();
        let pump = PumpSpec::from_fwhm_nm(0.25, 772.0).unwrap();
        let grid = FrequencyGrid::square(256, 80.0).unwrap();
        let err = build_jsa(&spec, &pump, grid, PmApproximation::Gaussian).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)));
    }

    #[test]
    fn identity_filter_leaves_values_unchanged() {
        let grid = FrequencyGrid::square(65, 3.0).unwrap();
        let jsa = gaussian_separable(grid, 1.0, 0.6);
        let filter = FilterSpec::new(FilterShape::Rectangular, 0.0, 6.5, FilterAxes::Both).unwrap();
        let out = apply_filter(&jsa, &filter).unwrap();
        assert!((out.transmitted_fraction - 1.0).abs() < 1e-12);
        for (a, b) in jsa.values().iter().zip(out.jsa.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn disjoint_filter_is_flagged() {
        let grid = FrequencyGrid::square(129, 30.0).unwrap();
        let jsa = gaussian_separable(grid, 1.0, 1.0);
        let filter = FilterSpec::new(FilterShape::Gaussian, 25.0, 2.0, FilterAxes::Signal).unwrap();
        let out = apply_filter(&jsa, &filter).unwrap();
        assert!(out.transmitted_fraction < 1e-6);
        assert!(out.low_transmission);
        assert!((out.jsa.norm_sq() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn filter_errors() {
        let grid = FrequencyGrid::square(33, 3.0).unwrap();
        let jsa = gaussian_separable(grid, 1.0, 1.0);
        let narrow = FilterSpec::new(FilterShape::Gaussian, 0.0, 0.2, FilterAxes::Both).unwrap();
        assert!(matches!(apply_filter(&jsa, &narrow), Err(Error::Resolution(_))));

        let raw = JointAmplitude::from_fn(grid, |_, _| Complex64::new(1.0, 0.0));
        let wide = FilterSpec::new(FilterShape::Gaussian, 0.0, 2.0, FilterAxes::Both).unwrap();
        assert!(matches!(apply_filter(&raw, &wide), Err(Error::Contract(_))));
        assert!(FilterSpec::new(FilterShape::Gaussian, 0.0, 0.0, FilterAxes::Both).is_err());
        assert!(FilterSpec::new(FilterShape::SuperGaussian { order: 0 }, 0.0, 1.0, FilterAxes::Both).is_err());
    }

    #[test]
    fn filter_profiles_have_stated_fwhm() {
        for shape in [FilterShape::Gaussian, FilterShape::SuperGaussian { order: 2 }, FilterShape::SuperGaussian { order: 4 }] {
            let f = FilterSpec::new(shape, 0.5, 3.0, FilterAxes::Both).unwrap();
            assert!((f.intensity_transmission(0.5 + 1.5) - 0.5).abs() < 1e-12);
            assert!((f.intensity_transmission(0.5 - 1.5) - 0.5).abs() < 1e-12);
            assert_eq!(f.intensity_transmission(0.5), 1.0);
        }
    }

    #[test]
    fn marginals_of_separable_gaussian() {
        let grid = FrequencyGrid::new(401, 301, 5.0, 4.0).unwrap();
        let (ws, wi) = (1.1, 0.7);
        let jsa = gaussian_separable(grid, ws, wi);
        let m = marginals(&jsa);
        assert!((m.signal.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((m.idler.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // |f|² ∝ exp(-2ν²/w²) has FWHM w·√(2 ln 2)
        let k = (2.0 * std::f64::consts::LN_2).sqrt();
        let fs = fwhm(&grid.axis_s(), &m.signal).unwrap();
        let fi = fwhm(&grid.axis_i(), &m.idler).unwrap();
        assert!((fs - ws * k).abs() < grid.step_s(), "{fs}");
        assert!((fi - wi * k).abs() < grid.step_i(), "{fi}");
    }

    #[test]
    fn linewidth_of_rotated_gaussian() {
        let grid = FrequencyGrid::square(301, 6.0).unwrap();
        let (a, b) = (0.8, 4.0);
        let jsa = JointAmplitude::from_fn(grid, |s, i| {
            Complex64::new((-(s + i).powi(2) / (a * a) - (s - i).powi(2) / (b * b)).exp(), 0.0)
        })
        .normalize()
        .unwrap();
        // along t/√2 (1,1): s+i = √2 t, intensity exp(-4t²/a²), FWHM = a·√(ln 2)
        let w = jsi_linewidth(&jsa, Cut::AntiDiagonal).unwrap();
        let expected = a * std::f64::consts::LN_2.sqrt();
        assert!((w - expected).abs() < 0.01 * expected, "{w} vs {expected}");
        let wd = jsi_linewidth(&jsa, Cut::Diagonal).unwrap();
        let expected_d = b * std::f64::consts::LN_2.sqrt();
        assert!((wd - expected_d).abs() < 0.01 * expected_d, "{wd} vs {expected_d}");
    }

    #[test]
    fn fwhm_fails_without_crossing() {
        let x = [0.0, 1.0, 2.0];
        assert!(matches!(fwhm(&x, &[1.0, 0.9, 0.8]), Err(Error::Range(_))));
    }

    #[test]
    fn transposition_and_delay() {
        let grid = FrequencyGrid::new(5, 7, 1.0, 2.0).unwrap();
        let jsa = JointAmplitude::from_fn(grid, Complex64::new);
        let t = jsa.transposed();
        assert_eq!(t.grid().n_s, 7);
        assert_eq!(t.get(3, 1), jsa.get(1, 3));
        let d = jsa.with_signal_delay(0.5);
        let expected = jsa.get(4, 2) * Complex64::from_polar(1.0, grid.nu_s(4) * 0.5);
        assert!((d.get(4, 2) - expected).norm() < 1e-15);
    }
}
