//! Sectioned TOML configuration shared by the library and the command line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dispersion::{DeviceSpec, DispersionTriple};
use crate::error::{Error, Result};
use crate::fit::{EtaRatio, VisibilityModel};
use crate::jsa::{FilterAxes, FilterShape, FilterSpec, FrequencyGrid, PmApproximation, PumpSpec};
use crate::montecarlo::{SamplingStrategy, SimConfig};
use crate::schmidt::uniform_coefficients;
use crate::twinstats::DetectionSpec;
use crate::units;

/// The reference waveguide shipped with the crate.
pub const BRW_REFERENCE: &str = include_str!("../configs/brw_reference.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub device: DeviceSection,
    #[serde(default)]
    pub pump: PumpSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub detection: DetectionSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub fit: FitSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub length_um: f64,
    pub gamma: f64,
    pub pump_center_thz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_center_thz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idler_center_thz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vg_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vg_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vg_i: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_i: Option<f64>,
    pub lambda_p: f64,
    pub lambda_s: f64,
    pub lambda_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpSection {
    pub fwhm_nm: f64,
    pub center_nm: f64,
}

impl Default for PumpSection {
    fn default() -> Self {
        Self { fwhm_nm: 0.25, center_nm: 772.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approximation {
    Gaussian,
    Sinc,
}

impl From<Approximation> for PmApproximation {
    fn from(a: Approximation) -> Self {
        match a {
            Approximation::Gaussian => PmApproximation::Gaussian,
            Approximation::Sinc => PmApproximation::Sinc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub points: usize,
    pub half_span_thz: f64,
    pub approx: Approximation,
    /// Fine grid around the degeneracy point for the JSI linewidth.
    pub cut_points: usize,
    pub cut_half_span_thz: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { points: 2048, half_span_thz: 12.75, approx: Approximation::Gaussian, cut_points: 256, cut_half_span_thz: 0.32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    None,
    Gaussian,
    Supergaussian,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterTarget {
    Both,
    Signal,
    Idler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub shape: FilterKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width_nm: Option<f64>,
    pub order: u32,
    /// Offset of the passband centre from the degeneracy point.
    pub center_offset_thz: f64,
    pub axes: FilterTarget,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            shape: FilterKind::None,
            width_nm: None,
            order: crate::jsa::DEFAULT_SUPERGAUSSIAN_ORDER,
            center_offset_thz: 0.0,
            axes: FilterTarget::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSection {
    pub eta1: f64,
    pub eta2: f64,
    pub laser_rep_mhz: f64,
    pub gate_divisor: u32,
    pub dark_rate_hz: f64,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self { eta1: 0.06, eta2: 0.056, laser_rep_mhz: 76.2, gate_divisor: 64, dark_rate_hz: 70.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumSource {
    /// Schmidt spectrum of the configured device and filter.
    Schmidt,
    /// `modes` equal coefficients.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Auto,
    PerMode,
    ThermalMixture,
}

impl From<Strategy> for SamplingStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Auto => SamplingStrategy::Auto,
            Strategy::PerMode => SamplingStrategy::PerMode,
            Strategy::ThermalMixture => SamplingStrategy::ThermalMixture,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub gates: u64,
    pub seed: u64,
    /// Target mean photon number; ignored when `gain` is set.
    pub mean_n: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    pub spectrum: SpectrumSource,
    pub modes: usize,
    pub strategy: Strategy,
    /// Squared gain per unit pump power for efficiency sweeps.
    pub gain_sq_per_power: f64,
    pub powers: Vec<f64>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            gates: 1_000_000,
            seed: 1,
            mean_n: 0.1,
            gain: None,
            spectrum: SpectrumSource::Uniform,
            modes: 88,
            strategy: Strategy::Auto,
            gain_sq_per_power: 1e-3,
            powers: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Approx,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub model: ModelKind,
    /// Fixed `η₁/η₂` for the full model; fitted when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_ratio: Option<f64>,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { model: ModelKind::Approx, eta_ratio: None }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_at(text, s.start)).unwrap_or(0);
            Error::config(line, e.message().trim())
        })?;
        cfg.check(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn reference() -> Self {
        Self::parse(BRW_REFERENCE).expect("bundled configuration is valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Semantic checks, reported against the line of the offending key.
    fn check(&self, text: &str) -> Result<()> {
        let fail = |section: &str, key: &str, msg: String| Err(Error::config(key_line(text, section, key), msg));
        let spec = self.device_spec();
        if let Err(e) = spec {
            let key = match &e {
                Error::InvalidSpec(m) if m.contains("gamma") => "gamma",
                Error::InvalidSpec(m) if m.contains("length") => "length_um",
                Error::InvalidSpec(m) if m.contains("signal") => "kappa_s",
                Error::InvalidSpec(m) if m.contains("idler") => "kappa_i",
                _ => "pump_center_thz",
            };
            return fail("device", key, e.to_string());
        }
        if let Err(e) = self.pump_spec() {
            return fail("pump", "fwhm_nm", e.to_string());
        }
        if let Err(e) = self.grid() {
            return fail("grid", "points", e.to_string());
        }
        if let Err(e) = self.cut_grid() {
            return fail("grid", "cut_points", e.to_string());
        }
        if self.filter.shape != FilterKind::None && self.filter.width_nm.is_none() {
            return fail("filter", "shape", "filter shape set without width_nm".into());
        }
        if let Err(e) = self.filter_spec() {
            return fail("filter", "width_nm", e.to_string());
        }
        if let Err(e) = self.detection_spec() {
            return fail("detection", "eta1", e.to_string());
        }
        if self.sim.gates == 0 {
            return fail("sim", "gates", "gate count must be positive".into());
        }
        if self.sim.spectrum == SpectrumSource::Uniform && self.sim.modes == 0 {
            return fail("sim", "modes", "uniform spectrum needs at least one mode".into());
        }
        if !(self.sim.mean_n >= 0.0) {
            return fail("sim", "mean_n", format!("mean_n must be non-negative, got {}", self.sim.mean_n));
        }
        if let Some(r) = self.fit.eta_ratio {
            if !(r > 0.0) {
                return fail("fit", "eta_ratio", format!("eta_ratio must be positive, got {r}"));
            }
        }
        Ok(())
    }

    pub fn device_spec(&self) -> Result<DeviceSpec> {
        let d = &self.device;
        let twin = |name: &str, vg: Option<f64>, kappa: Option<f64>, lambda: f64| match (vg, kappa, d.vg_p) {
            (vg, Some(k), _) => Ok(DispersionTriple { group_velocity: vg, kappa: k, lambda_coeff: lambda }),
            (Some(vg), None, Some(vg_p)) => Ok(DispersionTriple::from_group_velocities(vg, vg_p, lambda)),
            _ => Err(Error::InvalidSpec(format!("{name}: give kappa or both group velocities (vg_p and the mode's)"))),
        };
        let signal = twin("signal", d.vg_s, d.kappa_s, d.lambda_s)?;
        let idler = twin("idler", d.vg_i, d.kappa_i, d.lambda_i)?;
        let pump = DispersionTriple { group_velocity: d.vg_p, kappa: 0.0, lambda_coeff: d.lambda_p };
        let centers = match (d.signal_center_thz, d.idler_center_thz) {
            (Some(s), Some(i)) => Some((units::thz_to_rad_per_ps(s), units::thz_to_rad_per_ps(i))),
            (None, None) => None,
            _ => return Err(Error::InvalidSpec("give both signal and idler centers or neither".into())),
        };
        DeviceSpec::new(d.length_um, d.gamma, units::thz_to_rad_per_ps(d.pump_center_thz), centers, pump, signal, idler)
    }

    pub fn pump_spec(&self) -> Result<PumpSpec> {
        PumpSpec::from_fwhm_nm(self.pump.fwhm_nm, self.pump.center_nm)
    }

    pub fn approximation(&self) -> PmApproximation {
        self.grid.approx.into()
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::square(self.grid.points, units::thz_to_rad_per_ps(self.grid.half_span_thz))
    }

    pub fn cut_grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::square(self.grid.cut_points, units::thz_to_rad_per_ps(self.grid.cut_half_span_thz))
    }

    /// `None` when no filter is configured.
    pub fn filter_spec(&self) -> Result<Option<FilterSpec>> {
        let f = &self.filter;
        let shape = match f.shape {
            FilterKind::None => return Ok(None),
            FilterKind::Gaussian => FilterShape::Gaussian,
            FilterKind::Supergaussian => FilterShape::SuperGaussian { order: f.order },
            FilterKind::Rectangular => FilterShape::Rectangular,
        };
        let width_nm = f.width_nm.ok_or_else(|| Error::InvalidSpec("filter width_nm missing".into()))?;
        let center_thz = units::rad_per_ps_to_thz(self.device_spec()?.signal_center);
        let base = FilterSpec::from_nm(shape, width_nm, center_thz)?;
        let axes = match f.axes {
            FilterTarget::Both => FilterAxes::Both,
            FilterTarget::Signal => FilterAxes::Signal,
            FilterTarget::Idler => FilterAxes::Idler,
        };
        Ok(Some(FilterSpec::new(shape, units::thz_to_rad_per_ps(f.center_offset_thz), base.bandwidth, axes)?))
    }

    pub fn detection_spec(&self) -> Result<DetectionSpec> {
        let d = &self.detection;
        DetectionSpec::gated(d.eta1, d.eta2, d.laser_rep_mhz * 1e6, d.gate_divisor, d.dark_rate_hz)
    }

    pub fn fit_model(&self) -> VisibilityModel {
        match (self.fit.model, self.fit.eta_ratio) {
            (ModelKind::Approx, _) => VisibilityModel::Approx,
            (ModelKind::Full, Some(r)) => VisibilityModel::Full { eta_ratio: EtaRatio::Fixed(r) },
            (ModelKind::Full, None) => VisibilityModel::Full { eta_ratio: EtaRatio::Free },
        }
    }

    /// Monte Carlo configuration for a given Schmidt spectrum; the uniform
    /// spectrum ignores `schmidt_coefficients`.
    pub fn sim_config(&self, schmidt_coefficients: Option<&[f64]>) -> Result<SimConfig> {
        let coefficients = match (self.sim.spectrum, schmidt_coefficients) {
            (SpectrumSource::Uniform, _) => uniform_coefficients(self.sim.modes),
            (SpectrumSource::Schmidt, Some(c)) => c.to_vec(),
            (SpectrumSource::Schmidt, None) => {
                return Err(Error::Contract("Schmidt spectrum requested but not supplied".into()))
            }
        };
        let cfg = SimConfig::new(coefficients, self.sim.gain.unwrap_or(0.0), self.detection_spec()?, self.sim.gates, self.sim.seed)?
            .with_strategy(self.sim.strategy.into());
        match self.sim.gain {
            Some(_) => Ok(cfg),
            None => cfg.with_mean_n(self.sim.mean_n),
        }
    }
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]`, falling back to the section header or 0.
fn key_line(text: &str, section: &str, key: &str) -> usize {
    let mut in_section = false;
    let mut header = 0;
    for (k, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            in_section = t.trim_matches(|c| c == '[' || c == ']').trim() == section;
            if in_section {
                header = k + 1;
            }
            continue;
        }
        if in_section && t.split('=').next().map(str::trim) == Some(key) {
            return k + 1;
        }
    }
    header
}
