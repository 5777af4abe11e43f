//! Device dispersion data and the second-order phase mismatch.
//!
//! Everything downstream works in detunings `ν = ω - ω⁰` (rad/ps) about the
//! phasematched expansion point, with lengths in µm and times in ps.

use crate::error::{Error, Result};
use crate::units;

/// Tolerance for the `kappa = 1/v_g(μ) - 1/v_g(p)` consistency check (ps/µm).
pub const KAPPA_CONSISTENCY_TOL: f64 = 1e-9;

/// Group velocity, group-velocity mismatch and dispersion coefficient of one
/// mode.
///
/// For the pump `kappa` is unused and held at zero; `lambda_coeff` is `Λ_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionTriple {
    /// Group velocity in µm/ps, when known.
    pub group_velocity: Option<f64>,
    /// ps/µm
    pub kappa: f64,
    /// ps²/µm
    pub lambda_coeff: f64,
}

impl DispersionTriple {
    pub fn pump(group_velocity: f64, lambda_p: f64) -> Self {
        Self { group_velocity: Some(group_velocity), kappa: 0.0, lambda_coeff: lambda_p }
    }

    /// Twin-beam mode with `kappa` derived from its and the pump's group velocity.
    pub fn from_group_velocities(group_velocity: f64, pump_group_velocity: f64, lambda_coeff: f64) -> Self {
        Self {
            group_velocity: Some(group_velocity),
            kappa: 1.0 / group_velocity - 1.0 / pump_group_velocity,
            lambda_coeff,
        }
    }

    pub fn from_kappa(kappa: f64, lambda_coeff: f64) -> Self {
        Self { group_velocity: None, kappa, lambda_coeff }
    }
}

/// Waveguide length, PM-width factor, expansion point and per-mode dispersion.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    /// µm
    pub length_um: f64,
    pub gamma: f64,
    /// Expansion-point angular frequencies (rad/ps).
    pub pump_center: f64,
    pub signal_center: f64,
    pub idler_center: f64,
    pub pump: DispersionTriple,
    pub signal: DispersionTriple,
    pub idler: DispersionTriple,
}

impl DeviceSpec {
    /// Validates and builds a spec. Signal and idler centers default to the
    /// degenerate point `pump_center / 2` when `None`.
    pub fn new(
        length_um: f64,
        gamma: f64,
        pump_center: f64,
        twin_centers: Option<(f64, f64)>,
        pump: DispersionTriple,
        signal: DispersionTriple,
        idler: DispersionTriple,
    ) -> Result<Self> {
        let (signal_center, idler_center) = twin_centers.unwrap_or((0.5 * pump_center, 0.5 * pump_center));
        let spec = Self { length_um, gamma, pump_center, signal_center, idler_center, pump, signal, idler };
        spec.validate()?;
        Ok(spec)
    }

    /// The ridge Bragg-reflection waveguide used throughout the examples:
    /// 2 mm long, degenerate at 193.3 THz, with `kappa` derived from the
    /// simulated group velocities.
    pub fn brw_reference() -> Self {
        let vg_p = 74.0;
        Self::new(
            2000.0,
            0.193,
            units::thz_to_rad_per_ps(386.6),
            None,
            DispersionTriple::pump(vg_p, 5.74e-6),
            DispersionTriple::from_group_velocities(90.1, vg_p, -2.16e-6),
            DispersionTriple::from_group_velocities(90.4, vg_p, -2.17e-6),
        )
        .expect("reference device is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_um > 0.0) || !self.length_um.is_finite() {
            return Err(Error::InvalidSpec(format!("length must be positive, got {}", self.length_um)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidSpec(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        let sum = self.signal_center + self.idler_center;
        if (self.pump_center - sum).abs() > 1e-9 * self.pump_center.abs().max(1.0) {
            return Err(Error::InvalidSpec(format!(
                "energy conservation violated: pump center {} != signal + idler {}",
                self.pump_center, sum
            )));
        }
        if let Some(vg_p) = self.pump.group_velocity {
            for (name, mode) in [("signal", &self.signal), ("idler", &self.idler)] {
                if let Some(vg) = mode.group_velocity {
                    let expected = 1.0 / vg - 1.0 / vg_p;
                    if (mode.kappa - expected).abs() > KAPPA_CONSISTENCY_TOL {
                        return Err(Error::InvalidSpec(format!(
                            "{name} kappa {} inconsistent with group velocities (expected {expected})",
                            mode.kappa
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Phase mismatch (rad/µm) at detunings `(nu_s, nu_i)`:
    /// `κ_s ν_s + κ_i ν_i + Λ_s ν_s² + Λ_i ν_i² − Λ_p ν_s ν_i`.
    #[inline]
    pub fn delta_k(&self, nu_s: f64, nu_i: f64) -> f64 {
        self.signal.kappa * nu_s
            + self.idler.kappa * nu_i
            + self.signal.lambda_coeff * nu_s * nu_s
            + self.idler.lambda_coeff * nu_i * nu_i
            - self.pump.lambda_coeff * nu_s * nu_i
    }

    /// Angle (degrees) by which the PM ridge `θ ≈ arctan(κ_s/κ_i)` deviates
    /// from perfect anti-correlation at 45°.
    pub fn pm_tilt_deviation(&self) -> Result<f64> {
        if self.idler.kappa == 0.0 {
            return Err(Error::DegenerateDispersion("kappa_i is zero; PM tilt undefined".into()));
        }
        let theta = (self.signal.kappa / self.idler.kappa).atan().to_degrees();
        Ok((45.0 - theta).abs())
    }

    /// Temporal walk-off between signal and idler accumulated over the
    /// device, `L·|κ_s − κ_i|` in ps.
    pub fn twin_walkoff_ps(&self) -> f64 {
        self.length_um * (self.signal.kappa - self.idler.kappa).abs()
    }

    pub fn degeneracy_thz(&self) -> (f64, f64) {
        (units::rad_per_ps_to_thz(self.signal_center), units::rad_per_ps_to_thz(self.idler_center))
    }
}
