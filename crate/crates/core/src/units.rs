//! Unit conversions between the internal working units (µm, ps, rad/ps) and
//! the wavelength/frequency units used in configuration and reports.
//!
//! Frequencies in THz are ordinary frequencies (cycles per ps); detunings
//! inside the library are angular (rad/ps).

use std::f64::consts::TAU;

/// Speed of light in nm·THz (equivalently µm/ps × 1000).
pub const SPEED_OF_LIGHT_NM_THZ: f64 = 299_792.458;

pub fn thz_to_rad_per_ps(f_thz: f64) -> f64 {
    TAU * f_thz
}

pub fn rad_per_ps_to_thz(w: f64) -> f64 {
    w / TAU
}

pub fn wavelength_nm_to_thz(lambda_nm: f64) -> f64 {
    SPEED_OF_LIGHT_NM_THZ / lambda_nm
}

pub fn thz_to_wavelength_nm(f_thz: f64) -> f64 {
    SPEED_OF_LIGHT_NM_THZ / f_thz
}

/// Frequency width (THz) of the wavelength interval `[λ - Δλ/2, λ + Δλ/2]`.
pub fn bandwidth_nm_to_thz(width_nm: f64, center_nm: f64) -> f64 {
    let lo = center_nm - 0.5 * width_nm;
    let hi = center_nm + 0.5 * width_nm;
    SPEED_OF_LIGHT_NM_THZ / lo - SPEED_OF_LIGHT_NM_THZ / hi
}

/// Inverse of [`bandwidth_nm_to_thz`]: wavelength width of the frequency
/// interval `[f - Δf/2, f + Δf/2]`.
pub fn bandwidth_thz_to_nm(width_thz: f64, center_thz: f64) -> f64 {
    let lo = center_thz - 0.5 * width_thz;
    let hi = center_thz + 0.5 * width_thz;
    SPEED_OF_LIGHT_NM_THZ / lo - SPEED_OF_LIGHT_NM_THZ / hi
}

/// Angular detuning width (rad/ps) around `center_thz` expressed in nm.
pub fn angular_width_to_nm(width_rad_per_ps: f64, center_thz: f64) -> f64 {
    bandwidth_thz_to_nm(rad_per_ps_to_thz(width_rad_per_ps), center_thz)
}

/// Absolute wavelength (nm) of a detuning `nu` (rad/ps) from `center_thz`.
pub fn detuning_to_wavelength_nm(center_thz: f64, nu: f64) -> f64 {
    thz_to_wavelength_nm(center_thz + rad_per_ps_to_thz(nu))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_bandwidths_match_quoted_roundings() {
        // 12 nm ~ 1.5 THz and 40 nm ~ 5.0 THz around 1551 nm
        let g12 = bandwidth_nm_to_thz(12.0, 1551.1);
        let sg40 = bandwidth_nm_to_thz(40.0, 1551.1);
        assert!((g12 - 1.5).abs() < 0.01, "{g12}");
        assert!((sg40 - 5.0).abs() < 0.03, "{sg40}");
    }

    #[test]
    fn bandwidth_round_trip() {
        let thz = bandwidth_nm_to_thz(0.25, 772.0);
        let nm = bandwidth_thz_to_nm(thz, wavelength_nm_to_thz(772.0));
        assert!((nm - 0.25).abs() < 1e-6);
    }
}
