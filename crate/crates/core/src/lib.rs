//! Simulation and analysis of pulsed type-II parametric downconversion in
//! Bragg-reflection waveguides.
//!
//! The pipeline runs from dispersion data to the joint spectral amplitude,
//! through its Schmidt decomposition and signal/idler overlaps, to
//! multimode twin-beam photon statistics, a gated click-detector Monte
//! Carlo, and visibility fits.

pub mod config;
pub mod dispersion;
pub mod error;
pub mod fit;
pub mod io;
pub mod jsa;
pub mod montecarlo;
pub mod optimize;
pub mod schmidt;
pub mod twinstats;
pub mod units;
pub mod validation;

pub use dispersion::{DeviceSpec, DispersionTriple};
pub use error::{Error, Result};
pub use jsa::{
    apply_filter, build_jsa, jsi_linewidth, marginals, pm_function, Cut, FilterAxes, FilterShape, FilterSpec,
    FrequencyGrid, JointAmplitude, PmApproximation, PumpSpec,
};
pub use schmidt::{decompose, delay_compensated_overlap, density_overlap, spectral_overlap, GainSpec, SchmidtData};
pub use montecarlo::{efficiency_sweep, simulate, SamplingStrategy, SimConfig};
pub use twinstats::{CountRecord, DetectionSpec, TwinBeam, VisibilityPoint};
pub use num_complex::Complex64;
