//! Scalar angular-spectrum diffraction and focal-spot metrics.
//!
//! Fields use the `exp(−iωt)` convention, so a plane wave travelling toward
//! `+z` is `exp(ikz)` and a converging lens imposes a phase that decreases
//! with radius.

mod aperture;
mod background;
mod fft;
mod field;
mod gaussian;
mod metrics;
mod propagate;

pub use aperture::{ideal_lens_field, synthesize_aperture_field, AberrationScreen, ApertureField, GridSpec};
pub use background::{gauss_legendre, on_axis_rayleigh_sommerfeld, unmodulated_background, BackgroundEstimate};
pub use fft::{fft_frequency, Fft2};
pub use field::{grid_coordinate, SampledField};
pub use gaussian::{gaussian_reference_zr, GaussianBeam};
pub use metrics::{focal_metrics, focal_metrics_with, side_lobe_ratio, waist_radius, FocalMetrics, MetricsOptions};
pub use propagate::{
    angular_spectrum_propagate, scan_axial, scan_axial_with, scan_planes, AngularSpectrum, FocalPlane,
    FocalStack, ScanOptions, TransferFunction,
};

use crate::lens::DesignError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid pitch {grid_pitch_m} m is coarser than the lattice pitch {lattice_pitch_m} m")]
    CoarseGrid { grid_pitch_m: f64, lattice_pitch_m: f64 },
    #[error("invalid axial scan: {0}")]
    InvalidScan(String),
    #[error("axial intensity peaks at the scan boundary (z = {z_m} m); widen the scan")]
    FocusAtBoundary { z_m: f64 },
    #[error("axial profile does not fall to half its peak on both sides of the focus")]
    MissingHalfCrossing,
    #[error("focal spot does not fall to 1/e² inside the stored window")]
    WaistOutsideWindow,
    #[error(transparent)]
    Design(#[from] DesignError),
}
