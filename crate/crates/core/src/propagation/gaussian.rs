use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

use super::propagate::{scan_planes, FocalPlane, FocalStack};
use super::{PropagationError, SampledField};

/// Rayleigh length `π·w₀²/λ` of a Gaussian beam with waist `w₀`.
pub fn gaussian_reference_zr(waist_m: f64, wavelength_m: f64) -> f64 {
    PI * waist_m * waist_m / wavelength_m
}

/// Paraxial TEM₀₀ beam with unit on-axis amplitude at the waist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBeam {
    pub waist_m: f64,
    pub wavelength_m: f64,
    pub focus_z_m: f64,
}

impl GaussianBeam {
    pub fn new(waist_m: f64, wavelength_m: f64, focus_z_m: f64) -> Self {
        Self {
            waist_m,
            wavelength_m,
            focus_z_m,
        }
    }

    pub fn rayleigh_length(&self) -> f64 {
        gaussian_reference_zr(self.waist_m, self.wavelength_m)
    }

    pub fn width_at(&self, z: f64) -> f64 {
        let u = (z - self.focus_z_m) / self.rayleigh_length();
        self.waist_m * (1.0 + u * u).sqrt()
    }

    pub fn on_axis_intensity(&self, z: f64) -> f64 {
        let u = (z - self.focus_z_m) / self.rayleigh_length();
        1.0 / (1.0 + u * u)
    }

    /// Total power `π·w₀²/2` for unit peak amplitude.
    pub fn power(&self) -> f64 {
        0.5 * PI * self.waist_m * self.waist_m
    }

    /// Complex amplitude from the q-parameter form `(q₀/q)·exp(ik·r²/2q + ik·Δz)`.
    pub fn field(&self, x: f64, y: f64, z: f64) -> Complex64 {
        let k = TAU / self.wavelength_m;
        let dz = z - self.focus_z_m;
        let q0 = Complex64::new(0.0, -self.rayleigh_length());
        let q = Complex64::new(dz, 0.0) + q0;
        let r2 = x * x + y * y;
        q0 / q * (Complex64::i() * k * r2 / (2.0 * q) + Complex64::i() * k * dz).exp()
    }

    pub fn sample(&self, n: usize, pitch_m: f64, z: f64) -> SampledField {
        SampledField::from_fn(n, n, pitch_m, self.wavelength_m, z, |x, y| self.field(x, y, z))
    }
}

impl FocalStack {
    /// Stack of closed-form Gaussian planes on an `n × n` grid, for checking
    /// focal metrics against a beam whose parameters are known exactly.
    pub fn from_gaussian_beam(
        beam: &GaussianBeam,
        z_min: f64,
        z_max: f64,
        n_planes: usize,
        n: usize,
        pitch_m: f64,
    ) -> Result<Self, PropagationError> {
        let planes = scan_planes(z_min, z_max, n_planes)?
            .into_iter()
            .map(|z| {
                let field = beam.sample(n, pitch_m, z);
                FocalPlane {
                    z_m: z,
                    on_axis_intensity: field.on_axis_intensity(),
                    total_power: field.power(),
                    field,
                }
            })
            .collect();
        Ok(Self {
            wavelength_m: beam.wavelength_m,
            incident_power: beam.power(),
            planes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_rayleigh_length() {
        let zr = gaussian_reference_zr(1.33e-6, 852e-9);
        assert!((zr - 6.52e-6).abs() < 0.01e-6, "{zr}");
    }

    #[test]
    fn closed_form_halves_at_rayleigh_length() {
        let b = GaussianBeam::new(2e-6, 852e-9, 1e-6);
        let zr = b.rayleigh_length();
        assert_relative_eq!(b.field(0.0, 0.0, 1e-6 + zr).norm_sqr(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(b.width_at(1e-6 + zr), 2f64.sqrt() * 2e-6, max_relative = 1e-14);
        // 1/e² radius at the waist
        assert_relative_eq!(b.field(2e-6, 0.0, 1e-6).norm_sqr(), (-2.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn sampled_power_matches_closed_form() {
        let b = GaussianBeam::new(2e-6, 852e-9, 0.0);
        let f = b.sample(128, 0.1e-6, 5e-6);
        assert_relative_eq!(f.power(), b.power(), max_relative = 1e-9);
    }
}
