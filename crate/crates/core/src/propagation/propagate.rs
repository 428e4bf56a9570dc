use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rayon::prelude::*;

use super::fft::{fft_frequency, Fft2};
use super::{PropagationError, SampledField};
use std::f64::consts::TAU;

/// Free-space transfer function used between planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransferFunction {
    /// `exp(i·Δz·√(k² − kx² − ky²))`; evanescent waves decay as `exp(−|Δz|·κ)`.
    #[default]
    Exact,
    /// Fresnel approximation `exp(i·Δz·(k − (kx² + ky²)/2k))`.
    Paraxial,
}

/// Spectrum of a source plane, cached so that each output plane costs one inverse FFT.
#[derive(Debug, Clone)]
pub struct AngularSpectrum {
    spectrum: Array2<Complex64>,
    /// Real `kz` for propagating bins; for evanescent bins the decay rate is
    /// stored as the imaginary part.
    kz: Array2<Complex64>,
    source: SampledField,
    transfer: TransferFunction,
    plan: Fft2,
}

impl AngularSpectrum {
    pub fn new(field: &SampledField) -> Self {
        Self::with_transfer(field, TransferFunction::Exact)
    }

    pub fn with_transfer(field: &SampledField, transfer: TransferFunction) -> Self {
        let (ny, nx) = field.data.dim();
        let plan = Fft2::new(ny, nx);
        let spectrum = plan.forward(&field.data);
        let k = field.wavenumber();
        let p = field.pitch_m;
        let kz = Array2::from_shape_fn((ny, nx), |(j, i)| {
            let kx = TAU * fft_frequency(i, nx, p);
            let ky = TAU * fft_frequency(j, ny, p);
            let kt2 = kx * kx + ky * ky;
            match transfer {
                TransferFunction::Exact => {
                    let d = k * k - kt2;
                    if d >= 0.0 {
                        Complex64::new(d.sqrt(), 0.0)
                    } else {
                        Complex64::new(0.0, (-d).sqrt())
                    }
                }
                TransferFunction::Paraxial => Complex64::new(k - kt2 / (2.0 * k), 0.0),
            }
        });
        Self {
            spectrum,
            kz,
            source: field.clone(),
            transfer,
            plan,
        }
    }

    pub fn source(&self) -> &SampledField {
        &self.source
    }

    pub fn transfer(&self) -> TransferFunction {
        self.transfer
    }

    fn transfer_factor(kz: Complex64, dz: f64) -> Complex64 {
        if kz.im > 0.0 {
            Complex64::new((-dz.abs() * kz.im).exp(), 0.0)
        } else {
            Complex64::from_polar(1.0, dz * kz.re)
        }
    }

    /// Spectrum after propagating by `dz`.
    pub fn propagated_spectrum(&self, dz: f64) -> Array2<Complex64> {
        let mut out = self.spectrum.clone();
        Zip::from(&mut out)
            .and(&self.kz)
            .par_for_each(|a, &kz| *a *= Self::transfer_factor(kz, dz));
        out
    }

    /// Field in the plane at absolute coordinate `z`.
    pub fn field_at(&self, z: f64) -> SampledField {
        let dz = z - self.source.z_m;
        if dz == 0.0 {
            return self.source.clone();
        }
        SampledField {
            data: self.plan.inverse(&self.propagated_spectrum(dz)),
            z_m: z,
            ..self.source.clone()
        }
    }

    /// On-axis amplitude at `z` as a single inverse-DFT sample, O(N) instead of
    /// a full inverse transform.
    pub fn on_axis_at(&self, z: f64) -> Complex64 {
        let dz = z - self.source.z_m;
        let (ny, nx) = self.spectrum.dim();
        let (cy, cx) = (ny / 2, nx / 2);
        let phase_x: Vec<Complex64> = (0..nx)
            .map(|i| Complex64::from_polar(1.0, TAU * (i * cx) as f64 / nx as f64))
            .collect();
        let sum: Complex64 = (0..ny)
            .into_par_iter()
            .map(|j| {
                let py = Complex64::from_polar(1.0, TAU * (j * cy) as f64 / ny as f64);
                let mut acc = Complex64::default();
                for i in 0..nx {
                    acc += self.spectrum[[j, i]]
                        * Self::transfer_factor(self.kz[[j, i]], dz)
                        * phase_x[i];
                }
                acc * py
            })
            .sum();
        sum / (nx * ny) as f64
    }

    /// Source field with every evanescent bin removed.
    pub fn propagating_part(&self) -> SampledField {
        let mut spec = self.spectrum.clone();
        Zip::from(&mut spec).and(&self.kz).par_for_each(|a, kz| {
            if kz.im > 0.0 {
                *a = Complex64::default();
            }
        });
        SampledField {
            data: self.plan.inverse(&spec),
            ..self.source.clone()
        }
    }

    /// `Σ|A|²·pitch²/N`, equal to the spatial power by Parseval's theorem.
    pub fn spectral_power(&self) -> f64 {
        let n = self.spectrum.len() as f64;
        let p = self.source.pitch_m;
        self.spectrum.par_iter().map(|v| v.norm_sqr()).sum::<f64>() * p * p / n
    }

    /// Fraction of spectral power carried by evanescent bins.
    pub fn evanescent_fraction(&self) -> f64 {
        let total: f64 = self.spectrum.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let ev: f64 = self
            .spectrum
            .iter()
            .zip(self.kz.iter())
            .filter(|(_, kz)| kz.im > 0.0)
            .map(|(v, _)| v.norm_sqr())
            .sum();
        ev / total
    }
}

/// Propagates `field` by `dz` with the exact angular-spectrum transfer function.
pub fn angular_spectrum_propagate(field: &SampledField, dz: f64) -> SampledField {
    if dz == 0.0 {
        return field.clone();
    }
    AngularSpectrum::new(field).field_at(field.z_m + dz)
}

/// One plane of an axial scan, cropped around the axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalPlane {
    pub z_m: f64,
    pub on_axis_intensity: f64,
    /// Power of the full (uncropped) plane.
    pub total_power: f64,
    pub field: SampledField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocalStack {
    pub wavelength_m: f64,
    /// Power incident on the lens, the denominator of the focusing efficiency.
    pub incident_power: f64,
    pub planes: Vec<FocalPlane>,
}

impl FocalStack {
    pub fn with_incident_power(mut self, incident_power: f64) -> Self {
        self.incident_power = incident_power;
        self
    }

    pub fn z(&self) -> Vec<f64> {
        self.planes.iter().map(|p| p.z_m).collect()
    }

    pub fn on_axis_profile(&self) -> Vec<(f64, f64)> {
        self.planes
            .iter()
            .map(|p| (p.z_m, p.on_axis_intensity))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Half-width of the window kept around the axis in each plane.
    pub crop_half_width_m: f64,
    pub transfer: TransferFunction,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            crop_half_width_m: 12e-6,
            transfer: TransferFunction::Exact,
        }
    }
}

/// `n_planes` equally spaced planes from `z_min` to `z_max` inclusive.
pub fn scan_planes(z_min: f64, z_max: f64, n_planes: usize) -> Result<Vec<f64>, PropagationError> {
    if n_planes < 3 {
        return Err(PropagationError::InvalidScan(format!(
            "need at least 3 planes, got {n_planes}"
        )));
    }
    if !(z_min.is_finite() && z_max.is_finite() && z_min < z_max) {
        return Err(PropagationError::InvalidScan(format!(
            "z_min {z_min} must be below z_max {z_max}"
        )));
    }
    let step = (z_max - z_min) / (n_planes - 1) as f64;
    Ok((0..n_planes).map(|k| z_min + k as f64 * step).collect())
}

pub fn scan_axial(
    field: &SampledField,
    z_min: f64,
    z_max: f64,
    n_planes: usize,
) -> Result<FocalStack, PropagationError> {
    scan_axial_with(field, z_min, z_max, n_planes, &ScanOptions::default())
}

/// Propagates to each plane of the scan. Planes are computed one after another
/// (each inverse FFT is itself parallel), so peak memory is one full plane.
pub fn scan_axial_with(
    field: &SampledField,
    z_min: f64,
    z_max: f64,
    n_planes: usize,
    opts: &ScanOptions,
) -> Result<FocalStack, PropagationError> {
    let zs = scan_planes(z_min, z_max, n_planes)?;
    let spectrum = AngularSpectrum::with_transfer(field, opts.transfer);
    let planes = zs
        .into_iter()
        .map(|z| {
            let full = spectrum.field_at(z);
            FocalPlane {
                z_m: z,
                on_axis_intensity: full.on_axis_intensity(),
                total_power: full.power(),
                field: full.crop(opts.crop_half_width_m),
            }
        })
        .collect();
    Ok(FocalStack {
        wavelength_m: field.wavelength_m,
        incident_power: field.power(),
        planes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::GaussianBeam;
    use approx::assert_relative_eq;

    fn gaussian_field(n: usize, pitch: f64, w0: f64, lambda: f64) -> SampledField {
        let beam = GaussianBeam::new(w0, lambda, 0.0);
        SampledField::from_fn(n, n, pitch, lambda, 0.0, |x, y| beam.field(x, y, 0.0))
    }

    fn random_field(n: usize, pitch: f64, lambda: f64, seed: u64) -> SampledField {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let data = Array2::from_shape_fn((n, n), |_| Complex64::new(next(), next()));
        SampledField::new(data, pitch, lambda, 0.0).unwrap()
    }

    #[test]
    fn zero_distance_is_identity() {
        let f = random_field(32, 0.3e-6, 0.8e-6, 1);
        assert_eq!(angular_spectrum_propagate(&f, 0.0), f);
    }

    #[test]
    fn parseval_holds() {
        let f = random_field(64, 0.3e-6, 0.8e-6, 2);
        let a = AngularSpectrum::new(&f);
        assert_relative_eq!(a.spectral_power(), f.power(), max_relative = 1e-10);
    }

    #[test]
    fn round_trip_on_propagating_field() {
        let f = gaussian_field(128, 0.25e-6, 3e-6, 0.852e-6);
        let there = angular_spectrum_propagate(&f, 20e-6);
        let back = angular_spectrum_propagate(&there, -20e-6);
        assert!(back.max_relative_difference(&f) < 1e-9);
    }

    #[test]
    fn power_conserved_for_propagating_spectrum() {
        let f = gaussian_field(128, 0.25e-6, 2e-6, 0.852e-6);
        let a = AngularSpectrum::new(&f);
        assert!(a.evanescent_fraction() < 1e-20);
        for z in [5e-6, 40e-6, -13e-6] {
            assert_relative_eq!(a.field_at(z).power(), f.power(), max_relative = 1e-10);
        }
    }

    #[test]
    fn evanescent_components_decay() {
        // white noise at λ/2.5 pitch puts most power beyond the light cone
        let f = random_field(64, 0.2e-6, 1e-6, 3);
        let a = AngularSpectrum::new(&f);
        assert!(a.evanescent_fraction() > 0.1);
        assert!(a.field_at(5e-6).power() < f.power());
        assert!(a.field_at(-5e-6).power() < f.power());
    }

    #[test]
    fn linearity() {
        let f1 = random_field(32, 0.3e-6, 0.8e-6, 4);
        let f2 = random_field(32, 0.3e-6, 0.8e-6, 5);
        let (al, be) = (Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5));
        let mut sum = f1.clone();
        sum.data = &f1.data * al + &f2.data * be;
        let lhs = angular_spectrum_propagate(&sum, 3e-6);
        let p1 = angular_spectrum_propagate(&f1, 3e-6);
        let p2 = angular_spectrum_propagate(&f2, 3e-6);
        let mut rhs = p1.clone();
        rhs.data = &p1.data * al + &p2.data * be;
        assert!(lhs.max_relative_difference(&rhs) < 1e-10);
    }

    #[test]
    fn on_axis_shortcut_matches_full_transform() {
        let f = gaussian_field(64, 0.25e-6, 1.5e-6, 0.852e-6);
        let a = AngularSpectrum::new(&f);
        for z in [0.0, 3e-6, 11e-6] {
            let full = a.field_at(z).on_axis();
            assert!((a.on_axis_at(z) - full).norm() < 1e-12);
        }
    }

    #[test]
    fn scan_rejects_bad_ranges() {
        let f = gaussian_field(16, 0.25e-6, 1e-6, 0.852e-6);
        assert!(scan_axial(&f, 1.0, 0.0, 5).is_err());
        assert!(scan_axial(&f, 0.0, 1e-6, 2).is_err());
    }

    #[test]
    fn stack_power_constant() {
        let f = gaussian_field(128, 0.25e-6, 2e-6, 0.852e-6);
        let stack = scan_axial(&f, -20e-6, 20e-6, 9).unwrap();
        for p in &stack.planes {
            assert_relative_eq!(p.total_power, f.power(), max_relative = 1e-9);
        }
    }
}
