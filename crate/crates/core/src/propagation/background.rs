use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::PropagationError;
use crate::lens::{modulation_efficiency, unwrapped_lens_phase, BrickClass, EfficiencyTable, LayoutTable};

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// `∫ₐᵇ f` with `panels` equal composite 8-point Gauss–Legendre panels.
pub fn gauss_legendre<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, panels: usize) -> Complex64 {
    let h = (b - a) / panels as f64;
    let mut acc = Complex64::default();
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        for &(x, w) in &GL8 {
            acc += (f(mid - half * x) + f(mid + half * x)) * (w * half);
        }
    }
    acc
}

/// On-axis Rayleigh–Sommerfeld field at distance `z` behind a radially
/// symmetric aperture distribution `a(r)` on `[0, radius]`:
/// `U = −∫ a(r)·(z/ρ)·(ik − 1/ρ)·e^{ikρ}/ρ · r dr`, `ρ = √(r² + z²)`.
///
/// A uniform disk gives exactly `e^{ikz} − (z/ρ_R)·e^{ikρ_R}`.
pub fn on_axis_rayleigh_sommerfeld<F: Fn(f64) -> Complex64>(
    aperture: F,
    radius: f64,
    z: f64,
    wavelength: f64,
    panels: usize,
) -> Complex64 {
    let k = TAU / wavelength;
    let integrand = |r: f64| {
        let rho = r.hypot(z);
        let kernel = Complex64::new(-1.0 / rho, k) * (z / rho) * Complex64::from_polar(1.0 / rho, k * rho);
        -aperture(r) * kernel * r
    };
    gauss_legendre(integrand, 0.0, radius, panels)
}

/// Unconverted-light background relative to the converted focus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundEstimate {
    /// Residual-channel on-axis intensity at the converted focus over the converted peak.
    pub ratio: f64,
    pub focal_z_m: f64,
    pub converted_peak_intensity: f64,
    pub residual_intensity: f64,
}

/// Ratio of unconverted to converted on-axis intensity at the converted focus.
///
/// Both channels are averaged over the two checkerboard sub-lattices, which is
/// exact for the zero diffraction order when the lattice pitch is below
/// `λ/√2` (all other orders are evanescent). The layout is assumed to follow
/// its own prescription, so brick phases are taken from the lens equation.
/// The on-axis fields come from a radial Rayleigh–Sommerfeld quadrature, which
/// makes the full-size lens tractable.
pub fn unmodulated_background(
    layout: &LayoutTable,
    table: &EfficiencyTable,
    wavelength_m: f64,
) -> Result<BackgroundEstimate, PropagationError> {
    let presc = &layout.prescription;
    let illum = presc.illumination_profile();
    let f = presc.focal_length_m;
    let radius = presc.radius_m();
    let mut conv = [0.0; 2];
    let mut res = [0.0; 2];
    let mut design = [0.0; 2];
    for (k, class) in [BrickClass::Class1, BrickClass::Class2].into_iter().enumerate() {
        conv[k] = modulation_efficiency(class, wavelength_m, table)?.sqrt();
        res[k] = table.residual(class, wavelength_m)?.sqrt();
        design[k] = presc.design_wavelength(class);
    }
    let converted = |r: f64| {
        let a = 0.5 * illum.amplitude(r);
        (Complex64::from_polar(conv[0], unwrapped_lens_phase(r, f, design[0]))
            + Complex64::from_polar(conv[1], unwrapped_lens_phase(r, f, design[1])))
            * a
    };
    let residual = |r: f64| Complex64::new(0.0, 0.5 * (res[0] + res[1]) * illum.amplitude(r));

    // panel count from the largest total phase excursion across the aperture
    let rho_r = radius.hypot(f);
    let max_phase = (TAU / wavelength_m * (rho_r - f))
        + unwrapped_lens_phase(radius, f, design[0].min(design[1])).abs();
    let panels = ((max_phase / TAU * 4.0).ceil() as usize).max(64);

    let na = radius / rho_r;
    let depth = wavelength_m / (na * na);
    let intensity = |z: f64| {
        on_axis_rayleigh_sommerfeld(converted, radius, z, wavelength_m, panels).norm_sqr()
    };
    // coarse scan, then golden-section refinement
    let n = 161;
    let (z_lo, z_hi) = ((f - 20.0 * depth).max(0.05 * f), f + 20.0 * depth);
    let step = (z_hi - z_lo) / (n - 1) as f64;
    let best = (0..n)
        .map(|k| z_lo + k as f64 * step)
        .map(|z| (z, intensity(z)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (intensity(c), intensity(d));
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = intensity(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = intensity(d);
        }
    }
    let focal_z_m = 0.5 * (a + b);
    let converted_peak_intensity = intensity(focal_z_m).max(best.1);
    let residual_intensity =
        on_axis_rayleigh_sommerfeld(residual, radius, focal_z_m, wavelength_m, panels).norm_sqr();
    let ratio = if converted_peak_intensity > 0.0 {
        residual_intensity / converted_peak_intensity
    } else {
        0.0
    };
    Ok(BackgroundEstimate {
        ratio,
        focal_z_m,
        converted_peak_intensity,
        residual_intensity,
    })
}
