//! Optical-tweezer quantities derived from the focal spot: dipole potential,
//! trap frequencies, photon collection, and the fictitious magnetic field of
//! circularly polarized trap light.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

use crate::fit::{linear_fit, FitError, LinearFit};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// One gauss in tesla.
pub const GAUSS: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TweezerError {
    #[error("trap wavelength {lambda_m} m is resonant with the {line} line")]
    Resonant { lambda_m: f64, line: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("detection fraction of the reference model is zero")]
    ZeroDenominator,
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Alkali species with its two principal (D1, D2) lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpecies {
    pub mass_kg: f64,
    pub d1_lambda_m: f64,
    pub d2_lambda_m: f64,
    /// Natural linewidths in rad/s.
    pub d1_gamma_rad_s: f64,
    pub d2_gamma_rad_s: f64,
    /// Saturation intensity of the cycling transition, W/m².
    #[serde(default = "rb87_saturation")]
    pub saturation_intensity_w_m2: f64,
}

fn rb87_saturation() -> f64 {
    16.69
}

impl AtomSpecies {
    pub fn rb87() -> Self {
        Self {
            mass_kg: 1.443_160_648e-25,
            d1_lambda_m: 794.978_851e-9,
            d2_lambda_m: 780.241_209e-9,
            d1_gamma_rad_s: 3.6129e7,
            d2_gamma_rad_s: 3.8117e7,
            saturation_intensity_w_m2: rb87_saturation(),
        }
    }

    pub fn validate(&self) -> Result<(), TweezerError> {
        for (name, v) in [
            ("mass_kg", self.mass_kg),
            ("d1_lambda_m", self.d1_lambda_m),
            ("d2_lambda_m", self.d2_lambda_m),
            ("d1_gamma_rad_s", self.d1_gamma_rad_s),
            ("d2_gamma_rad_s", self.d2_gamma_rad_s),
            ("saturation_intensity_w_m2", self.saturation_intensity_w_m2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(TweezerError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// `(angular frequency, linewidth, line-strength weight, label)` per line.
    /// D2 carries twice the D1 strength.
    fn lines(&self) -> [(f64, f64, f64, &'static str); 2] {
        [
            (TAU * SPEED_OF_LIGHT / self.d2_lambda_m, self.d2_gamma_rad_s, 2.0, "D2"),
            (TAU * SPEED_OF_LIGHT / self.d1_lambda_m, self.d1_gamma_rad_s, 1.0, "D1"),
        ]
    }
}

impl Default for AtomSpecies {
    fn default() -> Self {
        Self::rb87()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialModel {
    /// Include the `1/(ω + ωᵢ)` counter-rotating terms.
    #[serde(default)]
    pub counter_rotating: bool,
}

/// Peak intensity `2ζP/(πw₀²)` of a Gaussian spot carrying a fraction `ζ` of `P`.
pub fn peak_intensity(power_w: f64, zeta: f64, waist_m: f64) -> f64 {
    2.0 * zeta * power_w / (PI * waist_m * waist_m)
}

fn detunings(
    lambda_m: f64,
    species: &AtomSpecies,
) -> Result<(f64, [(f64, f64, f64, &'static str); 2]), TweezerError> {
    if !(lambda_m.is_finite() && lambda_m > 0.0) {
        return Err(TweezerError::InvalidParameter(format!(
            "trap wavelength {lambda_m} m"
        )));
    }
    let omega = TAU * SPEED_OF_LIGHT / lambda_m;
    let lines = species.lines();
    for &(w, _, _, name) in &lines {
        if (omega - w).abs() <= 1e-12 * w {
            return Err(TweezerError::Resonant {
                lambda_m,
                line: name,
            });
        }
    }
    Ok((omega, lines))
}

/// Dipole potential in joules at intensity `I`; negative below both lines.
///
/// `U = (πc²/2)·Σᵢ sᵢ·Γᵢ/(ωᵢ³·Δᵢ)·I`, `Δᵢ = ω − ωᵢ`, `s = 2` (D2) and `1` (D1).
pub fn dipole_potential(
    intensity: f64,
    lambda_m: f64,
    species: &AtomSpecies,
) -> Result<f64, TweezerError> {
    dipole_potential_with(intensity, lambda_m, species, PotentialModel::default())
}

pub fn dipole_potential_with(
    intensity: f64,
    lambda_m: f64,
    species: &AtomSpecies,
    model: PotentialModel,
) -> Result<f64, TweezerError> {
    let (omega, lines) = detunings(lambda_m, species)?;
    let mut acc = 0.0;
    for (w, gamma, s, _) in lines {
        let mut term = 1.0 / (omega - w);
        if model.counter_rotating {
            term -= 1.0 / (omega + w);
        }
        acc += s * gamma / w.powi(3) * term;
    }
    Ok(0.5 * PI * SPEED_OF_LIGHT.powi(2) * acc * intensity)
}

/// Photon scattering rate (1/s) at intensity `I` in the same multi-line model.
pub fn scattering_rate(
    intensity: f64,
    lambda_m: f64,
    species: &AtomSpecies,
) -> Result<f64, TweezerError> {
    let (omega, lines) = detunings(lambda_m, species)?;
    let mut acc = 0.0;
    for (w, gamma, s, _) in lines {
        let d = omega - w;
        acc += s * (omega / w).powi(3) * gamma * gamma / (w.powi(3) * d * d);
    }
    Ok(0.5 * PI * SPEED_OF_LIGHT.powi(2) / HBAR * acc * intensity)
}

pub fn joules_to_millikelvin(energy_j: f64) -> f64 {
    energy_j / BOLTZMANN * 1e3
}

/// Harmonic trap frequencies `(ω_r, ω_z)` in rad/s for depth `U₀`.
pub fn trap_frequencies(depth_j: f64, waist_m: f64, rayleigh_m: f64, mass_kg: f64) -> (f64, f64) {
    let u = depth_j.abs();
    (
        (4.0 * u / (mass_kg * waist_m * waist_m)).sqrt(),
        (2.0 * u / (mass_kg * rayleigh_m * rayleigh_m)).sqrt(),
    )
}

/// Inputs for a complete trap summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapInputs {
    pub power_w: f64,
    pub wavelength_m: f64,
    pub waist_m: f64,
    pub rayleigh_length_m: f64,
    /// Fraction of the incident power in the central peak.
    pub zeta: f64,
}

impl TrapInputs {
    /// 15.9 mW at 852 nm into a 1.33 µm waist with ζ = 0.33; measured Rayleigh length 11.68 µm.
    pub fn measured_metalens() -> Self {
        Self {
            power_w: 15.9e-3,
            wavelength_m: 852e-9,
            waist_m: 1.33e-6,
            rayleigh_length_m: 11.68e-6,
            zeta: 0.33,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParameters {
    /// Signed potential at the trap center (negative when trapping).
    pub potential_j: f64,
    pub depth_j: f64,
    pub depth_mk: f64,
    pub waist_m: f64,
    pub rayleigh_length_m: f64,
    pub zeta: f64,
    pub radial_frequency_rad_s: f64,
    pub axial_frequency_rad_s: f64,
    pub peak_intensity_w_m2: f64,
    pub scattering_rate_s: f64,
}

pub fn trap_parameters(
    inputs: &TrapInputs,
    species: &AtomSpecies,
    model: PotentialModel,
) -> Result<TrapParameters, TweezerError> {
    species.validate()?;
    if inputs.power_w < 0.0 || !(inputs.zeta > 0.0 && inputs.zeta <= 1.0) {
        return Err(TweezerError::InvalidParameter(
            "power must be ≥ 0 and ζ in (0, 1]".into(),
        ));
    }
    if !(inputs.waist_m > 0.0 && inputs.rayleigh_length_m > 0.0) {
        return Err(TweezerError::InvalidParameter(
            "waist and Rayleigh length must be positive".into(),
        ));
    }
    let i0 = peak_intensity(inputs.power_w, inputs.zeta, inputs.waist_m);
    let u = dipole_potential_with(i0, inputs.wavelength_m, species, model)?;
    let (wr, wz) = trap_frequencies(u, inputs.waist_m, inputs.rayleigh_length_m, species.mass_kg);
    Ok(TrapParameters {
        potential_j: u,
        depth_j: u.abs(),
        depth_mk: joules_to_millikelvin(u.abs()),
        waist_m: inputs.waist_m,
        rayleigh_length_m: inputs.rayleigh_length_m,
        zeta: inputs.zeta,
        radial_frequency_rad_s: wr,
        axial_frequency_rad_s: wz,
        peak_intensity_w_m2: i0,
        scattering_rate_s: scattering_rate(i0, inputs.wavelength_m, species)?,
    })
}

/// Angular emission pattern of the fluorescing atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmissionPattern {
    #[default]
    Isotropic,
    /// σ± dipole along the collection axis: `(1 + cos²θ)` angular weight.
    CircularDipole,
}

/// Fraction of emitted photons inside a collection cone of numerical aperture `na`.
pub fn collection_efficiency(na: f64, pattern: EmissionPattern) -> Result<f64, TweezerError> {
    if !(0.0..=1.0).contains(&na) {
        return Err(TweezerError::InvalidParameter(format!(
            "numerical aperture {na} outside [0, 1]"
        )));
    }
    let c = (1.0 - na * na).sqrt();
    Ok(match pattern {
        EmissionPattern::Isotropic => 0.5 * (1.0 - c),
        EmissionPattern::CircularDipole => 0.375 * ((1.0 - c) + (1.0 - c * c * c) / 3.0),
    })
}

/// Detection chain for fluorescence counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionModel {
    pub numerical_aperture: f64,
    /// Optics transmission `t`.
    pub transmission: f64,
    /// Concentration factor `ζ` of the collection mode.
    pub concentration: f64,
    #[serde(default)]
    pub pattern: EmissionPattern,
    /// Extra losses such as a beamsplitter.
    #[serde(default = "one")]
    pub path_factor: f64,
    /// Use this collection efficiency instead of the solid-angle formula.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency_override: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl CollectionModel {
    /// NA 0.46 lens, η = 4.0 %, t = 0.22, ζ = 0.33.
    pub fn metalens_preset() -> Self {
        Self {
            numerical_aperture: 0.46,
            transmission: 0.22,
            concentration: 0.33,
            pattern: EmissionPattern::Isotropic,
            path_factor: 1.0,
            efficiency_override: Some(0.040),
        }
    }

    /// NA 0.28 objective, η = 1.5 %, t = 0.8, ζ = 1.
    pub fn objective_preset() -> Self {
        Self {
            numerical_aperture: 0.28,
            transmission: 0.8,
            concentration: 1.0,
            pattern: EmissionPattern::Isotropic,
            path_factor: 1.0,
            efficiency_override: Some(0.015),
        }
    }

    pub fn validate(&self) -> Result<(), TweezerError> {
        if !(self.numerical_aperture > 0.0 && self.numerical_aperture < 1.0) {
            return Err(TweezerError::InvalidParameter(format!(
                "numerical aperture {} outside (0, 1)",
                self.numerical_aperture
            )));
        }
        let mut factors = vec![
            ("transmission", self.transmission),
            ("concentration", self.concentration),
            ("path_factor", self.path_factor),
        ];
        if let Some(e) = self.efficiency_override {
            factors.push(("efficiency_override", e));
        }
        for (name, v) in factors {
            if !(0.0..=1.0).contains(&v) {
                return Err(TweezerError::InvalidParameter(format!(
                    "{name} = {v} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn efficiency(&self) -> Result<f64, TweezerError> {
        match self.efficiency_override {
            Some(e) => Ok(e),
            None => collection_efficiency(self.numerical_aperture, self.pattern),
        }
    }

    /// `η·t·ζ·path`.
    pub fn detection_fraction(&self) -> Result<f64, TweezerError> {
        self.validate()?;
        Ok(self.efficiency()? * self.transmission * self.concentration * self.path_factor)
    }
}

/// Expected count ratio between two detection chains.
pub fn count_ratio(numerator: &CollectionModel, reference: &CollectionModel) -> Result<f64, TweezerError> {
    let den = reference.detection_fraction()?;
    if den == 0.0 {
        return Err(TweezerError::ZeroDenominator);
    }
    Ok(numerator.detection_fraction()? / den)
}

/// `B_F = β·P`: the vector light shift of circular trap light acts as a
/// magnetic field along the beam, proportional to power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FictitiousFieldModel {
    /// Tesla per watt of trap power.
    pub beta_t_per_w: f64,
    /// Applied bias along the beam, tesla.
    pub bias_t: f64,
    pub waist_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FictitiousField {
    pub field_t: f64,
    /// Characteristic gradient `B_F/w₀`, T/m.
    pub gradient_t_per_m: f64,
    /// `B_z + B_F`; lifetime is longest where this vanishes.
    pub total_t: f64,
}

impl FictitiousFieldModel {
    /// β from a fitted optimal-bias line. The optimum sits where the applied
    /// bias cancels the fictitious field, so `β = −slope`.
    pub fn from_optimal_bias_fit(fit: &LinearFit, bias_t: f64, waist_m: f64) -> Self {
        Self {
            beta_t_per_w: -fit.slope,
            bias_t,
            waist_m,
        }
    }
}

pub fn fictitious_field(power_w: f64, model: &FictitiousFieldModel) -> FictitiousField {
    let field_t = model.beta_t_per_w * power_w;
    FictitiousField {
        field_t,
        gradient_t_per_m: field_t / model.waist_m,
        total_t: model.bias_t + field_t,
    }
}

/// Least-squares line through `(power W, optimal bias T)` points.
pub fn optimal_bias_linear_fit(points: &[(f64, f64)]) -> Result<LinearFit, TweezerError> {
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    Ok(linear_fit(&x, &y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn peak_intensity_examples() {
        assert_eq!(peak_intensity(0.0, 0.33, 1.33e-6), 0.0);
        let i = peak_intensity(15.9e-3, 0.33, 1.33e-6);
        assert!((i / 1.89e9 - 1.0).abs() < 0.005, "{i}");
        assert_relative_eq!(
            peak_intensity(1.0, 0.5, 2e-6),
            peak_intensity(1.0, 0.5, 1e-6) / 4.0,
            max_relative = 1e-15
        );
    }

    /// Hand evaluation of the two-line sum at 852 nm and I = 1.888e9 W/m².
    #[test]
    fn trap_depth_hand_value() {
        let rb = AtomSpecies::rb87();
        let i = peak_intensity(15.9e-3, 0.33, 1.33e-6);
        let u = dipole_potential(i, 852e-9, &rb).unwrap();
        assert!(u < 0.0);
        let mk = joules_to_millikelvin(-u);
        assert!((mk - 0.845).abs() < 0.005, "{mk}");
        assert!((0.7..=1.0).contains(&mk));
    }

    #[test]
    fn counter_rotating_terms_deepen_the_trap_slightly() {
        let rb = AtomSpecies::rb87();
        let rwa = dipole_potential(1e9, 852e-9, &rb).unwrap();
        let full = dipole_potential_with(1e9, 852e-9, &rb, PotentialModel { counter_rotating: true }).unwrap();
        assert!(full < rwa);
        assert!((full / rwa - 1.0) < 0.1);
    }

    #[test]
    fn resonance_is_an_error() {
        let rb = AtomSpecies::rb87();
        assert!(matches!(
            dipole_potential(1.0, rb.d2_lambda_m, &rb),
            Err(TweezerError::Resonant { line: "D2", .. })
        ));
    }

    #[test]
    fn blue_detuning_repels() {
        let rb = AtomSpecies::rb87();
        assert!(dipole_potential(1e9, 760e-9, &rb).unwrap() > 0.0);
        assert_eq!(dipole_potential(0.0, 852e-9, &rb).unwrap(), 0.0);
    }

    #[test]
    fn scattering_rate_is_small_far_off_resonance() {
        let rb = AtomSpecies::rb87();
        let r = scattering_rate(1.89e9, 852e-9, &rb).unwrap();
        assert!(r > 0.0 && r < 1e3, "{r}");
    }

    #[test]
    fn trap_frequency_examples() {
        let m = AtomSpecies::rb87().mass_kg;
        let u = 1e-26;
        let (_, wz_measured) = trap_frequencies(u, 1.33e-6, 11.68e-6, m);
        let (_, wz_gauss) = trap_frequencies(u, 1.33e-6, 6.52e-6, m);
        assert_relative_eq!(wz_measured / wz_gauss, 6.52 / 11.68, max_relative = 1e-12);
        let (wr, wz) = trap_frequencies(u, 1.33e-6, 11.68e-6, m);
        assert_relative_eq!(wr / wz, 2f64.sqrt() * 11.68 / 1.33, max_relative = 1e-12);
        let (wr4, wz4) = trap_frequencies(4.0 * u, 1.33e-6, 11.68e-6, m);
        assert_relative_eq!(wr4, 2.0 * wr, max_relative = 1e-12);
        assert_relative_eq!(wz4, 2.0 * wz, max_relative = 1e-12);
    }

    #[test]
    fn collection_efficiency_values() {
        let iso = |na| collection_efficiency(na, EmissionPattern::Isotropic).unwrap();
        let dip = |na| collection_efficiency(na, EmissionPattern::CircularDipole).unwrap();
        assert_relative_eq!(iso(1.0), 0.5, max_relative = 1e-15);
        assert!((iso(0.28) - 0.0200).abs() < 5e-5);
        assert!((iso(0.46) - 0.0560).abs() < 1e-4);
        assert_eq!(iso(0.0), 0.0);
        assert_relative_eq!(dip(1.0), 0.5, max_relative = 1e-15);
        for (r, want) in [(iso(0.46) / iso(0.28), 2.80), (dip(0.46) / dip(0.28), 2.70)] {
            assert!((r - want).abs() < 0.02, "{r}");
        }
    }

    /// Direct numerical solid-angle integral of the dipole pattern.
    #[test]
    fn circular_dipole_matches_solid_angle_integral() {
        for na in [0.1f64, 0.28, 0.46, 0.9] {
            let tmax = na.asin();
            let n = 20_000;
            let h = tmax / n as f64;
            let mut acc = 0.0;
            for k in 0..n {
                let t = (k as f64 + 0.5) * h;
                acc += (1.0 + t.cos().powi(2)) * t.sin() * h;
            }
            let frac = TAU * acc / (8.0 * PI / 3.0 * 2.0);
            let got = collection_efficiency(na, EmissionPattern::CircularDipole).unwrap();
            assert!((got - frac).abs() < 1e-8, "{na}: {got} vs {frac}");
        }
    }

    #[test]
    fn count_ratio_examples() {
        let m = CollectionModel::metalens_preset();
        let o = CollectionModel::objective_preset();
        let r = count_ratio(&m, &o).unwrap();
        assert!((r - 0.242).abs() < 0.005, "{r}");
        assert_relative_eq!(count_ratio(&m, &m).unwrap(), 1.0);
        let half = CollectionModel { path_factor: 0.5, ..m };
        assert_relative_eq!(count_ratio(&half, &o).unwrap(), 0.5 * r, max_relative = 1e-14);
        let dead = CollectionModel { transmission: 0.0, ..o };
        assert_eq!(count_ratio(&m, &dead), Err(TweezerError::ZeroDenominator));
    }

    #[test]
    fn fictitious_field_is_linear() {
        let model = FictitiousFieldModel { beta_t_per_w: -3.0, bias_t: 0.59 * GAUSS, waist_m: 1.33e-6 };
        assert_eq!(fictitious_field(0.0, &model).field_t, 0.0);
        let a = fictitious_field(16.3e-3, &model);
        let b = fictitious_field(32.6e-3, &model);
        assert_relative_eq!(b.field_t, 2.0 * a.field_t, max_relative = 1e-15);
        assert_relative_eq!(a.gradient_t_per_m, a.field_t / 1.33e-6, max_relative = 1e-15);
    }

    #[test]
    fn beta_from_fit_reproduces_line() {
        let slope = 0.03 * GAUSS / 1e-3;
        let intercept = 0.1 * GAUSS;
        let pts: Vec<(f64, f64)> = [14.0e-3, 16.3e-3, 18.6e-3]
            .iter()
            .map(|&p| (p, intercept + slope * p))
            .collect();
        let fit = optimal_bias_linear_fit(&pts).unwrap();
        assert!(fit.slope > 0.0);
        let model = FictitiousFieldModel::from_optimal_bias_fit(&fit, 0.0, 1.33e-6);
        let bf = fictitious_field(16.3e-3, &model).field_t;
        // the optimum cancels B_F up to the fitted offset
        assert_relative_eq!(-bf + fit.intercept, intercept + slope * 16.3e-3, max_relative = 1e-9);
    }

    proptest! {
        #[test]
        fn red_detuned_always_attractive(i in 1.0..1e12f64, lambda in 800e-9..1100e-9f64) {
            let rb = AtomSpecies::rb87();
            prop_assert!(dipole_potential(i, lambda, &rb).unwrap() < 0.0);
        }

        #[test]
        fn potential_linear_in_intensity(i in 1.0..1e12f64, s in 0.1..10.0f64) {
            let rb = AtomSpecies::rb87();
            let a = dipole_potential(i, 852e-9, &rb).unwrap();
            let b = dipole_potential(s * i, 852e-9, &rb).unwrap();
            prop_assert!((b / a - s).abs() < 1e-12 * s);
        }

        #[test]
        fn collection_strictly_increasing(a in 0.0..0.99f64, d in 1e-4..0.01f64) {
            for p in [EmissionPattern::Isotropic, EmissionPattern::CircularDipole] {
                prop_assert!(collection_efficiency(a + d, p).unwrap() > collection_efficiency(a, p).unwrap());
            }
        }

        #[test]
        fn count_ratio_scale_invariant(s in 0.05..1.0f64) {
            let m = CollectionModel::metalens_preset();
            let o = CollectionModel::objective_preset();
            let ms = CollectionModel { path_factor: s, ..m };
            let os = CollectionModel { path_factor: s, ..o };
            let a = count_ratio(&m, &o).unwrap();
            let b = count_ratio(&ms, &os).unwrap();
            prop_assert!((a - b).abs() < 1e-12 * a);
        }
    }
}
