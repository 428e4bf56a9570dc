//! Run configuration. One TOML file with an optional table per subcommand;
//! unknown keys anywhere are rejected.

use crate::error::CliError;
use metalens::dynamics::{BiasSweepConfig, CycleTiming, DynamicsParams};
use metalens::lens::LensPrescription;
use metalens::tweezer::{AtomSpecies, CollectionModel, PotentialModel, TrapInputs};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub design: DesignConfig,
    pub focus: FocusConfig,
    pub trap: TrapConfig,
    pub mc: McConfig,
    pub fit: FitConfig,
    pub ingest: IngestConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LensPreset {
    /// 200 µm aperture at NA 0.46.
    #[default]
    Desk,
    /// 2 mm aperture at NA 0.46.
    Full,
}

impl LensPreset {
    pub fn prescription(self) -> LensPrescription {
        match self {
            LensPreset::Desk => LensPrescription::desk_scale(),
            LensPreset::Full => LensPrescription::full_scale(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub preset: LensPreset,
    /// Overrides `preset` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prescription: Option<LensPrescription>,
    /// Efficiency table CSV; the bundled ⁸⁷Rb table otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub efficiency_csv: Option<PathBuf>,
}

impl DesignConfig {
    pub fn prescription(&self) -> LensPrescription {
        self.prescription.clone().unwrap_or_else(|| self.preset.prescription())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FocusSource {
    /// Nanobrick layout written by `design`.
    Layout,
    /// Continuous hyperbolic phase with unit efficiency.
    #[default]
    Ideal,
    /// Closed-form Gaussian beam, checks the focal-metric extraction.
    GaussianSelfTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSelfTest {
    pub waist_m: f64,
    pub wavelength_m: f64,
}

impl Default for GaussianSelfTest {
    fn default() -> Self {
        Self {
            waist_m: 1.33e-6,
            wavelength_m: 852e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FocusConfig {
    pub source: FocusSource,
    /// Layout CSV with its `.meta.json` prescription sidecar (source = "layout").
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<PathBuf>,
    /// Lens for source = "ideal"; defaults to the desk-scale lens.
    pub preset: LensPreset,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prescription: Option<LensPrescription>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub efficiency_csv: Option<PathBuf>,
    /// Wavelengths to focus; both design wavelengths when empty.
    pub wavelengths_m: Vec<f64>,
    pub grid_pitch_m: f64,
    /// Scan centre; the focal length when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan_center_m: Option<f64>,
    pub scan_half_width_m: f64,
    pub planes: usize,
    /// Diameter of the filter aperture defining the focusing efficiency.
    pub filter_aperture_m: f64,
    pub gaussian: GaussianSelfTest,
}

impl Default for FocusConfig {
    fn default() -> Self {
        Self {
            source: FocusSource::default(),
            layout: None,
            preset: LensPreset::Desk,
            prescription: None,
            efficiency_csv: None,
            wavelengths_m: Vec::new(),
            grid_pitch_m: 0.2e-6,
            scan_center_m: None,
            scan_half_width_m: 6e-6,
            planes: 49,
            filter_aperture_m: 5e-6,
            gaussian: GaussianSelfTest::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapConfig {
    pub inputs: TrapInputs,
    pub species: AtomSpecies,
    pub potential: PotentialModel,
    pub collection: CollectionModel,
    /// Reference detection chain for the count ratio.
    pub reference: CollectionModel,
    pub compare: bool,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            inputs: TrapInputs::measured_metalens(),
            species: AtomSpecies::rb87(),
            potential: PotentialModel::default(),
            collection: CollectionModel::metalens_preset(),
            reference: CollectionModel::objective_preset(),
            compare: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsPreset {
    #[default]
    Metalens,
    Objective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Trap powers, one sweep each.
    pub powers_w: Vec<f64>,
    pub model: BiasSweepConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            powers_w: vec![14.0e-3, 16.3e-3, 18.6e-3],
            model: BiasSweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub preset: DynamicsPreset,
    /// Overrides `preset` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<DynamicsParams>,
    pub timing: CycleTiming,
    pub cycles: usize,
    pub traces: usize,
    /// 0 gives one histogram bin per integer count.
    pub histogram_bins: usize,
    pub write_traces: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            preset: DynamicsPreset::Metalens,
            params: None,
            timing: CycleTiming::default(),
            cycles: 2500,
            traces: 1,
            histogram_bins: 0,
            write_traces: true,
            sweep: None,
        }
    }
}

impl McConfig {
    pub fn params(&self) -> DynamicsParams {
        self.params.unwrap_or(match self.preset {
            DynamicsPreset::Metalens => DynamicsParams::metalens_preset(),
            DynamicsPreset::Objective => DynamicsParams::objective_preset(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    #[default]
    Exponential,
    Erf,
    Linear,
    BiasLifetime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub model: FitModel,
    /// Two-column CSV of (x, y).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    pub columns: [String; 2],
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            model: FitModel::default(),
            data: None,
            columns: ["x".into(), "y".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// Cycle timing for traces without a `.meta.json` sidecar.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<CycleTiming>,
    /// Prescription for layouts without a sidecar.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prescription: Option<LensPrescription>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub columns: Option<[String; 2]>,
    /// Histogram bins for ingested traces; 0 gives one per integer count.
    pub histogram_bins: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// The configuration as TOML; loading it back gives the same config.
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Other(format!("serializing config: {e}")))
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> Result<String, CliError> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}

/// Errors unless `path` names an existing file.
pub fn require_file(path: &Path, key: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{key} = {}: no such file", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[mc]\ncycle = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[mc.params]\nload_rate_s = 1\nlifetime_s = 1\natom_rate_s = 1\nbackground_rate_s = 1\nextra = 2").is_err());
    }

    #[test]
    fn toml_round_trip_preserves_config_and_hash() {
        let mut c = RunConfig::default();
        c.seed = Some(9);
        c.mc.sweep = Some(SweepConfig::default());
        c.mc.params = Some(DynamicsParams {
            lifetime_s: f64::INFINITY,
            ..DynamicsParams::metalens_preset()
        });
        c.design.prescription = Some(LensPrescription::desk_scale());
        let back: RunConfig = toml::from_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
        assert_ne!(RunConfig::default().hash().unwrap(), c.hash().unwrap());
    }
}
