use crate::bundle::Run;
use crate::config::RunConfig;
use crate::error::CliError;
use metalens::propagation::gaussian_reference_zr;
use metalens::tweezer::{count_ratio, trap_parameters, TrapParameters};
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Serialize)]
struct Detection {
    collection_efficiency: f64,
    /// η · t · ζ · path factor
    detection_fraction: f64,
}

#[derive(Debug, Serialize)]
struct TrapPayload {
    trap: TrapParameters,
    /// `π w₀² / λ` for the configured waist.
    gaussian_reference_zr_m: f64,
    collection: Detection,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<Detection>,
    /// Collection over reference detected counts.
    #[serde(skip_serializing_if = "Option::is_none")]
    count_ratio: Option<f64>,
}

pub fn trap(config: RunConfig, out: &Path) -> Result<(), CliError> {
    let run = Run::new("trap", config);
    let cfg = &run.config.trap;
    let trap = trap_parameters(&cfg.inputs, &cfg.species, cfg.potential)?;
    let detection = |m: &metalens::tweezer::CollectionModel| -> Result<Detection, CliError> {
        Ok(Detection {
            collection_efficiency: m.efficiency()?,
            detection_fraction: m.detection_fraction()?,
        })
    };
    let (reference, ratio) = if cfg.compare {
        (Some(detection(&cfg.reference)?), Some(count_ratio(&cfg.collection, &cfg.reference)?))
    } else {
        (None, None)
    };
    log::info!("trap depth {:.3} mK", trap.depth_mk);
    run.finish(
        out,
        TrapPayload {
            trap,
            gaussian_reference_zr_m: gaussian_reference_zr(cfg.inputs.waist_m, cfg.inputs.wavelength_m),
            collection: detection(&cfg.collection)?,
            reference,
            count_ratio: ratio,
        },
    )
}
