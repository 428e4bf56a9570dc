use crate::config::RunConfig;
use crate::error::CliError;
use metalens::io::write_json;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub wall_clock_s: f64,
    pub threads: usize,
    pub crate_version: String,
    /// Simulation grid side and pitch, where a grid was used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_pitch_m: Option<f64>,
}

/// Top-level JSON record of one command run. Only `provenance` varies between
/// runs of the same config; `payload` is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle<T> {
    /// `metalens.<command>/v<version>`
    pub schema: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub payload: T,
    pub provenance: Provenance,
}

pub struct Run {
    pub command: &'static str,
    pub config: RunConfig,
    started: Instant,
    pub grid: Option<(usize, f64)>,
}

impl Run {
    pub fn new(command: &'static str, config: RunConfig) -> Self {
        Self {
            command,
            config,
            started: Instant::now(),
            grid: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.config.seed()
    }

    pub fn bundle<T>(&self, payload: T) -> Result<ResultBundle<T>, CliError> {
        Ok(ResultBundle {
            schema: format!("metalens.{}/v{SCHEMA_VERSION}", self.command),
            command: self.command.to_string(),
            seed: self.seed(),
            config_hash: self.config.hash()?,
            config: self.config.clone(),
            payload,
            provenance: Provenance {
                wall_clock_s: self.started.elapsed().as_secs_f64(),
                threads: rayon::current_num_threads(),
                crate_version: env!("CARGO_PKG_VERSION").to_string(),
                grid_n: self.grid.map(|g| g.0),
                grid_pitch_m: self.grid.map(|g| g.1),
            },
        })
    }

    /// Writes `<command>.json` and the effective config as `<command>.config.toml`.
    pub fn finish<T: Serialize>(&self, out: &Path, payload: T) -> Result<(), CliError> {
        let bundle = self.bundle(payload)?;
        write_json(&out.join(format!("{}.json", self.command)), &bundle).map_err(CliError::output)?;
        std::fs::write(out.join(format!("{}.config.toml", self.command)), self.config.to_toml()?)
            .map_err(|e| CliError::Other(format!("writing config echo: {e}")))?;
        log::info!("{} finished in {:.2} s", self.command, bundle.provenance.wall_clock_s);
        Ok(())
    }
}
