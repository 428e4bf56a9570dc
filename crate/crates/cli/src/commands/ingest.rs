use crate::analysis::{analyse_trace, TraceAnalysis};
use crate::bundle::Run;
use crate::config::{require_file, RunConfig};
use crate::error::CliError;
use crate::Schema;
use metalens::io::{
    open, read_columns, read_efficiency_csv, read_json, read_layout_csv, read_trace_csv, sidecar_path, TraceMetadata,
};
use metalens::lens::{BrickClass, LayoutSummary, LensPrescription};
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Serialize)]
#[serde(tag = "schema", rename_all = "snake_case")]
enum IngestPayload {
    Trace {
        path: String,
        timing: TraceMetadata,
        analysis: TraceAnalysis,
    },
    Layout {
        path: String,
        summary: LayoutSummary,
    },
    Efficiency {
        path: String,
        samples: usize,
        range_m: (f64, f64),
        class1_peak_m: f64,
        class2_peak_m: f64,
    },
    Columns {
        path: String,
        columns: [String; 2],
        points: usize,
    },
}

fn sidecar_or<T: serde::de::DeserializeOwned>(path: &Path, fallback: Option<T>, key: &str) -> Result<T, CliError> {
    let meta = sidecar_path(path);
    if meta.is_file() {
        return Ok(read_json(&meta)?);
    }
    fallback.ok_or_else(|| {
        CliError::Input(format!(
            "{}: no sidecar {} and no [ingest.{key}] in the config",
            path.display(),
            meta.display()
        ))
    })
}

pub fn ingest(config: RunConfig, out: &Path, schema: Schema, path: &Path) -> Result<(), CliError> {
    let run = Run::new("ingest", config);
    let cfg = &run.config.ingest;
    require_file(path, "ingest path")?;
    let shown = path.display().to_string();
    let payload = match schema {
        Schema::Trace => {
            let fallback = cfg.timing.map(|t| TraceMetadata {
                prep_s: t.prep_s,
                probe_s: t.probe_s,
                bin_s: t.bin_s,
                seed: None,
                source: metalens::dynamics::TraceSource::Ingested,
            });
            let meta: TraceMetadata = sidecar_or(path, fallback, "timing")?;
            let trace = read_trace_csv(open(path)?, &meta)?;
            let (analysis, _) = analyse_trace(&trace, cfg.histogram_bins)?;
            IngestPayload::Trace {
                path: shown,
                timing: meta,
                analysis,
            }
        }
        Schema::Layout => {
            let presc: LensPrescription = sidecar_or(path, cfg.prescription.clone(), "prescription")?;
            let layout = read_layout_csv(open(path)?, &presc)?;
            IngestPayload::Layout {
                path: shown,
                summary: layout.summary(),
            }
        }
        Schema::Efficiency => {
            let table = read_efficiency_csv(open(path)?)?;
            table.validate().map_err(|e| CliError::Input(format!("{shown}: {e}")))?;
            IngestPayload::Efficiency {
                path: shown,
                samples: table.lambda_m.len(),
                range_m: table.range(),
                class1_peak_m: table.peak_wavelength(BrickClass::Class1),
                class2_peak_m: table.peak_wavelength(BrickClass::Class2),
            }
        }
        Schema::Columns => {
            let columns = cfg.columns.clone().unwrap_or_else(|| ["x".into(), "y".into()]);
            let (x, _) = read_columns(open(path)?, [columns[0].as_str(), columns[1].as_str()])?;
            IngestPayload::Columns {
                path: shown,
                columns,
                points: x.len(),
            }
        }
    };
    run.finish(out, payload)
}
