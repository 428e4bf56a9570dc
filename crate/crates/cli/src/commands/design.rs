use super::load_table;
use crate::bundle::Run;
use crate::config::RunConfig;
use crate::error::CliError;
use metalens::io::{create, sidecar_path, write_efficiency_csv, write_json, write_layout_csv, IoError};
use metalens::lens::{generate_layout, modulation_efficiency, BrickClass, LayoutSummary, PartitionPattern};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Serialize)]
struct DesignPayload {
    summary: LayoutSummary,
    pattern: PartitionPattern,
    warnings: Vec<String>,
    /// Class-1 over class-2 efficiency at `lambda1_m`.
    selectivity_lambda1: f64,
    class2_peak_m: f64,
    layout_csv: String,
    efficiency_csv: String,
}

pub fn design(config: RunConfig, out: &Path) -> Result<(), CliError> {
    let run = Run::new("design", config);
    let cfg = &run.config.design;
    let presc = cfg.prescription();
    let warnings = presc.validate()?;
    let table = load_table(cfg.efficiency_csv.as_deref(), "design.efficiency_csv")?;
    let layout = generate_layout(&presc)?;

    let layout_path = out.join("layout.csv");
    let mut w = create(&layout_path).map_err(CliError::output)?;
    write_layout_csv(&mut w, &layout).map_err(CliError::output)?;
    w.flush().map_err(|e| CliError::output(IoError::Io(e)))?;
    write_json(&sidecar_path(&layout_path), &presc).map_err(CliError::output)?;

    let mut w = create(&out.join("efficiency.csv")).map_err(CliError::output)?;
    write_efficiency_csv(&mut w, &table).map_err(CliError::output)?;
    w.flush().map_err(|e| CliError::output(IoError::Io(e)))?;

    let selectivity_lambda1 = modulation_efficiency(BrickClass::Class1, presc.lambda1_m, &table)?
        / modulation_efficiency(BrickClass::Class2, presc.lambda1_m, &table)?;
    let summary = layout.summary();
    log::info!(
        "{} bricks ({} + {}), NA {:.3}",
        summary.site_count,
        summary.class1_count,
        summary.class2_count,
        summary.numerical_aperture
    );
    run.finish(
        out,
        DesignPayload {
            summary,
            pattern: layout.pattern,
            warnings,
            selectivity_lambda1,
            class2_peak_m: table.peak_wavelength(BrickClass::Class2),
            layout_csv: "layout.csv".into(),
            efficiency_csv: "efficiency.csv".into(),
        },
    )
}
