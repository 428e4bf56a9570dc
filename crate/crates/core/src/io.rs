//! CSV and JSON file formats. Floats are written with 9 significant digits;
//! readers report the 1-based file line of the first bad row.

use crate::dynamics::{CycleTiming, TelegraphTrace, TraceSource};
use crate::lens::{BrickClass, EfficiencyTable, LayoutTable, LensPrescription, NanobrickSpec, PartitionPattern};
use crate::propagation::SampledField;
use ndarray::Array2;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Schema { line: u64, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn schema(line: u64, message: impl Into<String>) -> IoError {
    IoError::Schema {
        line,
        message: message.into(),
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path).map(BufWriter::new).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path).map(BufReader::new).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    Ok(serde_json::from_reader(open(path)?)?)
}

/// `trace.csv` → `trace.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

fn reader<R: Read>(r: R, expected: &[&str]) -> Result<csv::Reader<R>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < expected.len() || header.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(schema(1, format!("expected header `{}`, found `{}`", expected.join(","), header.join(","))));
    }
    Ok(rdr)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, name: &str, line: u64) -> Result<T, IoError> {
    let s = rec.get(k).ok_or_else(|| schema(line, format!("missing column `{name}`")))?;
    s.parse().map_err(|_| schema(line, format!("`{name}` = `{s}` is not a valid number")))
}

fn finite(rec: &csv::StringRecord, k: usize, name: &str, line: u64) -> Result<f64, IoError> {
    let v: f64 = field(rec, k, name, line)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(schema(line, format!("`{name}` is not finite")))
    }
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

pub const LAYOUT_HEADER: [&str; 6] = ["x_m", "y_m", "class", "theta_rad", "len_m", "wid_m"];

pub fn write_layout_csv<W: Write>(w: W, layout: &LayoutTable) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(LAYOUT_HEADER)?;
    for b in &layout.bricks {
        wtr.write_record([
            fmt_f64(b.x_m),
            fmt_f64(b.y_m),
            b.class.label().to_string(),
            fmt_f64(b.theta_rad),
            fmt_f64(b.length_m),
            fmt_f64(b.width_m),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a layout written for `prescription`; lattice indices are recovered
/// from the positions.
pub fn read_layout_csv<R: Read>(r: R, prescription: &LensPrescription) -> Result<LayoutTable, IoError> {
    let mut rdr = reader(r, &LAYOUT_HEADER)?;
    let mut bricks = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let x_m = finite(&rec, 0, "x_m", line)?;
        let y_m = finite(&rec, 1, "y_m", line)?;
        let label: u8 = field(&rec, 2, "class", line)?;
        let class = BrickClass::from_label(label).ok_or_else(|| schema(line, format!("class must be 1 or 2, got {label}")))?;
        let theta_rad = finite(&rec, 3, "theta_rad", line)?;
        let length_m = finite(&rec, 4, "len_m", line)?;
        let width_m = finite(&rec, 5, "wid_m", line)?;
        bricks.push(NanobrickSpec {
            index: (prescription.cell_index(x_m), prescription.cell_index(y_m)),
            x_m,
            y_m,
            class,
            theta_rad,
            length_m,
            width_m,
        });
    }
    Ok(LayoutTable {
        prescription: prescription.clone(),
        pattern: PartitionPattern::Checkerboard,
        bricks,
    })
}

pub const EFFICIENCY_HEADER: [&str; 3] = ["lambda_m", "eff_class1", "eff_class2"];

pub fn write_efficiency_csv<W: Write>(w: W, table: &EfficiencyTable) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(EFFICIENCY_HEADER.iter().chain(&["res_class1", "res_class2"]))?;
    for k in 0..table.lambda_m.len() {
        wtr.write_record([
            fmt_f64(table.lambda_m[k]),
            fmt_f64(table.efficiency[0][k]),
            fmt_f64(table.efficiency[1][k]),
            fmt_f64(table.residual[0][k]),
            fmt_f64(table.residual[1][k]),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `lambda_m,eff_class1,eff_class2` with optional
/// `res_class1,res_class2` columns. Without them the bricks are taken as
/// lossless: residual = 1 − efficiency.
pub fn read_efficiency_csv<R: Read>(r: R) -> Result<EfficiencyTable, IoError> {
    let mut rdr = reader(r, &EFFICIENCY_HEADER)?;
    let has_residual = rdr.headers()?.len() >= 5;
    let mut lambda = Vec::new();
    let mut eff = [Vec::new(), Vec::new()];
    let mut res = [Vec::new(), Vec::new()];
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        lambda.push(finite(&rec, 0, "lambda_m", line)?);
        for c in 0..2 {
            let e = finite(&rec, 1 + c, EFFICIENCY_HEADER[1 + c], line)?;
            let r = if has_residual {
                finite(&rec, 3 + c, if c == 0 { "res_class1" } else { "res_class2" }, line)?
            } else {
                1.0 - e
            };
            eff[c].push(e);
            res[c].push(r);
        }
    }
    EfficiencyTable::new(lambda, eff, res).map_err(|e| IoError::Invalid(e.to_string()))
}

pub const TRACE_HEADER: [&str; 3] = ["bin_index", "t_start_s", "counts"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceMetadata {
    pub prep_s: f64,
    pub probe_s: f64,
    pub bin_s: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "ingested")]
    pub source: TraceSource,
}

fn ingested() -> TraceSource {
    TraceSource::Ingested
}

impl TraceMetadata {
    pub fn of(trace: &TelegraphTrace) -> Self {
        Self {
            prep_s: trace.timing.prep_s,
            probe_s: trace.timing.probe_s,
            bin_s: trace.timing.bin_s,
            seed: trace.seed,
            source: trace.source,
        }
    }

    pub fn timing(&self) -> CycleTiming {
        CycleTiming {
            prep_s: self.prep_s,
            probe_s: self.probe_s,
            bin_s: self.bin_s,
        }
    }
}

pub fn write_trace_csv<W: Write>(w: W, trace: &TelegraphTrace) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(TRACE_HEADER)?;
    for (k, c) in trace.counts.iter().enumerate() {
        wtr.write_record([k.to_string(), fmt_f64(trace.bin_start(k)), c.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads and validates a trace: consecutive bin indices from 0, start times
/// matching the cycle timing, non-negative integer counts. The result is
/// tagged as ingested.
pub fn read_trace_csv<R: Read>(r: R, meta: &TraceMetadata) -> Result<TelegraphTrace, IoError> {
    let timing = meta.timing();
    timing.validate().map_err(|e| IoError::Invalid(e.to_string()))?;
    let mut rdr = reader(r, &TRACE_HEADER)?;
    let mut counts = Vec::new();
    let tol = 1e-3 * timing.bin_s;
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let index: u64 = field(&rec, 0, "bin_index", line)?;
        if index != counts.len() as u64 {
            return Err(schema(line, format!("bin_index {index}, expected {}", counts.len())));
        }
        let t = finite(&rec, 1, "t_start_s", line)?;
        let expected = timing.bin_start(counts.len());
        if (t - expected).abs() > tol.max(1e-9 * expected.abs()) {
            return Err(schema(line, format!("t_start_s {t} does not match cycle timing ({expected})")));
        }
        let raw = rec.get(2).ok_or_else(|| schema(line, "missing column `counts`"))?;
        let c: i64 = raw
            .parse()
            .map_err(|_| schema(line, format!("counts = `{raw}` is not an integer")))?;
        if c < 0 {
            return Err(schema(line, format!("negative count {c}")));
        }
        counts.push(c as u64);
    }
    TelegraphTrace::new(timing, counts, meta.seed, TraceSource::Ingested).map_err(|e| IoError::Invalid(e.to_string()))
}

pub fn save_trace(path: &Path, trace: &TelegraphTrace) -> Result<(), IoError> {
    let mut w = create(path)?;
    write_trace_csv(&mut w, trace)?;
    w.flush()?;
    write_json(&sidecar_path(path), &TraceMetadata::of(trace))
}

/// Loads a trace and its `.meta.json` sidecar.
pub fn load_trace(path: &Path) -> Result<TelegraphTrace, IoError> {
    let meta: TraceMetadata = read_json(&sidecar_path(path))?;
    read_trace_csv(open(path)?, &meta)
}

/// Two-column numeric CSV with the given header names.
pub fn write_columns<W: Write>(w: W, header: [&str; 2], a: &[f64], b: &[f64]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header)?;
    for (x, y) in a.iter().zip(b) {
        wtr.write_record([fmt_f64(*x), fmt_f64(*y)])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_columns<R: Read>(r: R, header: [&str; 2]) -> Result<(Vec<f64>, Vec<f64>), IoError> {
    let mut rdr = reader(r, &header)?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        a.push(finite(&rec, 0, header[0], line)?);
        b.push(finite(&rec, 1, header[1], line)?);
    }
    Ok((a, b))
}

pub const FOCAL_STACK_HEADER: [&str; 2] = ["z_m", "on_axis_intensity"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMetadata {
    pub nx: usize,
    pub ny: usize,
    pub pitch_m: f64,
    pub lambda_m: f64,
    pub z_m: f64,
}

/// Row-major `(re, im)` dump.
pub fn write_field_csv<W: Write>(w: W, field: &SampledField) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["re", "im"])?;
    for v in field.data.iter() {
        wtr.write_record([fmt_f64(v.re), fmt_f64(v.im)])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_field_csv<R: Read>(r: R, meta: &FieldMetadata) -> Result<SampledField, IoError> {
    let (re, im) = read_columns(r, ["re", "im"])?;
    if re.len() != meta.nx * meta.ny {
        return Err(IoError::Invalid(format!("{} samples for a {}×{} grid", re.len(), meta.nx, meta.ny)));
    }
    let data: Vec<Complex64> = re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect();
    let data = Array2::from_shape_vec((meta.ny, meta.nx), data).map_err(|e| IoError::Invalid(e.to_string()))?;
    SampledField::new(data, meta.pitch_m, meta.lambda_m, meta.z_m).map_err(|e| IoError::Invalid(e.to_string()))
}

pub fn field_metadata(field: &SampledField) -> FieldMetadata {
    FieldMetadata {
        nx: field.nx(),
        ny: field.ny(),
        pitch_m: field.pitch_m,
        lambda_m: field.wavelength_m,
        z_m: field.z_m,
    }
}
