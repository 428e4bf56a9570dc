use super::{load_table, write_profile};
use crate::bundle::Run;
use crate::config::{require_file, FocusSource, RunConfig};
use crate::error::CliError;
use metalens::io::{open, read_json, read_layout_csv, sidecar_path, FOCAL_STACK_HEADER};
use metalens::lens::{LayoutTable, LensPrescription};
use metalens::propagation::{
    angular_spectrum_propagate, focal_metrics_with, gaussian_reference_zr, ideal_lens_field, scan_axial,
    synthesize_aperture_field, unmodulated_background, FocalMetrics, FocalStack, GaussianBeam, GridSpec,
    MetricsOptions, SampledField,
};
use serde::Serialize;
use std::path::Path;

/// Half-width of the radial profile written around the focus.
const RADIAL_WINDOW_M: f64 = 12e-6;
const SELF_TEST_TOLERANCE: f64 = 0.02;

#[derive(Debug, Serialize)]
struct FocusResult {
    wavelength_m: f64,
    metrics: FocalMetrics,
    /// `0.61 λ / NA`
    #[serde(skip_serializing_if = "Option::is_none")]
    airy_first_zero_m: Option<f64>,
    /// Unconverted on-axis intensity at the focus over the converted peak.
    #[serde(skip_serializing_if = "Option::is_none")]
    background_ratio: Option<f64>,
    axial_csv: String,
    radial_csv: String,
}

#[derive(Debug, Serialize)]
struct SelfTest {
    rayleigh_length_m: f64,
    expected_m: f64,
    relative_error: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct FocusPayload {
    source: FocusSource,
    foci: Vec<FocusResult>,
    /// Focal z of the second wavelength minus the first.
    #[serde(skip_serializing_if = "Option::is_none")]
    axial_offset_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    self_test: Option<SelfTest>,
}

fn tag(wavelength_m: f64) -> String {
    format!("{:.0}nm", wavelength_m * 1e9)
}

fn write_profiles(
    out: &Path,
    stack: &FocalStack,
    focus_plane: &SampledField,
    wavelength_m: f64,
) -> Result<(String, String), CliError> {
    let (z, i): (Vec<f64>, Vec<f64>) = stack.on_axis_profile().into_iter().unzip();
    let axial = write_profile(out, format!("axial_{}.csv", tag(wavelength_m)), FOCAL_STACK_HEADER, &z, &i)?;
    let radial_i = focus_plane.radial_profile();
    let r: Vec<f64> = (0..radial_i.len()).map(|k| k as f64 * focus_plane.pitch_m).collect();
    let radial = write_profile(out, format!("radial_{}.csv", tag(wavelength_m)), ["r_m", "intensity"], &r, &radial_i)?;
    Ok((axial, radial))
}

fn load_layout(path: &Path) -> Result<LayoutTable, CliError> {
    require_file(path, "focus.layout")?;
    let meta = sidecar_path(path);
    require_file(&meta, "focus.layout sidecar")?;
    let presc: LensPrescription = read_json(&meta)?;
    Ok(read_layout_csv(open(path)?, &presc)?)
}

fn gaussian_self_test(run: &mut Run, out: &Path) -> Result<FocusPayload, CliError> {
    let cfg = &run.config.focus;
    let g = cfg.gaussian;
    let beam = GaussianBeam::new(g.waist_m, g.wavelength_m, 0.0);
    let zr = beam.rayleigh_length();
    let (n, pitch) = (256, g.waist_m / 16.0);
    run.grid = Some((n, pitch));
    let stack = FocalStack::from_gaussian_beam(&beam, -3.0 * zr, 3.0 * zr, cfg.planes, n, pitch)?;
    let metrics = focal_metrics_with(&stack, &MetricsOptions { aperture_diameter_m: cfg.filter_aperture_m })?;
    let (axial_csv, radial_csv) = write_profiles(out, &stack, &beam.sample(n, pitch, 0.0), g.wavelength_m)?;
    let expected = gaussian_reference_zr(g.waist_m, g.wavelength_m);
    let relative_error = (metrics.rayleigh_length_m / expected - 1.0).abs();
    Ok(FocusPayload {
        source: FocusSource::GaussianSelfTest,
        foci: vec![FocusResult {
            wavelength_m: g.wavelength_m,
            metrics,
            airy_first_zero_m: None,
            background_ratio: None,
            axial_csv,
            radial_csv,
        }],
        axial_offset_m: None,
        self_test: Some(SelfTest {
            rayleigh_length_m: metrics.rayleigh_length_m,
            expected_m: expected,
            relative_error,
            pass: relative_error < SELF_TEST_TOLERANCE,
        }),
    })
}

fn lens_focus(run: &mut Run, out: &Path) -> Result<FocusPayload, CliError> {
    let cfg = run.config.focus.clone();
    let layout = match cfg.source {
        FocusSource::Layout => {
            let path = cfg
                .layout
                .as_deref()
                .ok_or_else(|| CliError::Config("focus.layout is required for source = \"layout\"".into()))?;
            Some(load_layout(path)?)
        }
        _ => None,
    };
    let presc = match &layout {
        Some(l) => l.prescription.clone(),
        None => cfg.prescription.clone().unwrap_or_else(|| cfg.preset.prescription()),
    };
    for w in presc.validate()? {
        log::warn!("{w}");
    }
    let table = load_table(cfg.efficiency_csv.as_deref(), "focus.efficiency_csv")?;
    let wavelengths = if cfg.wavelengths_m.is_empty() {
        vec![presc.lambda1_m, presc.lambda2_m]
    } else {
        cfg.wavelengths_m.clone()
    };
    let grid = GridSpec::for_aperture(presc.diameter_m, cfg.grid_pitch_m);
    run.grid = Some((grid.n, grid.pitch_m));
    let center = cfg.scan_center_m.unwrap_or(presc.focal_length_m);
    let opts = MetricsOptions { aperture_diameter_m: cfg.filter_aperture_m };
    let illumination = presc.illumination_profile();

    let mut foci = Vec::new();
    for &lambda in &wavelengths {
        log::info!("focusing {} on a {}² grid", tag(lambda), grid.n);
        let (field, incident, background_ratio) = match &layout {
            Some(l) => {
                let a = synthesize_aperture_field(l, &table, lambda, illumination, &grid)?;
                let bg = unmodulated_background(l, &table, lambda)?.ratio;
                (a.converted, a.incident_power, Some(bg))
            }
            None => {
                let f = ideal_lens_field(presc.focal_length_m, presc.diameter_m, lambda, illumination, &grid)?;
                let p = f.power();
                (f, p, None)
            }
        };
        let stack = scan_axial(&field, center - cfg.scan_half_width_m, center + cfg.scan_half_width_m, cfg.planes)?
            .with_incident_power(incident);
        let metrics = focal_metrics_with(&stack, &opts)?;
        let plane = angular_spectrum_propagate(&field, metrics.focal_z_m).crop(RADIAL_WINDOW_M);
        let (axial_csv, radial_csv) = write_profiles(out, &stack, &plane, lambda)?;
        foci.push(FocusResult {
            wavelength_m: lambda,
            metrics,
            airy_first_zero_m: Some(0.61 * lambda / presc.numerical_aperture()),
            background_ratio,
            axial_csv,
            radial_csv,
        });
    }
    let axial_offset_m = (foci.len() >= 2).then(|| foci[1].metrics.focal_z_m - foci[0].metrics.focal_z_m);
    Ok(FocusPayload {
        source: cfg.source,
        foci,
        axial_offset_m,
        self_test: None,
    })
}

pub fn focus(config: RunConfig, out: &Path) -> Result<(), CliError> {
    let mut run = Run::new("focus", config);
    let cfg = &run.config.focus;
    if cfg.planes < 3 || !(cfg.scan_half_width_m > 0.0) || !(cfg.filter_aperture_m > 0.0) {
        return Err(CliError::Config(
            "focus needs planes ≥ 3, scan_half_width_m > 0 and filter_aperture_m > 0".into(),
        ));
    }
    let payload = match cfg.source {
        FocusSource::GaussianSelfTest => gaussian_self_test(&mut run, out)?,
        FocusSource::Ideal | FocusSource::Layout => lens_focus(&mut run, out)?,
    };
    let failed = payload.self_test.as_ref().map(|t| !t.pass).unwrap_or(false);
    let detail = payload
        .self_test
        .as_ref()
        .map(|t| format!("Gaussian self-test Z_R error {:.2e} exceeds {SELF_TEST_TOLERANCE}", t.relative_error));
    run.finish(out, payload)?;
    match detail {
        Some(d) if failed => Err(CliError::Numerical(d)),
        _ => Ok(()),
    }
}
