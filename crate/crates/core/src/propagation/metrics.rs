use serde::{Deserialize, Serialize};

use super::gaussian::gaussian_reference_zr;
use super::propagate::FocalStack;
use super::{PropagationError, SampledField};

/// Focal-spot figures of merit. Lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalMetrics {
    /// 1/e² intensity radius at best focus.
    pub waist_m: f64,
    /// Half of the axial distance between the half-peak points.
    pub rayleigh_length_m: f64,
    pub focal_z_m: f64,
    /// First-ring peak over main peak, from the radial profile at best focus.
    pub side_lobe_ratio: f64,
    /// Power through the filter aperture at best focus over incident power.
    pub focusing_efficiency: f64,
    pub gaussian_reference_zr_m: f64,
    pub peak_on_axis_intensity: f64,
    pub wavelength_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsOptions {
    /// Diameter of the filter aperture used for the focusing efficiency.
    pub aperture_diameter_m: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            aperture_diameter_m: 5e-6,
        }
    }
}

fn catmull_rom(p0: f64, p1: f64, p2: f64, p3: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * (2.0 * p1
        + (p2 - p0) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
        + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3)
}

/// Fractional position in `[k, k+1]` where the cubic through the samples
/// crosses `level`. `left` supplies the sample before index 0 (mirror images
/// for profiles that start on a symmetry axis).
fn cubic_crossing(samples: &[f64], k: usize, level: f64, left: Option<f64>) -> f64 {
    let n = samples.len();
    let p0 = if k == 0 {
        left.unwrap_or(samples[0])
    } else {
        samples[k - 1]
    };
    let p1 = samples[k];
    let p2 = samples[k + 1];
    let p3 = if k + 2 < n { samples[k + 2] } else { p2 };
    let f = |t: f64| catmull_rom(p0, p1, p2, p3, t) - level;
    let (mut lo, mut hi) = (0.0, 1.0);
    let f_lo = f(lo);
    if f_lo * f(hi) > 0.0 {
        // cubic overshoot; fall back to linear
        return ((p1 - level) / (p1 - p2)).clamp(0.0, 1.0);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) * f_lo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Radius where `cut` (samples at `k·pitch` from the axis) first drops below
/// `fraction` of its axial value.
fn cut_radius(cut: &[f64], pitch: f64, fraction: f64) -> Option<f64> {
    let level = cut[0] * fraction;
    let k = cut.iter().position(|&v| v < level)?;
    if k == 0 {
        return None;
    }
    let t = cubic_crossing(cut, k - 1, level, cut.get(1).copied());
    Some(((k - 1) as f64 + t) * pitch)
}

/// 1/e² intensity radius, averaged over the four half-axis cuts through the axis.
pub fn waist_radius(field: &SampledField) -> Result<f64, PropagationError> {
    let cuts = field.axis_cuts();
    let mut acc = 0.0;
    for cut in &cuts {
        if cut.len() < 2 || cut[0] <= 0.0 {
            return Err(PropagationError::WaistOutsideWindow);
        }
        acc += cut_radius(cut, field.pitch_m, (-2.0f64).exp())
            .ok_or(PropagationError::WaistOutsideWindow)?;
    }
    Ok(acc / cuts.len() as f64)
}

/// First local maximum after the first local minimum, relative to the axial value.
pub fn side_lobe_ratio(profile: &[f64]) -> f64 {
    if profile.len() < 3 || profile[0] <= 0.0 {
        return 0.0;
    }
    let Some(min) = (1..profile.len() - 1).find(|&k| profile[k + 1] > profile[k]) else {
        return 0.0;
    };
    let Some(max) = (min + 1..profile.len() - 1).find(|&k| profile[k + 1] < profile[k]) else {
        return 0.0;
    };
    (profile[max] / profile[0]).clamp(0.0, 1.0 - f64::EPSILON)
}

pub fn focal_metrics(stack: &FocalStack) -> Result<FocalMetrics, PropagationError> {
    focal_metrics_with(stack, &MetricsOptions::default())
}

pub fn focal_metrics_with(
    stack: &FocalStack,
    opts: &MetricsOptions,
) -> Result<FocalMetrics, PropagationError> {
    let n = stack.planes.len();
    if n < 3 {
        return Err(PropagationError::InvalidScan(format!(
            "stack has {n} planes"
        )));
    }
    let axial: Vec<f64> = stack.planes.iter().map(|p| p.on_axis_intensity).collect();
    let z: Vec<f64> = stack.planes.iter().map(|p| p.z_m).collect();
    let m = axial
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap();
    if m == 0 || m == n - 1 {
        return Err(PropagationError::FocusAtBoundary { z_m: z[m] });
    }
    let dz = z[1] - z[0];

    // parabolic vertex through the three samples around the maximum
    let (a, b, c) = (axial[m - 1], axial[m], axial[m + 1]);
    let denom = a - 2.0 * b + c;
    let (offset, peak) = if denom < 0.0 {
        let o = 0.5 * (a - c) / denom;
        (o, b - 0.25 * (a - c) * o)
    } else {
        (0.0, b)
    };
    let focal_z_m = z[m] + offset * dz;

    let half = 0.5 * peak;
    let left = (0..m).rev().find(|&k| axial[k] < half);
    let right = (m + 1..n).find(|&k| axial[k] < half);
    let (Some(l), Some(r)) = (left, right) else {
        return Err(PropagationError::MissingHalfCrossing);
    };
    // the left crossing lies in [l, l+1] with the profile rising
    let reversed: Vec<f64> = axial[l..=m].iter().rev().copied().collect();
    let tl = cubic_crossing(&reversed, reversed.len() - 2, half, None);
    let z_left = z[l] + (1.0 - tl) * dz;
    let tr = cubic_crossing(&axial, r - 1, half, None);
    let z_right = z[r - 1] + tr * dz;
    let rayleigh_length_m = 0.5 * (z_right - z_left);

    let focus = &stack.planes[m].field;
    let waist_m = waist_radius(focus)?;
    let side_lobe_ratio = side_lobe_ratio(&focus.radial_profile());
    let focusing_efficiency = if stack.incident_power > 0.0 {
        (focus.power_within(0.5 * opts.aperture_diameter_m) / stack.incident_power).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(FocalMetrics {
        waist_m,
        rayleigh_length_m,
        focal_z_m,
        side_lobe_ratio,
        focusing_efficiency,
        gaussian_reference_zr_m: gaussian_reference_zr(waist_m, stack.wavelength_m),
        peak_on_axis_intensity: peak,
        wavelength_m: stack.wavelength_m,
    })
}
