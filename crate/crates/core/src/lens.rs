//! Dual-wavelength geometric-phase metalens layout.
//!
//! Every lattice site inside the aperture carries one nanobrick. Sites are
//! two-colored in a checkerboard: class 1 bricks address `lambda1_m` and
//! class 2 bricks address `lambda2_m`. A brick's rotation is half the
//! hyperbolic lens phase for its class wavelength, reduced mod π.
//!
//! The lens phase is `φ = 2π/λ·(f − √(x² + y² + f²))`, the equal-optical-path
//! profile for a focus at distance `f`. Note the `+f²` under the radical: the
//! `x² + y² − f²` form is negative near the axis and cannot focus.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("invalid prescription: {0}")]
    InvalidPrescription(String),
    #[error("lattice pitch must be positive, got {0} m")]
    NonPositivePitch(f64),
    #[error("aperture diameter {diameter_m} m exceeds the substrate side {substrate_m} m")]
    ApertureExceedsSubstrate { diameter_m: f64, substrate_m: f64 },
    #[error("wavelength {lambda_m} m outside the efficiency table range [{min_m}, {max_m}] m")]
    WavelengthOutOfRange { lambda_m: f64, min_m: f64, max_m: f64 },
    #[error("invalid efficiency table: {0}")]
    InvalidTable(String),
}

/// Illumination profile across the aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Illumination {
    FlatTop,
    /// Gaussian amplitude `exp(−r²/w²)` with 1/e² intensity radius `w`.
    Gaussian { radius_m: f64 },
}

impl Illumination {
    /// Field amplitude at radius `r` (1 on axis).
    pub fn amplitude(&self, r: f64) -> f64 {
        match *self {
            Illumination::FlatTop => 1.0,
            Illumination::Gaussian { radius_m } => (-(r * r) / (radius_m * radius_m)).exp(),
        }
    }
}

/// Where the lens center sits relative to the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeOrigin {
    /// A site sits on the lens axis; sites at `(i·p, j·p)`.
    #[default]
    Site,
    /// The axis sits at a cell corner; sites at `((i+½)·p, (j+½)·p)`.
    Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BrickClass {
    /// Brick tuned to `lambda1_m`.
    Class1,
    /// Brick tuned to `lambda2_m`.
    Class2,
}

impl BrickClass {
    pub fn label(self) -> u8 {
        match self {
            BrickClass::Class1 => 1,
            BrickClass::Class2 => 2,
        }
    }

    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            1 => Some(BrickClass::Class1),
            2 => Some(BrickClass::Class2),
            _ => None,
        }
    }

    fn index(self) -> usize {
        self.label() as usize - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionPattern {
    /// Two-coloring by `(i + j) mod 2`; class 1 on even sites.
    #[default]
    Checkerboard,
}

fn default_substrate() -> f64 {
    10e-3
}

fn default_class1_footprint() -> [f64; 2] {
    [250e-9, 140e-9]
}

fn default_class2_footprint() -> [f64; 2] {
    [160e-9, 110e-9]
}

/// Lens prescription. All lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LensPrescription {
    pub focal_length_m: f64,
    pub diameter_m: f64,
    /// Class 1 design wavelength (trap light by default).
    pub lambda1_m: f64,
    /// Class 2 design wavelength (fluorescence by default).
    pub lambda2_m: f64,
    pub pitch_m: f64,
    #[serde(default = "IlluminationKind::default")]
    pub illumination: IlluminationKind,
    /// 1/e² intensity radius for gaussian illumination; defaults to the aperture radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauss_radius_m: Option<f64>,
    #[serde(default)]
    pub lattice_origin: LatticeOrigin,
    #[serde(default = "default_substrate")]
    pub substrate_m: f64,
    #[serde(default = "default_class1_footprint")]
    pub class1_footprint_m: [f64; 2],
    #[serde(default = "default_class2_footprint")]
    pub class2_footprint_m: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IlluminationKind {
    #[default]
    FlatTop,
    Gaussian,
}

/// Numerical aperture of the fabricated device.
pub const DESIGN_NA: f64 = 0.46;

impl LensPrescription {
    /// Focal length giving numerical aperture `na` for the given diameter, in vacuum.
    pub fn focal_length_for_na(diameter_m: f64, na: f64) -> f64 {
        0.5 * diameter_m * (1.0 - na * na).sqrt() / na
    }

    /// ⁸⁷Rb lens at the given diameter and NA 0.46: class 1 at 852 nm, class 2 at 780 nm, 400 nm pitch.
    pub fn rb87_with_diameter(diameter_m: f64) -> Self {
        Self {
            focal_length_m: Self::focal_length_for_na(diameter_m, DESIGN_NA),
            diameter_m,
            lambda1_m: 852e-9,
            lambda2_m: 780e-9,
            pitch_m: 400e-9,
            illumination: IlluminationKind::FlatTop,
            gauss_radius_m: None,
            lattice_origin: LatticeOrigin::Site,
            substrate_m: default_substrate(),
            class1_footprint_m: default_class1_footprint(),
            class2_footprint_m: default_class2_footprint(),
        }
    }

    /// Full 2 mm device. About 2·10⁷ sites; propagation at this size is long-running.
    pub fn full_scale() -> Self {
        Self::rb87_with_diameter(2e-3)
    }

    /// Same NA on a 200 µm aperture, the default for desk-scale runs.
    pub fn desk_scale() -> Self {
        Self::rb87_with_diameter(200e-6)
    }

    pub fn radius_m(&self) -> f64 {
        0.5 * self.diameter_m
    }

    pub fn numerical_aperture(&self) -> f64 {
        let r = self.radius_m();
        r / r.hypot(self.focal_length_m)
    }

    pub fn illumination_profile(&self) -> Illumination {
        match self.illumination {
            IlluminationKind::FlatTop => Illumination::FlatTop,
            IlluminationKind::Gaussian => Illumination::Gaussian {
                radius_m: self.gauss_radius_m.unwrap_or(self.radius_m()),
            },
        }
    }

    pub fn design_wavelength(&self, class: BrickClass) -> f64 {
        match class {
            BrickClass::Class1 => self.lambda1_m,
            BrickClass::Class2 => self.lambda2_m,
        }
    }

    pub fn footprint(&self, class: BrickClass) -> [f64; 2] {
        match class {
            BrickClass::Class1 => self.class1_footprint_m,
            BrickClass::Class2 => self.class2_footprint_m,
        }
    }

    /// Site position for lattice indices `(i, j)`.
    pub fn site_position(&self, i: i64, j: i64) -> (f64, f64) {
        let off = match self.lattice_origin {
            LatticeOrigin::Site => 0.0,
            LatticeOrigin::Cell => 0.5,
        };
        ((i as f64 + off) * self.pitch_m, (j as f64 + off) * self.pitch_m)
    }

    /// Lattice index of the cell containing coordinate `x` along one axis.
    pub fn cell_index(&self, x: f64) -> i64 {
        match self.lattice_origin {
            LatticeOrigin::Site => (x / self.pitch_m).round() as i64,
            LatticeOrigin::Cell => (x / self.pitch_m).floor() as i64,
        }
    }

    /// Checks the prescription and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, DesignError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(DesignError::InvalidPrescription(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        if !(self.pitch_m.is_finite() && self.pitch_m > 0.0) {
            return Err(DesignError::NonPositivePitch(self.pitch_m));
        }
        positive("focal_length_m", self.focal_length_m)?;
        positive("diameter_m", self.diameter_m)?;
        positive("lambda1_m", self.lambda1_m)?;
        positive("lambda2_m", self.lambda2_m)?;
        positive("substrate_m", self.substrate_m)?;
        for fp in [self.class1_footprint_m, self.class2_footprint_m] {
            positive("footprint", fp[0])?;
            positive("footprint", fp[1])?;
        }
        if let Some(w) = self.gauss_radius_m {
            positive("gauss_radius_m", w)?;
        }
        if self.lambda1_m == self.lambda2_m {
            return Err(DesignError::InvalidPrescription(
                "lambda1_m and lambda2_m must differ".into(),
            ));
        }
        if self.diameter_m > self.substrate_m {
            return Err(DesignError::ApertureExceedsSubstrate {
                diameter_m: self.diameter_m,
                substrate_m: self.substrate_m,
            });
        }
        let mut warnings = Vec::new();
        let min_lambda = self.lambda1_m.min(self.lambda2_m);
        if self.pitch_m >= min_lambda / 1.5 {
            warnings.push(format!(
                "pitch {:.3e} m is not below min(λ)/1.5 = {:.3e} m; the lattice may diffract",
                self.pitch_m,
                min_lambda / 1.5
            ));
        }
        Ok(warnings)
    }
}

/// Wrapped lens phase in `[0, 2π)` at `(x, y)` for focal length `f` and wavelength `λ`.
pub fn hyperbolic_phase(x: f64, y: f64, focal_length: f64, wavelength: f64) -> f64 {
    wrap_phase(unwrapped_lens_phase(x.hypot(y), focal_length, wavelength))
}

/// Unwrapped lens phase `2π/λ·(f − √(r² + f²))`, evaluated without cancellation.
pub fn unwrapped_lens_phase(r: f64, focal_length: f64, wavelength: f64) -> f64 {
    let r2 = r * r;
    -TAU / wavelength * r2 / (focal_length + (r2 + focal_length * focal_length).sqrt())
}

pub fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Brick rotation for a target geometric phase: `(φ/2) mod π`.
pub fn rotation_from_phase(phase: f64) -> f64 {
    let r = (0.5 * phase).rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Class for lattice indices under the checkerboard pattern.
pub fn class_at(i: i64, j: i64) -> BrickClass {
    if (i + j).rem_euclid(2) == 0 {
        BrickClass::Class1
    } else {
        BrickClass::Class2
    }
}

/// Classes for an `nx × ny` rectangular lattice, row-major.
pub fn assign_partition(nx: usize, ny: usize) -> Vec<BrickClass> {
    (0..ny)
        .flat_map(|j| (0..nx).map(move |i| class_at(i as i64, j as i64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NanobrickSpec {
    /// Lattice indices `(i, j)`.
    pub index: (i64, i64),
    pub x_m: f64,
    pub y_m: f64,
    pub class: BrickClass,
    /// Rotation in `[0, π)`.
    pub theta_rad: f64,
    pub length_m: f64,
    pub width_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutTable {
    pub prescription: LensPrescription,
    pub pattern: PartitionPattern,
    /// Row-major: `j` ascending, then `i` ascending.
    pub bricks: Vec<NanobrickSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutSummary {
    pub site_count: usize,
    pub class1_count: usize,
    pub class2_count: usize,
    pub numerical_aperture: f64,
    pub focal_length_m: f64,
    pub diameter_m: f64,
}

impl LayoutTable {
    pub fn class_counts(&self) -> (usize, usize) {
        let c1 = self
            .bricks
            .iter()
            .filter(|b| b.class == BrickClass::Class1)
            .count();
        (c1, self.bricks.len() - c1)
    }

    pub fn summary(&self) -> LayoutSummary {
        let (c1, c2) = self.class_counts();
        LayoutSummary {
            site_count: self.bricks.len(),
            class1_count: c1,
            class2_count: c2,
            numerical_aperture: self.prescription.numerical_aperture(),
            focal_length_m: self.prescription.focal_length_m,
            diameter_m: self.prescription.diameter_m,
        }
    }
}

/// Index range `[lo, hi]` of sites that may fall inside radius `r`.
fn index_span(presc: &LensPrescription) -> (i64, i64) {
    let n = (presc.radius_m() / presc.pitch_m).ceil() as i64 + 1;
    (-n, n)
}

/// Brick for lattice site `(i, j)`, if the site lies inside the aperture.
pub fn brick_at(presc: &LensPrescription, i: i64, j: i64) -> Option<NanobrickSpec> {
    let (x, y) = presc.site_position(i, j);
    let r = presc.radius_m();
    if x * x + y * y > r * r {
        return None;
    }
    let class = class_at(i, j);
    let phase = hyperbolic_phase(x, y, presc.focal_length_m, presc.design_wavelength(class));
    let [length_m, width_m] = presc.footprint(class);
    Some(NanobrickSpec {
        index: (i, j),
        x_m: x,
        y_m: y,
        class,
        theta_rad: rotation_from_phase(phase),
        length_m,
        width_m,
    })
}

/// Builds the layout for a prescription. Rows are generated in parallel and
/// concatenated in row-major order, so the output is deterministic.
pub fn generate_layout(presc: &LensPrescription) -> Result<LayoutTable, DesignError> {
    for w in presc.validate()? {
        log::warn!("{w}");
    }
    let (lo, hi) = index_span(presc);
    let rows: Vec<Vec<NanobrickSpec>> = (lo..=hi)
        .into_par_iter()
        .map(|j| (lo..=hi).filter_map(|i| brick_at(presc, i, j)).collect())
        .collect();
    Ok(LayoutTable {
        prescription: presc.clone(),
        pattern: PartitionPattern::Checkerboard,
        bricks: rows.into_iter().flatten().collect(),
    })
}

/// Sampled conversion efficiency curves per brick class.
///
/// `efficiency` is the converted-channel power fraction; `residual` is the
/// unconverted transmitted power fraction. Both interpolate linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyTable {
    pub lambda_m: Vec<f64>,
    pub efficiency: [Vec<f64>; 2],
    pub residual: [Vec<f64>; 2],
}

/// Peak wavelength of the default class 2 curve.
pub const DEFAULT_CLASS2_PEAK_M: f64 = 720e-9;

fn gaussian_curve(lambda: f64, peak: f64, height: f64, sigma: f64) -> f64 {
    let d = (lambda - peak) / sigma;
    height * (-0.5 * d * d).exp()
}

impl EfficiencyTable {
    pub fn new(
        lambda_m: Vec<f64>,
        efficiency: [Vec<f64>; 2],
        residual: [Vec<f64>; 2],
    ) -> Result<Self, DesignError> {
        let t = Self {
            lambda_m,
            efficiency,
            residual,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        let n = self.lambda_m.len();
        if n < 2 {
            return Err(DesignError::InvalidTable("need at least two rows".into()));
        }
        if self.lambda_m.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DesignError::InvalidTable(
                "wavelengths must be strictly increasing".into(),
            ));
        }
        for k in 0..2 {
            if self.efficiency[k].len() != n || self.residual[k].len() != n {
                return Err(DesignError::InvalidTable("column length mismatch".into()));
            }
            for (row, (e, r)) in self.efficiency[k].iter().zip(&self.residual[k]).enumerate() {
                if !(0.0..=1.0).contains(e) || !(0.0..=1.0).contains(r) || e + r > 1.0 + 1e-12 {
                    return Err(DesignError::InvalidTable(format!(
                        "class {} row {row}: efficiency {e} and residual {r} must lie in [0, 1] with sum ≤ 1",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parametric stand-in for the simulated brick response: class 1 peaks at
    /// 852 nm, class 2 at 720 nm. Each class is more than three times as
    /// efficient as the other at its own design wavelength (852 / 780 nm).
    /// Unconverted transmission is 90 % of the non-converted power.
    pub fn default_rb87() -> Self {
        let lambda_m: Vec<f64> = (0..=400).map(|k| (600.0 + k as f64) * 1e-9).collect();
        let e1: Vec<f64> = lambda_m
            .iter()
            .map(|&l| gaussian_curve(l, 852e-9, 0.92, 35e-9))
            .collect();
        let e2: Vec<f64> = lambda_m
            .iter()
            .map(|&l| gaussian_curve(l, DEFAULT_CLASS2_PEAK_M, 1.0, 80e-9))
            .collect();
        let res = |e: &Vec<f64>| e.iter().map(|v| 0.9 * (1.0 - v)).collect::<Vec<_>>();
        let r1 = res(&e1);
        let r2 = res(&e2);
        Self {
            lambda_m,
            efficiency: [e1, e2],
            residual: [r1, r2],
        }
    }

    /// Same efficiency and residual for both classes at every wavelength in 200 nm – 2 µm.
    pub fn uniform(efficiency: f64, residual: f64) -> Result<Self, DesignError> {
        let lambda_m = vec![200e-9, 2000e-9];
        Self::new(
            lambda_m,
            [vec![efficiency; 2], vec![efficiency; 2]],
            [vec![residual; 2], vec![residual; 2]],
        )
    }

    /// Perfectly selective bricks: each class converts its own wavelength fully
    /// and the other not at all. Sampled only between the two wavelengths.
    pub fn ideal_selective(lambda1_m: f64, lambda2_m: f64) -> Result<Self, DesignError> {
        let (lo, hi) = if lambda1_m < lambda2_m {
            (lambda1_m, lambda2_m)
        } else {
            (lambda2_m, lambda1_m)
        };
        let class1_at_lo = if lambda1_m == lo { 1.0 } else { 0.0 };
        Self::new(
            vec![lo, hi],
            [
                vec![class1_at_lo, 1.0 - class1_at_lo],
                vec![1.0 - class1_at_lo, class1_at_lo],
            ],
            [vec![0.0; 2], vec![0.0; 2]],
        )
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lambda_m[0], *self.lambda_m.last().unwrap())
    }

    fn interpolate(&self, column: &[f64], lambda: f64) -> Result<f64, DesignError> {
        let (min_m, max_m) = self.range();
        if !(lambda >= min_m && lambda <= max_m) {
            return Err(DesignError::WavelengthOutOfRange {
                lambda_m: lambda,
                min_m,
                max_m,
            });
        }
        let k = self.lambda_m.partition_point(|&l| l <= lambda);
        let v = if k == 0 {
            column[0]
        } else if k >= self.lambda_m.len() {
            *column.last().unwrap()
        } else {
            let (l0, l1) = (self.lambda_m[k - 1], self.lambda_m[k]);
            let t = (lambda - l0) / (l1 - l0);
            column[k - 1] + t * (column[k] - column[k - 1])
        };
        Ok(v.clamp(0.0, 1.0))
    }

    pub fn residual(&self, class: BrickClass, lambda: f64) -> Result<f64, DesignError> {
        self.interpolate(&self.residual[class.index()], lambda)
    }

    /// Wavelength of the largest sampled efficiency for a class.
    pub fn peak_wavelength(&self, class: BrickClass) -> f64 {
        let col = &self.efficiency[class.index()];
        let k = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.lambda_m[k]
    }
}

/// Converted-channel power efficiency of a brick class at `lambda`.
pub fn modulation_efficiency(
    class: BrickClass,
    lambda: f64,
    table: &EfficiencyTable,
) -> Result<f64, DesignError> {
    table.interpolate(&table.efficiency[class.index()], lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ang_diff(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(TAU);
        d.min(TAU - d)
    }

    #[test]
    fn phase_is_zero_at_center() {
        assert_eq!(hyperbolic_phase(0.0, 0.0, 1e-3, 852e-9), 0.0);
    }

    #[test]
    fn phase_at_root_three_f() {
        let f = 2.6e-3;
        let lambda = 852e-9;
        let r = 3f64.sqrt() * f;
        let expected = wrap_phase(TAU / lambda * (-f));
        assert!(ang_diff(hyperbolic_phase(r, 0.0, f, lambda), expected) < 1e-9);
    }

    /// Equal optical path: a ray from the site to the focus plus the imposed
    /// phase must match the axial ray `k·f`. Path length is summed from the
    /// 3-D displacement components directly.
    #[test]
    fn radial_profile_matches_optical_path_oracle() {
        let f = 2.6e-3;
        let lambda = 852e-9;
        let k = TAU / lambda;
        for n in 0..=1000 {
            let r = n as f64 * 1e-6;
            let (dx, dy, dz) = (0.0 - r, 0.0 - 0.0, f - 0.0);
            let path = (dx * dx + dy * dy + dz * dz).sqrt();
            let oracle = wrap_phase(k * f - k * path);
            let got = hyperbolic_phase(r, 0.0, f, lambda);
            assert!(ang_diff(got, oracle) < 1e-9, "r={r} got={got} oracle={oracle}");
        }
    }

    #[test]
    fn unwrapped_phase_decreases_with_radius() {
        let mut prev = 0.0;
        for n in 1..200 {
            let v = unwrapped_lens_phase(n as f64 * 5e-6, 1e-3, 780e-9);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotation_from_phase(0.0), 0.0);
        assert_abs_diff_eq!(rotation_from_phase(PI), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rotation_from_phase(3.0 * PI), PI / 2.0, epsilon = 1e-15);
        assert!(rotation_from_phase(-1e-300) < PI);
    }

    #[test]
    fn checkerboard_small_and_large() {
        let c = assign_partition(2, 2);
        assert_eq!(
            c,
            vec![BrickClass::Class1, BrickClass::Class2, BrickClass::Class2, BrickClass::Class1]
        );
        let big = assign_partition(64, 64);
        let n1 = big.iter().filter(|&&c| c == BrickClass::Class1).count();
        assert_eq!(n1, 2048);
        assert_eq!(big.len() - n1, 2048);
    }

    /// Autocorrelation of the class mask: shifting along a diagonal by one pitch
    /// (or by two pitches along an axis) maps each class onto itself, while a
    /// single axial shift swaps classes.
    #[test]
    fn class_sublattices_have_doubled_diagonal_period() {
        for (nx, ny) in [(7usize, 5usize), (16, 16), (9, 12)] {
            let classes = assign_partition(nx, ny);
            let mask: Vec<f64> = classes
                .iter()
                .map(|&c| if c == BrickClass::Class1 { 1.0 } else { -1.0 })
                .collect();
            let corr = |sx: usize, sy: usize| {
                let mut acc = 0.0;
                let mut n = 0.0;
                for j in 0..ny - sy {
                    for i in 0..nx - sx {
                        acc += mask[j * nx + i] * mask[(j + sy) * nx + i + sx];
                        n += 1.0;
                    }
                }
                acc / n
            };
            assert_eq!(corr(1, 1), 1.0);
            assert_eq!(corr(2, 0), 1.0);
            assert_eq!(corr(0, 2), 1.0);
            assert_eq!(corr(1, 0), -1.0);
            assert_eq!(corr(0, 1), -1.0);
            for row in classes.chunks(nx) {
                let n1 = row.iter().filter(|&&c| c == BrickClass::Class1).count() as i64;
                assert!((2 * n1 - nx as i64).abs() <= 1);
            }
        }
    }

    fn small_prescription() -> LensPrescription {
        LensPrescription::rb87_with_diameter(20e-6)
    }

    #[test]
    fn site_count_matches_point_in_disk_count() {
        let presc = LensPrescription {
            pitch_m: 400e-9,
            ..LensPrescription::rb87_with_diameter(40e-6)
        };
        let layout = generate_layout(&presc).unwrap();
        // brute force over a generous square
        let r = presc.radius_m();
        let mut count = 0;
        for j in -200i64..=200 {
            for i in -200i64..=200 {
                let (x, y) = (i as f64 * 400e-9, j as f64 * 400e-9);
                if x * x + y * y <= r * r {
                    count += 1;
                }
            }
        }
        assert_eq!(layout.bricks.len(), count);
    }

    #[test]
    fn center_brick_has_zero_rotation() {
        let layout = generate_layout(&small_prescription()).unwrap();
        let center = layout.bricks.iter().find(|b| b.index == (0, 0)).unwrap();
        assert_eq!(center.theta_rad, 0.0);
    }

    #[test]
    fn equal_radius_same_class_equal_rotation() {
        let layout = generate_layout(&small_prescription()).unwrap();
        let find = |i, j| layout.bricks.iter().find(|b| b.index == (i, j)).unwrap();
        // (3,4), (4,3), (-3,4), (0,5) all at radius 5 pitches, all odd parity
        let a = find(3, 4);
        for (i, j) in [(4, 3), (-3, 4), (4, -3), (0, 5), (5, 0), (-5, 0)] {
            let b = find(i, j);
            assert_eq!(a.class, b.class);
            assert_abs_diff_eq!(a.theta_rad, b.theta_rad, epsilon = 1e-12);
        }
    }

    #[test]
    fn every_brick_realizes_its_target_phase() {
        let layout = generate_layout(&small_prescription()).unwrap();
        let p = &layout.prescription;
        for b in &layout.bricks {
            assert!((0.0..PI).contains(&b.theta_rad));
            let target = hyperbolic_phase(b.x_m, b.y_m, p.focal_length_m, p.design_wavelength(b.class));
            let d = (2.0 * b.theta_rad - target).rem_euclid(PI);
            assert!(d < 1e-9 || PI - d < 1e-9);
            assert!(ang_diff(2.0 * b.theta_rad, target) < 1e-9);
        }
    }

    #[test]
    fn layout_is_invariant_under_quarter_turn() {
        let layout = generate_layout(&small_prescription()).unwrap();
        let lookup: std::collections::HashMap<(i64, i64), &NanobrickSpec> =
            layout.bricks.iter().map(|b| (b.index, b)).collect();
        for b in &layout.bricks {
            let (i, j) = b.index;
            let rotated = lookup.get(&(-j, i)).expect("rotated site present");
            // (i + j) and (i − j) have equal parity, so the class is preserved.
            assert_eq!(rotated.class, b.class);
            assert_abs_diff_eq!(rotated.theta_rad, b.theta_rad, epsilon = 1e-12);
        }
    }

    #[test]
    fn cell_origin_toy_lens_has_four_sites() {
        let presc = LensPrescription {
            lattice_origin: LatticeOrigin::Cell,
            diameter_m: 2.0 * 1e-6,
            pitch_m: 1e-6,
            ..small_prescription()
        };
        let layout = generate_layout(&presc).unwrap();
        assert_eq!(layout.bricks.len(), 4);
        assert_eq!(layout.class_counts(), (2, 2));
    }

    #[test]
    fn rows_are_row_major_without_duplicates() {
        let layout = generate_layout(&small_prescription()).unwrap();
        let idx: Vec<(i64, i64)> = layout.bricks.iter().map(|b| (b.index.1, b.index.0)).collect();
        let mut sorted = idx.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(idx, sorted);
    }

    #[test]
    fn desk_scale_na() {
        assert_abs_diff_eq!(LensPrescription::desk_scale().numerical_aperture(), 0.46, epsilon = 1e-12);
        assert_abs_diff_eq!(LensPrescription::full_scale().numerical_aperture(), 0.46, epsilon = 1e-12);
    }

    #[test]
    fn invalid_prescriptions() {
        let p = LensPrescription { pitch_m: 0.0, ..small_prescription() };
        assert_eq!(generate_layout(&p), Err(DesignError::NonPositivePitch(0.0)));
        let p = LensPrescription { diameter_m: 20e-3, ..small_prescription() };
        assert!(matches!(generate_layout(&p), Err(DesignError::ApertureExceedsSubstrate { .. })));
        let p = LensPrescription { lambda2_m: 852e-9, ..small_prescription() };
        assert!(matches!(generate_layout(&p), Err(DesignError::InvalidPrescription(_))));
    }

    #[test]
    fn coarse_pitch_warns() {
        let p = LensPrescription { pitch_m: 600e-9, ..small_prescription() };
        assert_eq!(p.validate().unwrap().len(), 1);
        assert!(small_prescription().validate().unwrap().is_empty());
    }

    #[test]
    fn default_table_is_selective() {
        let t = EfficiencyTable::default_rb87();
        t.validate().unwrap();
        let e = |c, l| modulation_efficiency(c, l, &t).unwrap();
        assert!(e(BrickClass::Class1, 852e-9) > 3.0 * e(BrickClass::Class2, 852e-9));
        assert!(e(BrickClass::Class2, 780e-9) > 3.0 * e(BrickClass::Class1, 780e-9));
        assert_abs_diff_eq!(t.peak_wavelength(BrickClass::Class2), 720e-9, epsilon = 1e-12);
        assert_abs_diff_eq!(t.peak_wavelength(BrickClass::Class1), 852e-9, epsilon = 1e-12);
    }

    #[test]
    fn interpolation_hits_knots_and_rejects_out_of_range() {
        let t = EfficiencyTable::default_rb87();
        for k in [0usize, 17, 252, 400] {
            let l = t.lambda_m[k];
            assert_eq!(modulation_efficiency(BrickClass::Class1, l, &t).unwrap(), t.efficiency[0][k]);
            assert_eq!(modulation_efficiency(BrickClass::Class2, l, &t).unwrap(), t.efficiency[1][k]);
        }
        assert!(matches!(
            modulation_efficiency(BrickClass::Class1, 1.2e-6, &t),
            Err(DesignError::WavelengthOutOfRange { .. })
        ));
    }

    #[test]
    fn table_validation_rejects_bad_rows() {
        assert!(EfficiencyTable::new(vec![1e-6, 0.9e-6], [vec![0.5; 2], vec![0.5; 2]], [vec![0.0; 2], vec![0.0; 2]]).is_err());
        assert!(EfficiencyTable::uniform(0.8, 0.3).is_err());
        assert!(EfficiencyTable::uniform(0.75, 0.25).is_ok());
    }

    proptest! {
        #[test]
        fn rotation_in_range_and_consistent(phi in -100.0..100.0f64) {
            let t = rotation_from_phase(phi);
            prop_assert!((0.0..PI).contains(&t));
            let d = (2.0 * t - phi).rem_euclid(TAU);
            prop_assert!(d < 1e-9 || TAU - d < 1e-9);
        }

        #[test]
        fn phase_wrapped(x in -1e-3..1e-3f64, y in -1e-3..1e-3f64) {
            let p = hyperbolic_phase(x, y, 2e-3, 780e-9);
            prop_assert!((0.0..TAU).contains(&p));
        }
    }
}
