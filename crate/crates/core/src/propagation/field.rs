use ndarray::{s, Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use super::PropagationError;

/// Complex scalar field on a square-pitched grid, stored `(ny, nx)`.
///
/// Sample `(j, i)` sits at `x = (i − nx/2)·pitch`, `y = (j − ny/2)·pitch`, so
/// the optical axis always falls on sample `(ny/2, nx/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub pitch_m: f64,
    pub wavelength_m: f64,
    pub z_m: f64,
    pub data: Array2<Complex64>,
}

pub fn grid_coordinate(index: usize, n: usize, pitch: f64) -> f64 {
    (index as f64 - (n / 2) as f64) * pitch
}

impl SampledField {
    pub fn new(
        data: Array2<Complex64>,
        pitch_m: f64,
        wavelength_m: f64,
        z_m: f64,
    ) -> Result<Self, PropagationError> {
        if !(pitch_m.is_finite() && pitch_m > 0.0) {
            return Err(PropagationError::InvalidGrid(format!("pitch {pitch_m} m")));
        }
        if !(wavelength_m.is_finite() && wavelength_m > 0.0) {
            return Err(PropagationError::InvalidGrid(format!(
                "wavelength {wavelength_m} m"
            )));
        }
        if data.is_empty() {
            return Err(PropagationError::InvalidGrid("empty grid".into()));
        }
        if !z_m.is_finite() {
            return Err(PropagationError::InvalidGrid(format!("plane z {z_m} m")));
        }
        Ok(Self {
            pitch_m,
            wavelength_m,
            z_m,
            data,
        })
    }

    pub fn zeros(nx: usize, ny: usize, pitch_m: f64, wavelength_m: f64, z_m: f64) -> Self {
        Self {
            pitch_m,
            wavelength_m,
            z_m,
            data: Array2::zeros((ny, nx)),
        }
    }

    /// Samples `f(x, y)` on the grid, rows in parallel.
    pub fn from_fn<F>(nx: usize, ny: usize, pitch_m: f64, wavelength_m: f64, z_m: f64, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Sync,
    {
        let mut field = Self::zeros(nx, ny, pitch_m, wavelength_m, z_m);
        field
            .data
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(j, mut row)| {
                let y = grid_coordinate(j, ny, pitch_m);
                for (i, v) in row.iter_mut().enumerate() {
                    *v = f(grid_coordinate(i, nx, pitch_m), y);
                }
            });
        field
    }

    pub fn nx(&self) -> usize {
        self.data.ncols()
    }

    pub fn ny(&self) -> usize {
        self.data.nrows()
    }

    pub fn x(&self, i: usize) -> f64 {
        grid_coordinate(i, self.nx(), self.pitch_m)
    }

    pub fn y(&self, j: usize) -> f64 {
        grid_coordinate(j, self.ny(), self.pitch_m)
    }

    pub fn wavenumber(&self) -> f64 {
        std::f64::consts::TAU / self.wavelength_m
    }

    /// `(row, column)` of the on-axis sample.
    pub fn center_index(&self) -> (usize, usize) {
        (self.ny() / 2, self.nx() / 2)
    }

    pub fn on_axis(&self) -> Complex64 {
        let (j, i) = self.center_index();
        self.data[[j, i]]
    }

    pub fn on_axis_intensity(&self) -> f64 {
        self.on_axis().norm_sqr()
    }

    pub fn intensity(&self) -> Array2<f64> {
        self.data.mapv(|v| v.norm_sqr())
    }

    /// `Σ|a|²·pitch²`.
    pub fn power(&self) -> f64 {
        self.data.par_iter().map(|v| v.norm_sqr()).sum::<f64>() * self.pitch_m * self.pitch_m
    }

    /// Power in samples whose centers lie within `radius` of the axis.
    pub fn power_within(&self, radius: f64) -> f64 {
        let r2 = radius * radius;
        let mut acc = 0.0;
        for ((j, i), v) in self.data.indexed_iter() {
            let (x, y) = (self.x(i), self.y(j));
            if x * x + y * y <= r2 {
                acc += v.norm_sqr();
            }
        }
        acc * self.pitch_m * self.pitch_m
    }

    /// Centered window of at most `half_width` on each side of the axis.
    /// The axis stays on sample `(n/2, n/2)` of the result.
    pub fn crop(&self, half_width: f64) -> SampledField {
        let (cy, cx) = self.center_index();
        let h = ((half_width / self.pitch_m).floor() as usize)
            .min(cx)
            .min(cy)
            .max(1);
        let hx = h.min(self.nx() - cx);
        let hy = h.min(self.ny() - cy);
        let h = hx.min(hy).max(1);
        let data = self
            .data
            .slice(s![cy - h..(cy + h).min(self.ny()), cx - h..(cx + h).min(self.nx())])
            .to_owned();
        SampledField {
            pitch_m: self.pitch_m,
            wavelength_m: self.wavelength_m,
            z_m: self.z_m,
            data,
        }
    }

    pub fn scale(&self, factor: Complex64) -> SampledField {
        SampledField {
            data: self.data.mapv(|v| v * factor),
            ..self.clone()
        }
    }

    /// Largest `|a − b| / max|b|` over the grid.
    pub fn max_relative_difference(&self, other: &SampledField) -> f64 {
        let scale = other
            .data
            .iter()
            .map(|v| v.norm())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max)
            / scale
    }

    /// Intensity along the four half-axes from the on-axis sample, averaged.
    /// Entry `k` is at radius `k·pitch`.
    pub fn radial_profile(&self) -> Vec<f64> {
        let cuts = self.axis_cuts();
        let len = cuts.iter().map(Vec::len).min().unwrap_or(0);
        (0..len)
            .map(|k| cuts.iter().map(|c| c[k]).sum::<f64>() / cuts.len() as f64)
            .collect()
    }

    /// Intensity cuts along +x, −x, +y, −y starting at the axis.
    pub fn axis_cuts(&self) -> [Vec<f64>; 4] {
        let (cy, cx) = self.center_index();
        let int = |j: usize, i: usize| self.data[[j, i]].norm_sqr();
        [
            (cx..self.nx()).map(|i| int(cy, i)).collect(),
            (0..=cx).rev().map(|i| int(cy, i)).collect(),
            (cy..self.ny()).map(|j| int(j, cx)).collect(),
            (0..=cy).rev().map(|j| int(j, cx)).collect(),
        ]
    }
}
