use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Planned 2-D FFT for one grid shape. Rows are transformed in parallel; the
/// column pass goes through a transposed copy.
#[derive(Clone)]
pub struct Fft2 {
    shape: (usize, usize),
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("shape", &self.shape).finish()
    }
}

fn transform_rows(a: &mut Array2<Complex64>, fft: &Arc<dyn Fft<f64>>) {
    let len = fft.get_inplace_scratch_len();
    a.axis_iter_mut(Axis(0))
        .into_par_iter()
        .for_each_init(
            || vec![Complex64::default(); len],
            |scratch, mut row| {
                let slice = row.as_slice_mut().expect("row-major layout");
                fft.process_with_scratch(slice, scratch);
            },
        );
}

impl Fft2 {
    /// Plan for arrays of shape `(ny, nx)`.
    pub fn new(ny: usize, nx: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            shape: (ny, nx),
            row_fwd: planner.plan_fft_forward(nx),
            row_inv: planner.plan_fft_inverse(nx),
            col_fwd: planner.plan_fft_forward(ny),
            col_inv: planner.plan_fft_inverse(ny),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    fn run(&self, a: &Array2<Complex64>, rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) -> Array2<Complex64> {
        assert_eq!(a.dim(), self.shape, "FFT plan shape mismatch");
        let mut out = a.as_standard_layout().into_owned();
        transform_rows(&mut out, rows);
        let mut t = out.t().as_standard_layout().into_owned();
        transform_rows(&mut t, cols);
        t.t().as_standard_layout().into_owned()
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, a: &Array2<Complex64>) -> Array2<Complex64> {
        self.run(a, &self.row_fwd, &self.col_fwd)
    }

    /// Inverse transform including the `1/(nx·ny)` factor.
    pub fn inverse(&self, a: &Array2<Complex64>) -> Array2<Complex64> {
        let mut out = self.run(a, &self.row_inv, &self.col_inv);
        let norm = 1.0 / (self.shape.0 * self.shape.1) as f64;
        out.par_mapv_inplace(|v| v * norm);
        out
    }
}

/// Signed spatial frequency (cycles per unit length) of FFT bin `k` out of `n`.
pub fn fft_frequency(k: usize, n: usize, pitch: f64) -> f64 {
    let k = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
    k / (n as f64 * pitch)
}
