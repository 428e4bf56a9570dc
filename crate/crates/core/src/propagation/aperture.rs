use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{PropagationError, SampledField};
use crate::lens::{
    modulation_efficiency, unwrapped_lens_phase, BrickClass, EfficiencyTable, Illumination,
    LayoutTable,
};

/// Square simulation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub pitch_m: f64,
}

impl GridSpec {
    /// Smallest power-of-two grid at `pitch_m` spanning twice the aperture.
    pub fn for_aperture(diameter_m: f64, pitch_m: f64) -> Self {
        let min = (2.0 * diameter_m / pitch_m).ceil() as usize;
        Self {
            n: min.next_power_of_two(),
            pitch_m,
        }
    }

    pub fn extent_m(&self) -> f64 {
        self.n as f64 * self.pitch_m
    }

    fn check_padding(&self, diameter_m: f64) -> Result<(), PropagationError> {
        if !(self.pitch_m.is_finite() && self.pitch_m > 0.0) || self.n < 4 {
            return Err(PropagationError::InvalidGrid(format!(
                "{} samples at pitch {} m",
                self.n, self.pitch_m
            )));
        }
        if self.extent_m() < 2.0 * diameter_m * (1.0 - 1e-12) {
            return Err(PropagationError::InvalidGrid(format!(
                "grid extent {:.4e} m is less than twice the aperture diameter {:.4e} m",
                self.extent_m(),
                diameter_m
            )));
        }
        Ok(())
    }
}

/// Radially symmetric phase error `Σ cₖ·(r/R)^(2k+2)` over an aperture of radius `R`.
/// Index 0 is defocus, index 1 primary spherical, and so on.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AberrationScreen {
    pub coefficients_rad: Vec<f64>,
}

impl AberrationScreen {
    pub fn phase(&self, r: f64, radius: f64) -> f64 {
        let rho2 = (r / radius).powi(2);
        let mut p = rho2;
        let mut acc = 0.0;
        for c in &self.coefficients_rad {
            acc += c * p;
            p *= rho2;
        }
        acc
    }

    pub fn apply(&self, field: &mut SampledField, radius: f64) {
        if self.coefficients_rad.iter().all(|&c| c == 0.0) {
            return;
        }
        let (nx, ny, pitch) = (field.nx(), field.ny(), field.pitch_m);
        for ((j, i), v) in field.data.indexed_iter_mut() {
            let x = super::field::grid_coordinate(i, nx, pitch);
            let y = super::field::grid_coordinate(j, ny, pitch);
            let r = x.hypot(y);
            if r <= radius {
                *v *= Complex64::from_polar(1.0, self.phase(r, radius));
            }
        }
    }
}

/// Transmitted field just behind a metalens, split by polarization channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ApertureField {
    /// Handedness-flipped channel carrying the geometric phase.
    pub converted: SampledField,
    /// Unconverted channel; orthogonal to `converted`, so the two never interfere.
    pub residual: SampledField,
    /// Illumination power falling on the lens.
    pub incident_power: f64,
}

/// Samples the layout onto `grid`. Each grid cell takes the brick whose lattice
/// cell contains it; the converted channel carries `√efficiency·A(x,y)·e^{2iθ}`
/// and the residual channel `√residual·A(x,y)·i`.
pub fn synthesize_aperture_field(
    layout: &LayoutTable,
    table: &EfficiencyTable,
    wavelength_m: f64,
    illumination: Illumination,
    grid: &GridSpec,
) -> Result<ApertureField, PropagationError> {
    let presc = &layout.prescription;
    if grid.pitch_m > presc.pitch_m * (1.0 + 1e-12) {
        return Err(PropagationError::CoarseGrid {
            grid_pitch_m: grid.pitch_m,
            lattice_pitch_m: presc.pitch_m,
        });
    }
    grid.check_padding(presc.diameter_m)?;

    let mut converted_amp = [0.0; 2];
    let mut residual_amp = [0.0; 2];
    for (k, class) in [BrickClass::Class1, BrickClass::Class2].into_iter().enumerate() {
        converted_amp[k] = modulation_efficiency(class, wavelength_m, table)?.sqrt();
        residual_amp[k] = table.residual(class, wavelength_m)?.sqrt();
    }

    // dense (i, j) -> brick lookup over the occupied index range
    let (lo, hi) = layout.bricks.iter().fold((i64::MAX, i64::MIN), |(lo, hi), b| {
        (lo.min(b.index.0).min(b.index.1), hi.max(b.index.0).max(b.index.1))
    });
    let span = if layout.bricks.is_empty() { 0 } else { (hi - lo + 1) as usize };
    let mut lookup = vec![u32::MAX; span * span];
    for (k, b) in layout.bricks.iter().enumerate() {
        let (i, j) = ((b.index.0 - lo) as usize, (b.index.1 - lo) as usize);
        lookup[j * span + i] = k as u32;
    }
    let brick_for = |x: f64, y: f64| {
        let (i, j) = (presc.cell_index(x) - lo, presc.cell_index(y) - lo);
        if i < 0 || j < 0 || i as usize >= span || j as usize >= span {
            return None;
        }
        match lookup[j as usize * span + i as usize] {
            u32::MAX => None,
            k => Some(&layout.bricks[k as usize]),
        }
    };

    let sample = |x: f64, y: f64, converted: bool| match brick_for(x, y) {
        None => Complex64::default(),
        Some(b) => {
            let k = (b.class.label() - 1) as usize;
            let a = illumination.amplitude(x.hypot(y));
            if converted {
                Complex64::from_polar(converted_amp[k] * a, 2.0 * b.theta_rad)
            } else {
                Complex64::new(0.0, residual_amp[k] * a)
            }
        }
    };
    let converted = SampledField::from_fn(grid.n, grid.n, grid.pitch_m, wavelength_m, 0.0, |x, y| {
        sample(x, y, true)
    });
    let residual = SampledField::from_fn(grid.n, grid.n, grid.pitch_m, wavelength_m, 0.0, |x, y| {
        sample(x, y, false)
    });
    let incident = SampledField::from_fn(grid.n, grid.n, grid.pitch_m, wavelength_m, 0.0, |x, y| {
        match brick_for(x, y) {
            Some(_) => Complex64::new(illumination.amplitude(x.hypot(y)), 0.0),
            None => Complex64::default(),
        }
    });
    Ok(ApertureField {
        converted,
        residual,
        incident_power: incident.power(),
    })
}

/// Continuous hyperbolic lens phase over a disk: the limit of a perfect
/// metalens with unit efficiency and no lattice sampling.
pub fn ideal_lens_field(
    focal_length_m: f64,
    diameter_m: f64,
    wavelength_m: f64,
    illumination: Illumination,
    grid: &GridSpec,
) -> Result<SampledField, PropagationError> {
    grid.check_padding(diameter_m)?;
    let r_max = 0.5 * diameter_m;
    Ok(SampledField::from_fn(
        grid.n,
        grid.n,
        grid.pitch_m,
        wavelength_m,
        0.0,
        |x, y| {
            let r = x.hypot(y);
            if r > r_max {
                Complex64::default()
            } else {
                Complex64::from_polar(
                    illumination.amplitude(r),
                    unwrapped_lens_phase(r, focal_length_m, wavelength_m),
                )
            }
        },
    ))
}
