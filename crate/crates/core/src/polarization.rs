//! Jones calculus for the metalens polarization functions.
//!
//! States and elements are stored in either the linear (H, V) basis or the
//! circular (L, R) basis. The handedness convention is fixed by
//! [`LCP_LINEAR`] and [`RCP_LINEAR`]: in the linear basis a left-handed
//! circular state is `(1, +i)/√2` and a right-handed one is `(1, −i)/√2`.
//! Circular-basis components are ordered `(L, R)`.
//!
//! A rotated nanobrick acts as a half-wave retarder on the converted channel:
//! it flips handedness and adds a geometric phase equal to twice its
//! rotation angle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};
use std::ops::Mul;
use thiserror::Error;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Left-handed circular polarization expressed in the linear (H, V) basis.
pub const LCP_LINEAR: [Complex64; 2] = [
    Complex64::new(FRAC_1_SQRT_2, 0.0),
    Complex64::new(0.0, FRAC_1_SQRT_2),
];

/// Right-handed circular polarization expressed in the linear (H, V) basis.
pub const RCP_LINEAR: [Complex64; 2] = [
    Complex64::new(FRAC_1_SQRT_2, 0.0),
    Complex64::new(0.0, -FRAC_1_SQRT_2),
];

/// Relative tolerance below which the circular Stokes component counts as zero.
const HANDEDNESS_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolarizationError {
    #[error("conversion ({conversion}) and residual ({residual}) amplitudes must lie in [0, 1] with c² + r² ≤ 1")]
    AmplitudeConstraint { conversion: f64, residual: f64 },
    #[error("powers must be finite and non-negative (P_p = {p_p}, P_s = {p_s})")]
    NegativePower { p_p: f64, p_s: f64 },
    #[error("P_s is zero, the power ratio P_p/P_s is undefined")]
    UndefinedRatio,
    #[error("both powers are zero, no signal")]
    NoSignal,
    #[error("the zero state has no polarization")]
    ZeroState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// Components are (H, V).
    Linear,
    /// Components are (L, R).
    Circular,
}

/// Change of basis from circular to linear components: columns are L and R.
fn circular_to_linear() -> [[Complex64; 2]; 2] {
    [
        [LCP_LINEAR[0], RCP_LINEAR[0]],
        [LCP_LINEAR[1], RCP_LINEAR[1]],
    ]
}

fn adjoint2(m: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    [
        [m[0][0].conj(), m[1][0].conj()],
        [m[0][1].conj(), m[1][1].conj()],
    ]
}

fn matmul2(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[ZERO; 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

fn matvec2(a: &[[Complex64; 2]; 2], v: &[Complex64; 2]) -> [Complex64; 2] {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

/// Polarization state as two complex amplitudes in a declared basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JonesVector {
    pub amplitudes: [Complex64; 2],
    pub basis: Basis,
}

impl JonesVector {
    pub fn new(a: Complex64, b: Complex64, basis: Basis) -> Self {
        Self {
            amplitudes: [a, b],
            basis,
        }
    }

    pub fn horizontal() -> Self {
        Self::new(ONE, ZERO, Basis::Linear)
    }

    pub fn vertical() -> Self {
        Self::new(ZERO, ONE, Basis::Linear)
    }

    /// Linear polarization at `angle` from horizontal.
    pub fn linear(angle: f64) -> Self {
        Self::new(
            Complex64::new(angle.cos(), 0.0),
            Complex64::new(angle.sin(), 0.0),
            Basis::Linear,
        )
    }

    pub fn lcp() -> Self {
        Self::new(ONE, ZERO, Basis::Circular)
    }

    pub fn rcp() -> Self {
        Self::new(ZERO, ONE, Basis::Circular)
    }

    pub fn zero(basis: Basis) -> Self {
        Self::new(ZERO, ZERO, basis)
    }

    pub fn norm(&self) -> f64 {
        self.power().sqrt()
    }

    pub fn power(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.power() == 0.0
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.amplitudes[0] * s, self.amplitudes[1] * s, self.basis)
    }

    pub fn to_linear(&self) -> Self {
        match self.basis {
            Basis::Linear => *self,
            Basis::Circular => Self {
                amplitudes: matvec2(&circular_to_linear(), &self.amplitudes),
                basis: Basis::Linear,
            },
        }
    }

    pub fn to_circular(&self) -> Self {
        match self.basis {
            Basis::Circular => *self,
            Basis::Linear => Self {
                amplitudes: matvec2(&adjoint2(&circular_to_linear()), &self.amplitudes),
                basis: Basis::Circular,
            },
        }
    }

    pub fn in_basis(&self, basis: Basis) -> Self {
        match basis {
            Basis::Linear => self.to_linear(),
            Basis::Circular => self.to_circular(),
        }
    }

    /// Inner product ⟨self|other⟩, evaluated in `self`'s basis.
    pub fn inner(&self, other: &JonesVector) -> Complex64 {
        let o = other.in_basis(self.basis);
        self.amplitudes[0].conj() * o.amplitudes[0] + self.amplitudes[1].conj() * o.amplitudes[1]
    }

    /// Equality up to an unobservable global phase, with relative tolerance.
    pub fn approx_eq(&self, other: &JonesVector, rel_tol: f64) -> bool {
        let a = self.to_linear();
        let b = other.to_linear();
        let scale = a.norm().max(b.norm());
        if scale == 0.0 {
            return true;
        }
        // Rotate b onto a's phase using their overlap, then compare componentwise.
        let overlap = b.inner(&a);
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            ONE
        };
        let b = b.scale(phase);
        let diff: f64 = (0..2)
            .map(|k| (a.amplitudes[k] - b.amplitudes[k]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        diff <= rel_tol * scale
    }
}

/// 2×2 complex optical element in a declared basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JonesMatrix {
    pub elements: [[Complex64; 2]; 2],
    pub basis: Basis,
}

impl JonesMatrix {
    pub fn new(elements: [[Complex64; 2]; 2], basis: Basis) -> Self {
        Self { elements, basis }
    }

    pub fn identity(basis: Basis) -> Self {
        Self::new([[ONE, ZERO], [ZERO, ONE]], basis)
    }

    /// Coordinate rotation R(θ) in the linear basis.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(
            [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ],
            Basis::Linear,
        )
    }

    pub fn to_linear(&self) -> Self {
        match self.basis {
            Basis::Linear => *self,
            Basis::Circular => {
                let u = circular_to_linear();
                Self::new(
                    matmul2(&matmul2(&u, &self.elements), &adjoint2(&u)),
                    Basis::Linear,
                )
            }
        }
    }

    pub fn to_circular(&self) -> Self {
        match self.basis {
            Basis::Circular => *self,
            Basis::Linear => {
                let u = circular_to_linear();
                Self::new(
                    matmul2(&matmul2(&adjoint2(&u), &self.elements), &u),
                    Basis::Circular,
                )
            }
        }
    }

    pub fn in_basis(&self, basis: Basis) -> Self {
        match basis {
            Basis::Linear => self.to_linear(),
            Basis::Circular => self.to_circular(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::new(adjoint2(&self.elements), self.basis)
    }

    /// Applies the element; the result is in the matrix's basis.
    pub fn apply(&self, v: &JonesVector) -> JonesVector {
        let v = v.in_basis(self.basis);
        JonesVector {
            amplitudes: matvec2(&self.elements, &v.amplitudes),
            basis: self.basis,
        }
    }

    /// Frobenius norm of `M†M − I`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = matmul2(&adjoint2(&self.elements), &self.elements);
        let mut acc = 0.0;
        for (r, row) in p.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let target = if r == c { ONE } else { ZERO };
                acc += (v - target).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Singular values, largest first.
    pub fn singular_values(&self) -> [f64; 2] {
        let h = matmul2(&adjoint2(&self.elements), &self.elements);
        let tr = h[0][0].re + h[1][1].re;
        let det = (h[0][0] * h[1][1] - h[0][1] * h[1][0]).re;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let hi = (tr / 2.0 + disc).max(0.0).sqrt();
        let lo = (tr / 2.0 - disc).max(0.0).sqrt();
        [hi, lo]
    }
}

impl Mul for JonesMatrix {
    type Output = JonesMatrix;

    fn mul(self, rhs: JonesMatrix) -> JonesMatrix {
        let rhs = rhs.in_basis(self.basis);
        JonesMatrix::new(matmul2(&self.elements, &rhs.elements), self.basis)
    }
}

/// Linear retarder with the given retardance and fast-axis angle from horizontal:
/// `R(θ)·diag(1, e^{iδ})·R(−θ)`.
pub fn waveplate(retardance: f64, fast_axis: f64) -> JonesMatrix {
    let core = JonesMatrix::new(
        [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, retardance)]],
        Basis::Linear,
    );
    JonesMatrix::rotation(fast_axis) * core * JonesMatrix::rotation(-fast_axis)
}

/// Jones matrix of a rotated nanobrick.
///
/// The converted channel is an ideal half-wave retarder at `rotation`, scaled
/// by `conversion_amplitude`; it maps LCP to RCP with phase `2·rotation`. The
/// unconverted channel passes with `residual_amplitude` and a quarter-period
/// phase offset, which keeps the singular values at `√(c² + r²) ≤ 1`.
pub fn nanobrick_element(
    rotation: f64,
    conversion_amplitude: f64,
    residual_amplitude: f64,
) -> Result<JonesMatrix, PolarizationError> {
    let (c, r) = (conversion_amplitude, residual_amplitude);
    let in_unit = |a: f64| (0.0..=1.0).contains(&a);
    if !in_unit(c) || !in_unit(r) || c * c + r * r > 1.0 + 1e-12 {
        return Err(PolarizationError::AmplitudeConstraint {
            conversion: c,
            residual: r,
        });
    }
    let half_wave = waveplate(PI, rotation);
    let mut m = [[ZERO; 2]; 2];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = half_wave.elements[i][j] * c;
            if i == j {
                *v += I * r;
            }
        }
    }
    Ok(JonesMatrix::new(m, Basis::Linear))
}

/// Ellipticity `arccot(√(P_p/P_s))` in `(0, π/2]`; `π/4` for equal powers.
pub fn ellipticity_from_powers(p_p: f64, p_s: f64) -> Result<f64, PolarizationError> {
    if !(p_p.is_finite() && p_s.is_finite()) || p_p < 0.0 || p_s < 0.0 {
        return Err(PolarizationError::NegativePower { p_p, p_s });
    }
    match (p_p == 0.0, p_s == 0.0) {
        (true, true) => Err(PolarizationError::NoSignal),
        (false, true) => Err(PolarizationError::UndefinedRatio),
        // arccot(√(p/s)) = atan2(√s, √p), well defined at p = 0.
        _ => Ok(p_s.sqrt().atan2(p_p.sqrt())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
    Linear,
}

/// Polarization summary of a single state.
///
/// Linear states report `ellipticity = 0`. `power_major` and `power_minor`
/// are the powers along the ellipse axes, so that
/// `ellipticity_from_powers(power_major, power_minor)` reproduces the
/// ellipticity for any non-linear state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationReport {
    pub ellipticity: f64,
    pub orientation: f64,
    pub handedness: Handedness,
    pub power_major: f64,
    pub power_minor: f64,
}

impl PolarizationReport {
    /// Rebuilds a state (linear basis) with this report's polarization, up to global phase.
    pub fn reconstruct(&self) -> JonesVector {
        let chi = match self.handedness {
            Handedness::Left => self.ellipticity,
            Handedness::Right => -self.ellipticity,
            Handedness::Linear => 0.0,
        };
        let amp = (self.power_major + self.power_minor).sqrt();
        let local = JonesVector::new(
            Complex64::new(chi.cos() * amp, 0.0),
            Complex64::new(0.0, chi.sin() * amp),
            Basis::Linear,
        );
        JonesMatrix::rotation(self.orientation).apply(&local)
    }
}

/// Stokes-parameter analysis of a state.
pub fn analyze(state: &JonesVector) -> Result<PolarizationReport, PolarizationError> {
    if state.is_zero() {
        return Err(PolarizationError::ZeroState);
    }
    let v = state.to_linear();
    let [h, vv] = v.amplitudes;
    let s0 = h.norm_sqr() + vv.norm_sqr();
    let s1 = h.norm_sqr() - vv.norm_sqr();
    let cross = h.conj() * vv;
    let s2 = 2.0 * cross.re;
    // Positive for LCP under the (1, +i)/√2 convention.
    let s3 = 2.0 * cross.im;

    let lin = s1.hypot(s2);
    let handedness = if s3.abs() <= HANDEDNESS_TOL * s0 {
        Handedness::Linear
    } else if s3 > 0.0 {
        Handedness::Left
    } else {
        Handedness::Right
    };
    let ellipticity = match handedness {
        Handedness::Linear => 0.0,
        _ => 0.5 * s3.abs().atan2(lin),
    };
    let orientation = if lin <= HANDEDNESS_TOL * s0 {
        0.0
    } else {
        0.5 * s2.atan2(s1)
    };
    debug_assert!(ellipticity <= FRAC_PI_4 + 1e-15);
    Ok(PolarizationReport {
        ellipticity: ellipticity.min(FRAC_PI_4),
        orientation,
        handedness,
        power_major: 0.5 * (s0 + lin),
        power_minor: 0.5 * (s0 - lin).max(0.0),
    })
}

/// Phase of the converted channel `⟨RCP|M|LCP⟩`.
pub fn converted_phase(element: &JonesMatrix) -> f64 {
    let c = element.to_circular();
    // Row R, column L.
    c.elements[1][0].arg()
}

/// Quarter-wave plate helper used by the polarizer characterization.
pub fn quarter_wave(fast_axis: f64) -> JonesMatrix {
    waveplate(FRAC_PI_2, fast_axis)
}
