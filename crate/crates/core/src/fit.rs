//! Least-squares fits: ordinary linear regression and Levenberg–Marquardt for
//! the exponential decay, error-function saturation, and bias-lifetime peak.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("no convergence after {} iterations", .0.iterations)]
    NoConvergence(Box<FitResult>),
    #[error("non-finite input data")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// 1σ from `s²·(JᵀJ)⁻¹`.
    pub uncertainties: Vec<f64>,
    /// `√Σr²` at the solution.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|k| self.values[k])
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.uncertainties[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative change in cost or parameters that counts as converged.
    pub tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-10,
        }
    }
}

/// Residual model for [`levenberg_marquardt`].
pub trait Residuals {
    fn len(&self) -> usize;
    /// Residuals at `p` (data minus model, or any consistent sign).
    fn residuals(&self, p: &[f64], out: &mut [f64]);
    /// Jacobian of the residuals, row-major `len × p.len()`.
    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>);
    /// Whether `p` lies in the model's domain.
    fn feasible(&self, _p: &[f64]) -> bool {
        true
    }
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Damped Gauss–Newton with Marquardt's diagonal scaling. Trial steps that
/// leave the domain or produce non-finite residuals are rejected.
pub fn levenberg_marquardt<R: Residuals>(
    problem: &R,
    p0: &[f64],
    names: &[&str],
    model: &str,
    opts: &LmOptions,
) -> Result<FitResult, FitError> {
    let n = problem.len();
    let m = p0.len();
    let mut p = p0.to_vec();
    let mut r = vec![0.0; n];
    problem.residuals(&p, &mut r);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let mut c = cost(&r);
    let mut jac = DMatrix::zeros(n, m);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut trial = vec![0.0; n];
    while iterations < opts.max_iterations {
        iterations += 1;
        if c == 0.0 {
            converged = true;
            break;
        }
        problem.jacobian(&p, &mut jac);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..m {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let cand: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            if !cand.iter().all(|v| v.is_finite()) || !problem.feasible(&cand) {
                lambda *= 10.0;
                continue;
            }
            problem.residuals(&cand, &mut trial);
            let tc = cost(&trial);
            if tc.is_finite() && tc <= c {
                let rel_step = step
                    .iter()
                    .zip(&p)
                    .map(|(s, v)| s.abs() / v.abs().max(1e-300))
                    .fold(0.0, f64::max);
                let rel_cost = (c - tc) / c.max(1e-300);
                p = cand;
                std::mem::swap(&mut r, &mut trial);
                c = tc;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel_cost < opts.tolerance || rel_step < opts.tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: a stationary point
            converged = true;
        }
        if converged {
            break;
        }
    }
    problem.jacobian(&p, &mut jac);
    let jtj = jac.transpose() * &jac;
    let dof = n.saturating_sub(m).max(1) as f64;
    let s2 = c / dof;
    let uncertainties = match jtj.clone().try_inverse() {
        Some(inv) => (0..m).map(|k| (s2 * inv[(k, k)]).max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; m],
    };
    let result = FitResult {
        model: model.to_string(),
        names: names.iter().map(|s| s.to_string()).collect(),
        values: p,
        uncertainties,
        residual_norm: c.sqrt(),
        iterations,
        converged,
    };
    if converged {
        Ok(result)
    } else {
        Err(FitError::NoConvergence(Box::new(result)))
    }
}

fn check_xy(x: &[f64], y: &[f64], needed: usize) -> Result<(), FitError> {
    if x.len() != y.len() {
        return Err(FitError::Degenerate("x and y lengths differ".into()));
    }
    if x.len() < needed {
        return Err(FitError::TooFewPoints {
            needed,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    Ok(())
}

fn distinct(x: &[f64]) -> usize {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Least squares for `y ≈ a·u + b` given basis values `u`; returns `(a, b, sse)`.
fn linear_projection(u: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let suu: f64 = u.iter().map(|v| (v - mu).powi(2)).sum();
    let suy: f64 = u.iter().zip(y).map(|(a, b)| (a - mu) * (b - my)).sum();
    let a = if suu > 0.0 { suy / suu } else { 0.0 };
    let b = my - a * mu;
    let sse = u.iter().zip(y).map(|(ui, yi)| (yi - a * ui - b).powi(2)).sum();
    (a, b, sse)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std: f64,
    pub intercept_std: f64,
    pub residuals: Vec<f64>,
    pub residual_norm: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    pub fn to_fit_result(&self) -> FitResult {
        FitResult {
            model: "linear".into(),
            names: vec!["slope".into(), "intercept".into()],
            values: vec![self.slope, self.intercept],
            uncertainties: vec![self.slope_std, self.intercept_std],
            residual_norm: self.residual_norm,
            iterations: 1,
            converged: true,
        }
    }
}

/// Ordinary least-squares line. Standard errors use `s² = SSE/(n − 2)`
/// (zero for two points).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit, FitError> {
    check_xy(x, y, 2)?;
    if distinct(x) < 2 {
        return Err(FitError::Degenerate("all x values are equal".into()));
    }
    let n = x.len() as f64;
    let (slope, intercept, sse) = linear_projection(x, y);
    let mx = x.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let s2 = if x.len() > 2 { sse / (n - 2.0) } else { 0.0 };
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - slope * a - intercept).collect();
    Ok(LinearFit {
        slope,
        intercept,
        slope_std: (s2 / sxx).sqrt(),
        intercept_std: (s2 * (1.0 / n + mx * mx / sxx)).sqrt(),
        residual_norm: sse.sqrt(),
        residuals,
    })
}

struct Curve<'a, F, J> {
    x: &'a [f64],
    y: &'a [f64],
    f: F,
    j: J,
    feasible: fn(&[f64]) -> bool,
}

impl<F, J> Residuals for Curve<'_, F, J>
where
    F: Fn(f64, &[f64]) -> f64,
    J: Fn(f64, &[f64], &mut [f64]),
{
    fn len(&self) -> usize {
        self.x.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for ((o, &x), &y) in out.iter_mut().zip(self.x).zip(self.y) {
            *o = (self.f)(x, p) - y;
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        let mut row = vec![0.0; p.len()];
        for (i, &x) in self.x.iter().enumerate() {
            (self.j)(x, p, &mut row);
            for (k, v) in row.iter().enumerate() {
                out[(i, k)] = *v;
            }
        }
    }

    fn feasible(&self, p: &[f64]) -> bool {
        (self.feasible)(p)
    }
}

/// `offset + amplitude·exp(−t/τ)`.
pub fn exponential_model(t: f64, p: &[f64]) -> f64 {
    p[0] + p[1] * (-t / p[2]).exp()
}

/// Fits `offset + amplitude·exp(−t/τ)`. Starting values come from a
/// logarithmic grid over τ with the linear parameters solved exactly.
pub fn fit_exponential(t: &[f64], y: &[f64]) -> Result<FitResult, FitError> {
    check_xy(t, y, 5)?;
    let (ymin, ymax) = y.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    if ymax - ymin <= 1e-12 * ymax.abs().max(ymin.abs()).max(1e-300) {
        return Err(FitError::Degenerate("constant curve".into()));
    }
    let (tmin, tmax) = t.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let span = tmax - tmin;
    if span <= 0.0 {
        return Err(FitError::Degenerate("all t values are equal".into()));
    }
    let mut best = (f64::MAX, [0.0; 3]);
    for tau in log_grid(span / 200.0, span * 50.0, 120) {
        let u: Vec<f64> = t.iter().map(|&v| (-v / tau).exp()).collect();
        let (a, b, sse) = linear_projection(&u, y);
        if sse < best.0 {
            best = (sse, [b, a, tau]);
        }
    }
    let problem = Curve {
        x: t,
        y,
        f: exponential_model,
        j: |t: f64, p: &[f64], out: &mut [f64]| {
            let e = (-t / p[2]).exp();
            out[0] = 1.0;
            out[1] = e;
            out[2] = p[1] * e * t / (p[2] * p[2]);
        },
        feasible: |p| p[2] > 0.0,
    };
    levenberg_marquardt(
        &problem,
        &best.1,
        &["offset", "amplitude", "tau"],
        "exponential",
        &LmOptions::default(),
    )
}

/// `floor + (A/2)·(1 + erf((x − x₀)/(√2·σ)))`, parameters `[A, x₀, σ, floor]`.
pub fn erf_model(x: f64, p: &[f64]) -> f64 {
    p[3] + 0.5 * p[0] * (1.0 + erf((x - p[1]) / (std::f64::consts::SQRT_2 * p[2])))
}

pub fn fit_erf(x: &[f64], y: &[f64]) -> Result<FitResult, FitError> {
    check_xy(x, y, 4)?;
    if distinct(x) < 4 {
        return Err(FitError::TooFewPoints {
            needed: 4,
            got: distinct(x),
        });
    }
    let (xmin, xmax) = x.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let span = xmax - xmin;
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let min_gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::MAX, f64::min);
    let mut best = (f64::MAX, [0.0; 4]);
    for k in 0..=60 {
        let x0 = xmin - 0.1 * span + 1.2 * span * k as f64 / 60.0;
        for s in log_grid(0.1 * min_gap, span, 40) {
            let u: Vec<f64> = x
                .iter()
                .map(|&v| 0.5 * (1.0 + erf((v - x0) / (std::f64::consts::SQRT_2 * s))))
                .collect();
            let (a, b, sse) = linear_projection(&u, y);
            if sse < best.0 {
                best = (sse, [a, x0, s, b]);
            }
        }
    }
    let problem = Curve {
        x,
        y,
        f: erf_model,
        j: |x: f64, p: &[f64], out: &mut [f64]| {
            let u = (x - p[1]) / (std::f64::consts::SQRT_2 * p[2]);
            let g = 0.5 * p[0] * 2.0 / PI.sqrt() * (-u * u).exp();
            out[0] = 0.5 * (1.0 + erf(u));
            out[1] = -g / (std::f64::consts::SQRT_2 * p[2]);
            out[2] = -g * u / p[2];
            out[3] = 1.0;
        },
        feasible: |p| p[2] > 0.0,
    };
    levenberg_marquardt(
        &problem,
        &best.1,
        &["amplitude", "center", "width", "floor"],
        "erf",
        &LmOptions::default(),
    )
}

/// Peaked lifetime `τ_floor + (τ_max − τ_floor)·exp(−(B − B_opt)²/(2w²))`,
/// parameters `[τ_max, τ_floor, B_opt, w]`. A phenomenological shape.
pub fn bias_lifetime_model(b: f64, p: &[f64]) -> f64 {
    let d = (b - p[2]) / p[3];
    p[1] + (p[0] - p[1]) * (-0.5 * d * d).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasLifetimeFit {
    pub result: FitResult,
    /// The fitted optimum lies outside the sampled bias range, or the data
    /// have no interior maximum.
    pub extrapolated: bool,
}

impl BiasLifetimeFit {
    pub fn optimal_bias(&self) -> f64 {
        self.result.values[2]
    }
}

struct LogBias<'a> {
    b: &'a [f64],
    log_tau: Vec<f64>,
}

impl Residuals for LogBias<'_> {
    fn len(&self) -> usize {
        self.b.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for ((o, &b), &lt) in out.iter_mut().zip(self.b).zip(&self.log_tau) {
            *o = bias_lifetime_model(b, p).ln() - lt;
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        for (i, &b) in self.b.iter().enumerate() {
            let d = (b - p[2]) / p[3];
            let g = (-0.5 * d * d).exp();
            let m = p[1] + (p[0] - p[1]) * g;
            let amp = (p[0] - p[1]) * g;
            out[(i, 0)] = g / m;
            out[(i, 1)] = (1.0 - g) / m;
            out[(i, 2)] = amp * d / p[3] / m;
            out[(i, 3)] = amp * d * d / p[3] / m;
        }
    }

    fn feasible(&self, p: &[f64]) -> bool {
        p[0] > 0.0 && p[1] > 0.0 && p[3] > 0.0
    }
}

/// Fits the bias-lifetime peak in log-τ space, since lifetimes across the
/// sweep span an order of magnitude.
pub fn fit_bias_lifetime(b: &[f64], tau: &[f64]) -> Result<BiasLifetimeFit, FitError> {
    check_xy(b, tau, 4)?;
    if distinct(b) < 4 {
        return Err(FitError::TooFewPoints {
            needed: 4,
            got: distinct(b),
        });
    }
    if tau.iter().any(|&t| t <= 0.0) {
        return Err(FitError::Degenerate("lifetimes must be positive".into()));
    }
    let log_tau: Vec<f64> = tau.iter().map(|t| t.ln()).collect();
    let (bmin, bmax) = b.iter().fold((f64::MAX, f64::MIN), |(a, c), &v| (a.min(v), c.max(v)));
    let argmax = (0..b.len()).max_by(|&i, &j| tau[i].total_cmp(&tau[j])).unwrap();
    let interior = b[argmax] > bmin && b[argmax] < bmax;
    let span = bmax - bmin;
    let (tmin, tmax) = tau.iter().fold((f64::MAX, f64::MIN), |(a, c), &v| (a.min(v), c.max(v)));
    let problem = LogBias { b, log_tau };
    let mut best = (f64::MAX, [tmax, tmin, b[argmax], span / 4.0]);
    let mut r = vec![0.0; b.len()];
    for k in 0..=40 {
        let b0 = bmin + span * k as f64 / 40.0;
        for w in log_grid(span / 100.0, span, 30) {
            let p = [tmax, tmin, b0, w];
            problem.residuals(&p, &mut r);
            let c = cost(&r);
            if c < best.0 {
                best = (c, p);
            }
        }
    }
    let names = ["tau_max", "tau_floor", "b_opt", "width"];
    let result = match levenberg_marquardt(&problem, &best.1, &names, "bias_lifetime", &LmOptions::default()) {
        Ok(r) => r,
        Err(FitError::NoConvergence(r)) if !interior => *r,
        Err(e) => return Err(e),
    };
    let b_opt = result.values[2];
    let extrapolated = !interior || b_opt < bmin || b_opt > bmax;
    Ok(BiasLifetimeFit {
        result,
        extrapolated,
    })
}
