use super::{
    dwell_time_lifetime, histogram, simulate_trace_with_state, stream_rng, threshold_classify, CycleTiming,
    DynamicsError, DynamicsParams, LifetimeEstimate,
};
use crate::fit::{bias_lifetime_model, erf_model, fit_bias_lifetime, BiasLifetimeFit, LinearFit};
use crate::tweezer::{optimal_bias_linear_fit, TweezerError, GAUSS};
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Phenomenological lifetime peak in the bias field: a Gaussian in `B_z`
/// between `τ_floor` and `τ_max`. The shape is a fitting device, not a
/// resonance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasLifetimeModel {
    pub tau_max_s: f64,
    pub tau_floor_s: f64,
    pub b_opt_t: f64,
    pub width_t: f64,
}

impl BiasLifetimeModel {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.tau_floor_s > 0.0 && self.tau_floor_s <= self.tau_max_s && self.tau_max_s.is_finite()) {
            return Err(DynamicsError::InvalidParameter(format!(
                "need 0 < tau_floor ({}) ≤ tau_max ({})",
                self.tau_floor_s, self.tau_max_s
            )));
        }
        if !(self.width_t > 0.0) || !self.b_opt_t.is_finite() {
            return Err(DynamicsError::InvalidParameter("bias peak width must be positive".into()));
        }
        Ok(())
    }

    pub fn lifetime(&self, bz_t: f64) -> f64 {
        bias_lifetime_model(bz_t, &[self.tau_max_s, self.tau_floor_s, self.b_opt_t, self.width_t])
    }
}

/// Linear drift of the optimal bias with trap power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimalBiasModel {
    pub b_ref_t: f64,
    pub p_ref_w: f64,
    pub slope_t_per_w: f64,
}

impl Default for OptimalBiasModel {
    /// 0.59 G at 16.3 mW, rising 0.03 G per mW.
    fn default() -> Self {
        Self {
            b_ref_t: 0.59 * GAUSS,
            p_ref_w: 16.3e-3,
            slope_t_per_w: 0.03 * GAUSS / 1e-3,
        }
    }
}

impl OptimalBiasModel {
    pub fn b_opt(&self, power_w: f64) -> f64 {
        self.b_ref_t + self.slope_t_per_w * (power_w - self.p_ref_w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSweepConfig {
    pub tau_max_s: f64,
    pub tau_floor_s: f64,
    pub width_t: f64,
    pub optimal: OptimalBiasModel,
    pub bz_min_t: f64,
    pub bz_max_t: f64,
    pub bz_step_t: f64,
    /// Loss rate is replaced by `1/τ(B_z)` at each sweep point.
    pub dynamics: DynamicsParams,
    pub timing: CycleTiming,
    pub cycles: usize,
}

impl Default for BiasSweepConfig {
    fn default() -> Self {
        Self {
            tau_max_s: 1.0,
            tau_floor_s: 0.1,
            width_t: 0.04 * GAUSS,
            optimal: OptimalBiasModel::default(),
            bz_min_t: 0.40 * GAUSS,
            bz_max_t: 0.80 * GAUSS,
            bz_step_t: 0.02 * GAUSS,
            dynamics: DynamicsParams {
                load_rate_s: 5.0,
                ..DynamicsParams::metalens_preset()
            },
            timing: CycleTiming::default(),
            cycles: 600,
        }
    }
}

impl BiasSweepConfig {
    pub fn bias_grid(&self) -> Result<Vec<f64>, DynamicsError> {
        if !(self.bz_step_t > 0.0 && self.bz_max_t > self.bz_min_t) {
            return Err(DynamicsError::InvalidParameter("bias grid needs step > 0 and max > min".into()));
        }
        let n = ((self.bz_max_t - self.bz_min_t) / self.bz_step_t + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|k| self.bz_min_t + k as f64 * self.bz_step_t).collect())
    }

    pub fn model_at(&self, power_w: f64) -> BiasLifetimeModel {
        BiasLifetimeModel {
            tau_max_s: self.tau_max_s,
            tau_floor_s: self.tau_floor_s,
            b_opt_t: self.optimal.b_opt(power_w),
            width_t: self.width_t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSweepPoint {
    pub bz_t: f64,
    pub tau_true_s: f64,
    pub estimate: LifetimeEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSweepResult {
    pub power_w: f64,
    pub b_opt_true_t: f64,
    pub points: Vec<BiasSweepPoint>,
    pub fit: BiasLifetimeFit,
}

/// Simulates a trace at each bias, estimates the dwell lifetime from the
/// classified trace with single-bin dropouts bridged, and fits the lifetime
/// peak. Sweep point `k` uses RNG stream `stream_base + k`.
pub fn bias_sweep(
    config: &BiasSweepConfig,
    power_w: f64,
    seed: u64,
    stream_base: u64,
) -> Result<BiasSweepResult, DynamicsError> {
    let model = config.model_at(power_w);
    model.validate()?;
    let grid = config.bias_grid()?;
    let points: Vec<BiasSweepPoint> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &bz)| {
            let tau = model.lifetime(bz);
            let params = DynamicsParams {
                lifetime_s: tau,
                ..config.dynamics
            };
            let (trace, _) =
                simulate_trace_with_state(&params, &config.timing, config.cycles, seed, stream_base + k as u64)?;
            let h = histogram(&trace, 0)?;
            let split = h.summary.two_peak().ok_or_else(|| {
                DynamicsError::InvalidParameter(format!("no atom signal at B_z = {bz:.3e} T"))
            })?;
            let estimate = dwell_time_lifetime(&threshold_classify(&trace, split.threshold).bridge_gaps(1))?;
            Ok(BiasSweepPoint {
                bz_t: bz,
                tau_true_s: tau,
                estimate,
            })
        })
        .collect::<Result<_, DynamicsError>>()?;
    let (b, tau): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| !p.estimate.lower_bound && p.estimate.tau_s > 0.0)
        .map(|p| (p.bz_t, p.estimate.tau_s))
        .unzip();
    let fit = fit_bias_lifetime(&b, &tau)?;
    Ok(BiasSweepResult {
        power_w,
        b_opt_true_t: model.b_opt_t,
        points,
        fit,
    })
}

/// Straight-line fit of fitted `B_opt` against power across sweeps.
pub fn optimal_bias_trend(results: &[BiasSweepResult]) -> Result<LinearFit, TweezerError> {
    let pts: Vec<(f64, f64)> = results.iter().map(|r| (r.power_w, r.fit.optimal_bias())).collect();
    optimal_bias_linear_fit(&pts)
}

/// Noise applied by [`sample_erf_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveNoise {
    /// Probability estimated from `trials` loading attempts.
    Binomial { trials: u64 },
    /// Additive Gaussian noise.
    Gaussian { sigma: f64 },
}

/// Noisy samples of `floor + (A/2)(1 + erf((P − P₀)/(√2σ)))` with parameters
/// `[A, P₀, σ, floor]`.
pub fn sample_erf_curve(
    params: &[f64; 4],
    powers_w: &[f64],
    noise: CurveNoise,
    seed: u64,
    stream: u64,
) -> Result<Vec<(f64, f64)>, DynamicsError> {
    let mut rng = stream_rng(seed, stream);
    powers_w
        .iter()
        .map(|&p| {
            let y = erf_model(p, params);
            let v = match noise {
                CurveNoise::Binomial { trials } => {
                    if !(0.0..=1.0).contains(&y) || trials == 0 {
                        return Err(DynamicsError::InvalidParameter(format!("probability {y} with {trials} trials")));
                    }
                    let d = Binomial::new(trials, y).map_err(|e| DynamicsError::InvalidParameter(e.to_string()))?;
                    d.sample(&mut rng) as f64 / trials as f64
                }
                CurveNoise::Gaussian { sigma } => {
                    let d = Normal::new(0.0, sigma).map_err(|e| DynamicsError::InvalidParameter(e.to_string()))?;
                    y + d.sample(&mut rng)
                }
            };
            Ok((p, v))
        })
        .collect()
}
