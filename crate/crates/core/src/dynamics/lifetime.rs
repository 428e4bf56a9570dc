use super::{DynamicsError, OccupancySequence, TelegraphTrace};
use crate::fit::{fit_exponential, FitResult};
use serde::{Deserialize, Serialize};

/// Minimum complete dwells for a point estimate.
pub const MIN_COMPLETE_DWELLS: usize = 10;
/// `−ln 0.05`: zero observed losses over exposure `E` bound `τ ≥ E/2.996` at 95%.
const ZERO_EVENT_95: f64 = 2.995_732_273_553_991;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dwell {
    pub cycle: usize,
    pub start_bin: usize,
    pub bins: usize,
    /// Still occupied when the probe window closed.
    pub censored: bool,
}

/// Runs of occupied bins within each probe window.
pub fn dwells(occ: &OccupancySequence) -> Vec<Dwell> {
    let mut out = Vec::new();
    for c in 0..occ.cycles() {
        let bins = occ.cycle(c);
        let mut start = None;
        for (j, &b) in bins.iter().enumerate() {
            match (b, start) {
                (true, None) => start = Some(j),
                (false, Some(s)) => {
                    out.push(Dwell {
                        cycle: c,
                        start_bin: s,
                        bins: j - s,
                        censored: false,
                    });
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push(Dwell {
                cycle: c,
                start_bin: s,
                bins: bins.len() - s,
                censored: true,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeEstimate {
    /// Point estimate, or the 95% lower bound when `lower_bound` is set.
    pub tau_s: f64,
    pub std_s: Option<f64>,
    /// 95% interval `τ̂ ± 1.96σ`.
    pub ci_s: Option<(f64, f64)>,
    pub complete: usize,
    pub censored: usize,
    pub lower_bound: bool,
}

impl LifetimeEstimate {
    pub fn contains(&self, tau: f64) -> bool {
        match self.ci_s {
            Some((a, b)) => a <= tau && tau <= b,
            None => tau >= self.tau_s,
        }
    }
}

fn zero_event_bound(exposure_s: f64, censored: usize) -> Result<LifetimeEstimate, DynamicsError> {
    if exposure_s <= 0.0 {
        return Err(DynamicsError::TooFewDwells {
            needed: MIN_COMPLETE_DWELLS,
            got: 0,
        });
    }
    Ok(LifetimeEstimate {
        tau_s: exposure_s / ZERO_EVENT_95,
        std_s: None,
        ci_s: None,
        complete: 0,
        censored,
        lower_bound: true,
    })
}

/// Maximum-likelihood lifetime from binned occupancy. Each occupied bin
/// after the first in a run is a survival with probability `p = e^{−bin/τ}`;
/// runs that end inside the window contribute one loss, runs cut off by the
/// window end are right-censored. Memorylessness makes the first bin of each
/// run uninformative, so partial edge bins do not bias `p̂`.
pub fn dwell_time_lifetime(occ: &OccupancySequence) -> Result<LifetimeEstimate, DynamicsError> {
    if !(occ.bin_s > 0.0) {
        return Err(DynamicsError::InvalidParameter(format!("bin width {}", occ.bin_s)));
    }
    let runs = dwells(occ);
    let survivals: usize = runs.iter().map(|d| d.bins - 1).sum();
    let losses = runs.iter().filter(|d| !d.censored).count();
    let censored = runs.len() - losses;
    if losses == 0 {
        return zero_event_bound(survivals as f64 * occ.bin_s, censored);
    }
    if losses < MIN_COMPLETE_DWELLS {
        return Err(DynamicsError::TooFewDwells {
            needed: MIN_COMPLETE_DWELLS,
            got: losses,
        });
    }
    let b = occ.bin_s;
    let (s, l) = (survivals as f64, losses as f64);
    let p = s / (s + l);
    let (tau, std) = if survivals == 0 {
        (0.0, 0.0)
    } else {
        let lnp = p.ln();
        let std_p = (p * (1.0 - p) / (s + l)).sqrt();
        (-b / lnp, std_p * b / (p * lnp * lnp))
    };
    Ok(LifetimeEstimate {
        tau_s: tau,
        std_s: Some(std),
        ci_s: Some((tau - Z95 * std, tau + Z95 * std)),
        complete: losses,
        censored,
        lower_bound: false,
    })
}

/// Exponential MLE from continuous dwell durations with right-censoring:
/// `τ̂ = total exposure / observed losses`, `σ = τ̂/√d`.
pub fn exponential_mle_censored(durations_s: &[f64], censored: &[bool]) -> Result<LifetimeEstimate, DynamicsError> {
    if durations_s.len() != censored.len() {
        return Err(DynamicsError::InvalidParameter("durations and censor flags differ in length".into()));
    }
    if durations_s.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
        return Err(DynamicsError::InvalidParameter("dwell durations must be finite and ≥ 0".into()));
    }
    let exposure: f64 = durations_s.iter().sum();
    let d = censored.iter().filter(|&&c| !c).count();
    let n_cens = censored.len() - d;
    if d == 0 {
        return zero_event_bound(exposure, n_cens);
    }
    if d < MIN_COMPLETE_DWELLS {
        return Err(DynamicsError::TooFewDwells {
            needed: MIN_COMPLETE_DWELLS,
            got: d,
        });
    }
    let tau = exposure / d as f64;
    let std = tau / (d as f64).sqrt();
    Ok(LifetimeEstimate {
        tau_s: tau,
        std_s: Some(std),
        ci_s: Some((tau - Z95 * std, tau + Z95 * std)),
        complete: d,
        censored: n_cens,
        lower_bound: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    /// Bin start measured from the opening of the probe window.
    pub t_s: Vec<f64>,
    pub mean_counts: Vec<f64>,
    pub cycles_used: usize,
}

pub const MIN_DECAY_CYCLES: usize = 100;

/// Per-bin mean counts over cycles. With `initially_occupied_only`, cycles
/// whose first probe bin is below `threshold` are dropped.
pub fn average_decay(
    trace: &TelegraphTrace,
    threshold: f64,
    initially_occupied_only: bool,
) -> Result<DecayCurve, DynamicsError> {
    let cycles = trace.cycles();
    if cycles < MIN_DECAY_CYCLES {
        return Err(DynamicsError::TooFewCycles {
            needed: MIN_DECAY_CYCLES,
            got: cycles,
        });
    }
    let per = trace.bins_per_cycle();
    let mut sum = vec![0.0; per];
    let mut used = 0;
    for c in 0..cycles {
        let bins = trace.cycle(c);
        if initially_occupied_only && bins[0] as f64 <= threshold {
            continue;
        }
        used += 1;
        for (s, &v) in sum.iter_mut().zip(bins) {
            *s += v as f64;
        }
    }
    if used == 0 {
        return Err(DynamicsError::TooFewCycles { needed: 1, got: 0 });
    }
    Ok(DecayCurve {
        t_s: (0..per).map(|j| j as f64 * trace.timing.bin_s).collect(),
        mean_counts: sum.into_iter().map(|s| s / used as f64).collect(),
        cycles_used: used,
    })
}

/// Exponential fit to an averaged decay curve. The first bin is skipped:
/// selecting on its counts makes it deviate from the exponential shape.
pub fn fit_decay(curve: &DecayCurve) -> Result<FitResult, DynamicsError> {
    let skip = usize::from(curve.t_s.len() > 5);
    Ok(fit_exponential(&curve.t_s[skip..], &curve.mean_counts[skip..])?)
}

/// Expected single-atom counts per bin averaged over a probe window `T`
/// when the atom escapes with lifetime `τ`: `r₁·bin·(τ/T)·(1 − e^{−T/τ})`.
pub fn lifetime_count_consistency(tau_s: f64, probe_s: f64, atom_rate_s: f64, bin_s: f64) -> f64 {
    let x = probe_s / tau_s;
    let survival = if x == 0.0 { 1.0 } else { -(-x).exp_m1() / x };
    atom_rate_s * bin_s * survival
}
