//! Single-atom occupancy simulation and photon-count statistics.
//!
//! Occupancy is a continuous-time Markov chain: loading at `R_load` while the
//! cooling beams are on (preparation window), loss at `n/τ` at all times.
//! Only probe-window bins are recorded; each bin holds a Poisson count with
//! mean `r₁·∫n dt + r_b·bin`.

mod histogram;
mod lifetime;
mod simulate;
mod sweep;

pub use histogram::{
    histogram, misclassification_probability, threshold_classify, CountHistogram, HistogramSummary,
    OccupancySequence, SplitMethod, TwoPeakSummary,
};
pub use lifetime::{
    average_decay, dwell_time_lifetime, dwells, exponential_mle_censored, fit_decay, lifetime_count_consistency,
    DecayCurve, Dwell, LifetimeEstimate,
};
pub use simulate::{
    simulate_trace, simulate_trace_with_state, simulate_traces, stream_rng, CycleTiming, DynamicsParams,
    HiddenState, TelegraphTrace, TraceSource,
};
pub use sweep::{
    bias_sweep, optimal_bias_trend, sample_erf_curve, BiasLifetimeModel, BiasSweepConfig, BiasSweepPoint,
    BiasSweepResult, CurveNoise, OptimalBiasModel,
};

use crate::fit::FitError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("need at least {needed} complete dwells, got {got}")]
    TooFewDwells { needed: usize, got: usize },
    #[error("need at least {needed} cycles, got {got}")]
    TooFewCycles { needed: usize, got: usize },
    #[error(transparent)]
    Fit(#[from] FitError),
}
