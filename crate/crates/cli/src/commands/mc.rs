use crate::analysis::{analyse_trace, TraceAnalysis};
use crate::bundle::Run;
use crate::config::{RunConfig, SweepConfig};
use crate::error::CliError;
use metalens::dynamics::{
    bias_sweep, optimal_bias_trend, simulate_trace_with_state, BiasSweepResult, DynamicsParams,
};
use metalens::fit::{BiasLifetimeFit, LinearFit};
use metalens::io::{fmt_f64, save_trace};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

/// Sweep RNG streams start here so they never overlap trace streams.
const SWEEP_STREAM_BASE: u64 = 1 << 32;
const SWEEP_HEADER: &str = "power_w,bz_t,tau_true_s,tau_est_s,tau_std_s,lower_bound";

#[derive(Debug, Serialize)]
struct TraceReport {
    stream: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    /// Threshold classification against the hidden occupancy.
    #[serde(skip_serializing_if = "Option::is_none")]
    classification_accuracy: Option<f64>,
    occupied_bins: usize,
    analysis: TraceAnalysis,
}

#[derive(Debug, Serialize)]
struct SweepPower {
    power_w: f64,
    b_opt_true_t: f64,
    b_opt_fit_t: f64,
    fit: BiasLifetimeFit,
}

#[derive(Debug, Serialize)]
struct SweepReport {
    table_csv: String,
    powers: Vec<SweepPower>,
    /// Fitted `B_opt` against power; needs two or more powers.
    #[serde(skip_serializing_if = "Option::is_none")]
    trend: Option<LinearFit>,
}

#[derive(Debug, Serialize)]
struct McPayload {
    params: DynamicsParams,
    traces: Vec<TraceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepReport>,
}

fn run_sweep(sweep: &SweepConfig, seed: u64, out: &Path) -> Result<SweepReport, CliError> {
    if sweep.powers_w.is_empty() {
        return Err(CliError::Config("mc.sweep.powers_w is empty".into()));
    }
    let results: Vec<BiasSweepResult> = sweep
        .powers_w
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            log::info!("bias sweep at {:.1} mW", p * 1e3);
            bias_sweep(&sweep.model, p, seed, SWEEP_STREAM_BASE + 1000 * k as u64)
        })
        .collect::<Result<_, _>>()?;

    let mut table = String::from(SWEEP_HEADER);
    table.push('\n');
    for r in &results {
        for p in &r.points {
            let _ = writeln!(
                table,
                "{},{},{},{},{},{}",
                fmt_f64(r.power_w),
                fmt_f64(p.bz_t),
                fmt_f64(p.tau_true_s),
                fmt_f64(p.estimate.tau_s),
                p.estimate.std_s.map(fmt_f64).unwrap_or_default(),
                p.estimate.lower_bound
            );
        }
    }
    std::fs::write(out.join("tau_bz.csv"), table).map_err(|e| CliError::Other(format!("tau_bz.csv: {e}")))?;

    let trend = if results.len() >= 2 { Some(optimal_bias_trend(&results)?) } else { None };
    Ok(SweepReport {
        table_csv: "tau_bz.csv".into(),
        powers: results
            .into_iter()
            .map(|r| SweepPower {
                power_w: r.power_w,
                b_opt_true_t: r.b_opt_true_t,
                b_opt_fit_t: r.fit.optimal_bias(),
                fit: r.fit,
            })
            .collect(),
        trend,
    })
}

pub fn mc(config: RunConfig, out: &Path) -> Result<(), CliError> {
    let run = Run::new("mc", config);
    let cfg = &run.config.mc;
    let params = cfg.params();
    params.validate()?;
    cfg.timing.validate()?;
    if cfg.cycles == 0 || cfg.traces == 0 {
        return Err(CliError::Config("mc.cycles and mc.traces must be positive".into()));
    }
    let seed = run.seed();
    let sims = (0..cfg.traces as u64)
        .into_par_iter()
        .map(|k| simulate_trace_with_state(&params, &cfg.timing, cfg.cycles, seed, k))
        .collect::<Result<Vec<_>, _>>()?;

    let mut traces = Vec::with_capacity(sims.len());
    for (k, (trace, hidden)) in sims.iter().enumerate() {
        let file = if cfg.write_traces {
            let name = format!("trace_{k:03}.csv");
            save_trace(&out.join(&name), trace).map_err(CliError::output)?;
            Some(name)
        } else {
            None
        };
        let truth = hidden.occupied();
        let (analysis, occ) = analyse_trace(trace, cfg.histogram_bins)?;
        traces.push(TraceReport {
            stream: k as u64,
            file,
            classification_accuracy: occ.map(|o| o.accuracy(&truth)),
            occupied_bins: truth.iter().filter(|&&b| b).count(),
            analysis,
        });
    }
    let sweep = cfg.sweep.as_ref().map(|s| run_sweep(s, seed, out)).transpose()?;
    run.finish(out, McPayload { params, traces, sweep })
}
