use crate::error::CliError;
use metalens::dynamics::{
    average_decay, dwell_time_lifetime, histogram, lifetime_count_consistency, misclassification_probability,
    threshold_classify, HistogramSummary, LifetimeEstimate, OccupancySequence, TelegraphTrace, TraceSource,
};
use metalens::fit::FitResult;
use serde::{Deserialize, Serialize};

/// Analysis of one telegraph trace. Identical for simulated and ingested
/// traces with the same counts and timing, apart from the source tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceAnalysis {
    pub source: TraceSource,
    pub cycles: usize,
    pub bins: usize,
    pub histogram: HistogramSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misclassification_probability: Option<f64>,
    /// Fraction of cycles whose first probe bin is above threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loading_probability: Option<f64>,
    /// Dwell-time lifetime after bridging single-bin dropouts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lifetime: Option<LifetimeEstimate>,
    /// Mean counts per bin predicted from the lifetime estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_mean_counts: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_fit: Option<FitResult>,
    /// Why a stage above was skipped.
    pub notes: Vec<String>,
}

/// Returns the analysis and the thresholded occupancy, if the histogram has an atom peak.
pub fn analyse_trace(
    trace: &TelegraphTrace,
    histogram_bins: usize,
) -> Result<(TraceAnalysis, Option<OccupancySequence>), CliError> {
    let h = histogram(trace, histogram_bins)?;
    let mut a = TraceAnalysis {
        source: trace.source,
        cycles: trace.cycles(),
        bins: trace.counts.len(),
        histogram: h.summary.clone(),
        threshold: None,
        misclassification_probability: None,
        loading_probability: None,
        lifetime: None,
        predicted_mean_counts: None,
        decay_fit: None,
        notes: Vec::new(),
    };
    let Some(split) = h.summary.two_peak() else {
        a.notes.push("single-peak histogram: no atom signal to classify".into());
        return Ok((a, None));
    };
    a.threshold = Some(split.threshold);
    a.misclassification_probability = Some(misclassification_probability(split));
    let occ = threshold_classify(trace, split.threshold);
    a.loading_probability = Some(occ.trap_probability());
    match dwell_time_lifetime(&occ.bridge_gaps(1)) {
        Ok(est) => {
            a.predicted_mean_counts = Some(lifetime_count_consistency(
                est.tau_s,
                trace.timing.probe_s,
                (split.atom_mean - split.background_mean) / trace.timing.bin_s,
                trace.timing.bin_s,
            ));
            a.lifetime = Some(est);
        }
        Err(e) => a.notes.push(format!("lifetime: {e}")),
    }
    match average_decay(trace, split.threshold, true).and_then(|c| metalens::dynamics::fit_decay(&c)) {
        Ok(fit) => a.decay_fit = Some(fit),
        Err(e) => a.notes.push(format!("decay fit: {e}")),
    }
    Ok((a, Some(occ)))
}
