use super::{DynamicsError, TelegraphTrace};
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson};
use statrs::function::factorial::ln_factorial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    PoissonMixture,
    Valley,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPeakSummary {
    pub background_mean: f64,
    pub atom_mean: f64,
    /// Bins with counts above this value are classified occupied.
    pub threshold: f64,
    /// Weight of the upper component.
    pub occupancy_fraction: f64,
    pub method: SplitMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HistogramSummary {
    TwoPeak(TwoPeakSummary),
    /// No resolvable atom signal.
    SinglePeak { mean: f64, samples: usize },
}

impl HistogramSummary {
    pub fn two_peak(&self) -> Option<&TwoPeakSummary> {
        match self {
            Self::TwoPeak(s) => Some(s),
            Self::SinglePeak { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountHistogram {
    /// `frequencies.len() + 1` bin edges in counts.
    pub edges: Vec<f64>,
    pub frequencies: Vec<u64>,
    pub summary: HistogramSummary,
}

/// Frequency of each integer count value `0..=max`.
fn integer_table(counts: &[u64]) -> Vec<u64> {
    let max = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut t = vec![0u64; max + 1];
    for &c in counts {
        t[c as usize] += 1;
    }
    t
}

fn poisson_ln(k: usize, lambda: f64, lnf: &[f64]) -> f64 {
    if lambda <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * lambda.ln() - lambda - lnf[k]
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

struct Mixture {
    w_hi: f64,
    lo: f64,
    hi: f64,
    log_likelihood: f64,
}

fn mixture_loglik(table: &[u64], lnf: &[f64], w_hi: f64, lo: f64, hi: f64) -> f64 {
    table
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > 0)
        .map(|(k, &f)| {
            let a = (1.0 - w_hi).ln() + poisson_ln(k, lo, lnf);
            let b = w_hi.ln() + poisson_ln(k, hi, lnf);
            f as f64 * log_add(a, b)
        })
        .sum()
}

fn fit_mixture(table: &[u64], n: u64, sorted: &[u64], lnf: &[f64]) -> Mixture {
    let half = &sorted[..sorted.len().div_ceil(2)];
    let top = &sorted[sorted.len() - sorted.len().div_ceil(10)..];
    let mean = |s: &[u64]| s.iter().sum::<u64>() as f64 / s.len() as f64;
    let mut lo = mean(half).max(1e-3);
    let mut hi = mean(top).max(lo + 1.0);
    let mut w_hi = 0.5;
    let mut ll = mixture_loglik(table, lnf, w_hi, lo, hi);
    for _ in 0..2000 {
        let (mut r_sum, mut r_k) = (0.0, 0.0);
        let mut k_sum = 0.0;
        for (k, &f) in table.iter().enumerate().filter(|(_, &f)| f > 0) {
            let a = (1.0 - w_hi).ln() + poisson_ln(k, lo, lnf);
            let b = w_hi.ln() + poisson_ln(k, hi, lnf);
            let r = (b - log_add(a, b)).exp();
            r_sum += f as f64 * r;
            r_k += f as f64 * r * k as f64;
            k_sum += f as f64 * k as f64;
        }
        let nf = n as f64;
        w_hi = (r_sum / nf).clamp(1e-12, 1.0 - 1e-12);
        hi = if r_sum > 0.0 { r_k / r_sum } else { hi };
        lo = ((k_sum - r_k) / (nf - r_sum).max(1e-300)).max(1e-9);
        let next = mixture_loglik(table, lnf, w_hi, lo, hi);
        let done = (next - ll).abs() <= 1e-12 * ll.abs();
        ll = next;
        if done {
            break;
        }
    }
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
        w_hi = 1.0 - w_hi;
    }
    Mixture {
        w_hi,
        lo,
        hi,
        log_likelihood: ll,
    }
}

fn resolved(lo: f64, hi: f64) -> bool {
    hi - lo > 2.0 * (hi.sqrt() + lo.sqrt())
}

/// Count value where the two weighted Poisson components have equal
/// posterior probability.
fn equal_posterior_threshold(lo: f64, hi: f64, w_hi: f64) -> f64 {
    let k = ((hi - lo) - (w_hi / (1.0 - w_hi)).ln()) / (hi / lo).ln();
    k.clamp(lo, hi).floor() + 0.5
}

fn valley_split(table: &[u64], n: u64) -> Option<TwoPeakSummary> {
    let len = table.len();
    if len < 3 {
        return None;
    }
    let smooth: Vec<f64> = (0..len)
        .map(|k| {
            let a = k.saturating_sub(1);
            let b = (k + 1).min(len - 1);
            table[a..=b].iter().sum::<u64>() as f64 / (b - a + 1) as f64
        })
        .collect();
    let min_mass = (n as f64 * 1e-3).max(10.0);
    let mut best: Option<(usize, f64)> = None;
    for v in 1..len - 1 {
        let left_peak = smooth[..v].iter().cloned().fold(0.0, f64::max);
        let right_peak = smooth[v + 1..].iter().cloned().fold(0.0, f64::max);
        if smooth[v] >= 0.5 * left_peak.min(right_peak) {
            continue;
        }
        let (below, above) = (&table[..=v], &table[v + 1..]);
        let mass_below: u64 = below.iter().sum();
        let mass_above: u64 = above.iter().sum();
        if (mass_below as f64) < min_mass || (mass_above as f64) < min_mass {
            continue;
        }
        let depth = left_peak.min(right_peak) - smooth[v];
        if best.is_none_or(|(_, d)| depth > d) {
            best = Some((v, depth));
        }
    }
    let (v, _) = best?;
    let mean_of = |range: std::ops::Range<usize>| {
        let (s, m) = range.fold((0.0, 0.0), |(s, m), k| (s + (k as u64 * table[k]) as f64, m + table[k] as f64));
        (s / m, m)
    };
    let (lo, _) = mean_of(0..v + 1);
    let (hi, m_hi) = mean_of(v + 1..len);
    if !resolved(lo, hi) {
        return None;
    }
    Some(TwoPeakSummary {
        background_mean: lo,
        atom_mean: hi,
        threshold: v as f64 + 0.5,
        occupancy_fraction: m_hi / n as f64,
        method: SplitMethod::Valley,
    })
}

fn summarize(counts: &[u64]) -> HistogramSummary {
    let n = counts.len() as u64;
    let table = integer_table(counts);
    let lnf: Vec<f64> = (0..table.len() as u64).map(ln_factorial).collect();
    let mean = counts.iter().sum::<u64>() as f64 / n as f64;
    let single = table
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > 0)
        .map(|(k, &f)| f as f64 * poisson_ln(k, mean, &lnf))
        .sum::<f64>();
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let m = fit_mixture(&table, n, &sorted, &lnf);
    let min_w = m.w_hi.min(1.0 - m.w_hi) * n as f64;
    if resolved(m.lo, m.hi) && m.log_likelihood - single > (n as f64).ln() && min_w >= 5.0 {
        return HistogramSummary::TwoPeak(TwoPeakSummary {
            background_mean: m.lo,
            atom_mean: m.hi,
            threshold: equal_posterior_threshold(m.lo, m.hi, m.w_hi),
            occupancy_fraction: m.w_hi,
            method: SplitMethod::PoissonMixture,
        });
    }
    match valley_split(&table, n) {
        Some(s) => HistogramSummary::TwoPeak(s),
        None => HistogramSummary::SinglePeak {
            mean,
            samples: counts.len(),
        },
    }
}

/// Histogram of the trace counts with `bins` equal-width bins (0 for one
/// bin per integer count) and its background/atom split.
pub fn histogram(trace: &TelegraphTrace, bins: usize) -> Result<CountHistogram, DynamicsError> {
    if trace.is_empty() {
        return Err(DynamicsError::EmptyTrace);
    }
    let max = trace.counts.iter().copied().max().unwrap_or(0);
    let width = if bins == 0 {
        1
    } else {
        (max + 1).div_ceil(bins as u64).max(1)
    };
    let nb = ((max + 1).div_ceil(width)) as usize;
    let mut frequencies = vec![0u64; nb];
    for &c in &trace.counts {
        frequencies[(c / width) as usize] += 1;
    }
    let edges = (0..=nb).map(|k| (k as u64 * width) as f64).collect();
    Ok(CountHistogram {
        edges,
        frequencies,
        summary: summarize(&trace.counts),
    })
}

/// Probability that a single bin is misclassified under the fitted
/// two-component model.
pub fn misclassification_probability(s: &TwoPeakSummary) -> f64 {
    let k = s.threshold.floor().max(0.0) as u64;
    let cdf = |lambda: f64| {
        if lambda > 0.0 {
            Poisson::new(lambda).map(|d| d.cdf(k)).unwrap_or(1.0)
        } else {
            1.0
        }
    };
    (1.0 - s.occupancy_fraction) * (1.0 - cdf(s.background_mean)) + s.occupancy_fraction * cdf(s.atom_mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancySequence {
    pub bins: Vec<bool>,
    pub bins_per_cycle: usize,
    pub bin_s: f64,
}

impl OccupancySequence {
    pub fn cycles(&self) -> usize {
        self.bins.len() / self.bins_per_cycle.max(1)
    }

    pub fn cycle(&self, c: usize) -> &[bool] {
        &self.bins[c * self.bins_per_cycle..(c + 1) * self.bins_per_cycle]
    }

    /// A cycle counts as loaded when any probe bin is occupied.
    pub fn cycle_occupancy(&self) -> Vec<bool> {
        (0..self.cycles()).map(|c| self.cycle(c).iter().any(|&b| b)).collect()
    }

    pub fn trap_probability(&self) -> f64 {
        let occ = self.cycle_occupancy();
        if occ.is_empty() {
            return 0.0;
        }
        occ.iter().filter(|&&b| b).count() as f64 / occ.len() as f64
    }

    /// Marks runs of at most `max_gap` empty bins between occupied bins in
    /// the same probe window as occupied. A single low bin inside a dwell is
    /// far more likely a Poisson dropout than a loss followed by reloading,
    /// and left alone each dropout would register as a spurious loss.
    pub fn bridge_gaps(&self, max_gap: usize) -> OccupancySequence {
        let mut out = self.clone();
        if max_gap == 0 {
            return out;
        }
        for c in 0..self.cycles() {
            let base = c * self.bins_per_cycle;
            let bins = &mut out.bins[base..base + self.bins_per_cycle];
            let mut last_occupied: Option<usize> = None;
            for j in 0..bins.len() {
                if bins[j] {
                    if let Some(k) = last_occupied {
                        let gap = j - k - 1;
                        if gap > 0 && gap <= max_gap {
                            bins[k + 1..j].iter_mut().for_each(|b| *b = true);
                        }
                    }
                    last_occupied = Some(j);
                }
            }
        }
        out
    }

    /// Fraction of bins agreeing with `truth`.
    pub fn accuracy(&self, truth: &[bool]) -> f64 {
        let agree = self.bins.iter().zip(truth).filter(|(a, b)| a == b).count();
        agree as f64 / self.bins.len().max(1) as f64
    }
}

pub fn threshold_classify(trace: &TelegraphTrace, threshold: f64) -> OccupancySequence {
    OccupancySequence {
        bins: trace.counts.iter().map(|&c| c as f64 > threshold).collect(),
        bins_per_cycle: trace.bins_per_cycle(),
        bin_s: trace.timing.bin_s,
    }
}
