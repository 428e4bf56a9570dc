use super::DynamicsError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Generator for trace `index` under `seed`: one ChaCha stream per trace so
/// parallel runs never share state.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleTiming {
    pub prep_s: f64,
    pub probe_s: f64,
    pub bin_s: f64,
}

impl Default for CycleTiming {
    fn default() -> Self {
        Self {
            prep_s: 2.0,
            probe_s: 2.0,
            bin_s: 0.05,
        }
    }
}

impl CycleTiming {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.bin_s > 0.0 && self.bin_s.is_finite()) {
            return Err(DynamicsError::InvalidParameter(format!("bin width {} s", self.bin_s)));
        }
        if !(self.prep_s >= 0.0 && self.prep_s.is_finite()) {
            return Err(DynamicsError::InvalidParameter(format!("prep duration {} s", self.prep_s)));
        }
        let ratio = self.probe_s / self.bin_s;
        if !(ratio >= 0.5) || (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return Err(DynamicsError::InvalidParameter(format!(
                "probe window {} s is not a whole number of {} s bins",
                self.probe_s, self.bin_s
            )));
        }
        Ok(())
    }

    pub fn bins_per_cycle(&self) -> usize {
        (self.probe_s / self.bin_s).round() as usize
    }

    pub fn cycle_s(&self) -> f64 {
        self.prep_s + self.probe_s
    }

    /// Start time of recorded bin `index`, measured from the first cycle.
    pub fn bin_start(&self, index: usize) -> f64 {
        let per = self.bins_per_cycle();
        let (cycle, j) = (index / per, index % per);
        cycle as f64 * self.cycle_s() + self.prep_s + j as f64 * self.bin_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsParams {
    /// Loading rate during preparation, 1/s.
    pub load_rate_s: f64,
    /// Loading rate during the probe window, 1/s.
    #[serde(default)]
    pub probe_load_rate_s: f64,
    pub lifetime_s: f64,
    /// Detected single-atom count rate, counts/s.
    pub atom_rate_s: f64,
    pub background_rate_s: f64,
    #[serde(default = "default_true")]
    pub blockade: bool,
    #[serde(default)]
    pub initial_atoms: u32,
}

fn default_true() -> bool {
    true
}

impl DynamicsParams {
    /// Metalens tweezer: 1 background and 16.3 total counts per 50 ms bin.
    pub fn metalens_preset() -> Self {
        Self {
            load_rate_s: 0.5,
            probe_load_rate_s: 0.0,
            lifetime_s: 1.0,
            atom_rate_s: 306.0,
            background_rate_s: 20.0,
            blockade: true,
            initial_atoms: 0,
        }
    }

    /// Objective tweezer: 3 background and 59.9 total counts per 50 ms bin.
    pub fn objective_preset() -> Self {
        Self {
            atom_rate_s: 1138.0,
            background_rate_s: 60.0,
            ..Self::metalens_preset()
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let rates = [
            ("load_rate_s", self.load_rate_s),
            ("probe_load_rate_s", self.probe_load_rate_s),
            ("atom_rate_s", self.atom_rate_s),
            ("background_rate_s", self.background_rate_s),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DynamicsError::InvalidParameter(format!("{name} = {v}")));
            }
        }
        // τ = ∞ is allowed: no loss
        if !(self.lifetime_s > 0.0) {
            return Err(DynamicsError::InvalidParameter(format!("lifetime_s = {}", self.lifetime_s)));
        }
        if self.blockade && self.initial_atoms > 1 {
            return Err(DynamicsError::InvalidParameter(
                "blockade allows at most one initial atom".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceSource {
    Simulated,
    Ingested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelegraphTrace {
    pub timing: CycleTiming,
    /// Probe-window counts, cycle after cycle.
    pub counts: Vec<u64>,
    pub seed: Option<u64>,
    pub source: TraceSource,
}

impl TelegraphTrace {
    pub fn new(timing: CycleTiming, counts: Vec<u64>, seed: Option<u64>, source: TraceSource) -> Result<Self, DynamicsError> {
        timing.validate()?;
        if counts.len() % timing.bins_per_cycle() != 0 {
            return Err(DynamicsError::InvalidParameter(format!(
                "{} bins is not a whole number of {}-bin cycles",
                counts.len(),
                timing.bins_per_cycle()
            )));
        }
        Ok(Self {
            timing,
            counts,
            seed,
            source,
        })
    }

    pub fn bins_per_cycle(&self) -> usize {
        self.timing.bins_per_cycle()
    }

    pub fn cycles(&self) -> usize {
        self.counts.len() / self.bins_per_cycle()
    }

    pub fn cycle(&self, c: usize) -> &[u64] {
        let n = self.bins_per_cycle();
        &self.counts[c * n..(c + 1) * n]
    }

    pub fn bin_start(&self, index: usize) -> f64 {
        self.timing.bin_start(index)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Simulator ground truth for each recorded bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenState {
    /// Time-averaged atom number over the bin.
    pub mean_atoms: Vec<f64>,
    /// Atom number at the start of each probe window.
    pub probe_start_atoms: Vec<u32>,
}

impl HiddenState {
    /// Majority-occupied bins.
    pub fn occupied(&self) -> Vec<bool> {
        self.mean_atoms.iter().map(|&m| m >= 0.5).collect()
    }
}

struct Chain<'a> {
    params: &'a DynamicsParams,
    atoms: u32,
}

impl Chain<'_> {
    fn load_rate(&self, base: f64) -> f64 {
        if self.params.blockade && self.atoms >= 1 {
            0.0
        } else {
            base
        }
    }

    /// Advances by `duration` with loading rate `load`; returns `∫n dt`.
    fn advance<R: Rng + ?Sized>(&mut self, duration: f64, load: f64, rng: &mut R) -> f64 {
        let mut left = duration;
        let mut integral = 0.0;
        loop {
            let up = self.load_rate(load);
            let down = if self.params.lifetime_s.is_finite() {
                self.atoms as f64 / self.params.lifetime_s
            } else {
                0.0
            };
            let total = up + down;
            let wait = if total > 0.0 {
                rng.sample::<f64, _>(Exp1) / total
            } else {
                f64::INFINITY
            };
            if wait >= left {
                integral += self.atoms as f64 * left;
                return integral;
            }
            integral += self.atoms as f64 * wait;
            left -= wait;
            if rng.random::<f64>() * total < up {
                self.atoms += 1;
            } else {
                self.atoms -= 1;
            }
        }
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
    } else {
        0
    }
}

fn run<R: Rng + ?Sized>(
    params: &DynamicsParams,
    timing: &CycleTiming,
    cycles: usize,
    rng: &mut R,
) -> (Vec<u64>, HiddenState) {
    let per = timing.bins_per_cycle();
    let mut chain = Chain {
        params,
        atoms: params.initial_atoms,
    };
    let mut counts = Vec::with_capacity(cycles * per);
    let mut mean_atoms = Vec::with_capacity(cycles * per);
    let mut probe_start_atoms = Vec::with_capacity(cycles);
    for _ in 0..cycles {
        chain.advance(timing.prep_s, params.load_rate_s, rng);
        probe_start_atoms.push(chain.atoms);
        for _ in 0..per {
            let occupied = chain.advance(timing.bin_s, params.probe_load_rate_s, rng);
            let mean = params.atom_rate_s * occupied + params.background_rate_s * timing.bin_s;
            counts.push(poisson(mean, rng));
            mean_atoms.push(occupied / timing.bin_s);
        }
    }
    (
        counts,
        HiddenState {
            mean_atoms,
            probe_start_atoms,
        },
    )
}

/// Simulates `cycles` prep/probe cycles on stream 0 of `seed`.
pub fn simulate_trace(
    params: &DynamicsParams,
    timing: &CycleTiming,
    cycles: usize,
    seed: u64,
) -> Result<TelegraphTrace, DynamicsError> {
    simulate_trace_with_state(params, timing, cycles, seed, 0).map(|(t, _)| t)
}

pub fn simulate_trace_with_state(
    params: &DynamicsParams,
    timing: &CycleTiming,
    cycles: usize,
    seed: u64,
    stream: u64,
) -> Result<(TelegraphTrace, HiddenState), DynamicsError> {
    params.validate()?;
    timing.validate()?;
    let mut rng = stream_rng(seed, stream);
    let (counts, hidden) = run(params, timing, cycles, &mut rng);
    let trace = TelegraphTrace {
        timing: *timing,
        counts,
        seed: Some(seed),
        source: TraceSource::Simulated,
    };
    Ok((trace, hidden))
}

/// Independent traces on streams `0..n`, in index order.
pub fn simulate_traces(
    params: &DynamicsParams,
    timing: &CycleTiming,
    cycles: usize,
    seed: u64,
    n: usize,
) -> Result<Vec<(TelegraphTrace, HiddenState)>, DynamicsError> {
    params.validate()?;
    timing.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|k| simulate_trace_with_state(params, timing, cycles, seed, k))
        .collect()
}
