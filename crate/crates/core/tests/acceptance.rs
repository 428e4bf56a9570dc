//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Criteria 2 and 3 are known to be unattainable as stated (non-paraxial
//! correction of the exact propagator; 1/e² radius of the Airy pattern). They
//! print FAIL with the measured values. The process exits nonzero only when a
//! criterion outside that set fails.

use metalens::dynamics::*;
use metalens::fit::{erf_model, fit_erf};
use metalens::lens::{Illumination, LensPrescription};
use metalens::polarization::{converted_phase, nanobrick_element};
use metalens::propagation::*;
use metalens::tweezer::*;
use rand::Rng;
use rand_distr::Exp1;
use std::f64::consts::{PI, TAU};
use std::time::Instant;

const KNOWN_RED: [usize; 2] = [2, 3];

struct Gate {
    outcomes: Vec<(usize, bool)>,
}

impl Gate {
    fn report(&mut self, n: usize, name: &str, pass: bool, detail: String) {
        println!("criterion {n:>2} {}  {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.outcomes.push((n, pass));
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn second_moment_width(field: &SampledField) -> f64 {
    let (mut s, mut sx) = (0.0, 0.0);
    for ((_, i), v) in field.data.indexed_iter() {
        let x = field.x(i);
        s += v.norm_sqr();
        sx += v.norm_sqr() * x * x;
    }
    2.0 * (sx / s).sqrt()
}

fn criterion_1(g: &mut Gate) {
    let zr = gaussian_reference_zr(1.33e-6, 852e-9);
    g.report(
        1,
        "Gaussian reference Rayleigh length",
        (zr - 6.52e-6).abs() <= 0.01e-6,
        format!("Z_R = {:.4} µm (6.52 ± 0.01 µm)", zr * 1e6),
    );
}

fn criterion_2(g: &mut Gate) {
    let lambda = 852e-9;
    let w0 = 5.0 * lambda;
    let (n, pitch) = (512, lambda / 4.0);
    let src = GaussianBeam::new(w0, lambda, 0.0).sample(n, pitch, 0.0);
    let zr = gaussian_reference_zr(w0, lambda);
    let measure = |t: TransferFunction| {
        let out = AngularSpectrum::with_transfer(&src, t).field_at(zr);
        (
            rel(out.on_axis_intensity() / src.on_axis_intensity(), 0.5),
            rel(second_moment_width(&out) / second_moment_width(&src), 2f64.sqrt()),
            rel(out.power(), src.power()),
        )
    };
    let (i_err, w_err, p_err) = measure(TransferFunction::Exact);
    let (pi_err, pw_err, pp_err) = measure(TransferFunction::Paraxial);
    g.report(
        2,
        "Gaussian propagator oracle (exact kernel)",
        i_err < 1e-6 && w_err < 1e-6 && p_err < 1e-10,
        format!(
            "on-axis halving err {i_err:.2e}, √2 width err {w_err:.2e} (need < 1e-6), power err {p_err:.2e} (need < 1e-10); \
             non-paraxial term 2/(k·w0)² = {:.2e}; paraxial kernel: {pi_err:.2e}, {pw_err:.2e}, {pp_err:.2e}",
            2.0 / (TAU / lambda * w0).powi(2)
        ),
    );
}

fn criterion_3(g: &mut Gate) {
    let presc = LensPrescription::desk_scale();
    let lambda = 852e-9;
    let (d, f) = (presc.diameter_m, presc.focal_length_m);
    let grid = GridSpec::for_aperture(d, 0.2e-6);
    let waist = |ill: Illumination| {
        let field = ideal_lens_field(f, d, lambda, ill, &grid).expect("aperture field");
        let stack = scan_axial(&field, f - 4e-6, f + 4e-6, 33).expect("scan");
        focal_metrics(&stack).expect("metrics").waist_m
    };
    let flat = waist(Illumination::FlatTop);
    let gauss = waist(Illumination::Gaussian { radius_m: presc.radius_m() });
    let airy_zero = 0.61 * lambda / presc.numerical_aperture();
    g.report(
        3,
        "ideal-lens focal spot, desk scale NA 0.46",
        (0.8e-6..=1.2e-6).contains(&flat) && gauss > flat,
        format!(
            "flat-top w0 = {:.3} µm (need 0.8–1.2 µm; Airy 1/e² radius 0.411λ/NA = {:.3} µm, first zero {:.3} µm); \
             Gaussian-illumination w0 = {:.3} µm > flat-top: {}",
            flat * 1e6,
            0.411 * lambda / presc.numerical_aperture() * 1e6,
            airy_zero * 1e6,
            gauss * 1e6,
            gauss > flat
        ),
    );
}

fn criterion_4(g: &mut Gate) {
    let mut worst: f64 = 0.0;
    for k in 0..64 {
        let theta = -PI + k as f64 * TAU / 64.0 + 0.013;
        let m = nanobrick_element(theta, 0.8, 0.5).expect("element");
        let d = (converted_phase(&m) - 2.0 * theta).rem_euclid(TAU);
        worst = worst.max(d.min(TAU - d));
    }
    g.report(
        4,
        "geometric-phase law over 64 rotations",
        worst < 1e-10,
        format!("max |arg − 2θ| mod 2π = {worst:.2e} (need < 1e-10)"),
    );
}

fn criterion_5(g: &mut Gate) {
    let t = trap_parameters(&TrapInputs::measured_metalens(), &AtomSpecies::rb87(), PotentialModel::default())
        .expect("trap");
    g.report(
        5,
        "trap depth at 15.9 mW, ζ 0.33, w0 1.33 µm",
        (0.7..=1.0).contains(&t.depth_mk),
        format!("|U0|/k_B = {:.3} mK (need 0.7–1.0 mK)", t.depth_mk),
    );
}

fn criterion_6(g: &mut Gate) {
    let r = count_ratio(&CollectionModel::metalens_preset(), &CollectionModel::objective_preset()).expect("ratio");
    let measured = 16.3 / 59.9;
    g.report(
        6,
        "count-ratio bookkeeping",
        (r - 0.242).abs() <= 0.005 && rel(r, 0.23) < 0.06 && rel(r, measured) < 0.15,
        format!(
            "ratio = {r:.4} (0.242 ± 0.005); vs 0.23: {:.1}% (< 6%); vs 16.3/59.9 = {measured:.3}: {:.1}% (< 15%)",
            100.0 * rel(r, 0.23),
            100.0 * rel(r, measured)
        ),
    );
}

fn criterion_7(g: &mut Gate) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, params, target, tol, seed) in [
        ("metalens", DynamicsParams::metalens_preset(), 16.3, 0.4, 1),
        ("objective", DynamicsParams::objective_preset(), 59.9, 1.2, 2),
    ] {
        let (trace, hidden) =
            simulate_trace_with_state(&params, &CycleTiming::default(), 2500, seed, 0).expect("simulate");
        let truth = hidden.occupied();
        let occupied = truth.iter().filter(|&&b| b).count();
        let summary = histogram(&trace, 0).expect("histogram").summary;
        match summary.two_peak() {
            Some(s) => {
                let acc = threshold_classify(&trace, s.threshold).accuracy(&truth);
                pass &= (s.atom_mean - target).abs() <= tol && acc > 0.99 && occupied >= 10_000;
                parts.push(format!(
                    "{name}: atom peak {:.2} ({target} ± {tol}), accuracy {:.4} (> 0.99), {occupied} occupied bins",
                    s.atom_mean, acc
                ));
            }
            None => {
                pass = false;
                parts.push(format!("{name}: no atom peak"));
            }
        }
    }
    g.report(7, "telegraph statistics", pass, parts.join("; "));
}

struct Tally {
    rel_errors: Vec<f64>,
    stds: Vec<f64>,
}

impl Tally {
    fn new() -> Self {
        Self {
            rel_errors: Vec::new(),
            stds: Vec::new(),
        }
    }

    fn push(&mut self, e: &LifetimeEstimate, tau: f64) {
        self.rel_errors.push(e.tau_s / tau - 1.0);
        self.stds.push(e.std_s.unwrap_or(f64::INFINITY) / tau);
    }

    fn median_abs(&self) -> f64 {
        let mut v: Vec<f64> = self.rel_errors.iter().map(|x| x.abs()).collect();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    fn bias(&self) -> f64 {
        self.rel_errors.iter().sum::<f64>() / self.rel_errors.len() as f64
    }

    fn ci_half(&self) -> f64 {
        1.96 * self.stds.iter().sum::<f64>() / self.stds.len() as f64
    }

    fn ok(&self) -> bool {
        self.median_abs() < 0.10 && self.bias().abs() < self.ci_half()
    }

    fn line(&self, label: &str) -> String {
        format!(
            "{label}: median |err| {:.1}%, bias {:+.1}% (CI ±{:.1}%)",
            100.0 * self.median_abs(),
            100.0 * self.bias(),
            100.0 * self.ci_half()
        )
    }
}

/// First cycles of `occ` holding at least `n` dwells.
fn first_dwells(occ: &OccupancySequence, n: usize) -> Option<OccupancySequence> {
    let all = dwells(occ);
    let last = all.get(n - 1)?;
    let cycles = last.cycle + 1;
    Some(OccupancySequence {
        bins: occ.bins[..cycles * occ.bins_per_cycle].to_vec(),
        bins_per_cycle: occ.bins_per_cycle,
        bin_s: occ.bin_s,
    })
}

fn criterion_8(g: &mut Gate) {
    const DWELLS: usize = 500;
    const SEEDS: u64 = 25;
    let mut pass = true;
    let mut parts = Vec::new();
    for tau in [0.1, 1.0] {
        for (label, window) in [("uncensored", f64::INFINITY), ("50% censored", tau * 2f64.ln())] {
            let mut t = Tally::new();
            for seed in 0..SEEDS {
                let mut rng = stream_rng(seed, 0);
                let (d, c): (Vec<f64>, Vec<bool>) = (0..DWELLS)
                    .map(|_| {
                        let x = tau * rng.sample::<f64, _>(Exp1);
                        if x > window { (window, true) } else { (x, false) }
                    })
                    .unzip();
                t.push(&exponential_mle_censored(&d, &c).expect("estimate"), tau);
            }
            pass &= t.ok();
            parts.push(t.line(&format!("τ={tau} s synthetic dwells, {label}")));
        }
        let mut trace_cases = vec![("trace, 2 s window", CycleTiming::default())];
        if tau == 1.0 {
            trace_cases.push((
                "trace, 0.7 s window (≈50% censored)",
                CycleTiming {
                    probe_s: 0.7,
                    ..CycleTiming::default()
                },
            ));
        }
        for (label, timing) in trace_cases {
            let params = DynamicsParams {
                lifetime_s: tau,
                load_rate_s: 5.0,
                ..DynamicsParams::metalens_preset()
            };
            let mut t = Tally::new();
            let mut censored = 0.0;
            for seed in 0..SEEDS {
                let trace = simulate_trace(&params, &timing, 2500, 100 + seed).expect("simulate");
                let split = histogram(&trace, 0).expect("histogram").summary;
                let s = split.two_peak().expect("atom peak");
                let occ = threshold_classify(&trace, s.threshold).bridge_gaps(1);
                let occ = first_dwells(&occ, DWELLS).expect("enough dwells");
                let e = dwell_time_lifetime(&occ).expect("estimate");
                censored += e.censored as f64 / (e.censored + e.complete) as f64 / SEEDS as f64;
                t.push(&e, tau);
            }
            pass &= t.ok();
            parts.push(format!("{} [{:.0}% censored]", t.line(&format!("τ={tau} s {label}")), 100.0 * censored));
        }
    }
    g.report(
        8,
        "lifetime estimator at 500 dwells (25 seeds each)",
        pass,
        parts.join("; "),
    );
}

fn criterion_9(g: &mut Gate) {
    let powers: Vec<f64> = (0..13).map(|k| 8e-3 + k as f64 * 1e-3).collect();
    let (p0, sigma) = (13e-3, 1.2e-3);
    let cases = [
        ("loading probability", [0.55, p0, sigma, 0.02], CurveNoise::Binomial { trials: 200 }),
        ("lifetime vs P", [0.9, p0, sigma, 0.1], CurveNoise::Gaussian { sigma: 0.03 }),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, (label, truth, noise)) in cases.iter().enumerate() {
        let mut errs = Vec::new();
        for seed in 0..100 {
            let pts = sample_erf_curve(truth, &powers, *noise, seed, k as u64).expect("sample");
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            match fit_erf(&x, &y) {
                Ok(f) => errs.push((f.values[1] - p0).abs()),
                Err(_) => errs.push(f64::INFINITY),
            }
        }
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        errs.sort_by(f64::total_cmp);
        pass &= worst < sigma / 2.0;
        parts.push(format!(
            "{label}: max |ΔP0| {:.3} mW, median {:.3} mW (need < σ/2 = {:.2} mW)",
            worst * 1e3,
            errs[50] * 1e3,
            sigma / 2.0 * 1e3
        ));
    }
    let sat = erf_model(15.9e-3, &[1.0, p0, sigma, 0.0]);
    pass &= sat > 0.97;
    parts.push(format!("generator at 15.9 mW reaches {:.1}% of saturation", 100.0 * sat));
    g.report(9, "erf saturation fit over 100 seeds", pass, parts.join("; "));
}

fn criterion_10(g: &mut Gate) {
    let cfg = BiasSweepConfig::default();
    let mut pass = (cfg.tau_max_s / cfg.tau_floor_s - 10.0).abs() < 1e-12;
    let mut parts = Vec::new();
    let mut results = Vec::new();
    for (k, p) in [14.0e-3, 16.3e-3, 18.6e-3].into_iter().enumerate() {
        match bias_sweep(&cfg, p, 2024, 1000 * k as u64) {
            Ok(r) => {
                let err = (r.fit.optimal_bias() - r.b_opt_true_t).abs() / GAUSS;
                pass &= err < 0.02 && !r.fit.extrapolated;
                parts.push(format!(
                    "P={:.1} mW: B_opt {:.4} G (true {:.4} G, err {:.4} G)",
                    p * 1e3,
                    r.fit.optimal_bias() / GAUSS,
                    r.b_opt_true_t / GAUSS,
                    err
                ));
                results.push(r);
            }
            Err(e) => {
                pass = false;
                parts.push(format!("P={:.1} mW: {e}", p * 1e3));
            }
        }
    }
    if results.len() == 3 {
        let line = optimal_bias_trend(&results).expect("line");
        pass &= line.slope > 0.0;
        parts.push(format!(
            "B_opt(P) slope {:.4} G/mW (> 0), intercept {:.4} ± {:.4} G",
            line.slope / GAUSS * 1e-3,
            line.intercept / GAUSS,
            line.intercept_std / GAUSS
        ));
    }
    g.report(10, "bias-lifetime pipeline", pass, parts.join("; "));
}

fn criterion_11(g: &mut Gate) {
    let (probe, r1, bin) = (2.0, 306.0, 0.05);
    let taus: Vec<f64> = (0..=60).map(|k| 10f64.powf(-2.0 + k as f64 * 0.1)).collect();
    let counts: Vec<f64> = taus.iter().map(|&t| lifetime_count_consistency(t, probe, r1, bin)).collect();
    let monotone = counts.windows(2).all(|w| w[1] > w[0]);
    let limit = lifetime_count_consistency(1e4 * probe, probe, r1, bin);
    let approach = rel(limit, r1 * bin);
    g.report(
        11,
        "count–lifetime consistency",
        monotone && approach < 1e-4,
        format!(
            "monotone over τ = 0.01–10⁴ s: {monotone}; at τ = 10⁴·T: {:.4} vs r1·bin = {:.4} (rel {:.1e})",
            limit,
            r1 * bin,
            approach
        ),
    );
}

fn main() {
    let start = Instant::now();
    let mut g = Gate { outcomes: Vec::new() };
    let criteria: [fn(&mut Gate); 11] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
        criterion_11,
    ];
    for c in criteria {
        c(&mut g);
    }
    let passed = g.outcomes.iter().filter(|(_, p)| *p).count();
    let unexpected: Vec<usize> = g
        .outcomes
        .iter()
        .filter(|(n, p)| !p && !KNOWN_RED.contains(n))
        .map(|(n, _)| *n)
        .collect();
    println!(
        "acceptance: {passed}/{} PASS in {:.1} s; known-red criteria {:?}",
        g.outcomes.len(),
        start.elapsed().as_secs_f64(),
        KNOWN_RED
    );
    if !unexpected.is_empty() {
        println!("acceptance: unexpected FAIL in criteria {unexpected:?}");
        std::process::exit(1);
    }
}
