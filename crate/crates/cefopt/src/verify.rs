//! Offline acceptance suite.
//!
//! Thirteen checks pinning the exact counterexample trajectories, the
//! proof-derived invariants, the rate exponents, and the reduction
//! identities. Each check returns a [`CriterionOutcome`] with a measured
//! detail string; the `acceptance` integration test asserts them and the
//! CLI `verify` subcommand prints the table.

use std::time::Instant;

use rand::Rng;

use crate::algorithms::{self, AlgorithmConfig, AlgorithmKind, Projection};
use crate::compressors::{contraction_defect, CompressorSpec};
use crate::linalg::{self, norm_sq, Matrix, Vector};
use crate::oracles::StochasticConfig;
use crate::parallel::{map_jobs, JOBS_AUTO};
use crate::problems::{
    gen_synthetic_l1, make_l1_toy, make_neyman_pearson, make_smooth_quadratic, make_worst_case,
    SmoothQuadraticParams, SyntheticGenParams, WorstCaseParams,
};
use crate::rng::{stream, StreamKind};
use crate::simulator::SimOptions;
use crate::theory;

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:02} {:<28} {}  ({:.2}s)  {}",
            self.id,
            self.name,
            if self.passed { "pass" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

fn outcome(
    id: usize,
    name: &'static str,
    start: Instant,
    passed: bool,
    detail: String,
) -> CriterionOutcome {
    CriterionOutcome { id, name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

const TOY_T: usize = 1000;

fn toy_gamma() -> f64 {
    1.0 / (TOY_T as f64).sqrt()
}

fn toy_config(kind: AlgorithmKind) -> AlgorithmConfig {
    AlgorithmConfig {
        uplink: CompressorSpec::top_k(1),
        ..AlgorithmConfig::new(kind, toy_gamma(), TOY_T)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Criterion 1: with Top-1 compression the plain compressed subgradient
/// method never moves the toy gap off `1 + γ/2`.
pub fn c01_cgd_flat() -> CriterionOutcome {
    let start = Instant::now();
    let gamma = toy_gamma();
    let p = make_l1_toy(gamma).unwrap();
    let rec = algorithms::run(&p, &toy_config(AlgorithmKind::Cgd), &SimOptions::default()).unwrap();
    let expected = 1.0 + gamma / 2.0;
    let worst = rec.f_gap.iter().map(|g| (g - expected).abs()).fold(0.0f64, f64::max);
    let passed = rec.f_gap.len() == TOY_T && worst <= 1e-12;
    outcome(
        1,
        "cgd_flat_counterexample",
        start,
        passed,
        format!("max |gap − (1+γ/2)| = {worst:.3e}"),
    )
}

/// Criterion 2: EF21 on the same toy diverges linearly, gap `1 + γ/2 + tγ`.
pub fn c02_ef21_divergence() -> CriterionOutcome {
    let start = Instant::now();
    let gamma = toy_gamma();
    let p = make_l1_toy(gamma).unwrap();
    let cfg = AlgorithmConfig {
        ef21_v0: p.ef21_estimator_init.clone(),
        ..toy_config(AlgorithmKind::Ef21)
    };
    let rec = algorithms::run(&p, &cfg, &SimOptions::default()).unwrap();
    let worst = rec
        .f_gap
        .iter()
        .enumerate()
        .map(|(t, g)| (g - (1.0 + gamma / 2.0 + t as f64 * gamma)).abs())
        .fold(0.0f64, f64::max);
    let passed = rec.f_gap.len() == TOY_T && worst <= 1e-9 && !rec.diverged;
    outcome(
        2,
        "ef21_linear_divergence",
        start,
        passed,
        format!("max |gap − (1+γ/2+tγ)| = {worst:.3e}"),
    )
}

/// Criterion 3: Safe-EF converges on the toy: averaged-output gap within
/// `10·MR/√T` and the running minimum dips below 0.5.
pub fn c03_safe_ef_toy() -> CriterionOutcome {
    let start = Instant::now();
    let gamma = toy_gamma();
    let p = make_l1_toy(gamma).unwrap();
    let rec =
        algorithms::run(&p, &toy_config(AlgorithmKind::SafeEf), &SimOptions::default()).unwrap();
    let budget = 10.0 * p.m_bound * p.radius.unwrap() / (TOY_T as f64).sqrt();
    let out_gap = p.f_mean(rec.output()) - p.f_star.unwrap();
    let run_min = rec.min_f_gap();
    let passed = out_gap <= budget && run_min < 0.5;
    outcome(
        3,
        "safe_ef_toy_convergence",
        start,
        passed,
        format!("gap(x̄) = {out_gap:.4} ≤ {budget:.4}, min gap = {run_min:.4}"),
    )
}

/// Criterion 4: Top-K contraction holds per realization; Rand-K meets the
/// `(1 − k/d)` energy identity exactly in expectation (full enumeration).
pub fn c04_contractiveness() -> CriterionOutcome {
    let start = Instant::now();
    let mut rng = stream(44, StreamKind::Generator, 7);
    let mut worst_slack = f64::NEG_INFINITY;
    let mut checks = 0usize;
    for &d in &[2usize, 10, 100] {
        let mut ks = vec![1, (d / 10).max(1), d];
        ks.dedup();
        for k in ks {
            let spec = CompressorSpec::top_k(k);
            for _ in 0..1000 {
                let x: Vector = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let out = spec.compress(&x, &mut rng).unwrap();
                let slack = contraction_defect(&x, &out) - (1.0 - k as f64 / d as f64);
                worst_slack = worst_slack.max(slack);
                checks += 1;
            }
        }
    }
    let deterministic_ok = worst_slack <= 1e-12;

    let mut worst_enum = 0.0f64;
    for d in 2..=6usize {
        for k in 1..=d {
            let spec = CompressorSpec::rand_k(k, false);
            let x: Vector = (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let masks = combinations(d, k);
            let avg = masks
                .iter()
                .map(|m| {
                    let out = spec.compress_with_mask(&x, m).unwrap();
                    contraction_defect(&x, &out) * norm_sq(&x)
                })
                .sum::<f64>()
                / masks.len() as f64;
            worst_enum = worst_enum.max((avg - (1.0 - k as f64 / d as f64) * norm_sq(&x)).abs());
        }
    }
    let passed = deterministic_ok && worst_enum <= 1e-12;
    outcome(
        4,
        "compressor_contractiveness",
        start,
        passed,
        format!(
            "{checks} Top-K draws, worst slack {worst_slack:.1e}; Rand-K enum err {worst_enum:.1e}"
        ),
    )
}

fn combinations(d: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(i + 1, d, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, d, k, &mut Vec::new(), &mut out);
    out
}

fn buffer_run() -> (crate::problems::ProblemInstance, crate::simulator::RunRecord, f64) {
    let p = gen_synthetic_l1(&SyntheticGenParams { n: 10, d: 100, s: 1.0, zeta: 1e-3, seed: 1105 })
        .unwrap();
    let delta = 0.1;
    let (gamma, _) = algorithms::theoretical_params(p.radius.unwrap(), p.m_bound, delta, 1.0, 1000);
    let cfg = AlgorithmConfig {
        uplink: CompressorSpec::top_k(10),
        seed: 5,
        ..AlgorithmConfig::new(AlgorithmKind::SafeEf, gamma, 1000)
    };
    let rec = algorithms::run(&p, &cfg, &SimOptions::default()).unwrap();
    (p, rec, delta)
}

/// Criterion 5: along a Safe-EF run with a deterministic compressor the
/// averaged error buffer stays below `4(1−δ)/δ²·M²`.
pub fn c05_error_buffer_bound() -> CriterionOutcome {
    let start = Instant::now();
    let (p, rec, delta) = buffer_run();
    let bound = theory::bounds(p.radius.unwrap(), p.m_bound, delta, 1.0, 1000).error_buffer_bound;
    let observed = rec.max_err_mean_norm_sq.unwrap();
    let passed = observed <= bound + 1e-9;
    outcome(
        5,
        "error_buffer_bound",
        start,
        passed,
        format!("max ‖ē‖² = {observed:.3} ≤ {bound:.3}"),
    )
}

/// Criterion 6: the virtual iterate obeys its one-step recursion to 1e−9
/// every round of the same run.
pub fn c06_virtual_iterate() -> CriterionOutcome {
    let start = Instant::now();
    let (_, rec, _) = buffer_run();
    let residual = rec.max_virtual_residual.unwrap();
    let passed = residual <= 1e-9;
    outcome(6, "virtual_iterate_identity", start, passed, format!("max residual = {residual:.3e}"))
}

fn slope_problem() -> crate::problems::ProblemInstance {
    gen_synthetic_l1(&SyntheticGenParams { n: 10, d: 200, s: 1.0, zeta: 1e-3, seed: 707 }).unwrap()
}

fn synthetic_final_gaps(
    p: &crate::problems::ProblemInstance,
    k: usize,
    t: usize,
    seeds: &[u64],
) -> Vec<f64> {
    let delta = k as f64 / p.d as f64;
    let (gamma, _) = algorithms::theoretical_params(p.radius.unwrap(), p.m_bound, delta, 1.0, t);
    let configs: Vec<AlgorithmConfig> = seeds
        .iter()
        .map(|&seed| AlgorithmConfig {
            uplink: CompressorSpec::top_k(k),
            seed,
            ..AlgorithmConfig::new(AlgorithmKind::SafeEf, gamma, t)
        })
        .collect();
    map_jobs(configs, JOBS_AUTO, |cfg| {
        let rec = algorithms::run(p, &cfg, &SimOptions::default()).unwrap();
        // f* is unknown at ζ > 0 but is ~1e-1 against gaps of order 10:
        // the raw objective stands in for the gap.
        p.f_mean(rec.output())
    })
}

/// Criterion 7: the gap of Safe-EF with the theoretical step size scales as
/// `T^(−1/2)` on the synthetic problem (log-log slope within ±0.15).
pub fn c07_rate_slope() -> CriterionOutcome {
    let start = Instant::now();
    let p = slope_problem();
    let ts = [1000usize, 4000, 16000];
    let seeds = [1u64, 2, 3, 4, 5];
    let medians: Vec<f64> =
        ts.iter().map(|&t| median(synthetic_final_gaps(&p, 20, t, &seeds))).collect();
    let slope = theory::rate_slope(&[1e3, 4e3, 1.6e4], &medians).unwrap();
    let passed = (-0.65..=-0.35).contains(&slope);
    outcome(
        7,
        "rate_slope_synthetic",
        start,
        passed,
        format!("median gaps {medians:.3?}, slope {slope:.3}"),
    )
}

/// Criterion 8: harsher compression degrades the gap roughly like `1/√δ`
/// (directional check: ratio within [1.2, 4.0] for a 4× budget cut).
pub fn c08_delta_degradation() -> CriterionOutcome {
    let start = Instant::now();
    let p = slope_problem();
    let seeds = [1u64, 2, 3, 4, 5];
    let coarse = median(synthetic_final_gaps(&p, 20, 4000, &seeds));
    let fine = median(synthetic_final_gaps(&p, 5, 4000, &seeds));
    let ratio = fine / coarse;
    let passed = (1.2..=4.0).contains(&ratio);
    outcome(8, "delta_degradation", start, passed, format!("gap(k=5)/gap(k=20) = {ratio:.2}"))
}

/// Criterion 9: on the hard instance with shared-randomness Rand-K no
/// method beats the forced gap while any hard coordinate is undiscovered,
/// and coordinate discovery advances at most one index per round.
pub fn c09_lower_bound_instance() -> CriterionOutcome {
    let start = Instant::now();
    let params = WorstCaseParams::new(256, 0.25, 1.0, 1.0);
    let p = make_worst_case(&params, 2).unwrap();
    let d = p.d;
    let k = (d as f64 * params.delta).ceil() as usize;
    let (gamma, c) = algorithms::theoretical_params(1.0, 1.0, params.delta, 1.0, params.t);
    let lower = theory::worst_case_lower_gap(1.0, 1.0, params.delta, params.t);
    let opts = SimOptions { record_iterates: true, record_masks: true, ..SimOptions::default() };

    let mut passed = true;
    let mut details = Vec::new();
    for kind in [AlgorithmKind::SafeEf, AlgorithmKind::Cgd] {
        let cfg = AlgorithmConfig {
            c,
            uplink: CompressorSpec::rand_k(k, true),
            seed: 99,
            ..AlgorithmConfig::new(kind, gamma, params.t)
        };
        let rec = algorithms::run(&p, &cfg, &opts).unwrap();
        let out_prog = theory::prog(rec.output());
        let min_gap = rec.min_f_gap();
        if out_prog < params.t {
            passed &= min_gap >= lower;
        }
        // prog grows by at most one per round, and only when the shared
        // mask carried the newly discovered coordinate.
        let mut chain = rec.iterates.clone().unwrap();
        chain.push(rec.x_final.clone());
        let masks = rec.masks.as_ref().unwrap();
        let mut max_step = 0usize;
        for t in 0..chain.len() - 1 {
            let before = theory::prog(&chain[t]);
            let after = theory::prog(&chain[t + 1]);
            let step = after.saturating_sub(before);
            max_step = max_step.max(step);
            if step > 1 {
                passed = false;
            }
            if step == 1 && !masks[t].contains(&(after - 1)) {
                passed = false;
            }
        }
        details.push(format!(
            "{}: prog(out) = {out_prog}, min gap = {min_gap:.4} ≥ {lower:.4}, max Δprog = {max_step}",
            kind.name()
        ));
    }
    outcome(9, "lower_bound_instance", start, passed, details.join("; "))
}

/// Criterion 10: with noisy constraint estimation and the analysis' batch
/// size, the averaged output violates the constraint by at most `2c` in at
/// least 18 of 20 seeded runs.
pub fn c10_stochastic_feasibility() -> CriterionOutcome {
    let start = Instant::now();
    let base =
        gen_synthetic_l1(&SyntheticGenParams { n: 10, d: 200, s: 1.0, zeta: 0.0, seed: 1010 })
            .unwrap();
    let x_truth = base.x_star.clone().unwrap();
    let b = linalg::norm(&x_truth);
    let a: Vector = x_truth.iter().map(|v| v / b).collect();
    let p = base.with_linear_constraint(a, b).unwrap();

    let t = 2000usize;
    let beta = 0.05;
    let sigma = 0.5;
    let k = p.d / 10;
    let delta = k as f64 / p.d as f64;
    let (gamma, c, n_fv) = algorithms::stochastic_run_params(&p, delta, t, beta, sigma).unwrap();

    let seeds: Vec<u64> = (1..=20).collect();
    let hits: Vec<bool> = map_jobs(seeds, JOBS_AUTO, |seed| {
        let cfg = AlgorithmConfig {
            c,
            uplink: CompressorSpec::top_k(k),
            stochastic: Some(StochasticConfig {
                sigma_fv: sigma,
                n_fv,
                subgrad_batch: None,
                seed: seed << 1,
            }),
            seed,
            ..AlgorithmConfig::new(AlgorithmKind::SafeEf, gamma, t)
        };
        let rec = algorithms::run(&p, &cfg, &SimOptions::default()).unwrap();
        p.g_mean(rec.output()) <= 2.0 * c
    });
    let count = hits.iter().filter(|&&h| h).count();
    let passed = count >= 18;
    outcome(
        10,
        "stochastic_feasibility",
        start,
        passed,
        format!("g(x̄) ≤ 2c in {count}/20 seeds (c = {c:.2}, N_fv = {n_fv})"),
    )
}

/// Criterion 11: the projected estimator method decays like `1/T` on a
/// smooth quadratic over a ball, for both the identity and Top-K.
pub fn c11_projected_smooth_rate() -> CriterionOutcome {
    let start = Instant::now();
    let p = make_smooth_quadratic(&SmoothQuadraticParams {
        n: 4,
        d: 80,
        l_max: 1.0,
        decades: 6.0,
        anchor_scale: 1.0,
        seed: 1111,
    })
    .unwrap();
    let ball = Projection::Ball {
        center: vec![0.0; p.d],
        radius: 2.0 * linalg::norm(p.x_star.as_ref().unwrap()),
    };
    let ts = [1000usize, 4000, 16000];
    let mut passed = true;
    let mut details = Vec::new();
    for (label, spec) in
        [("identity", CompressorSpec::identity()), ("top_k", CompressorSpec::top_k(8))]
    {
        let delta = spec.nominal_delta(p.d);
        let gamma = algorithms::projected_ef21_stepsize(delta, p.l_smooth.unwrap());
        let gaps: Vec<f64> = ts
            .iter()
            .map(|&t| {
                let cfg = AlgorithmConfig {
                    uplink: spec,
                    projection: ball.clone(),
                    ..AlgorithmConfig::new(AlgorithmKind::ProjectedEf21, gamma, t)
                };
                let rec = algorithms::run(&p, &cfg, &SimOptions::default()).unwrap();
                p.f_mean(&rec.x_final) - p.f_star.unwrap()
            })
            .collect();
        let slope = theory::rate_slope(&[1e3, 4e3, 1.6e4], &gaps).unwrap();
        passed &= (-1.3..=-0.7).contains(&slope);
        details.push(format!("{label}: slope {slope:.3}"));
    }
    outcome(11, "projected_ef21_smooth_rate", start, passed, details.join("; "))
}

/// Standalone EF14 reference: `x ← x − γ·(1/n) Σ C(e_i + f_i'(x))` with an
/// independent top-k selection, kept separate from the engine on purpose.
fn reference_ef14_trajectory(
    p: &crate::problems::ProblemInstance,
    gamma: f64,
    k: usize,
    t: usize,
) -> Vec<Vector> {
    fn top_k_ref(x: &[f64], k: usize) -> Vector {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
        let mut out = vec![0.0; x.len()];
        for &i in idx.iter().take(k) {
            out[i] = x[i];
        }
        out
    }
    let mut x = p.x0.clone();
    let mut errs = vec![vec![0.0; p.d]; p.n];
    let mut traj = Vec::with_capacity(t);
    for _ in 0..t {
        traj.push(x.clone());
        let mut mean = vec![0.0; p.d];
        for (i, e) in errs.iter_mut().enumerate() {
            let acc = linalg::add(e, &p.f_subgrad(i, &x));
            let sent = top_k_ref(&acc, k);
            *e = linalg::sub(&acc, &sent);
            linalg::axpy(1.0 / p.n as f64, &sent, &mut mean);
        }
        linalg::axpy(-gamma, &mean, &mut x);
    }
    traj.push(x);
    traj
}

fn reduction_problem() -> crate::problems::ProblemInstance {
    gen_synthetic_l1(&SyntheticGenParams { n: 4, d: 30, s: 1.0, zeta: 1e-3, seed: 1212 }).unwrap()
}

fn reduction_config(kind: AlgorithmKind) -> AlgorithmConfig {
    AlgorithmConfig {
        uplink: CompressorSpec::top_k(3),
        eta: 1.0,
        ..AlgorithmConfig::new(kind, 0.05, 1000)
    }
}

/// Criterion 12: with an identity downlink and no constraints, Safe-EF is
/// EF14 round for round.
pub fn c12_ef14_reduction() -> CriterionOutcome {
    let start = Instant::now();
    let p = reduction_problem();
    let opts = SimOptions { record_iterates: true, ..SimOptions::default() };
    let rec = algorithms::run(&p, &reduction_config(AlgorithmKind::SafeEf), &opts).unwrap();
    let reference = reference_ef14_trajectory(&p, 0.05, 3, 1000);
    let mut chain = rec.iterates.clone().unwrap();
    chain.push(rec.x_final.clone());
    let worst =
        chain.iter().zip(&reference).map(|(a, b)| linalg::dist(a, b)).fold(0.0f64, f64::max);
    let passed = chain.len() == reference.len() && worst <= 1e-12;
    outcome(
        12,
        "ef14_reduction",
        start,
        passed,
        format!("max deviation {worst:.2e} over 10³ rounds"),
    )
}

fn np_toy_data() -> (Matrix, Vec<u8>) {
    let mut rng = stream(1313, StreamKind::Generator, 3);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..60 {
        // Interleave classes so contiguous shards stay mixed.
        let c0: Vector = vec![
            -1.2 + 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal),
            -0.8 + 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal),
        ];
        rows.push(c0);
        labels.push(0u8);
        let c1: Vector = vec![
            1.2 + 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal),
            0.8 + 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal),
        ];
        rows.push(c1);
        labels.push(1u8);
    }
    (Matrix::from_rows(rows), labels)
}

/// Criterion 13: the primal-dual loop collapses onto Safe-EF at zero
/// multiplier, and some (η, λ⁰) preset lands the classification constraint
/// within `c + 0.05`.
pub fn c13_primal_dual_sanity() -> CriterionOutcome {
    let start = Instant::now();
    let p = reduction_problem();
    let opts = SimOptions { record_iterates: true, ..SimOptions::default() };
    let safe = algorithms::run(&p, &reduction_config(AlgorithmKind::SafeEf), &opts).unwrap();
    let pd = algorithms::run(&p, &reduction_config(AlgorithmKind::PrimalDualEf), &opts).unwrap();
    let worst = safe
        .iterates
        .as_ref()
        .unwrap()
        .iter()
        .zip(pd.iterates.as_ref().unwrap())
        .map(|(a, b)| linalg::dist(a, b))
        .fold(0.0f64, f64::max);
    let collapse_ok = worst == 0.0;

    let (features, labels) = np_toy_data();
    let threshold = 0.3;
    let np = make_neyman_pearson(&features, &labels, threshold, 2).unwrap();
    let presets = [(0.5, 0.0), (0.5, 2.0), (0.2, 0.5)];
    let finals: Vec<f64> = presets
        .iter()
        .map(|&(eta, lambda0)| {
            let cfg = AlgorithmConfig {
                uplink: CompressorSpec::top_k(1),
                eta,
                lambda0,
                ..AlgorithmConfig::new(AlgorithmKind::PrimalDualEf, 0.25, 800)
            };
            let rec = algorithms::run(&np, &cfg, &SimOptions::default()).unwrap();
            np.g_mean(&rec.x_final)
        })
        .collect();
    let best = finals.iter().cloned().fold(f64::INFINITY, f64::min);
    let np_ok = best <= 0.05;
    let passed = collapse_ok && np_ok;
    outcome(
        13,
        "primal_dual_sanity",
        start,
        passed,
        format!(
            "λ=0 max deviation {worst:.1e}; best final g = {best:.3} (≤ 0.05 means loss ≤ c+0.05)"
        ),
    )
}

/// Run the full suite in id order.
pub fn run_all() -> Vec<CriterionOutcome> {
    let fns: Vec<fn() -> CriterionOutcome> = vec![
        c01_cgd_flat,
        c02_ef21_divergence,
        c03_safe_ef_toy,
        c04_contractiveness,
        c05_error_buffer_bound,
        c06_virtual_iterate,
        c07_rate_slope,
        c08_delta_degradation,
        c09_lower_bound_instance,
        c10_stochastic_feasibility,
        c11_projected_smooth_rate,
        c12_ef14_reduction,
        c13_primal_dual_sanity,
    ];
    fns.into_iter().map(|f| f()).collect()
}
