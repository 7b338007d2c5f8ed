//! Optimization methods on the synchronous round engine.
//!
//! All methods share one round skeleton: an optional scalar constraint
//! exchange, a worker phase (subgradient switch + uplink compression), the
//! server aggregation (ascending worker index, so sums reproduce bitwise),
//! and the downlink. Safe-EF keeps per-worker error buffers `e_i` and a
//! server shadow model `w`; the broadcast model `x` trails `w` through
//! compressed differences. CGD compresses raw subgradients with no memory,
//! EF21 maintains compressed-difference gradient estimators, and the
//! primal-dual variant layers a multiplier ascent on the Safe-EF loop.

use rand_chacha::ChaCha8Rng;

use crate::compressors::{draw_mask, CompressorKind, CompressorSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, norm_sq, Vector};
use crate::oracles::{self, StochasticConfig};
use crate::parallel::map_workers;
use crate::problems::ProblemInstance;
use crate::rng::{stream, StreamKind};
use crate::simulator::{RunRecord, SimOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    SafeEf,
    Cgd,
    Ef21,
    ProjectedEf21,
    PrimalDualEf,
}

impl AlgorithmKind {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::SafeEf => "safe_ef",
            AlgorithmKind::Cgd => "cgd",
            AlgorithmKind::Ef21 => "ef21",
            AlgorithmKind::ProjectedEf21 => "projected_ef21",
            AlgorithmKind::PrimalDualEf => "primal_dual_ef",
        }
    }
}

/// Exact Euclidean projection onto a simple convex set.
#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    None,
    Ball { center: Vector, radius: f64 },
    Box { lower: Vector, upper: Vector },
}

impl Projection {
    pub fn apply(&self, x: Vector) -> Vector {
        match self {
            Projection::None => x,
            Projection::Ball { center, radius } => {
                let dist = linalg::dist(&x, center);
                if dist <= *radius {
                    x
                } else {
                    let scale = radius / dist;
                    x.iter().zip(center).map(|(xi, ci)| ci + (xi - ci) * scale).collect()
                }
            }
            Projection::Box { lower, upper } => {
                x.iter().zip(lower).zip(upper).map(|((xi, lo), hi)| xi.clamp(*lo, *hi)).collect()
            }
        }
    }
}

/// Full description of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    pub kind: AlgorithmKind,
    /// Step size. Zero freezes the model (exercised by edge-case tests).
    pub gamma: f64,
    /// Switching threshold; `INFINITY` disables switching.
    pub c: f64,
    /// Horizon: number of rounds.
    pub t: usize,
    /// Per-worker uplink compressor.
    pub uplink: CompressorSpec,
    /// Server downlink compressor (Safe-EF / primal-dual only; the other
    /// methods broadcast the model uncompressed).
    pub downlink: CompressorSpec,
    /// Dual step size (primal-dual only).
    pub eta: f64,
    /// Initial multiplier (primal-dual only).
    pub lambda0: f64,
    pub stochastic: Option<StochasticConfig>,
    /// EF21 estimator initialization; defaults to `f_i'(x⁰)`.
    pub ef21_v0: Option<Vector>,
    /// Feasible set for the projected method.
    pub projection: Projection,
    pub seed: u64,
}

impl AlgorithmConfig {
    pub fn new(kind: AlgorithmKind, gamma: f64, t: usize) -> Self {
        AlgorithmConfig {
            kind,
            gamma,
            c: f64::INFINITY,
            t,
            uplink: CompressorSpec::identity(),
            downlink: CompressorSpec::identity(),
            eta: 0.0,
            lambda0: 0.0,
            stochastic: None,
            ef21_v0: None,
            projection: Projection::None,
            seed: 0,
        }
    }

    pub fn validate(&self, problem: &ProblemInstance) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidConfig("gamma must be finite and nonnegative".into()));
        }
        if self.t == 0 {
            return Err(Error::InvalidConfig("horizon T must be at least 1".into()));
        }
        if self.c.is_nan() || self.c < 0.0 {
            return Err(Error::InvalidConfig("threshold c must be nonnegative".into()));
        }
        self.uplink.validate(problem.d)?;
        self.downlink.validate(problem.d)?;
        if let Some(s) = &self.stochastic {
            s.validate()?;
        }
        if let Some(v0) = &self.ef21_v0 {
            if v0.len() != problem.d {
                return Err(Error::InvalidConfig("ef21_v0 dimension mismatch".into()));
            }
        }
        match self.kind {
            AlgorithmKind::PrimalDualEf => {
                if self.eta <= 0.0 {
                    return Err(Error::InvalidConfig("primal-dual needs eta > 0".into()));
                }
                if self.lambda0 < 0.0 {
                    return Err(Error::InvalidConfig("lambda0 must be nonnegative".into()));
                }
            }
            AlgorithmKind::Ef21 | AlgorithmKind::ProjectedEf21 if !problem.unconstrained => {
                return Err(Error::Unsupported(
                    "EF21 variants handle unconstrained problems only; \
                     functional constraints need the switching or primal-dual methods"
                        .into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Theoretical step size and switching threshold for Safe-EF with
/// bidirectional compression: `γ = R√(δ_s δ)/(M√T)`, `c = 32RM/√(δ_s δ T)`.
pub fn theoretical_params(r: f64, m: f64, delta: f64, delta_s: f64, t: usize) -> (f64, f64) {
    let gamma = r * (delta_s * delta).sqrt() / (m * (t as f64).sqrt());
    let c = 32.0 * r * m / (delta_s * delta * t as f64).sqrt();
    (gamma, c)
}

/// Stochastic-setting choice (unidirectional): `γ = R√δ/(M√T)` and
/// `c = 128RM(1 + ln(1/β))/√(δT)`.
pub fn stochastic_theoretical_params(
    r: f64,
    m: f64,
    delta: f64,
    t: usize,
    beta: f64,
) -> (f64, f64) {
    let gamma = r * delta.sqrt() / (m * (t as f64).sqrt());
    let c = 128.0 * r * m * (1.0 + (1.0 / beta).ln()) / (delta * t as f64).sqrt();
    (gamma, c)
}

/// Resolve `(γ, c, N_fv)` for a stochastic run on `inst`.
///
/// The batch-size rule needs `c`, and the analysis wants the distance bound
/// inflated to `R² ≥ ‖x⁰ − x*‖² + (σ_fv²/N_fv)/(6M²)`, so this does one
/// fixed-point pass: a provisional `c` from the bare radius sizes the batch,
/// then the inflated radius yields the final `(γ, c)`. The batch stays valid
/// because `c` only grows.
pub fn stochastic_run_params(
    inst: &ProblemInstance,
    delta: f64,
    t: usize,
    beta: f64,
    sigma_fv: f64,
) -> Result<(f64, f64, u64)> {
    let r0 = inst
        .radius
        .ok_or_else(|| Error::InvalidConfig("instance has no distance bound R".into()))?;
    let m = inst.m_bound;
    let (_, c0) = stochastic_theoretical_params(r0, m, delta, t, beta);
    let n_fv = oracles::min_batch_size(sigma_fv, inst.n, c0, beta, t)?;
    let r = (r0 * r0 + sigma_fv * sigma_fv / (n_fv as f64 * 6.0 * m * m)).sqrt();
    let (gamma, c) = stochastic_theoretical_params(r, m, delta, t, beta);
    Ok((gamma, c, n_fv))
}

/// Step size `γ = δ/(2√6·L)` for the projected method on `L`-smooth
/// objectives.
pub fn projected_ef21_stepsize(delta: f64, l: f64) -> f64 {
    delta / (2.0 * 6f64.sqrt() * l)
}

struct WorkerCtx {
    /// Error buffer `e_i` (Safe-EF / primal-dual).
    err: Vector,
    /// Gradient estimator `v_i` (EF21 variants).
    est: Vector,
    rng_comp: ChaCha8Rng,
    rng_fv: ChaCha8Rng,
    rng_sg: ChaCha8Rng,
}

struct UplinkMsg {
    payload: Vector,
    floats: u64,
    f_exact: f64,
    h: Vector,
}

/// Run any configured algorithm. See the per-method wrappers for contracts.
pub fn run(
    problem: &ProblemInstance,
    cfg: &AlgorithmConfig,
    opts: &SimOptions,
) -> Result<RunRecord> {
    cfg.validate(problem)?;
    if opts.stride == 0 {
        return Err(Error::InvalidConfig("stride must be at least 1".into()));
    }
    let n = problem.n;
    let d = problem.d;
    let gamma = cfg.gamma;
    let constrained = !problem.unconstrained;
    let stoch_seed = cfg.stochastic.as_ref().map_or(cfg.seed, |s| s.seed);
    let ef_style = matches!(cfg.kind, AlgorithmKind::SafeEf | AlgorithmKind::PrimalDualEf);
    let ef21_style = matches!(cfg.kind, AlgorithmKind::Ef21 | AlgorithmKind::ProjectedEf21);
    let par = opts.worker_parallel.unwrap_or(n >= 2 && d >= 64);
    let shared_uplink = cfg.uplink.kind == CompressorKind::RandK && cfg.uplink.shared_randomness;

    let mut workers: Vec<WorkerCtx> = (0..n)
        .map(|i| WorkerCtx {
            err: vec![0.0; d],
            est: if ef21_style {
                match &cfg.ef21_v0 {
                    Some(v0) => v0.clone(),
                    None => problem.f_subgrad(i, &problem.x0),
                }
            } else {
                Vec::new()
            },
            rng_comp: stream(cfg.seed, StreamKind::WorkerCompressor, i as u64),
            rng_fv: stream(stoch_seed, StreamKind::WorkerFnNoise, i as u64),
            rng_sg: stream(stoch_seed, StreamKind::WorkerSubgrad, i as u64),
        })
        .collect();
    let mut server_rng = stream(cfg.seed, StreamKind::Server, 0);

    let mut x = problem.x0.clone();
    let mut w = x.clone(); // server shadow model (w⁰ = x⁰)
    let mut v_bar: Vector = if ef21_style {
        let vs: Vec<Vector> = workers.iter().map(|wk| wk.est.clone()).collect();
        linalg::mean_vector(&vs)
    } else {
        Vec::new()
    };
    let mut lambda = cfg.lambda0;
    let mut x_hat = x.clone(); // virtual iterate w − γ ē (error-feedback runs)

    let mut record = RunRecord::new(n, problem.f_star, cfg.clone());
    if cfg.kind == AlgorithmKind::PrimalDualEf {
        record.lambda_trace = Some(Vec::new());
    }
    if opts.record_iterates {
        record.iterates = Some(Vec::new());
    }
    if opts.record_masks {
        record.masks = Some(Vec::new());
    }
    let mut xbar_sum = vec![0.0; d];
    let mut xbar_count: u64 = 0;
    let (mut cum_up, mut cum_down, mut cum_scalar) = (0u64, 0u64, 0u64);
    let mut max_residual = 0.0f64;
    let mut max_err_sq = 0.0f64;

    for t in 0..cfg.t {
        // Counter snapshot: row t reports communication done before round t.
        let snapshot = (cum_up, cum_down, cum_scalar);
        let (mut round_up, mut round_down, mut round_scalar) = (0u64, 0u64, 0u64);

        // Scalar exchange: workers report g_i(x^t), server averages and
        // broadcasts. The switching decision, the recorded value, and the
        // feasibility tally all reuse this one estimate. Primal-dual defers
        // its scalar exchange to after the model update (dual ascent).
        let g_record;
        let in_b;
        if constrained && cfg.kind != AlgorithmKind::PrimalDualEf {
            let reports = map_workers(&mut workers, par, |i, wk| match &cfg.stochastic {
                Some(s) => oracles::noisy_g_value(problem, i, &x, s, &mut wk.rng_fv),
                None => problem.g_value(i, &x),
            });
            round_scalar += n as u64;
            g_record = reports.iter().sum::<f64>() / n as f64;
            in_b = g_record <= cfg.c;
        } else if constrained {
            // Instrumentation only: the primal-dual method never sees this.
            g_record = problem.g_mean(&x);
            in_b = g_record <= cfg.c;
        } else {
            g_record = 0.0;
            in_b = true;
        }

        // Feasible-set averaging uses every round regardless of thinning.
        if in_b {
            linalg::axpy(1.0, &x, &mut xbar_sum);
            xbar_count += 1;
        }
        if let Some(iters) = &mut record.iterates {
            iters.push(x.clone());
        }

        let round_mask = if shared_uplink {
            let mask = draw_mask(d, cfg.uplink.k, &mut server_rng);
            if let Some(ms) = &mut record.masks {
                ms.push(mask.clone());
            }
            Some(mask)
        } else {
            None
        };

        let f_mean;
        match cfg.kind {
            AlgorithmKind::SafeEf | AlgorithmKind::Cgd | AlgorithmKind::PrimalDualEf => {
                let lam = lambda;
                let msgs = map_workers(&mut workers, par, |i, wk| {
                    let (f_exact, h) =
                        worker_direction(problem, cfg, i, &x, in_b, lam, &mut wk.rng_sg);
                    let to_send: Vector =
                        if ef_style { linalg::add(&wk.err, &h) } else { h.clone() };
                    let out = match &round_mask {
                        Some(mask) => cfg.uplink.compress_with_mask(&to_send, mask),
                        None => cfg.uplink.compress(&to_send, &mut wk.rng_comp),
                    }
                    .expect("uplink spec validated");
                    if ef_style {
                        wk.err = linalg::sub(&to_send, &out.payload);
                    }
                    UplinkMsg { payload: out.payload, floats: out.transmitted_floats, f_exact, h }
                });
                f_mean = msgs.iter().map(|m| m.f_exact).sum::<f64>() / n as f64;
                round_up += msgs.iter().map(|m| m.floats).sum::<u64>();
                let payloads: Vec<Vector> = msgs.iter().map(|m| m.payload.clone()).collect();
                let v_mean = linalg::mean_vector(&payloads);

                if ef_style {
                    linalg::axpy(-gamma, &v_mean, &mut w);
                    let diff = linalg::sub(&w, &x);
                    let out = cfg
                        .downlink
                        .compress(&diff, &mut server_rng)
                        .expect("downlink spec validated");
                    linalg::axpy(1.0, &out.payload, &mut x);
                    round_down += n as u64 * out.transmitted_floats;

                    if opts.check_invariants {
                        let hs: Vec<Vector> = msgs.iter().map(|m| m.h.clone()).collect();
                        let h_mean = linalg::mean_vector(&hs);
                        let errs: Vec<Vector> = workers.iter().map(|wk| wk.err.clone()).collect();
                        let e_mean = linalg::mean_vector(&errs);
                        max_err_sq = max_err_sq.max(norm_sq(&e_mean));
                        let mut predicted = x_hat.clone();
                        linalg::axpy(-gamma, &h_mean, &mut predicted);
                        let mut actual = w.clone();
                        linalg::axpy(-gamma, &e_mean, &mut actual);
                        max_residual = max_residual.max(linalg::dist(&actual, &predicted));
                        x_hat = actual;
                    }
                } else {
                    // CGD: direct step, uncompressed model broadcast.
                    linalg::axpy(-gamma, &v_mean, &mut x);
                    round_down += (n * d) as u64;
                }

                if cfg.kind == AlgorithmKind::PrimalDualEf {
                    if constrained {
                        let reports =
                            map_workers(&mut workers, par, |i, wk| match &cfg.stochastic {
                                Some(s) => {
                                    oracles::noisy_g_value(problem, i, &x, s, &mut wk.rng_fv)
                                }
                                None => problem.g_value(i, &x),
                            });
                        round_scalar += n as u64;
                        let u = reports.iter().sum::<f64>() / n as f64;
                        lambda = (lambda + cfg.eta * u).max(0.0);
                    }
                    if t % opts.stride == 0 {
                        // trace stores the multiplier used at round t
                        if let Some(tr) = &mut record.lambda_trace {
                            tr.push(lam);
                        }
                    }
                }
            }
            AlgorithmKind::Ef21 | AlgorithmKind::ProjectedEf21 => {
                f_mean = map_workers(&mut workers, par, |i, _wk| problem.f_value(i, &x))
                    .iter()
                    .sum::<f64>()
                    / n as f64;
                let mut x_new = x.clone();
                linalg::axpy(-gamma, &v_bar, &mut x_new);
                let x_new = if cfg.kind == AlgorithmKind::ProjectedEf21 {
                    cfg.projection.apply(x_new)
                } else {
                    x_new
                };
                let msgs = map_workers(&mut workers, par, |i, wk| {
                    let grad = problem.f_subgrad(i, &x_new);
                    let diff = linalg::sub(&grad, &wk.est);
                    let out = match &round_mask {
                        Some(mask) => cfg.uplink.compress_with_mask(&diff, mask),
                        None => cfg.uplink.compress(&diff, &mut wk.rng_comp),
                    }
                    .expect("uplink spec validated");
                    linalg::axpy(1.0, &out.payload, &mut wk.est);
                    (out.payload, out.transmitted_floats)
                });
                round_up += msgs.iter().map(|m| m.1).sum::<u64>();
                let diffs: Vec<Vector> = msgs.into_iter().map(|m| m.0).collect();
                linalg::axpy(1.0, &linalg::mean_vector(&diffs), &mut v_bar);
                x = x_new;
                round_down += (n * d) as u64;
            }
        }

        if t % opts.stride == 0 {
            record.iters.push(t as u64);
            record.f_gap.push(f_mean - problem.f_star.unwrap_or(0.0));
            record.g_val.push(g_record);
            record.in_b.push(in_b);
            record.uplink_floats.push(snapshot.0);
            record.downlink_floats.push(snapshot.1);
            record.scalar_floats.push(snapshot.2);
        }

        cum_up += round_up;
        cum_down += round_down;
        cum_scalar += round_scalar;
        record.ledger.push_round(round_up, round_down, round_scalar);

        // Divergence: non-finite state aborts with the iteration index.
        // Magnitude alone never aborts (slow divergence must stay visible).
        if !linalg::is_finite(&x) || (ef_style && !linalg::is_finite(&w)) {
            record.diverged = true;
            record.diverged_at = Some(t as u64);
            break;
        }
    }

    record.b_count = xbar_count;
    if xbar_count > 0 {
        linalg::scale(1.0 / xbar_count as f64, &mut xbar_sum);
        record.x_bar = Some(xbar_sum);
    } else {
        record.no_feasible_iterate = true;
    }
    record.x_final = x;
    if opts.check_invariants && ef_style {
        record.max_virtual_residual = Some(max_residual);
        record.max_err_mean_norm_sq = Some(max_err_sq);
    }
    Ok(record)
}

/// Pick the round direction for one worker: the objective subgradient while
/// the reported constraint is within the threshold, the constraint
/// subgradient otherwise. The primal-dual method uses the Lagrangian
/// subgradient instead. Returns the exact local objective value alongside
/// for instrumentation.
fn worker_direction(
    problem: &ProblemInstance,
    cfg: &AlgorithmConfig,
    i: usize,
    x: &[f64],
    in_b: bool,
    lambda: f64,
    rng_sg: &mut ChaCha8Rng,
) -> (f64, Vector) {
    let stochastic_grads = cfg.stochastic.as_ref().filter(|s| s.subgrad_batch.is_some());
    match cfg.kind {
        AlgorithmKind::PrimalDualEf => {
            let (f_exact, mut h) = problem.f_value_subgrad(i, x);
            if !problem.unconstrained && lambda != 0.0 {
                linalg::axpy(lambda, &problem.g_subgrad(i, x), &mut h);
            }
            (f_exact, h)
        }
        _ if in_b => match stochastic_grads {
            Some(s) => {
                (problem.f_value(i, x), oracles::stochastic_subgrad(problem, i, x, s, rng_sg))
            }
            None => problem.f_value_subgrad(i, x),
        },
        _ => {
            let h = problem.g_subgrad(i, x);
            (problem.f_value(i, x), h)
        }
    }
}

pub fn run_safe_ef(
    problem: &ProblemInstance,
    cfg: &AlgorithmConfig,
    opts: &SimOptions,
) -> Result<RunRecord> {
    expect_kind(cfg, AlgorithmKind::SafeEf)?;
    run(problem, cfg, opts)
}

pub fn run_cgd(
    problem: &ProblemInstance,
    cfg: &AlgorithmConfig,
    opts: &SimOptions,
) -> Result<RunRecord> {
    expect_kind(cfg, AlgorithmKind::Cgd)?;
    run(problem, cfg, opts)
}

pub fn run_ef21(
    problem: &ProblemInstance,
    cfg: &AlgorithmConfig,
    opts: &SimOptions,
) -> Result<RunRecord> {
    expect_kind(cfg, AlgorithmKind::Ef21)?;
    run(problem, cfg, opts)
}

pub fn run_projected_ef21(
    problem: &ProblemInstance,
    projection: Projection,
    cfg: &AlgorithmConfig,
    opts: &SimOptions,
) -> Result<RunRecord> {
    expect_kind(cfg, AlgorithmKind::ProjectedEf21)?;
    let cfg = AlgorithmConfig { projection, ..cfg.clone() };
    run(problem, &cfg, opts)
}

pub fn run_primal_dual_ef(
    problem: &ProblemInstance,
    cfg: &AlgorithmConfig,
    opts: &SimOptions,
) -> Result<RunRecord> {
    expect_kind(cfg, AlgorithmKind::PrimalDualEf)?;
    run(problem, cfg, opts)
}

fn expect_kind(cfg: &AlgorithmConfig, kind: AlgorithmKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::InvalidConfig(format!(
            "config kind {} does not match entry point {}",
            cfg.kind.name(),
            kind.name()
        )));
    }
    Ok(())
}
