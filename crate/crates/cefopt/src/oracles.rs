//! Stochastic oracle wrappers.
//!
//! Wraps the exact problem oracles into the stochastic model: function
//! evaluations of the constraints carry Gaussian noise of variance
//! `σ_fv²/N_fv` (Gaussian is the canonical sub-Gaussian family; only the
//! moment bound matters), and subgradients come from uniformly sampled
//! mini-batches of the local finite sum. Outputs are always radially clipped
//! to the instance bound `M`, so the hard norm contract holds call by call.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{norm, scale, Vector};
use crate::problems::ProblemInstance;

/// Stochastic-oracle settings for a run.
///
/// The effective standard deviation of one constraint evaluation is
/// `sigma_fv / sqrt(n_fv)`; `n_fv` models the mini-batch size used to
/// estimate constraint values. `subgrad_batch = None` keeps subgradients
/// exact (the semi-stochastic case).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticConfig {
    pub sigma_fv: f64,
    pub n_fv: u64,
    pub subgrad_batch: Option<usize>,
    pub seed: u64,
}

impl StochasticConfig {
    pub fn exact(seed: u64) -> Self {
        StochasticConfig { sigma_fv: 0.0, n_fv: 1, subgrad_batch: None, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_fv < 0.0 {
            return Err(Error::InvalidConfig("sigma_fv must be nonnegative".into()));
        }
        if self.n_fv == 0 {
            return Err(Error::InvalidConfig("n_fv must be at least 1".into()));
        }
        if self.subgrad_batch == Some(0) {
            return Err(Error::InvalidConfig("subgrad_batch must be at least 1".into()));
        }
        Ok(())
    }

    /// Standard deviation of one noisy function evaluation.
    pub fn fv_std(&self) -> f64 {
        self.sigma_fv / (self.n_fv as f64).sqrt()
    }
}

/// Noisy constraint evaluation: `g_i(x) + z`, `z ~ N(0, σ_fv²/N_fv)`.
/// Draws are independent across workers and calls because every worker owns
/// its own noise stream.
pub fn noisy_g_value(
    inst: &ProblemInstance,
    i: usize,
    x: &[f64],
    cfg: &StochasticConfig,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let exact = inst.g_value(i, x);
    if cfg.sigma_fv == 0.0 {
        return exact;
    }
    let z: f64 = rng.sample(StandardNormal);
    exact + cfg.fv_std() * z
}

fn clip_to(m: f64, v: &mut Vector) {
    let nrm = norm(v);
    if nrm > m && nrm > 0.0 {
        scale(m / nrm, v);
    }
}

/// Sample `k` distinct indices from `0..len` (uniform without replacement).
fn sample_batch(len: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    rand::seq::index::sample(rng, len, k.min(len)).into_vec()
}

/// Stochastic objective subgradient.
///
/// Finite-sum instances return the subgradient of a uniformly sampled
/// mini-batch of local terms, importance-scaled so the expectation is the
/// full subgradient (subgradient-of-batch-average, valid by per-sample
/// convexity). Analytic instances return the exact subgradient plus
/// spherical noise at scale `sigma_fv`. Either way the result is clipped to
/// the instance bound `M`.
pub fn stochastic_subgrad(
    inst: &ProblemInstance,
    i: usize,
    x: &[f64],
    cfg: &StochasticConfig,
    rng: &mut ChaCha8Rng,
) -> Vector {
    let mut out = match (cfg.subgrad_batch, inst.f_term_count(i)) {
        (Some(batch), Some(terms)) if batch < terms => {
            let idx = sample_batch(terms, batch, rng);
            inst.f_minibatch_subgrad(i, x, &idx)
        }
        (Some(_), Some(_)) | (None, _) => inst.f_subgrad(i, x),
        (Some(_), None) => {
            let mut g = inst.f_subgrad(i, x);
            if cfg.sigma_fv > 0.0 {
                let noise: Vector =
                    (0..g.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let nrm = norm(&noise).max(f64::MIN_POSITIVE);
                let mag = cfg.sigma_fv * rng.random::<f64>();
                for (gj, nj) in g.iter_mut().zip(&noise) {
                    *gj += mag * nj / nrm;
                }
            }
            g
        }
    };
    clip_to(inst.m_bound, &mut out);
    debug_assert!(norm(&out) <= inst.m_bound * (1.0 + 1e-12));
    out
}

/// Smallest constraint-estimation batch size the high-probability analysis
/// accepts for a horizon-`T` run: `⌈(√2 + √2·b)² σ_fv²/(n c²)⌉` with
/// `b² = 3 ln(T/β)`. The constant is explicit rather than hidden in a
/// log factor; callers may override.
pub fn min_batch_size(sigma_fv: f64, n: usize, c: f64, beta: f64, t: usize) -> Result<u64> {
    if c <= 0.0 {
        return Err(Error::InvalidArgument("c must be positive".into()));
    }
    if !(0.0 < beta && beta < 0.5) {
        return Err(Error::InvalidArgument("beta must lie in (0, 1/2)".into()));
    }
    if sigma_fv == 0.0 {
        return Ok(1);
    }
    let b = (3.0 * (t as f64 / beta).ln()).sqrt();
    let factor = 2.0 * (1.0 + b) * (1.0 + b); // (√2 + √2 b)²
    let raw = factor * sigma_fv * sigma_fv / (n as f64 * c * c);
    Ok((raw.ceil() as u64).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{gen_synthetic_l1, make_l1_toy, SyntheticGenParams};
    use crate::rng::{stream, StreamKind};

    fn synthetic() -> ProblemInstance {
        gen_synthetic_l1(&SyntheticGenParams { n: 3, d: 10, s: 1.0, zeta: 0.0, seed: 21 })
            .unwrap()
            .with_linear_constraint(
                {
                    let mut a = vec![0.0; 10];
                    a[2] = 1.0;
                    a
                },
                0.0,
            )
            .unwrap()
    }

    #[test]
    fn zero_noise_is_exact() {
        let inst = synthetic();
        let cfg = StochasticConfig::exact(0);
        let mut rng = stream(0, StreamKind::WorkerFnNoise, 0);
        let x = vec![0.1; 10];
        assert_eq!(noisy_g_value(&inst, 1, &x, &cfg, &mut rng), inst.g_value(1, &x));
    }

    #[test]
    fn noise_mean_and_variance_match_the_model() {
        let inst = synthetic();
        let cfg = StochasticConfig { sigma_fv: 0.7, n_fv: 4, subgrad_batch: None, seed: 0 };
        let mut rng = stream(1, StreamKind::WorkerFnNoise, 0);
        let x = vec![0.05; 10];
        let exact = inst.g_value(0, &x);
        let draws = 100_000;
        let samples: Vec<f64> =
            (0..draws).map(|_| noisy_g_value(&inst, 0, &x, &cfg, &mut rng)).collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / draws as f64;
        let std = cfg.fv_std();
        // CLT band: the oracle's exact value is the mean.
        assert!((mean - exact).abs() < 4.0 * std / (draws as f64).sqrt());
        assert!((var / (std * std) - 1.0).abs() < 0.05);
    }

    #[test]
    fn monte_carlo_sub_gaussian_moment() {
        // A variance-σ²/N Gaussian meets the exponential-moment bound after
        // the standard constant inflation of the scale; at scale 8σ²/N the
        // exact moment is 2/√3 ≈ 1.155 and the estimator has finite
        // variance, so the Monte-Carlo check is stable.
        let cfg = StochasticConfig { sigma_fv: 1.0, n_fv: 2, subgrad_batch: None, seed: 0 };
        let mut rng = stream(3, StreamKind::WorkerFnNoise, 0);
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let z: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.fv_std();
            acc += (z * z * cfg.n_fv as f64 / (8.0 * cfg.sigma_fv * cfg.sigma_fv)).exp();
        }
        let moment = acc / draws as f64;
        assert!(moment < std::f64::consts::E * 1.1, "moment = {moment}");
        assert!((moment - 2.0 / 3f64.sqrt()).abs() < 0.02, "moment = {moment}");
    }

    #[test]
    fn full_batch_subgradient_is_exact() {
        let inst = synthetic();
        let cfg = StochasticConfig { sigma_fv: 0.0, n_fv: 1, subgrad_batch: Some(10), seed: 0 };
        let mut rng = stream(4, StreamKind::WorkerSubgrad, 0);
        let x = vec![0.3; 10];
        assert_eq!(stochastic_subgrad(&inst, 0, &x, &cfg, &mut rng), inst.f_subgrad(0, &x));
    }

    #[test]
    fn minibatch_subgradients_are_unbiased_where_unclipped() {
        let inst = synthetic();
        let cfg = StochasticConfig { sigma_fv: 0.0, n_fv: 1, subgrad_batch: Some(4), seed: 0 };
        let mut rng = stream(5, StreamKind::WorkerSubgrad, 0);
        // A point with no zero residuals.
        let x = vec![0.37; 10];
        let exact = inst.f_subgrad(0, &x);
        let reps = 10_000;
        let mut mean = vec![0.0; 10];
        for _ in 0..reps {
            let g = stochastic_subgrad(&inst, 0, &x, &cfg, &mut rng);
            crate::linalg::axpy(1.0 / reps as f64, &g, &mut mean);
        }
        let err = crate::linalg::dist(&mean, &exact);
        assert!(err < 0.05 * inst.m_bound, "bias {err}");
    }

    #[test]
    fn outputs_respect_the_norm_bound() {
        let inst = synthetic();
        let toy = make_l1_toy(0.1).unwrap();
        let mut rng = stream(6, StreamKind::WorkerSubgrad, 0);
        for cfg in [
            StochasticConfig { sigma_fv: 5.0, n_fv: 1, subgrad_batch: Some(1), seed: 0 },
            StochasticConfig { sigma_fv: 5.0, n_fv: 1, subgrad_batch: Some(3), seed: 0 },
        ] {
            for t in 0..500 {
                let x: Vec<f64> = (0..10).map(|j| ((t * 7 + j) as f64 * 0.37).sin()).collect();
                let g = stochastic_subgrad(&inst, t % 3, &x, &cfg, &mut rng);
                assert!(norm(&g) <= inst.m_bound + 1e-9);
                let g = stochastic_subgrad(&toy, 0, &x[..2], &cfg, &mut rng);
                assert!(norm(&g) <= toy.m_bound + 1e-9);
            }
        }
    }

    #[test]
    fn batch_size_rule() {
        assert_eq!(min_batch_size(0.0, 10, 0.1, 0.01, 1000).unwrap(), 1);
        // c⁻² scaling: doubling c divides the batch by 4 (up to ceil).
        let n1 = min_batch_size(1.0, 10, 0.1, 0.01, 1000).unwrap();
        let n2 = min_batch_size(1.0, 10, 0.2, 0.01, 1000).unwrap();
        assert!(n2 <= n1 / 4 + 1);
        // Frozen plug-in: b² = 3 ln(10⁵), 2(1+b)²·1/(10·0.01) = 945.86…
        assert_eq!(n1, 946);
        assert!(min_batch_size(1.0, 10, 0.0, 0.01, 1000).is_err());
        assert!(min_batch_size(1.0, 10, 0.1, 0.7, 1000).is_err());
    }
}
