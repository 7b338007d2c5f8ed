//! Contractive compression operators.
//!
//! A compressor `C` is contractive with accuracy `delta` in `(0, 1]` when
//! `E‖C(x) − x‖² ≤ (1 − delta)‖x‖²`. Top-K keeps the K entries largest in
//! magnitude (ties broken toward the lowest coordinate index, which several
//! exact-trajectory tests rely on), Rand-K keeps a uniformly random K-subset
//! without rescaling (the rescaled d/K variant is unbiased but not
//! contractive, so it is deliberately not offered), and the identity passes
//! vectors through. Both sparsifiers satisfy `delta ≥ K/d`.
//!
//! Compressors are stateless value objects; randomness comes in through an
//! explicit stream, so any number of runs can use the same spec concurrently.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{norm_sq, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressorKind {
    TopK,
    RandK,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompressorSpec {
    pub kind: CompressorKind,
    /// Coordinate budget. Ignored for `Identity`.
    pub k: usize,
    /// Rand-K only: all workers apply one common mask per round, drawn from
    /// the server's round-level stream.
    pub shared_randomness: bool,
    /// Charge 2k floats instead of k, accounting for index transmission.
    /// Off by default: the cost model counts K floats per iteration.
    pub count_index_overhead: bool,
}

/// A compressed vector plus its transmission cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedUpdate {
    /// Same dimension as the input; non-selected coordinates are zero.
    pub payload: Vector,
    pub transmitted_floats: u64,
}

impl CompressorSpec {
    pub fn identity() -> Self {
        CompressorSpec {
            kind: CompressorKind::Identity,
            k: 0,
            shared_randomness: false,
            count_index_overhead: false,
        }
    }

    pub fn top_k(k: usize) -> Self {
        CompressorSpec {
            kind: CompressorKind::TopK,
            k,
            shared_randomness: false,
            count_index_overhead: false,
        }
    }

    pub fn rand_k(k: usize, shared_randomness: bool) -> Self {
        CompressorSpec {
            kind: CompressorKind::RandK,
            k,
            shared_randomness,
            count_index_overhead: false,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.kind == CompressorKind::Identity
    }

    /// Deterministic compressors need no randomness stream.
    pub fn is_deterministic(&self) -> bool {
        self.kind != CompressorKind::RandK
    }

    /// Nominal contraction accuracy: 1 for the identity, k/d for the
    /// sparsifiers (a valid lower bound on the true delta).
    pub fn nominal_delta(&self, d: usize) -> f64 {
        match self.kind {
            CompressorKind::Identity => 1.0,
            _ => self.k as f64 / d as f64,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self.kind {
            CompressorKind::Identity => Ok(()),
            _ if self.k == 0 => Err(Error::InvalidSpec("k = 0".into())),
            _ if self.k > d => {
                Err(Error::InvalidSpec(format!("k = {} exceeds dimension {}", self.k, d)))
            }
            _ => Ok(()),
        }
    }

    fn charge(&self, d: usize) -> u64 {
        match self.kind {
            CompressorKind::Identity => d as u64,
            _ if self.count_index_overhead => 2 * self.k as u64,
            _ => self.k as u64,
        }
    }

    /// Apply the compressor. `rng` is consumed only by non-shared Rand-K;
    /// shared Rand-K callers must pre-draw a mask with [`draw_mask`] and use
    /// [`compress_with_mask`] so all workers zero out identical coordinates.
    pub fn compress(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Result<CompressedUpdate> {
        self.validate(x.len())?;
        let payload = match self.kind {
            CompressorKind::Identity => x.to_vec(),
            CompressorKind::TopK => top_k_payload(x, self.k),
            CompressorKind::RandK => {
                let mask = draw_mask(x.len(), self.k, rng);
                masked_payload(x, &mask)
            }
        };
        Ok(CompressedUpdate { payload, transmitted_floats: self.charge(x.len()) })
    }

    /// Apply a pre-drawn coordinate mask (shared-randomness Rand-K).
    pub fn compress_with_mask(&self, x: &[f64], mask: &[usize]) -> Result<CompressedUpdate> {
        self.validate(x.len())?;
        debug_assert_eq!(self.kind, CompressorKind::RandK);
        debug_assert_eq!(mask.len(), self.k);
        Ok(CompressedUpdate {
            payload: masked_payload(x, mask),
            transmitted_floats: self.charge(x.len()),
        })
    }
}

/// Uniform k-subset of `0..d` without replacement, sorted ascending.
pub fn draw_mask(d: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut mask = rand::seq::index::sample(rng, d, k).into_vec();
    mask.sort_unstable();
    mask
}

fn masked_payload(x: &[f64], mask: &[usize]) -> Vector {
    let mut out = vec![0.0; x.len()];
    for &i in mask {
        out[i] = x[i];
    }
    out
}

fn top_k_payload(x: &[f64], k: usize) -> Vector {
    let d = x.len();
    if k >= d {
        return x.to_vec();
    }
    let mut idx: Vec<usize> = (0..d).collect();
    // Largest |x_i| first; ties go to the lowest index.
    idx.sort_unstable_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let mut out = vec![0.0; d];
    for &i in &idx[..k] {
        out[i] = x[i];
    }
    out
}

/// `‖C(x) − x‖² / ‖x‖²`, the realized contraction defect. Zero vector maps
/// to 0 by convention.
pub fn contraction_defect(x: &[f64], out: &CompressedUpdate) -> f64 {
    assert_eq!(x.len(), out.payload.len(), "dimension mismatch");
    let denom = norm_sq(x);
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = x.iter().zip(&out.payload).map(|(xi, pi)| (pi - xi) * (pi - xi)).sum();
    num / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamKind};
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        stream(seed, StreamKind::WorkerCompressor, 0)
    }

    #[test]
    fn top1_tie_selects_first_coordinate() {
        let spec = CompressorSpec::top_k(1);
        let out = spec.compress(&[1.0, -1.0], &mut rng(0)).unwrap();
        assert_eq!(out.payload, vec![1.0, 0.0]);
        assert_eq!(out.transmitted_floats, 1);
    }

    #[test]
    fn top_full_budget_is_identity() {
        let x = vec![3.0, -1.0, 0.5, 2.0];
        let spec = CompressorSpec::top_k(4);
        let out = spec.compress(&x, &mut rng(0)).unwrap();
        assert_eq!(out.payload, x);
        assert_eq!(out.transmitted_floats, 4);
    }

    #[test]
    fn identity_returns_input_verbatim() {
        let x = vec![0.25, -7.0, 0.0];
        let out = CompressorSpec::identity().compress(&x, &mut rng(1)).unwrap();
        assert_eq!(out.payload, x);
        assert_eq!(out.transmitted_floats, 3);
        assert_eq!(contraction_defect(&x, &out), 0.0);
    }

    #[test]
    fn rand1_on_d3_exact_expected_defect() {
        // Enumerate the 3 equally likely masks of Rand-1 on (1, 2, 3):
        // E‖C(x) − x‖² = (13 + 10 + 5)/3 = 28/3 = (1 − 1/3)·14.
        let x = vec![1.0, 2.0, 3.0];
        let spec = CompressorSpec::rand_k(1, false);
        let mut acc = 0.0;
        for i in 0..3 {
            let out = spec.compress_with_mask(&x, &[i]).unwrap();
            acc += contraction_defect(&x, &out) * norm_sq(&x);
        }
        let expected = (1.0 - 1.0 / 3.0) * norm_sq(&x);
        assert!((acc / 3.0 - expected).abs() < 1e-12);
        assert!((acc / 3.0 - 28.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn defect_examples() {
        let spec = CompressorSpec::top_k(1);
        let out = spec.compress(&[1.0, -1.0], &mut rng(0)).unwrap();
        assert!((contraction_defect(&[1.0, -1.0], &out) - 0.5).abs() < 1e-15);

        let out = spec.compress(&[3.0, 4.0], &mut rng(0)).unwrap();
        assert_eq!(out.payload, vec![0.0, 4.0]);
        assert!((contraction_defect(&[3.0, 4.0], &out) - 9.0 / 25.0).abs() < 1e-15);

        let zero = [0.0, 0.0];
        let out = spec.compress(&zero, &mut rng(0)).unwrap();
        assert_eq!(contraction_defect(&zero, &out), 0.0);
    }

    #[test]
    fn invalid_budgets_error() {
        let x = vec![1.0, 2.0];
        assert!(CompressorSpec::top_k(0).compress(&x, &mut rng(0)).is_err());
        assert!(CompressorSpec::top_k(3).compress(&x, &mut rng(0)).is_err());
        assert!(CompressorSpec::rand_k(0, false).compress(&x, &mut rng(0)).is_err());
    }

    #[test]
    fn top_k_deterministic_contraction_bound() {
        // ‖C(x) − x‖² ≤ (1 − k/d)‖x‖² holds per realization for Top-K.
        let mut r = rng(42);
        for &d in &[2usize, 10, 100] {
            for &k in &[1usize, (d / 10).max(1), d] {
                let spec = CompressorSpec::top_k(k);
                for _ in 0..200 {
                    let x: Vector = (0..d).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
                    let out = spec.compress(&x, &mut rng(0)).unwrap();
                    let defect = contraction_defect(&x, &out);
                    assert!(
                        defect <= 1.0 - spec.nominal_delta(d) + 1e-12,
                        "d={d} k={k} defect={defect}"
                    );
                }
            }
        }
    }

    #[test]
    fn rand_k_exact_expectation_small_d() {
        // Exact average over all C(d, k) masks equals (1 − k/d)‖x‖².
        let mut r = rng(7);
        for d in 2..=6usize {
            for k in 1..=d {
                let spec = CompressorSpec::rand_k(k, false);
                let x: Vector = (0..d).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
                let masks = enumerate_masks(d, k);
                let avg: f64 = masks
                    .iter()
                    .map(|m| {
                        let out = spec.compress_with_mask(&x, m).unwrap();
                        contraction_defect(&x, &out) * norm_sq(&x)
                    })
                    .sum::<f64>()
                    / masks.len() as f64;
                let expected = (1.0 - k as f64 / d as f64) * norm_sq(&x);
                assert!((avg - expected).abs() < 1e-12, "d={d} k={k}");
            }
        }
    }

    #[test]
    fn top_k_support_idempotence() {
        let spec = CompressorSpec::top_k(3);
        let mut r = rng(11);
        for _ in 0..100 {
            let x: Vector = (0..12).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
            let once = spec.compress(&x, &mut rng(0)).unwrap();
            let twice = spec.compress(&once.payload, &mut rng(0)).unwrap();
            assert_eq!(once.payload, twice.payload);
        }
    }

    #[test]
    fn shared_mask_zeroes_identical_coordinates() {
        let spec = CompressorSpec::rand_k(3, true);
        let mut server = stream(5, StreamKind::Server, 0);
        let mask = draw_mask(8, 3, &mut server);
        let a: Vector = (0..8).map(|i| i as f64 + 1.0).collect();
        let b: Vector = (0..8).map(|i| -(i as f64) - 10.0).collect();
        let ca = spec.compress_with_mask(&a, &mask).unwrap();
        let cb = spec.compress_with_mask(&b, &mask).unwrap();
        let za: Vec<usize> = (0..8).filter(|&i| ca.payload[i] == 0.0).collect();
        let zb: Vec<usize> = (0..8).filter(|&i| cb.payload[i] == 0.0).collect();
        assert_eq!(za, zb);
    }

    #[test]
    fn index_overhead_doubles_charge() {
        let spec = CompressorSpec { count_index_overhead: true, ..CompressorSpec::top_k(2) };
        let out = spec.compress(&[1.0, 2.0, 3.0], &mut rng(0)).unwrap();
        assert_eq!(out.transmitted_floats, 4);
    }

    /// All k-subsets of 0..d in lexicographic order.
    pub(crate) fn enumerate_masks(d: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
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
        rec(0, d, k, &mut cur, &mut out);
        out
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Any realization of Top-K removes at most the (1 − k/d) energy share.
            #[test]
            fn top_k_contractive(
                x in proptest::collection::vec(-1e6f64..1e6, 1..64),
                k in 1usize..64,
            ) {
                let k = k.min(x.len()).max(1);
                let spec = CompressorSpec::top_k(k);
                let out = spec.compress(&x, &mut rng(0)).unwrap();
                let lhs: f64 = x.iter().zip(&out.payload).map(|(a, b)| (a - b) * (a - b)).sum();
                let rhs = (1.0 - k as f64 / x.len() as f64) * norm_sq(&x);
                prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
            }

            // Payload support never exceeds the budget.
            #[test]
            fn payload_support_bounded(
                x in proptest::collection::vec(-1e3f64..1e3, 1..48),
                k in 1usize..48,
                seed in 0u64..32,
            ) {
                let k = k.min(x.len()).max(1);
                for spec in [CompressorSpec::top_k(k), CompressorSpec::rand_k(k, false)] {
                    let out = spec.compress(&x, &mut rng(seed)).unwrap();
                    let nnz = out.payload.iter().filter(|v| **v != 0.0).count();
                    prop_assert!(nnz <= k);
                    prop_assert_eq!(out.transmitted_floats, k as u64);
                }
            }
        }
    }
}
