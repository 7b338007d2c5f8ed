//! Distributed non-smooth constrained convex optimization under contractive
//! communication compression.
//!
//! The crate simulates synchronous parameter-server training where `n` workers
//! hold convex objectives `f_i` and constraints `g_i` with `M`-bounded
//! subgradients, and every message is squeezed through a contractive
//! compressor (Top-K, Rand-K, or the identity). It provides:
//!
//! * [`compressors`] — contractive compression operators with exact
//!   transmission accounting,
//! * [`problems`] — a zoo of problem instances with value/subgradient oracles
//!   and known optimum metadata,
//! * [`oracles`] — the stochastic wrapper (sub-Gaussian function noise,
//!   mini-batch subgradients, batch-size rule),
//! * [`algorithms`] — Safe-EF with bidirectional compression plus the CGD,
//!   EF21, Projected-EF21 and primal-dual error-feedback baselines,
//! * [`simulator`] — the shared round engine, run records and the
//!   communication ledger,
//! * [`theory`] — closed-form rate/bound calculators and proof-derived
//!   diagnostics,
//! * [`verify`] — the offline acceptance suite used by tests and the CLI.
//!
//! Runs are deterministic: identical configuration and seed produce a
//! bitwise-identical [`simulator::RunRecord`], with or without the `parallel`
//! feature.

pub mod algorithms;
pub mod compressors;
pub mod error;
pub mod linalg;
pub mod oracles;
pub mod parallel;
pub mod problems;
pub mod rng;
pub mod simulator;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};
