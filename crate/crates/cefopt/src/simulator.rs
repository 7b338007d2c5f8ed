//! Round engine support: run records, communication ledger, run options.
//!
//! One engine instance drives one run; runs are embarrassingly parallel
//! across a sweep and share no mutable state. Within a round, workers touch
//! disjoint state and the server aggregates after a barrier in ascending
//! worker index, so floating-point sums are reproducible run to run.

use crate::algorithms::AlgorithmConfig;
use crate::linalg::Vector;

/// Float counters per round, totals across all workers. One float converts
/// to 8 bytes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommLedger {
    /// Vector payload floats sent worker → server.
    pub uplink: Vec<u64>,
    /// Vector payload floats received by workers from the server.
    pub downlink: Vec<u64>,
    /// Constraint scalar reports (1 float each, uncompressed).
    pub scalar: Vec<u64>,
}

pub const BYTES_PER_FLOAT: u64 = 8;

impl CommLedger {
    pub fn rounds(&self) -> usize {
        self.uplink.len()
    }

    pub fn total_floats(&self) -> u64 {
        self.uplink.iter().sum::<u64>()
            + self.downlink.iter().sum::<u64>()
            + self.scalar.iter().sum::<u64>()
    }

    pub fn total_bytes(&self) -> u64 {
        self.total_floats() * BYTES_PER_FLOAT
    }

    pub(crate) fn push_round(&mut self, uplink: u64, downlink: u64, scalar: u64) {
        self.uplink.push(uplink);
        self.downlink.push(downlink);
        self.scalar.push(scalar);
    }
}

/// Engine knobs; the defaults record densely and check the proof-derived
/// invariants every round.
#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Record every `stride`-th iteration (1 = dense). Aggregation for the
    /// averaged output always uses every round regardless of thinning.
    pub stride: usize,
    /// Keep the full iterate trajectory in memory (tests only; off by
    /// default).
    pub record_iterates: bool,
    /// Keep the per-round shared compression masks (tests only).
    pub record_masks: bool,
    /// Track the virtual-iterate residual and error-buffer norms.
    pub check_invariants: bool,
    /// Force the worker loop parallel (`Some(true)`) or sequential
    /// (`Some(false)`); `None` picks by problem size. Results are identical
    /// either way.
    pub worker_parallel: Option<bool>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            stride: 1,
            record_iterates: false,
            record_masks: false,
            check_invariants: true,
            worker_parallel: None,
        }
    }
}

/// Per-iteration trajectory and run outcome.
///
/// `f_gap[t]` is `f(x^t) − f*` when the optimum is known, else the raw
/// objective value. `g_val[t]` is the aggregate constraint value the
/// algorithm acted on that round (the noisy estimate in stochastic mode),
/// and `in_b[t] ⇔ g_val[t] ≤ c`. Counters are cumulative totals across
/// workers *before* the round executes, so row 0 always reads zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub iters: Vec<u64>,
    pub f_gap: Vec<f64>,
    pub g_val: Vec<f64>,
    pub in_b: Vec<bool>,
    pub uplink_floats: Vec<u64>,
    pub downlink_floats: Vec<u64>,
    pub scalar_floats: Vec<u64>,

    /// Average of the iterates whose constraint test passed; `None` when
    /// no iterate qualified.
    pub x_bar: Option<Vector>,
    /// Final iterate `x^T` (the fallback output when `x_bar` is undefined).
    pub x_final: Vector,
    /// `|B|`: number of rounds whose constraint test passed.
    pub b_count: u64,
    pub no_feasible_iterate: bool,
    pub diverged: bool,
    pub diverged_at: Option<u64>,

    /// Multiplier trajectory (primal-dual runs only).
    pub lambda_trace: Option<Vec<f64>>,
    /// Captured iterates / shared masks when the options ask for them.
    pub iterates: Option<Vec<Vector>>,
    pub masks: Option<Vec<Vec<usize>>>,

    /// Largest per-round virtual-iterate residual
    /// `‖x̂^{t+1} − (x̂^t − γ h^t)‖` observed (error-feedback runs with
    /// invariant checks on).
    pub max_virtual_residual: Option<f64>,
    /// Largest `‖ē^t‖²` observed.
    pub max_err_mean_norm_sq: Option<f64>,

    pub n_workers: usize,
    pub f_star: Option<f64>,
    pub seed: u64,
    /// Echo of the configuration that produced the run (exact re-run).
    pub config: AlgorithmConfig,
    pub ledger: CommLedger,
}

impl RunRecord {
    pub(crate) fn new(n_workers: usize, f_star: Option<f64>, config: AlgorithmConfig) -> Self {
        let seed = config.seed;
        RunRecord {
            iters: Vec::new(),
            f_gap: Vec::new(),
            g_val: Vec::new(),
            in_b: Vec::new(),
            uplink_floats: Vec::new(),
            downlink_floats: Vec::new(),
            scalar_floats: Vec::new(),
            x_bar: None,
            x_final: Vec::new(),
            b_count: 0,
            no_feasible_iterate: false,
            diverged: false,
            diverged_at: None,
            lambda_trace: None,
            iterates: None,
            masks: None,
            max_virtual_residual: None,
            max_err_mean_norm_sq: None,
            n_workers,
            f_star,
            seed,
            config,
            ledger: CommLedger::default(),
        }
    }

    /// The algorithm's output: the feasible average when defined, otherwise
    /// the last iterate.
    pub fn output(&self) -> &Vector {
        self.x_bar.as_ref().unwrap_or(&self.x_final)
    }

    /// Total bytes per worker at the end of the run.
    pub fn bytes_per_worker(&self) -> f64 {
        self.ledger.total_bytes() as f64 / self.n_workers as f64
    }

    /// First cumulative per-worker communication volume (in gigabytes) at
    /// which the recorded gap reaches `target_gap`; `None` if it never does.
    pub fn gigabytes_to_target(&self, target_gap: f64) -> Option<f64> {
        for (row, &gap) in self.f_gap.iter().enumerate() {
            if gap <= target_gap {
                let floats =
                    self.uplink_floats[row] + self.downlink_floats[row] + self.scalar_floats[row];
                return Some(floats as f64 * BYTES_PER_FLOAT as f64 / self.n_workers as f64 / 1e9);
            }
        }
        None
    }

    /// Running minimum of the recorded gap.
    pub fn min_f_gap(&self) -> f64 {
        self.f_gap.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}
