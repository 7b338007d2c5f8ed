//! Problem zoo.
//!
//! Every instance exposes per-worker convex objective and constraint oracles
//! (values and subgradients) together with optimum metadata: the subgradient
//! bound `M`, an initial-distance bound `R` with `‖x⁰ − x*‖ ≤ R` when known,
//! and `x*`/`f*` when they are available in closed form. Instances are
//! immutable after construction and their oracles are read-only, so they can
//! be shared freely across concurrent runs.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, norm, norm1, sign, Matrix, Vector};
use crate::rng::{stream, StreamKind};
use crate::theory;

/// Parameters of the synthetic heterogeneous ℓ₁-regression generator.
/// `s` scales how far apart the local matrices are; `zeta` scales the label
/// noise. Generation is seed-deterministic: the same seed yields bitwise
/// identical data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticGenParams {
    pub n: usize,
    pub d: usize,
    pub s: f64,
    pub zeta: f64,
    pub seed: u64,
}

/// Parameters of the hard instance forcing the `1/√(δT)` rate.
///
/// The derived constants are `C = M√T/(1+√(δT))`, `μ = 2M/(R(1+√(δT)))` and
/// dimension `d = max(T, ⌊5Tδ⌋)` (the construction wants `⌊5Tδ⌋` but the
/// objective needs at least `T` coordinates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCaseParams {
    pub t: usize,
    pub delta: f64,
    pub r: f64,
    pub m: f64,
    /// Allow δ/T outside the analyzed regime (δ ≤ 0.3, T ≥ δ⁻²).
    pub allow_out_of_regime: bool,
}

impl WorstCaseParams {
    pub fn new(t: usize, delta: f64, r: f64, m: f64) -> Self {
        WorstCaseParams { t, delta, r, m, allow_out_of_regime: false }
    }

    pub fn constants(&self) -> (f64, f64) {
        theory::worst_case_constants(self.r, self.m, self.delta, self.t)
    }

    pub fn dimension(&self) -> usize {
        self.t.max((5.0 * self.t as f64 * self.delta).floor() as usize)
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) || self.r <= 0.0 || self.m <= 0.0 {
            return Err(Error::InvalidArgument("worst-case params must be positive".into()));
        }
        let in_regime = self.delta <= 0.3 && (self.t as f64) >= 1.0 / (self.delta * self.delta);
        if !in_regime && !self.allow_out_of_regime {
            return Err(Error::InvalidArgument(
                "outside the analyzed regime (need delta <= 0.3 and T >= 1/delta^2); \
                 set allow_out_of_regime to proceed anyway"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Optional constraint attached to a data-backed instance.
#[derive(Debug, Clone, PartialEq)]
pub enum AttachedConstraint {
    /// `g_i(x) = a·x − b` for every worker.
    Linear { a: Vector, b: f64 },
    /// `g_i(x) = ‖x − center‖ − radius`.
    Ball { center: Vector, radius: f64 },
}

impl AttachedConstraint {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            AttachedConstraint::Linear { a, b } => linalg::dot(a, x) - b,
            AttachedConstraint::Ball { center, radius } => linalg::dist(x, center) - radius,
        }
    }

    fn subgrad(&self, x: &[f64]) -> Vector {
        match self {
            AttachedConstraint::Linear { a, .. } => a.clone(),
            AttachedConstraint::Ball { center, .. } => {
                let diff = linalg::sub(x, center);
                let nrm = norm(&diff);
                if nrm == 0.0 {
                    vec![0.0; x.len()]
                } else {
                    diff.iter().map(|v| v / nrm).collect()
                }
            }
        }
    }

    fn subgrad_bound(&self) -> f64 {
        match self {
            AttachedConstraint::Linear { a, .. } => norm(a),
            AttachedConstraint::Ball { .. } => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
struct L1Local {
    a: Matrix,
    b: Vector,
}

#[derive(Debug, Clone)]
struct NpShard {
    class0: Vec<Vector>,
    class1: Vec<Vector>,
}

#[derive(Debug, Clone)]
enum Kind {
    /// `f_i(x) = ‖x‖₁` on d = 2, replicated.
    L1Toy,
    /// `f_i(x) = ‖A_i x − b_i‖₁`, optional attached constraint.
    SyntheticL1 { workers: Vec<L1Local>, constraint: Option<AttachedConstraint> },
    /// Piecewise `C·max_{j≤T} x_j + curvature`, `g_i = f_i − f*`.
    WorstCase { c: f64, mu: f64, horizon: usize, r_class: f64, f_star: f64 },
    /// Linear-model Neyman–Pearson classification: `f` is class-0
    /// cross-entropy, `g` is class-1 cross-entropy minus the threshold.
    NeymanPearson { shards: Vec<NpShard>, threshold: f64 },
    /// `f_i(x) = ½ Σ_j λ_j (x_j − a_{ij})²` with a log-spaced spectrum.
    SmoothQuadratic { eigs: Vector, anchors: Vec<Vector> },
}

/// An n-worker problem with oracles and optimum metadata.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub n: usize,
    pub d: usize,
    /// Subgradient bound: every oracle output has norm at most this.
    pub m_bound: f64,
    /// Initial-distance bound `‖x⁰ − x*‖ ≤ R`, when known (an estimate is
    /// documented where exactness is impossible).
    pub radius: Option<f64>,
    pub x_star: Option<Vector>,
    pub f_star: Option<f64>,
    pub x0: Vector,
    /// `g ≡ 0`: algorithms skip the constraint round-trip entirely.
    pub unconstrained: bool,
    /// Smoothness constant for differentiable instances.
    pub l_smooth: Option<f64>,
    /// Estimator initialization the divergence reproduction uses for EF21.
    pub ef21_estimator_init: Option<Vector>,
    kind: Kind,
}

impl ProblemInstance {
    pub fn f_value(&self, i: usize, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::L1Toy => norm1(x),
            Kind::SyntheticL1 { workers, .. } => {
                let w = &workers[i];
                norm1(&residual(&w.a, &w.b, x))
            }
            Kind::WorstCase { c, mu, horizon, r_class, .. } => {
                worst_case_value(x, *c, *mu, *horizon, *r_class)
            }
            Kind::NeymanPearson { shards, .. } => mean_loss(&shards[i].class0, x, 1.0),
            Kind::SmoothQuadratic { eigs, anchors } => {
                let a = &anchors[i];
                0.5 * x
                    .iter()
                    .zip(a)
                    .zip(eigs)
                    .map(|((xj, aj), l)| l * (xj - aj) * (xj - aj))
                    .sum::<f64>()
            }
        }
    }

    pub fn f_subgrad(&self, i: usize, x: &[f64]) -> Vector {
        match &self.kind {
            Kind::L1Toy => x.iter().map(|&v| sign(v)).collect(),
            Kind::SyntheticL1 { workers, .. } => {
                let w = &workers[i];
                let r = residual(&w.a, &w.b, x);
                let s: Vector = r.iter().map(|&v| sign(v)).collect();
                w.a.matvec_t(&s)
            }
            Kind::WorstCase { c, mu, horizon, r_class, .. } => {
                worst_case_subgrad(x, *c, *mu, *horizon, *r_class)
            }
            Kind::NeymanPearson { shards, .. } => mean_loss_grad(&shards[i].class0, x, 1.0),
            Kind::SmoothQuadratic { eigs, anchors } => {
                let a = &anchors[i];
                x.iter().zip(a).zip(eigs).map(|((xj, aj), l)| l * (xj - aj)).collect()
            }
        }
    }

    /// Value and subgradient in one pass (shares the residual computation
    /// for data-backed instances).
    pub fn f_value_subgrad(&self, i: usize, x: &[f64]) -> (f64, Vector) {
        match &self.kind {
            Kind::SyntheticL1 { workers, .. } => {
                let w = &workers[i];
                let r = residual(&w.a, &w.b, x);
                let s: Vector = r.iter().map(|&v| sign(v)).collect();
                (norm1(&r), w.a.matvec_t(&s))
            }
            _ => (self.f_value(i, x), self.f_subgrad(i, x)),
        }
    }

    pub fn g_value(&self, i: usize, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::L1Toy => 0.0,
            Kind::SyntheticL1 { constraint, .. } => constraint.as_ref().map_or(0.0, |c| c.value(x)),
            Kind::WorstCase { c, mu, horizon, r_class, f_star } => {
                worst_case_value(x, *c, *mu, *horizon, *r_class) - f_star
            }
            Kind::NeymanPearson { shards, threshold } => {
                mean_loss(&shards[i].class1, x, -1.0) - threshold
            }
            Kind::SmoothQuadratic { .. } => 0.0,
        }
    }

    pub fn g_subgrad(&self, i: usize, x: &[f64]) -> Vector {
        match &self.kind {
            Kind::L1Toy | Kind::SmoothQuadratic { .. } => vec![0.0; self.d],
            Kind::SyntheticL1 { constraint, .. } => {
                constraint.as_ref().map_or_else(|| vec![0.0; self.d], |c| c.subgrad(x))
            }
            Kind::WorstCase { c, mu, horizon, r_class, .. } => {
                worst_case_subgrad(x, *c, *mu, *horizon, *r_class)
            }
            Kind::NeymanPearson { shards, .. } => mean_loss_grad(&shards[i].class1, x, -1.0),
        }
    }

    /// Aggregate objective `f(x) = (1/n) Σ f_i(x)`; instrumentation only.
    pub fn f_mean(&self, x: &[f64]) -> f64 {
        (0..self.n).map(|i| self.f_value(i, x)).sum::<f64>() / self.n as f64
    }

    /// Aggregate constraint `g(x) = (1/n) Σ g_i(x)`; instrumentation only.
    pub fn g_mean(&self, x: &[f64]) -> f64 {
        if self.unconstrained {
            0.0
        } else {
            (0..self.n).map(|i| self.g_value(i, x)).sum::<f64>() / self.n as f64
        }
    }

    /// Number of local summands when `f_i` is a finite sum, else `None`.
    pub(crate) fn f_term_count(&self, i: usize) -> Option<usize> {
        match &self.kind {
            Kind::SyntheticL1 { workers, .. } => Some(workers[i].b.len()),
            Kind::NeymanPearson { shards, .. } => Some(shards[i].class0.len()),
            _ => None,
        }
    }

    /// Subgradient of the importance-scaled mini-batch estimator of `f_i`;
    /// its expectation (over a uniform batch) is the full subgradient.
    pub(crate) fn f_minibatch_subgrad(&self, i: usize, x: &[f64], batch: &[usize]) -> Vector {
        match &self.kind {
            Kind::SyntheticL1 { workers, .. } => {
                let w = &workers[i];
                let total = w.b.len() as f64;
                let mut out = vec![0.0; self.d];
                for &j in batch {
                    let rj = linalg::dot(w.a.row(j), x) - w.b[j];
                    linalg::axpy(sign(rj), w.a.row(j), &mut out);
                }
                linalg::scale(total / batch.len() as f64, &mut out);
                out
            }
            Kind::NeymanPearson { shards, .. } => {
                let rows = &shards[i].class0;
                let mut out = vec![0.0; self.d];
                for &j in batch {
                    let z = linalg::dot(&rows[j], x);
                    linalg::axpy(sigmoid(z), &rows[j], &mut out);
                }
                linalg::scale(1.0 / batch.len() as f64, &mut out);
                out
            }
            _ => self.f_subgrad(i, x),
        }
    }

    pub fn is_data_backed(&self) -> bool {
        self.f_term_count(0).is_some()
    }

    /// Attach `g_i(x) = a·x − b` to a data-backed instance. Optimum metadata
    /// is kept only when the known `x*` stays feasible.
    pub fn with_linear_constraint(self, a: Vector, b: f64) -> Result<Self> {
        if a.len() != self.d {
            return Err(Error::InvalidArgument("constraint dimension mismatch".into()));
        }
        let c = AttachedConstraint::Linear { a, b };
        self.attach(c)
    }

    /// Attach `g_i(x) = ‖x − center‖ − radius`.
    pub fn with_ball_constraint(self, center: Vector, radius: f64) -> Result<Self> {
        if center.len() != self.d || radius <= 0.0 {
            return Err(Error::InvalidArgument("bad ball constraint".into()));
        }
        let c = AttachedConstraint::Ball { center, radius };
        self.attach(c)
    }

    fn attach(mut self, c: AttachedConstraint) -> Result<Self> {
        match &mut self.kind {
            Kind::SyntheticL1 { constraint, .. } => {
                self.m_bound = self.m_bound.max(c.subgrad_bound());
                if let Some(xs) = &self.x_star {
                    if c.value(xs) > 0.0 {
                        // The constraint cuts off the unconstrained optimum.
                        self.x_star = None;
                        self.f_star = None;
                    }
                }
                *constraint = Some(c);
                self.unconstrained = false;
                Ok(self)
            }
            _ => Err(Error::Unsupported("constraints attach to synthetic instances only".into())),
        }
    }
}

fn residual(a: &Matrix, b: &[f64], x: &[f64]) -> Vector {
    let mut r = a.matvec(x);
    for (rj, bj) in r.iter_mut().zip(b) {
        *rj -= bj;
    }
    r
}

fn worst_case_value(x: &[f64], c: f64, mu: f64, horizon: usize, r_class: f64) -> f64 {
    let head = x[..horizon].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let nrm = norm(x);
    if nrm <= r_class / 2.0 {
        c * head + 0.5 * mu * nrm * nrm
    } else {
        c * head + 0.25 * mu * r_class * nrm
    }
}

fn worst_case_subgrad(x: &[f64], c: f64, mu: f64, horizon: usize, r_class: f64) -> Vector {
    // Smallest index attaining the head maximum.
    let mut k = 0;
    let mut best = x[0];
    for (j, &v) in x.iter().enumerate().take(horizon).skip(1) {
        if v > best {
            best = v;
            k = j;
        }
    }
    let nrm = norm(x);
    let mut out: Vector = if nrm <= r_class / 2.0 {
        x.iter().map(|&v| mu * v).collect()
    } else {
        x.iter().map(|&v| 0.25 * mu * r_class * v / nrm).collect()
    };
    out[k] += c;
    out
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean cross-entropy of the linear model over `rows`. `orient = 1` treats
/// rows as class-0 targets (loss `softplus(w·φ)`), `orient = −1` as class-1
/// targets (loss `softplus(−w·φ)`).
fn mean_loss(rows: &[Vector], x: &[f64], orient: f64) -> f64 {
    rows.iter().map(|phi| softplus(orient * linalg::dot(phi, x))).sum::<f64>() / rows.len() as f64
}

fn mean_loss_grad(rows: &[Vector], x: &[f64], orient: f64) -> Vector {
    let mut out = vec![0.0; x.len()];
    for phi in rows {
        let z = orient * linalg::dot(phi, x);
        linalg::axpy(orient * sigmoid(z), phi, &mut out);
    }
    linalg::scale(1.0 / rows.len() as f64, &mut out);
    out
}

/// The two-dimensional `‖x‖₁` toy with `x⁰ = (γ/2, −1)`.
///
/// Single worker; the subgradient oracle picks `sign(0) = 0`, and the
/// returned instance records the estimator initialization `(1, 1)` used to
/// reproduce the EF21 divergence trajectory.
pub fn make_l1_toy(gamma: f64) -> Result<ProblemInstance> {
    if gamma < 0.0 {
        return Err(Error::InvalidArgument("gamma must be nonnegative".into()));
    }
    let x0 = vec![gamma / 2.0, -1.0];
    let radius = norm(&x0);
    Ok(ProblemInstance {
        n: 1,
        d: 2,
        m_bound: 2f64.sqrt(),
        radius: Some(radius),
        x_star: Some(vec![0.0, 0.0]),
        f_star: Some(0.0),
        x0,
        unconstrained: true,
        l_smooth: None,
        ef21_estimator_init: Some(vec![1.0, 1.0]),
        kind: Kind::L1Toy,
    })
}

/// Shared matrix, planted solution, and per-worker (normalized draw, noise)
/// pairs — the raw ingredients before the heterogeneity shift.
fn synthetic_raw(p: &SyntheticGenParams) -> (Matrix, Vector, Vec<(Matrix, Vector)>) {
    let mut rng = stream(p.seed, StreamKind::Generator, 0);
    let draw_matrix = |d: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let mut m = Matrix::zeros(d, d);
        for v in m.data.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        m
    };
    let mut a = draw_matrix(p.d, &mut rng);
    a.scale(1.0 / a.frobenius_norm());
    let x_truth: Vector = (0..p.d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut locals = Vec::with_capacity(p.n);
    for _ in 0..p.n {
        let mut ai = draw_matrix(p.d, &mut rng);
        ai.scale(1.0 / ai.frobenius_norm());
        let xi: Vector = (0..p.d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        locals.push((ai, xi));
    }
    (a, x_truth, locals)
}

/// Synthetic heterogeneous ℓ₁ regression, `f_i(x) = ‖A_i x − b_i‖₁`.
///
/// Draws a shared Frobenius-normalized Gaussian matrix `A` and a planted
/// solution, then per worker a normalized Gaussian draw shifted as
/// `A_i ← A + s·A_i` and labels `b_i = A_i x_truth + ζ ξ`. Unconstrained by
/// default; a ball or linear constraint can be attached afterwards.
///
/// With `ζ = 0` the residual vanishes at the planted solution, so
/// `x* = x_truth` and `f* = 0` exactly; otherwise the optimum metadata is
/// unknown and `R` is recorded as the documented estimate
/// `‖x⁰ − x_truth‖ + ζ·d`.
///
/// `M` is the column-sum bound `max_i Σ_j ‖row_j(A_i)‖`, an upper bound on
/// `‖A_iᵀ s‖` over sign vectors (valid, not tight).
pub fn gen_synthetic_l1(p: &SyntheticGenParams) -> Result<ProblemInstance> {
    if p.n == 0 || p.d == 0 {
        return Err(Error::InvalidArgument("need n >= 1 and d >= 1".into()));
    }
    if p.s < 0.0 || p.zeta < 0.0 {
        return Err(Error::InvalidArgument("s and zeta must be nonnegative".into()));
    }
    let (a, x_truth, locals) = synthetic_raw(p);
    let mut workers = Vec::with_capacity(p.n);
    let mut m_bound = 0.0f64;
    for (mut ai, xi) in locals {
        ai.scale(p.s);
        ai.add_scaled(1.0, &a);
        let mut b = ai.matvec(&x_truth);
        linalg::axpy(p.zeta, &xi, &mut b);
        let col_sum: f64 = (0..p.d).map(|j| norm(ai.row(j))).sum();
        m_bound = m_bound.max(col_sum);
        workers.push(L1Local { a: ai, b });
    }
    let x0 = vec![0.0; p.d];
    let exact = p.zeta == 0.0;
    let dist0 = linalg::dist(&x0, &x_truth);
    Ok(ProblemInstance {
        n: p.n,
        d: p.d,
        m_bound,
        radius: Some(if exact { dist0 } else { dist0 + p.zeta * p.d as f64 }),
        x_star: exact.then(|| x_truth.clone()),
        f_star: exact.then_some(0.0),
        x0,
        unconstrained: true,
        l_smooth: None,
        ef21_estimator_init: None,
        kind: Kind::SyntheticL1 { workers, constraint: None },
    })
}

/// The hard instance: all workers share
/// `h(x) = C·max_{1≤j≤T} x_j + (μ/2)‖x‖²` on `{‖x‖ ≤ R/2}` (with the linear
/// radial extension `(μR/4)‖x‖` outside), and `g_i = f_i − f*`. The
/// subgradient oracle returns `μ·(radial part) + C·e_k` with `k` the
/// smallest maximizing index, so progress toward new coordinates can only
/// come one index at a time.
///
/// `x*` has `−C/(μT)` in the first `T` coordinates and `f* = −C²/(2μT)`;
/// note `‖x⁰ − x*‖ = R/2`. The instance's recorded subgradient bound is
/// `C + μR/2`, which exceeds the class constant `M` when `δ < 1`.
pub fn make_worst_case(p: &WorstCaseParams, n: usize) -> Result<ProblemInstance> {
    p.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("need n >= 1".into()));
    }
    let (c, mu) = p.constants();
    let d = p.dimension();
    let f_star = -theory::worst_case_lower_gap(p.r, p.m, p.delta, p.t);
    let mut x_star = vec![0.0; d];
    for v in x_star.iter_mut().take(p.t) {
        *v = -c / (mu * p.t as f64);
    }
    Ok(ProblemInstance {
        n,
        d,
        m_bound: c + mu * p.r / 2.0,
        radius: Some(p.r),
        x_star: Some(x_star),
        f_star: Some(f_star),
        x0: vec![0.0; d],
        unconstrained: false,
        l_smooth: None,
        ef21_estimator_init: None,
        kind: Kind::WorstCase { c, mu, horizon: p.t, r_class: p.r, f_star },
    })
}

/// Neyman–Pearson classification with a linear model: minimize the class-0
/// cross-entropy subject to the class-1 cross-entropy staying below `c`.
/// Samples are sharded contiguously across the `n` workers; every shard must
/// contain both classes.
pub fn make_neyman_pearson(
    features: &Matrix,
    labels: &[u8],
    c: f64,
    n: usize,
) -> Result<ProblemInstance> {
    if features.rows != labels.len() {
        return Err(Error::Generation("feature/label count mismatch".into()));
    }
    if n == 0 || features.rows < n {
        return Err(Error::Generation("more workers than samples".into()));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::Generation("labels must be 0 or 1".into()));
    }
    let d = features.cols;
    let mut shards = Vec::with_capacity(n);
    let base = features.rows / n;
    let extra = features.rows % n;
    let mut start = 0;
    for i in 0..n {
        let len = base + usize::from(i < extra);
        let mut shard = NpShard { class0: Vec::new(), class1: Vec::new() };
        for (row, &label) in labels.iter().enumerate().skip(start).take(len) {
            let phi = features.row(row).to_vec();
            if label == 0 {
                shard.class0.push(phi);
            } else {
                shard.class1.push(phi);
            }
        }
        if shard.class0.is_empty() || shard.class1.is_empty() {
            return Err(Error::Generation(format!(
                "worker {i} is missing a class under contiguous sharding; reshard the data"
            )));
        }
        start += len;
        shards.push(shard);
    }
    let m_bound = (0..features.rows).map(|r| norm(features.row(r))).fold(0.0f64, f64::max);
    Ok(ProblemInstance {
        n,
        d,
        m_bound,
        radius: None,
        x_star: None,
        f_star: None,
        x0: vec![0.0; d],
        unconstrained: false,
        l_smooth: None,
        ef21_estimator_init: None,
        kind: Kind::NeymanPearson { shards, threshold: c },
    })
}

/// Parameters of the smooth diagonal quadratic used to exercise the
/// projected method: eigenvalues log-spaced over `decades` orders of
/// magnitude below `l_max`, per-worker anchors drawn at `anchor_scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothQuadraticParams {
    pub n: usize,
    pub d: usize,
    pub l_max: f64,
    pub decades: f64,
    pub anchor_scale: f64,
    pub seed: u64,
}

/// Smooth convex quadratic `f_i(x) = ½ Σ_j λ_j (x_j − a_{ij})²` with
/// unconstrained minimizer at the anchor mean. The broad spectrum keeps the
/// gradient-method decay in its sublinear phase over practical horizons.
pub fn make_smooth_quadratic(p: &SmoothQuadraticParams) -> Result<ProblemInstance> {
    if p.n == 0 || p.d < 2 || p.l_max <= 0.0 || p.decades < 0.0 {
        return Err(Error::InvalidArgument("bad quadratic params".into()));
    }
    let mut rng = stream(p.seed, StreamKind::Generator, 0);
    let eigs: Vector =
        (0..p.d).map(|j| p.l_max * 10f64.powf(-p.decades * j as f64 / (p.d - 1) as f64)).collect();
    let anchors: Vec<Vector> = (0..p.n)
        .map(|_| (0..p.d).map(|_| p.anchor_scale * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let x_star = linalg::mean_vector(&anchors);
    let x0 = vec![0.0; p.d];
    let radius = linalg::dist(&x0, &x_star);
    let max_anchor = anchors.iter().map(|a| norm(a)).fold(0.0f64, f64::max);
    // Valid gradient bound on the region the audits and runs explore.
    let m_bound = p.l_max * (2.0 * norm(&x_star) + 2.0 * max_anchor + 1.0);
    let kind = Kind::SmoothQuadratic { eigs, anchors };
    let inst = ProblemInstance {
        n: p.n,
        d: p.d,
        m_bound,
        radius: Some(radius),
        x_star: Some(x_star.clone()),
        f_star: None,
        x0,
        unconstrained: true,
        l_smooth: Some(p.l_max),
        ef21_estimator_init: None,
        kind,
    };
    let f_star = inst.f_mean(&x_star);
    Ok(ProblemInstance { f_star: Some(f_star), ..inst })
}

/// Load a headerless CSV dataset: one sample per row, last column is the
/// binary label in {0, 1}, remaining columns are features.
pub fn load_np_csv(path: &std::path::Path) -> Result<(Matrix, Vec<u8>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    parse_np_csv(&text)
}

pub fn parse_np_csv(text: &str) -> Result<(Matrix, Vec<u8>)> {
    let mut rows: Vec<Vector> = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(Error::Dataset(format!("line {}: need features + label", lineno + 1)));
        }
        let mut vals = Vec::with_capacity(fields.len());
        for f in &fields {
            vals.push(
                f.parse::<f64>().map_err(|_| {
                    Error::Dataset(format!("line {}: bad number {f:?}", lineno + 1))
                })?,
            );
        }
        let label = vals.pop().unwrap();
        if label != 0.0 && label != 1.0 {
            return Err(Error::Dataset(format!(
                "line {}: label must be 0 or 1, got {label}",
                lineno + 1
            )));
        }
        if let Some(first) = rows.first() {
            if first.len() != vals.len() {
                return Err(Error::Dataset(format!("line {}: ragged row", lineno + 1)));
            }
        }
        labels.push(label as u8);
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::Dataset("empty dataset".into()));
    }
    Ok((Matrix::from_rows(rows), labels))
}

/// Result of the randomized convexity / subgradient-norm audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport {
    pub pairs: usize,
    /// Worst observed `f_i(x) + ⟨f_i'(x), y−x⟩ − f_i(y)` (positive = violation).
    pub max_convexity_violation: f64,
    pub max_subgrad_norm: f64,
}

/// Sample `pairs` random `(x, y)` pairs per worker inside a box of the given
/// half-width around `x0` and check the subgradient inequality for both `f`
/// and `g`, tracking the largest subgradient norm seen.
pub fn audit(inst: &ProblemInstance, half_width: f64, pairs: usize, seed: u64) -> AuditReport {
    let mut rng = stream(seed, StreamKind::Generator, 1);
    let mut worst = f64::NEG_INFINITY;
    let mut max_norm = 0.0f64;
    let sample = |rng: &mut rand_chacha::ChaCha8Rng| -> Vector {
        inst.x0.iter().map(|&c| c + half_width * (rng.random::<f64>() * 2.0 - 1.0)).collect()
    };
    for _ in 0..pairs {
        let i = (rng.random::<u64>() % inst.n as u64) as usize;
        let x = sample(&mut rng);
        let y = sample(&mut rng);
        let gap = {
            let fx = inst.f_value(i, &x);
            let fy = inst.f_value(i, &y);
            let gx = inst.f_subgrad(i, &x);
            max_norm = max_norm.max(norm(&gx));
            fx + linalg::dot(&gx, &linalg::sub(&y, &x)) - fy
        };
        worst = worst.max(gap);
        if !inst.unconstrained {
            let gx_val = inst.g_value(i, &x);
            let gy_val = inst.g_value(i, &y);
            let sg = inst.g_subgrad(i, &x);
            max_norm = max_norm.max(norm(&sg));
            worst = worst.max(gx_val + linalg::dot(&sg, &linalg::sub(&y, &x)) - gy_val);
        }
    }
    AuditReport { pairs, max_convexity_violation: worst, max_subgrad_norm: max_norm }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAMMA: f64 = 0.0316227766016838; // 1/sqrt(1000)

    #[test]
    fn toy_value_and_subgradients() {
        let p = make_l1_toy(GAMMA).unwrap();
        assert_eq!(p.n, 1);
        assert!((p.f_value(0, &p.x0) - (1.0 + GAMMA / 2.0)).abs() < 1e-15);
        assert_eq!(p.f_subgrad(0, &[1.0, -1.0]), vec![1.0, -1.0]);
        assert_eq!(p.f_subgrad(0, &[0.0, -1.0]), vec![0.0, -1.0]);
        assert_eq!(p.f_star, Some(0.0));
        assert_eq!(p.ef21_estimator_init, Some(vec![1.0, 1.0]));
        assert!(p.unconstrained);
    }

    #[test]
    fn synthetic_zero_noise_has_exact_optimum() {
        let p = SyntheticGenParams { n: 4, d: 20, s: 1.0, zeta: 0.0, seed: 9 };
        let inst = gen_synthetic_l1(&p).unwrap();
        let xs = inst.x_star.clone().unwrap();
        assert_eq!(inst.f_star, Some(0.0));
        for i in 0..4 {
            assert!(inst.f_value(i, &xs).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_zero_shift_replicates_shared_matrix() {
        let p = SyntheticGenParams { n: 3, d: 8, s: 0.0, zeta: 0.0, seed: 5 };
        let inst = gen_synthetic_l1(&p).unwrap();
        match &inst.kind {
            Kind::SyntheticL1 { workers, .. } => {
                for w in &workers[1..] {
                    assert_eq!(w.a.data, workers[0].a.data);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn synthetic_per_worker_draws_are_unit_frobenius_before_shift() {
        let p = SyntheticGenParams { n: 5, d: 12, s: 2.0, zeta: 0.1, seed: 3 };
        let (_, _, locals) = synthetic_raw(&p);
        for (ai, _) in &locals {
            assert!((ai.frobenius_norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_is_seed_deterministic() {
        let p = SyntheticGenParams { n: 2, d: 10, s: 1.0, zeta: 1e-3, seed: 77 };
        let a = gen_synthetic_l1(&p).unwrap();
        let b = gen_synthetic_l1(&p).unwrap();
        match (&a.kind, &b.kind) {
            (Kind::SyntheticL1 { workers: wa, .. }, Kind::SyntheticL1 { workers: wb, .. }) => {
                for (x, y) in wa.iter().zip(wb) {
                    assert_eq!(x.a.data, y.a.data);
                    assert_eq!(x.b, y.b);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn worst_case_closed_forms() {
        let p = WorstCaseParams::new(16, 0.25, 1.0, 1.0);
        let inst = make_worst_case(&p, 2).unwrap();
        let (c, mu) = p.constants();
        let lower = theory::worst_case_lower_gap(1.0, 1.0, 0.25, 16);

        // C = RμT^(1/2)/2 holds with equality by construction.
        assert!((c - p.r * mu * (p.t as f64).sqrt() / 2.0).abs() < 1e-15);

        // h(0) = 0, so the initial gap is exactly C²/(2μT).
        assert_eq!(inst.f_value(0, &inst.x0), 0.0);
        assert_eq!(inst.f_value(0, &inst.x0) - inst.f_star.unwrap(), lower);

        // Subgradient at 0 resolves the tie to the first coordinate.
        let g = inst.f_subgrad(0, &inst.x0);
        assert_eq!(g[0], c);
        assert!(g[1..].iter().all(|&v| v == 0.0));

        // Direct evaluation at x* reproduces f*.
        let xs = inst.x_star.clone().unwrap();
        assert!((inst.f_value(0, &xs) - inst.f_star.unwrap()).abs() < 1e-15);
        assert!((norm(&xs) - c / (mu * 4.0)).abs() < 1e-12); // C/(μ√T), √T = 4
        assert!(norm(&xs) <= p.r / 2.0 + 1e-15);

        // g is the shifted objective and shares subgradients.
        let x = vec![0.125; inst.d];
        assert!((inst.g_value(0, &x) - (inst.f_value(0, &x) - inst.f_star.unwrap())).abs() < 1e-15);
        assert_eq!(inst.g_subgrad(0, &x), inst.f_subgrad(0, &x));
    }

    #[test]
    fn worst_case_gap_floor_for_undiscovered_outputs() {
        let p = WorstCaseParams::new(16, 0.25, 1.0, 1.0);
        let inst = make_worst_case(&p, 2).unwrap();
        let lower = theory::worst_case_lower_gap(1.0, 1.0, 0.25, 16);
        let mut rng = stream(4, StreamKind::Generator, 0);
        for _ in 0..500 {
            // Random sparse x with prog(x) < T.
            let nnz = (rng.random::<u64>() % 8) as usize;
            let mut x = vec![0.0; inst.d];
            for _ in 0..nnz {
                let j = (rng.random::<u64>() % (p.t as u64 - 1)) as usize;
                x[j] = rng.random::<f64>() * 2.0 - 1.0;
            }
            assert!(theory::prog(&x) < p.t);
            let gap = inst.f_value(0, &x) - inst.f_star.unwrap();
            assert!(gap >= lower);
        }
    }

    #[test]
    fn worst_case_regime_guard() {
        assert!(make_worst_case(&WorstCaseParams::new(4, 0.25, 1.0, 1.0), 2).is_err());
        let relaxed = WorstCaseParams {
            allow_out_of_regime: true,
            ..WorstCaseParams::new(4, 0.25, 1.0, 1.0)
        };
        assert!(make_worst_case(&relaxed, 2).is_ok());
    }

    #[test]
    fn worst_case_dimension_rule() {
        // d = max(T, ⌊5Tδ⌋): both regimes.
        assert_eq!(WorstCaseParams::new(256, 0.25, 1.0, 1.0).dimension(), 320);
        let small = WorstCaseParams {
            allow_out_of_regime: true,
            ..WorstCaseParams::new(100, 0.1, 1.0, 1.0)
        };
        assert_eq!(small.dimension(), 100);
    }

    fn toy_np_data() -> (Matrix, Vec<u8>) {
        let rows = vec![vec![-1.0, 0.2], vec![1.0, -0.1], vec![-0.8, -0.2], vec![1.2, 0.1]];
        (Matrix::from_rows(rows), vec![0, 1, 0, 1])
    }

    #[test]
    fn np_zero_weights_give_ln2() {
        let (f, l) = toy_np_data();
        let inst = make_neyman_pearson(&f, &l, 2f64.ln(), 1).unwrap();
        let zero = vec![0.0, 0.0];
        assert!((inst.f_value(0, &zero) - 2f64.ln()).abs() < 1e-15);
        // threshold ln 2 puts the zero vector on the feasibility boundary
        assert!(inst.g_value(0, &zero).abs() < 1e-15);
    }

    #[test]
    fn np_missing_class_errors() {
        let (f, l) = toy_np_data();
        // 4 samples over 3 workers: some shard has one sample only.
        let err = make_neyman_pearson(&f, &l, 0.5, 3).unwrap_err();
        assert!(matches!(err, Error::Generation(_)));
    }

    #[test]
    fn np_separable_two_points_decay_monotonically() {
        // One sample per class, separable along u = (1, 0): both per-class
        // losses equal softplus(−t) at w = t·u.
        let f = Matrix::from_rows(vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
        let inst = make_neyman_pearson(&f, &[0, 1], 0.25, 1).unwrap();
        let mut prev = f64::INFINITY;
        for step in 0..=10 {
            let t = step as f64 * 0.5;
            let w = vec![t, 0.0];
            let v = inst.f_value(0, &w);
            assert!((v - softplus(-t)).abs() < 1e-12);
            assert!(v < prev || step == 0);
            assert!((inst.g_value(0, &w) + 0.25 - softplus(-t)).abs() < 1e-12);
            prev = v;
        }
        assert!(prev < 0.01);
    }

    #[test]
    fn np_csv_loader_round_trip() {
        let text = "1.0, 2.0, 0\n-0.5, 0.25, 1\n";
        let (m, l) = parse_np_csv(text).unwrap();
        assert_eq!(m.rows, 2);
        assert_eq!(m.cols, 2);
        assert_eq!(l, vec![0, 1]);
        assert!(parse_np_csv("1.0, 1\n").is_ok());
        assert!(parse_np_csv("1.0, 0.5, 2\n").is_err()); // bad label
        assert!(parse_np_csv("1.0\n").is_err());
        assert!(parse_np_csv("").is_err());
    }

    #[test]
    fn attached_linear_constraint_keeps_feasible_optimum() {
        let p = SyntheticGenParams { n: 2, d: 6, s: 0.5, zeta: 0.0, seed: 1 };
        let inst = gen_synthetic_l1(&p).unwrap();
        let xs = inst.x_star.clone().unwrap();
        let mut a = vec![0.0; 6];
        a[0] = 1.0;
        // Boundary constraint through x*: metadata survives.
        let inst = inst.with_linear_constraint(a.clone(), xs[0]).unwrap();
        assert!(inst.x_star.is_some());
        assert!(!inst.unconstrained);
        assert!(inst.g_value(0, &xs).abs() < 1e-15);
        assert_eq!(inst.g_subgrad(1, &xs), a);

        // A constraint cutting off x* drops the metadata.
        let p2 = gen_synthetic_l1(&p).unwrap();
        let mut a2 = vec![0.0; 6];
        a2[0] = 1.0;
        let cut = p2.with_linear_constraint(a2, xs[0] - 1.0).unwrap();
        assert!(cut.x_star.is_none());
        assert!(cut.f_star.is_none());
    }

    #[test]
    fn ball_constraint_oracles() {
        let p = SyntheticGenParams { n: 1, d: 3, s: 0.0, zeta: 0.0, seed: 2 };
        let inst = gen_synthetic_l1(&p).unwrap().with_ball_constraint(vec![0.0; 3], 2.0).unwrap();
        let x = vec![3.0, 0.0, 0.0];
        assert!((inst.g_value(0, &x) - 1.0).abs() < 1e-15);
        assert_eq!(inst.g_subgrad(0, &x), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn audits_pass_on_the_zoo() {
        let toy = make_l1_toy(GAMMA).unwrap();
        let syn =
            gen_synthetic_l1(&SyntheticGenParams { n: 3, d: 12, s: 1.0, zeta: 1e-3, seed: 8 })
                .unwrap();
        let wc = make_worst_case(&WorstCaseParams::new(16, 0.25, 1.0, 1.0), 2).unwrap();
        let (f, l) = toy_np_data();
        let np = make_neyman_pearson(&f, &l, 0.5, 1).unwrap();
        let quad = make_smooth_quadratic(&SmoothQuadraticParams {
            n: 2,
            d: 10,
            l_max: 1.0,
            decades: 3.0,
            anchor_scale: 1.0,
            seed: 4,
        })
        .unwrap();
        for (inst, hw) in [(&toy, 2.0), (&syn, 2.0), (&wc, 1.0), (&np, 2.0), (&quad, 2.0)] {
            let rep = audit(inst, hw, 1000, 99);
            assert!(
                rep.max_convexity_violation <= 1e-9,
                "convexity violated: {}",
                rep.max_convexity_violation
            );
            assert!(
                rep.max_subgrad_norm <= inst.m_bound + 1e-9,
                "norm {} > M {}",
                rep.max_subgrad_norm,
                inst.m_bound
            );
        }
    }

    #[test]
    fn quadratic_metadata() {
        let p = SmoothQuadraticParams {
            n: 3,
            d: 16,
            l_max: 2.0,
            decades: 4.0,
            anchor_scale: 1.0,
            seed: 11,
        };
        let inst = make_smooth_quadratic(&p).unwrap();
        let xs = inst.x_star.clone().unwrap();
        let fs = inst.f_star.unwrap();
        assert!((inst.f_mean(&xs) - fs).abs() < 1e-14);
        // f* really is the minimum along random directions.
        let mut rng = stream(0, StreamKind::Generator, 2);
        for _ in 0..50 {
            let y: Vector = xs.iter().map(|v| v + 0.3 * (rng.random::<f64>() - 0.5)).collect();
            assert!(inst.f_mean(&y) >= fs - 1e-12);
        }
        assert_eq!(inst.l_smooth, Some(2.0));
    }
}
