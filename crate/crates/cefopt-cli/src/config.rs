//! Experiment config files: sectioned plain-text `key = value`.
//!
//! Sections are `[problem]`, `[algorithm]`, `[run]`, `[sweep]`, `[output]`.
//! Values are bare scalars or bracketed lists (`seeds = [1, 2, 3]`); `#`
//! starts a comment. The `[sweep]` section lists values per field
//! (`algorithm.t = [1000, 4000]`, `problem.s = [0.1, 1.0]`) and the runner
//! crosses all axes. Parse errors carry the line and field they came from.

use std::collections::BTreeMap;
use std::fmt;

use cefopt::algorithms::{self, AlgorithmConfig, AlgorithmKind, Projection};
use cefopt::compressors::CompressorSpec;
use cefopt::oracles::StochasticConfig;
use cefopt::problems::{
    self, ProblemInstance, SmoothQuadraticParams, SyntheticGenParams, WorstCaseParams,
};

#[derive(Debug, Clone)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> CResult<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Scalar(String),
    List(Vec<String>),
}

impl RawValue {
    fn as_scalar(&self, field: &str) -> CResult<&str> {
        match self {
            RawValue::Scalar(s) => Ok(s),
            RawValue::List(_) => err(format!("field {field}: expected a scalar, found a list")),
        }
    }
}

/// One parsed section: insertion-ordered `key -> (value, line)`.
#[derive(Debug, Clone, Default)]
pub struct SectionMap {
    entries: Vec<(String, RawValue, usize)>,
}

impl SectionMap {
    fn insert(&mut self, key: String, value: RawValue, line: usize) -> CResult<()> {
        if self.entries.iter().any(|(k, _, _)| *k == key) {
            return err(format!("line {line}: duplicate key {key:?}"));
        }
        self.entries.push((key, value, line));
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: RawValue) {
        if let Some(e) = self.entries.iter_mut().find(|(k, _, _)| k == key) {
            e.1 = value;
        } else {
            self.entries.push((key.to_string(), value, 0));
        }
    }

    pub fn get(&self, key: &str) -> Option<&RawValue> {
        self.entries.iter().find(|(k, _, _)| k == key).map(|(_, v, _)| v)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _, _)| k.as_str())
    }

    fn scalar(&self, section: &str, key: &str) -> CResult<Option<&str>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => Ok(Some(v.as_scalar(&format!("{section}.{key}"))?)),
        }
    }

    fn required(&self, section: &str, key: &str) -> CResult<&str> {
        self.scalar(section, key)?
            .ok_or_else(|| ConfigError(format!("missing required field {section}.{key}")))
    }

    fn f64_opt(&self, section: &str, key: &str) -> CResult<Option<f64>> {
        match self.scalar(section, key)? {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|_| ConfigError(format!("field {section}.{key}: bad number {s:?}"))),
        }
    }

    fn f64_or(&self, section: &str, key: &str, default: f64) -> CResult<f64> {
        Ok(self.f64_opt(section, key)?.unwrap_or(default))
    }

    fn f64_req(&self, section: &str, key: &str) -> CResult<f64> {
        self.f64_opt(section, key)?
            .ok_or_else(|| ConfigError(format!("missing required field {section}.{key}")))
    }

    fn usize_opt(&self, section: &str, key: &str) -> CResult<Option<usize>> {
        match self.scalar(section, key)? {
            None => Ok(None),
            Some(s) => s
                .parse::<usize>()
                .map(Some)
                .map_err(|_| ConfigError(format!("field {section}.{key}: bad integer {s:?}"))),
        }
    }

    fn usize_req(&self, section: &str, key: &str) -> CResult<usize> {
        self.usize_opt(section, key)?
            .ok_or_else(|| ConfigError(format!("missing required field {section}.{key}")))
    }

    fn u64_or(&self, section: &str, key: &str, default: u64) -> CResult<u64> {
        match self.scalar(section, key)? {
            None => Ok(default),
            Some(s) => s
                .parse::<u64>()
                .map_err(|_| ConfigError(format!("field {section}.{key}: bad integer {s:?}"))),
        }
    }

    fn bool_or(&self, section: &str, key: &str, default: bool) -> CResult<bool> {
        match self.scalar(section, key)? {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(s) => err(format!("field {section}.{key}: expected true/false, got {s:?}")),
        }
    }
}

const PROBLEM_FIELDS: &[&str] = &[
    "kind",
    "n",
    "d",
    "s",
    "zeta",
    "seed",
    "gamma",
    "horizon",
    "delta",
    "r",
    "m",
    "relax_regime",
    "dataset",
    "threshold",
    "l_max",
    "decades",
    "anchor_scale",
    "constraint",
];
const ALGORITHM_FIELDS: &[&str] = &[
    "kind",
    "gamma",
    "c",
    "t",
    "uplink",
    "downlink",
    "count_index_overhead",
    "eta",
    "lambda0",
    "v0",
    "projection",
    "sigma_fv",
    "n_fv",
    "subgrad_batch",
    "beta",
];
const RUN_FIELDS: &[&str] = &["seeds"];
const OUTPUT_FIELDS: &[&str] = &["dir", "stride"];

/// A fully parsed and field-validated experiment file.
#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    pub problem: SectionMap,
    pub algorithm: SectionMap,
    pub run: SectionMap,
    pub sweep: SectionMap,
    pub output: SectionMap,
}

pub fn parse(text: &str) -> CResult<ExperimentConfig> {
    let mut sections: BTreeMap<String, SectionMap> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError(format!("line {line_no}: unterminated section header")))?
                .trim()
                .to_string();
            if !["problem", "algorithm", "run", "sweep", "output"].contains(&name.as_str()) {
                return err(format!("line {line_no}: unknown section [{name}]"));
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {line_no}: expected key = value")))?;
        let key = key.trim().to_string();
        let value = value.trim();
        let section = current
            .clone()
            .ok_or_else(|| ConfigError(format!("line {line_no}: key before any [section]")))?;
        let raw = if let Some(inner) = value.strip_prefix('[') {
            let inner = inner.strip_suffix(']').ok_or_else(|| {
                ConfigError(format!("line {line_no}: unterminated list for {key:?}"))
            })?;
            let items: Vec<String> =
                inner.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            RawValue::List(items)
        } else {
            RawValue::Scalar(value.to_string())
        };
        sections.get_mut(&section).unwrap().insert(key, raw, line_no)?;
    }

    let cfg = ExperimentConfig {
        problem: sections.remove("problem").unwrap_or_default(),
        algorithm: sections.remove("algorithm").unwrap_or_default(),
        run: sections.remove("run").unwrap_or_default(),
        sweep: sections.remove("sweep").unwrap_or_default(),
        output: sections.remove("output").unwrap_or_default(),
    };
    validate_fields(&cfg)?;
    Ok(cfg)
}

fn validate_fields(cfg: &ExperimentConfig) -> CResult<()> {
    for (name, map, allowed) in [
        ("problem", &cfg.problem, PROBLEM_FIELDS),
        ("algorithm", &cfg.algorithm, ALGORITHM_FIELDS),
        ("run", &cfg.run, RUN_FIELDS),
        ("output", &cfg.output, OUTPUT_FIELDS),
    ] {
        for key in map.keys() {
            if !allowed.contains(&key) {
                return err(format!("unknown field {name}.{key}"));
            }
        }
    }
    // Every sweep axis must name an existing field of its section.
    for key in cfg.sweep.keys() {
        let (section, field) = key.split_once('.').unwrap_or(("algorithm", key));
        let allowed = match section {
            "problem" => PROBLEM_FIELDS,
            "algorithm" => ALGORITHM_FIELDS,
            _ => return err(format!("sweep axis {key}: unknown section {section:?}")),
        };
        if !allowed.contains(&field) {
            return err(format!("sweep axis {key}: no such field {section}.{field}"));
        }
    }
    Ok(())
}

/// One sweep point: base sections with one override combination applied.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub label: String,
    pub problem: SectionMap,
    pub algorithm: SectionMap,
}

/// Cross all sweep axes. No sweep block yields exactly one point.
pub fn expand_sweep(cfg: &ExperimentConfig) -> CResult<Vec<SweepPoint>> {
    let mut axes: Vec<(String, Vec<String>)> = Vec::new();
    for key in cfg.sweep.keys() {
        let values = match cfg.sweep.get(key).unwrap() {
            RawValue::List(vs) if !vs.is_empty() => vs.clone(),
            RawValue::List(_) => return err(format!("sweep axis {key}: empty list")),
            RawValue::Scalar(s) => vec![s.clone()],
        };
        axes.push((key.to_string(), values));
    }
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (axis, values) in &axes {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for combo in &combos {
            for v in values {
                let mut c = combo.clone();
                c.push((axis.clone(), v.clone()));
                next.push(c);
            }
        }
        combos = next;
    }
    Ok(combos
        .into_iter()
        .enumerate()
        .map(|(index, overrides)| {
            let mut problem = cfg.problem.clone();
            let mut algorithm = cfg.algorithm.clone();
            let mut label_parts = Vec::new();
            for (axis, value) in &overrides {
                let (section, field) = axis.split_once('.').unwrap_or(("algorithm", axis.as_str()));
                match section {
                    "problem" => problem.set(field, RawValue::Scalar(value.clone())),
                    _ => algorithm.set(field, RawValue::Scalar(value.clone())),
                }
                label_parts.push(format!("{axis}={value}"));
            }
            SweepPoint { index, label: label_parts.join(","), problem, algorithm }
        })
        .collect())
}

pub fn seeds(cfg: &ExperimentConfig) -> CResult<Vec<u64>> {
    match cfg.run.get("seeds") {
        None => err("missing required field run.seeds"),
        Some(RawValue::Scalar(s)) => {
            let seed = s
                .parse::<u64>()
                .map_err(|_| ConfigError(format!("field run.seeds: bad integer {s:?}")))?;
            Ok(vec![seed])
        }
        Some(RawValue::List(vs)) => {
            if vs.is_empty() {
                return err("field run.seeds: must be non-empty");
            }
            vs.iter()
                .map(|s| {
                    s.parse::<u64>()
                        .map_err(|_| ConfigError(format!("field run.seeds: bad integer {s:?}")))
                })
                .collect()
        }
    }
}

/// Echo of the resolved problem settings for the summary CSV.
#[derive(Debug, Clone, Default)]
pub struct ProblemEcho {
    pub fields: Vec<(&'static str, String)>,
}

pub fn build_problem(
    map: &SectionMap,
    algo_gamma_hint: Option<f64>,
) -> CResult<(ProblemInstance, ProblemEcho)> {
    let kind = map.required("problem", "kind")?;
    let mut echo = ProblemEcho::default();
    echo.fields.push(("problem_kind", kind.to_string()));
    let inst = match kind {
        "l1_toy" => {
            let gamma = match map.f64_opt("problem", "gamma")? {
                Some(g) => g,
                None => algo_gamma_hint.ok_or_else(|| {
                    ConfigError(
                        "field problem.gamma: required for l1_toy when algorithm.gamma is symbolic"
                            .into(),
                    )
                })?,
            };
            echo.fields.push(("problem_gamma", format!("{gamma}")));
            problems::make_l1_toy(gamma).map_err(|e| ConfigError(e.to_string()))?
        }
        "synthetic_l1" => {
            let p = SyntheticGenParams {
                n: map.usize_req("problem", "n")?,
                d: map.usize_req("problem", "d")?,
                s: map.f64_or("problem", "s", 1.0)?,
                zeta: map.f64_or("problem", "zeta", 0.0)?,
                seed: map.u64_or("problem", "seed", 0)?,
            };
            echo.fields.push(("problem_n", p.n.to_string()));
            echo.fields.push(("problem_d", p.d.to_string()));
            echo.fields.push(("problem_s", p.s.to_string()));
            echo.fields.push(("problem_zeta", p.zeta.to_string()));
            echo.fields.push(("problem_seed", p.seed.to_string()));
            let inst = problems::gen_synthetic_l1(&p).map_err(|e| ConfigError(e.to_string()))?;
            match map.scalar("problem", "constraint")?.unwrap_or("none") {
                "none" => inst,
                "linear" => {
                    // Boundary plane through the planted solution.
                    let xs = inst.x_star.clone().ok_or_else(|| {
                        ConfigError(
                            "field problem.constraint: linear needs zeta = 0 (planted optimum)"
                                .into(),
                        )
                    })?;
                    let b = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let a: Vec<f64> = xs.iter().map(|v| v / b).collect();
                    echo.fields.push(("problem_constraint", "linear".into()));
                    inst.with_linear_constraint(a, b).map_err(|e| ConfigError(e.to_string()))?
                }
                other => match other.strip_prefix("ball:") {
                    Some(radius) => {
                        let r: f64 = radius.parse().map_err(|_| {
                            ConfigError(format!("field problem.constraint: bad radius {radius:?}"))
                        })?;
                        echo.fields.push(("problem_constraint", other.to_string()));
                        let center = vec![0.0; p.d];
                        inst.with_ball_constraint(center, r)
                            .map_err(|e| ConfigError(e.to_string()))?
                    }
                    None => {
                        return err(format!(
                            "field problem.constraint: unknown value {other:?} (none | linear | ball:R)"
                        ))
                    }
                },
            }
        }
        "worst_case" => {
            let params = WorstCaseParams {
                t: map.usize_req("problem", "horizon")?,
                delta: map.f64_req("problem", "delta")?,
                r: map.f64_or("problem", "r", 1.0)?,
                m: map.f64_or("problem", "m", 1.0)?,
                allow_out_of_regime: map.bool_or("problem", "relax_regime", false)?,
            };
            let n = map.usize_req("problem", "n")?;
            echo.fields.push(("problem_n", n.to_string()));
            echo.fields.push(("problem_horizon", params.t.to_string()));
            echo.fields.push(("problem_delta", params.delta.to_string()));
            echo.fields.push(("problem_r", params.r.to_string()));
            echo.fields.push(("problem_m", params.m.to_string()));
            problems::make_worst_case(&params, n).map_err(|e| ConfigError(e.to_string()))?
        }
        "neyman_pearson" => {
            let path = map.required("problem", "dataset")?;
            let threshold = map.f64_req("problem", "threshold")?;
            let n = map.usize_req("problem", "n")?;
            echo.fields.push(("problem_dataset", path.to_string()));
            echo.fields.push(("problem_threshold", threshold.to_string()));
            echo.fields.push(("problem_n", n.to_string()));
            let (features, labels) = problems::load_np_csv(std::path::Path::new(path))
                .map_err(|e| ConfigError(e.to_string()))?;
            problems::make_neyman_pearson(&features, &labels, threshold, n)
                .map_err(|e| ConfigError(e.to_string()))?
        }
        "smooth_quadratic" => {
            let p = SmoothQuadraticParams {
                n: map.usize_req("problem", "n")?,
                d: map.usize_req("problem", "d")?,
                l_max: map.f64_or("problem", "l_max", 1.0)?,
                decades: map.f64_or("problem", "decades", 6.0)?,
                anchor_scale: map.f64_or("problem", "anchor_scale", 1.0)?,
                seed: map.u64_or("problem", "seed", 0)?,
            };
            echo.fields.push(("problem_n", p.n.to_string()));
            echo.fields.push(("problem_d", p.d.to_string()));
            echo.fields.push(("problem_l_max", p.l_max.to_string()));
            echo.fields.push(("problem_decades", p.decades.to_string()));
            echo.fields.push(("problem_anchor_scale", p.anchor_scale.to_string()));
            echo.fields.push(("problem_seed", p.seed.to_string()));
            problems::make_smooth_quadratic(&p).map_err(|e| ConfigError(e.to_string()))?
        }
        other => return err(format!("field problem.kind: unknown value {other:?}")),
    };
    Ok((inst, echo))
}

fn parse_compressor(section: &str, key: &str, raw: &str) -> CResult<CompressorSpec> {
    if raw == "identity" {
        return Ok(CompressorSpec::identity());
    }
    for (prefix, maker) in [
        ("top_k:", CompressorSpec::top_k as fn(usize) -> CompressorSpec),
        ("rand_k:", |k| CompressorSpec::rand_k(k, false)),
        ("rand_k_shared:", |k| CompressorSpec::rand_k(k, true)),
    ] {
        if let Some(kstr) = raw.strip_prefix(prefix) {
            let k: usize = kstr
                .parse()
                .map_err(|_| ConfigError(format!("field {section}.{key}: bad budget {kstr:?}")))?;
            return Ok(maker(k));
        }
    }
    err(format!(
        "field {section}.{key}: unknown compressor {raw:?} \
         (identity | top_k:K | rand_k:K | rand_k_shared:K)"
    ))
}

fn parse_projection(raw: &str, d: usize) -> CResult<Projection> {
    if raw == "none" {
        return Ok(Projection::None);
    }
    if let Some(r) = raw.strip_prefix("ball:") {
        let radius: f64 = r
            .parse()
            .map_err(|_| ConfigError(format!("field algorithm.projection: bad radius {r:?}")))?;
        return Ok(Projection::Ball { center: vec![0.0; d], radius });
    }
    if let Some(spec) = raw.strip_prefix("box:") {
        let (lo, hi) = spec
            .split_once(':')
            .ok_or_else(|| ConfigError("field algorithm.projection: box needs box:LO:HI".into()))?;
        let lo: f64 = lo
            .parse()
            .map_err(|_| ConfigError(format!("field algorithm.projection: bad bound {lo:?}")))?;
        let hi: f64 = hi
            .parse()
            .map_err(|_| ConfigError(format!("field algorithm.projection: bad bound {hi:?}")))?;
        return Ok(Projection::Box { lower: vec![lo; d], upper: vec![hi; d] });
    }
    err(format!("field algorithm.projection: unknown value {raw:?} (none | ball:R | box:LO:HI)"))
}

/// Echo of the resolved algorithm settings for the summary CSV.
#[derive(Debug, Clone, Default)]
pub struct AlgoEcho {
    pub fields: Vec<(&'static str, String)>,
}

/// A hint used before the problem exists: `Some(γ)` when `algorithm.gamma`
/// is numeric.
pub fn numeric_gamma_hint(map: &SectionMap) -> Option<f64> {
    match map.get("gamma") {
        Some(RawValue::Scalar(s)) => s.parse::<f64>().ok(),
        _ => None,
    }
}

pub fn build_algorithm(
    map: &SectionMap,
    problem: &ProblemInstance,
    seed: u64,
) -> CResult<(AlgorithmConfig, AlgoEcho)> {
    let kind = match map.required("algorithm", "kind")? {
        "safe_ef" => AlgorithmKind::SafeEf,
        "cgd" => AlgorithmKind::Cgd,
        "ef21" => AlgorithmKind::Ef21,
        "projected_ef21" => AlgorithmKind::ProjectedEf21,
        "primal_dual_ef" => AlgorithmKind::PrimalDualEf,
        other => return err(format!("field algorithm.kind: unknown value {other:?}")),
    };
    let t = map.usize_req("algorithm", "t")?;
    let mut uplink = parse_compressor(
        "algorithm",
        "uplink",
        map.scalar("algorithm", "uplink")?.unwrap_or("identity"),
    )?;
    let mut downlink = parse_compressor(
        "algorithm",
        "downlink",
        map.scalar("algorithm", "downlink")?.unwrap_or("identity"),
    )?;
    let overhead = map.bool_or("algorithm", "count_index_overhead", false)?;
    uplink.count_index_overhead = overhead;
    downlink.count_index_overhead = overhead;
    let delta = uplink.nominal_delta(problem.d);
    let delta_s = downlink.nominal_delta(problem.d);
    let beta = map.f64_or("algorithm", "beta", 0.05)?;
    let sigma_fv = map.f64_or("algorithm", "sigma_fv", 0.0)?;

    let radius_for = |what: &str| -> CResult<f64> {
        problem.radius.ok_or_else(|| {
            ConfigError(format!(
                "field algorithm.{what}: symbolic value needs a problem with a known distance bound R"
            ))
        })
    };

    let gamma_raw = map.scalar("algorithm", "gamma")?.unwrap_or("theory").to_string();
    let c_raw = map.scalar("algorithm", "c")?.unwrap_or("inf").to_string();
    let n_fv_raw = map.scalar("algorithm", "n_fv")?.unwrap_or("1").to_string();

    let stochastic_resolved =
        if [&gamma_raw, &c_raw].iter().any(|v| *v == "theory_stochastic") || n_fv_raw == "auto" {
            Some(
                algorithms::stochastic_run_params(problem, delta, t, beta, sigma_fv)
                    .map_err(|e| ConfigError(e.to_string()))?,
            )
        } else {
            None
        };

    let gamma = match gamma_raw.as_str() {
        "theory" => {
            algorithms::theoretical_params(radius_for("gamma")?, problem.m_bound, delta, delta_s, t)
                .0
        }
        "theory_stochastic" => stochastic_resolved.unwrap().0,
        s => s
            .parse::<f64>()
            .map_err(|_| ConfigError(format!("field algorithm.gamma: bad value {s:?}")))?,
    };
    let c = match c_raw.as_str() {
        "inf" => f64::INFINITY,
        "theory" => {
            algorithms::theoretical_params(radius_for("c")?, problem.m_bound, delta, delta_s, t).1
        }
        "theory_stochastic" => stochastic_resolved.unwrap().1,
        s => s
            .parse::<f64>()
            .map_err(|_| ConfigError(format!("field algorithm.c: bad value {s:?}")))?,
    };
    let n_fv = match n_fv_raw.as_str() {
        "auto" => stochastic_resolved.unwrap().2,
        s => s
            .parse::<u64>()
            .map_err(|_| ConfigError(format!("field algorithm.n_fv: bad value {s:?}")))?,
    };
    let subgrad_batch =
        match map.scalar("algorithm", "subgrad_batch")?.unwrap_or("full") {
            "full" => None,
            s => Some(s.parse::<usize>().map_err(|_| {
                ConfigError(format!("field algorithm.subgrad_batch: bad value {s:?}"))
            })?),
        };
    let stochastic = if sigma_fv > 0.0 || subgrad_batch.is_some() || n_fv != 1 {
        Some(StochasticConfig { sigma_fv, n_fv, subgrad_batch, seed })
    } else {
        None
    };
    let ef21_v0 =
        match map.get("v0") {
            None => None,
            Some(RawValue::Scalar(s)) if s == "default" => None,
            Some(RawValue::Scalar(s)) => {
                return err(format!("field algorithm.v0: expected a list, got {s:?}"))
            }
            Some(RawValue::List(vs)) => {
                let mut v = Vec::with_capacity(vs.len());
                for s in vs {
                    v.push(s.parse::<f64>().map_err(|_| {
                        ConfigError(format!("field algorithm.v0: bad number {s:?}"))
                    })?);
                }
                Some(v)
            }
        };
    let projection =
        parse_projection(map.scalar("algorithm", "projection")?.unwrap_or("none"), problem.d)?;

    let cfg = AlgorithmConfig {
        kind,
        gamma,
        c,
        t,
        uplink,
        downlink,
        eta: map.f64_or("algorithm", "eta", 0.1)?,
        lambda0: map.f64_or("algorithm", "lambda0", 0.0)?,
        stochastic,
        ef21_v0,
        projection,
        seed,
    };
    cfg.validate(problem).map_err(|e| ConfigError(e.to_string()))?;

    let compressor_str = |spec: &CompressorSpec| -> String {
        use cefopt::compressors::CompressorKind::*;
        match spec.kind {
            Identity => "identity".into(),
            TopK => format!("top_k:{}", spec.k),
            RandK if spec.shared_randomness => format!("rand_k_shared:{}", spec.k),
            RandK => format!("rand_k:{}", spec.k),
        }
    };
    let mut echo = AlgoEcho::default();
    echo.fields.push(("algorithm", kind.name().to_string()));
    echo.fields.push(("gamma", format!("{gamma}")));
    echo.fields.push(("c", format!("{c}")));
    echo.fields.push(("t", t.to_string()));
    echo.fields.push(("uplink", compressor_str(&cfg.uplink)));
    echo.fields.push(("downlink", compressor_str(&cfg.downlink)));
    echo.fields.push(("count_index_overhead", overhead.to_string()));
    echo.fields.push(("eta", cfg.eta.to_string()));
    echo.fields.push(("lambda0", cfg.lambda0.to_string()));
    echo.fields.push((
        "v0",
        cfg.ef21_v0
            .as_ref()
            .map(|v| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"))
            .unwrap_or_default(),
    ));
    echo.fields
        .push(("projection", map.scalar("algorithm", "projection")?.unwrap_or("none").to_string()));
    echo.fields.push(("sigma_fv", sigma_fv.to_string()));
    echo.fields.push(("n_fv", n_fv.to_string()));
    echo.fields.push((
        "subgrad_batch",
        subgrad_batch.map(|b| b.to_string()).unwrap_or_else(|| "full".into()),
    ));
    echo.fields.push(("beta", beta.to_string()));
    Ok((cfg, echo))
}
