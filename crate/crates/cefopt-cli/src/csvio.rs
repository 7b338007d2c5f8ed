//! Trajectory and summary CSV emission.
//!
//! Trajectory schema (fixed column order):
//! `iter,f_gap,g_val,in_B,uplink_floats_cum,downlink_floats_cum,scalar_floats_cum`.
//! Floats are printed with 17 significant digits so parsing an emitted file
//! reproduces the in-memory record exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use cefopt::simulator::RunRecord;

use crate::config::ConfigError;

pub const TRAJECTORY_HEADER: &str =
    "iter,f_gap,g_val,in_B,uplink_floats_cum,downlink_floats_cum,scalar_floats_cum";

/// 17 significant digits: enough to round-trip any f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg_attr(not(test), allow(dead_code))]
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub iter: Vec<u64>,
    pub f_gap: Vec<f64>,
    pub g_val: Vec<f64>,
    pub in_b: Vec<bool>,
    pub uplink: Vec<u64>,
    pub downlink: Vec<u64>,
    pub scalar: Vec<u64>,
}

#[cfg_attr(not(test), allow(dead_code))]
pub fn trajectory_of(rec: &RunRecord) -> Trajectory {
    Trajectory {
        iter: rec.iters.clone(),
        f_gap: rec.f_gap.clone(),
        g_val: rec.g_val.clone(),
        in_b: rec.in_b.clone(),
        uplink: rec.uplink_floats.clone(),
        downlink: rec.downlink_floats.clone(),
        scalar: rec.scalar_floats.clone(),
    }
}

pub fn write_trajectory(path: &Path, rec: &RunRecord) -> std::io::Result<()> {
    let mut out = String::with_capacity(64 * rec.iters.len() + 64);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for row in 0..rec.iters.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            rec.iters[row],
            format_float(rec.f_gap[row]),
            format_float(rec.g_val[row]),
            u8::from(rec.in_b[row]),
            rec.uplink_floats[row],
            rec.downlink_floats[row],
            rec.scalar_floats[row],
        ));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())
}

#[cfg_attr(not(test), allow(dead_code))]
pub fn read_trajectory(path: &Path) -> Result<Trajectory, ConfigError> {
    let text =
        fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let mut rows = text.lines();
    match rows.next() {
        Some(h) if h == TRAJECTORY_HEADER => {}
        _ => return Err(ConfigError(format!("{}: bad trajectory header", path.display()))),
    }
    let mut t = Trajectory::default();
    for (idx, line) in rows.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(ConfigError(format!("{}: line {}: bad row", path.display(), idx + 2)));
        }
        let bad =
            |what: &str| ConfigError(format!("{}: line {}: bad {what}", path.display(), idx + 2));
        t.iter.push(cols[0].parse().map_err(|_| bad("iter"))?);
        t.f_gap.push(cols[1].parse().map_err(|_| bad("f_gap"))?);
        t.g_val.push(cols[2].parse().map_err(|_| bad("g_val"))?);
        t.in_b.push(match cols[3] {
            "0" => false,
            "1" => true,
            _ => return Err(bad("in_B")),
        });
        t.uplink.push(cols[4].parse().map_err(|_| bad("uplink"))?);
        t.downlink.push(cols[5].parse().map_err(|_| bad("downlink"))?);
        t.scalar.push(cols[6].parse().map_err(|_| bad("scalar"))?);
    }
    Ok(t)
}

/// Fixed summary columns: the flattened config echo, then results.
pub const SUMMARY_COLUMNS: &[&str] = &[
    "point",
    "seed",
    "problem_kind",
    "problem_n",
    "problem_d",
    "problem_s",
    "problem_zeta",
    "problem_seed",
    "problem_gamma",
    "problem_horizon",
    "problem_delta",
    "problem_r",
    "problem_m",
    "problem_dataset",
    "problem_threshold",
    "problem_l_max",
    "problem_decades",
    "problem_anchor_scale",
    "problem_constraint",
    "algorithm",
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
    "final_f_gap_xbar",
    "g_xbar",
    "b_count",
    "bytes_per_worker",
    "wall_time_s",
    "flags",
];

#[derive(Debug, Clone, Default)]
pub struct SummaryRow {
    fields: Vec<(&'static str, String)>,
}

impl SummaryRow {
    pub fn set(&mut self, key: &'static str, value: String) {
        debug_assert!(SUMMARY_COLUMNS.contains(&key), "unknown summary column {key}");
        self.fields.push((key, value));
    }

    pub fn extend(&mut self, fields: &[(&'static str, String)]) {
        for (k, v) in fields {
            self.set(k, v.clone());
        }
    }

    fn get(&self, key: &str) -> &str {
        self.fields.iter().find(|(k, _)| *k == key).map(|(_, v)| v.as_str()).unwrap_or("")
    }
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(&SUMMARY_COLUMNS.join(","));
    out.push('\n');
    for row in rows {
        let line: Vec<&str> = SUMMARY_COLUMNS.iter().map(|c| row.get(c)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())
}
