//! File formats written by sweeps: sparsity heatmaps, binary plan dumps and
//! the result table.

use std::fs;
use std::io::Write;
use std::path::Path;

use potkit_core::data::{encode_pgm, GrayImage};
use potkit_core::TransportPlan;

use crate::error::{CliError, Result};

/// One pixel per plan entry: white (255) below `threshold`, black otherwise.
pub fn heatmap_image(plan: &TransportPlan, threshold: f64) -> GrayImage {
    let n = plan.n();
    let data = plan.entries().iter().map(|x| if x.abs() < threshold { 255 } else { 0 }).collect();
    GrayImage { width: n, height: n, data }
}

/// Writes the heatmap of `plan` as a binary PGM.
pub fn emit_heatmap(plan: &TransportPlan, threshold: f64, path: &Path) -> Result<()> {
    if plan.n() == 0 {
        return Err(CliError::Config("cannot draw an empty plan".into()));
    }
    fs::write(path, encode_pgm(&heatmap_image(plan, threshold)))?;
    Ok(())
}

/// `n` as little-endian u64, then the `n*n` entries as little-endian f64, row-major.
pub fn encode_plan(plan: &TransportPlan) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * plan.entries().len());
    out.extend_from_slice(&(plan.n() as u64).to_le_bytes());
    for x in plan.entries() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_plan(bytes: &[u8]) -> Result<TransportPlan> {
    let header: [u8; 8] = bytes
        .get(..8)
        .and_then(|h| h.try_into().ok())
        .ok_or_else(|| CliError::Dump("missing header".into()))?;
    let n = u64::from_le_bytes(header) as usize;
    let body = &bytes[8..];
    if n.checked_mul(n).and_then(|k| k.checked_mul(8)) != Some(body.len()) {
        return Err(CliError::Dump(format!("{} payload bytes do not hold a {n}x{n} plan", body.len())));
    }
    let entries = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(TransportPlan::from_entries(n, entries)?)
}

pub fn write_plan_dump(plan: &TransportPlan, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_plan(plan))?;
    Ok(())
}

pub fn read_plan_dump(path: &Path) -> Result<TransportPlan> {
    decode_plan(&fs::read(path)?)
}

pub const CSV_HEADER: [&str; 13] = [
    "experiment",
    "lambda",
    "epsilon",
    "method",
    "sparsity",
    "objective",
    "feasibility_max_violation",
    "duality_gap",
    "iterations",
    "converged",
    "wall_ms",
    "seed",
    "accuracy",
];

/// One line of the result table. `None` fields are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub experiment: String,
    pub lambda: f64,
    pub epsilon: f64,
    pub exponent: f64,
    pub method: &'static str,
    pub sparsity: Option<f64>,
    pub objective: Option<f64>,
    pub feasibility_max_violation: Option<f64>,
    pub duality_gap: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub wall_ms: Option<f64>,
    pub seed: u64,
    pub accuracy: Option<f64>,
    /// Solver error message when the point failed; not written to the table.
    pub error: Option<String>,
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or large magnitudes.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

impl SweepRow {
    pub fn record(&self) -> [String; 13] {
        [
            self.experiment.clone(),
            format_float(self.lambda),
            format_float(self.epsilon),
            self.method.to_string(),
            opt(self.sparsity),
            opt(self.objective),
            opt(self.feasibility_max_violation),
            opt(self.duality_gap),
            self.iterations.map(|k| k.to_string()).unwrap_or_default(),
            self.converged.to_string(),
            opt(self.wall_ms),
            self.seed.to_string(),
            opt(self.accuracy),
        ]
    }

    /// `<experiment>_<method>_l<λ>_e<exponent>`.
    pub fn file_stem(&self) -> String {
        format!("{}_{}_l{}_e{}", self.experiment, self.method, self.lambda, self.exponent)
    }
}

pub fn write_table<'a>(path: &Path, rows: impl IntoIterator<Item = &'a SweepRow>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}
