//! Artifact layout: `#` metadata lines followed by a CSV body.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

pub const TOOL: &str = concat!("cvqkd-coexist ", env!("CARGO_PKG_VERSION"));

/// Whether a completed run produced a usable (positive-key, feasible) result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Infeasible,
}

pub struct Report {
    pub body: Vec<u8>,
    /// Human-readable lines for stderr.
    pub summary: String,
    pub status: Status,
    /// Whether the metadata block is prepended.
    pub metadata: bool,
}

impl Report {
    pub fn csv(body: Vec<u8>, summary: String, status: Status) -> Self {
        Report {
            body,
            summary,
            status,
            metadata: true,
        }
    }
}

pub fn metadata<C: Serialize>(command: &str, seed: u64, config: &C) -> Result<String> {
    let json = serde_json::to_string(config).context("serialising resolved configuration")?;
    Ok(format!("# tool: {TOOL}\n# command: {command}\n# seed: {seed}\n# config: {json}\n"))
}

/// Writes the whole artifact at once so a failed run leaves nothing behind.
pub fn emit(header: &str, report: &Report, out: Option<&Path>) -> Result<()> {
    let mut bytes = Vec::with_capacity(header.len() + report.body.len());
    if report.metadata {
        bytes.extend_from_slice(header.as_bytes());
    }
    bytes.extend_from_slice(&report.body);
    match out {
        Some(p) => std::fs::write(p, &bytes).with_context(|| format!("writing {}", p.display())),
        None => std::io::stdout().write_all(&bytes).context("writing stdout"),
    }
}

/// Formats a float for CSV; non-finite values become empty cells.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        String::new()
    }
}

pub fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

pub fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| anyhow::anyhow!("flushing csv: {e}"))
}
