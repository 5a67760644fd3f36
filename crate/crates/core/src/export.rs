//! Result bundles: per-vial summary CSV, optional time-series CSV and a
//! JSON metadata file.
//!
//! The summary holds nothing run-dependent beyond the simulated values, so
//! two runs of the same scenario and seed write identical bytes.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::sim::{Approach, SimulationResult};
use crate::HOUR;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SERIES_FILE: &str = "series.csv";
pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// Files written by [`export_results`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultBundle {
    pub summary: PathBuf,
    pub series: Option<PathBuf>,
    pub metadata: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    /// SHA-256 of the scenario in explicit form, when known.
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub approach: Approach,
    pub vials: usize,
    pub wall_clock_seconds: f64,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    vial_id: usize,
    row: usize,
    col: usize,
    x_m: f64,
    y_m: f64,
    label: &'a str,
    t_m_hours: f64,
    t_dry_hours: f64,
    #[serde(rename = "radiative_energy_J")]
    radiative_energy_j: f64,
}

#[derive(Serialize)]
struct SeriesRow {
    vial_id: usize,
    time_s: f64,
    top_k: f64,
    bottom_k: f64,
    front_m: f64,
    q_rad_w: f64,
    absorbed_j: f64,
}

/// Hex SHA-256 of a scenario's text.
pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> ExportError + '_ {
    move |e| ExportError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes the per-vial summary to any sink.
pub fn write_summary<W: std::io::Write>(result: &SimulationResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for v in &result.vials {
        let label = v.label.to_string();
        w.serialize(SummaryRow {
            vial_id: v.index,
            row: v.row,
            col: v.col,
            x_m: v.x,
            y_m: v.y,
            label: &label,
            t_m_hours: v.t_switch / HOUR,
            t_dry_hours: v.t_dry / HOUR,
            radiative_energy_j: v.absorbed_energy,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `summary.csv`, `series.csv` (only when samples were kept) and
/// `metadata.json` into `out_dir`, creating it if needed.
pub fn export_results(
    result: &SimulationResult,
    out_dir: &Path,
    config_hash: Option<String>,
) -> Result<ResultBundle, ExportError> {
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;

    let summary = out_dir.join(SUMMARY_FILE);
    let file = File::create(&summary).map_err(io(&summary))?;
    write_summary(result, BufWriter::new(file)).map_err(csv_error(&summary))?;

    let has_series = result.vials.iter().any(|v| !v.series.is_empty());
    let series = if has_series {
        let path = out_dir.join(SERIES_FILE);
        let file = File::create(&path).map_err(io(&path))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        for v in &result.vials {
            for p in &v.series {
                w.serialize(SeriesRow {
                    vial_id: v.index,
                    time_s: p.time,
                    top_k: p.top,
                    bottom_k: p.bottom,
                    front_m: p.front,
                    q_rad_w: p.q_rad,
                    absorbed_j: p.absorbed,
                })
                .map_err(csv_error(&path))?;
            }
        }
        w.flush().map_err(io(&path))?;
        Some(path)
    } else {
        let stale = out_dir.join(SERIES_FILE);
        if stale.exists() {
            std::fs::remove_file(&stale).map_err(io(&stale))?;
        }
        None
    };

    let metadata = out_dir.join(METADATA_FILE);
    let meta = RunMetadata {
        config_hash,
        seed: result.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        approach: result.approach,
        vials: result.vials.len(),
        wall_clock_seconds: result.wall_clock_seconds,
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| ExportError::Format {
        path: metadata.clone(),
        message: e.to_string(),
    })?;
    std::fs::write(&metadata, text + "\n").map_err(io(&metadata))?;

    Ok(ResultBundle {
        summary,
        series,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_hex() {
        let h = config_hash("[process]\nmode = \"CFD\"\n");
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash("[process]\nmode = \"CFD\"\n"));
        assert_ne!(h, config_hash("[process]\nmode = \"HFD\"\n"));
    }
}
