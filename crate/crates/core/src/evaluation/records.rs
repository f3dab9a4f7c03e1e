//! Long-format result records, timings, reference scores and their CSV
//! forms.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

use super::experiment::BenchmarkSummary;

/// Externally reported test R² (mean and standard deviation over ten
/// splits) for oblique-tree methods that are not implemented here. Used
/// only as extra columns when ranking benchmark results.
pub const PUBLISHED_REFERENCE_CSV: &str = include_str!("../../reference/published_r2.csv");

/// One metric of one experiment cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub dataset: String,
    pub method: String,
    pub repeat: usize,
    pub seed: u64,
    pub param_name: String,
    pub param_value: u64,
    pub metric: String,
    pub value: f64,
    /// λ used for the final fit; empty for methods without one.
    pub lambda: Option<f64>,
}

/// Wall-clock cost of one cell, in seconds. The total includes the λ
/// search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub experiment: String,
    pub dataset: String,
    pub method: String,
    pub repeat: usize,
    pub param_name: String,
    pub param_value: u64,
    pub search_seconds: f64,
    pub fit_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScore {
    pub dataset: String,
    pub method: String,
    pub mean: f64,
    pub std: f64,
}

/// Seed derived from the SHA-256 of `base` and `parts`, so that each cell's
/// randomness is independent of scheduling order.
pub fn cell_seed(base: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn write_rows<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(r: R) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn write_records_csv<W: Write>(records: &[ResultRecord], w: W) -> Result<()> {
    write_rows(records, w)
}

pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<ResultRecord>> {
    read_rows(r)
}

pub fn write_timings_csv<W: Write>(timings: &[CellTiming], w: W) -> Result<()> {
    write_rows(timings, w)
}

pub fn read_reference_csv<R: Read>(r: R) -> Result<Vec<ReferenceScore>> {
    read_rows(r)
}

/// One row per dataset with `mean±std` per method (significance marker
/// appended), followed by the average-rank row.
pub fn write_aggregate_csv<W: Write>(summary: &BenchmarkSummary, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["dataset".to_string()];
    header.extend(summary.methods.iter().cloned());
    out.write_record(&header)?;
    for row in &summary.rows {
        let mut line = vec![row.dataset.clone()];
        for cell in &row.cells {
            line.push(match cell {
                Some(c) => format!("{:.3}±{:.3}{}", c.mean, c.std, c.marker.map(String::from).unwrap_or_default()),
                None => String::new(),
            });
        }
        out.write_record(&line)?;
    }
    let mut ranks = vec!["average rank".to_string()];
    ranks.extend(
        summary
            .average_ranks
            .iter()
            .map(|r| r.map(|v| format!("{v:.2}")).unwrap_or_default()),
    );
    out.write_record(&ranks)?;
    out.flush()?;
    Ok(())
}
