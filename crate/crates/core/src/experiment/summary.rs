use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::{ResultRow, RESULT_HEADER};
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: [&str; 9] = [
    "method",
    "estimator",
    "metric",
    "n",
    "mean_coverage",
    "sd_coverage",
    "min_coverage",
    "max_coverage",
    "mean_lpb",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub estimator: String,
    pub metric: String,
    /// Rows with a coverage value; error rows are skipped.
    pub n: usize,
    pub mean_coverage: f64,
    /// Sample standard deviation, 0 for a single row.
    pub sd_coverage: f64,
    pub min_coverage: f64,
    pub max_coverage: f64,
    pub mean_lpb: Option<f64>,
}

/// Parses a results CSV, rejecting any header other than the results schema.
pub fn read_results<R: Read>(reader: R, source: &str) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(RESULT_HEADER.iter().copied()) {
        return Err(Error::Schema(format!(
            "{source}: expected header `{}`, found `{}`",
            RESULT_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                path: source.to_string(),
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Coverages and mean bounds per (method, estimator, metric).
type Groups = BTreeMap<(String, String, String), (Vec<f64>, Vec<f64>)>;

/// Grouped coverage statistics per method, estimator and metric, in
/// lexicographic key order.
pub fn aggregate(paths: &[&Path]) -> Result<Vec<SummaryRow>> {
    let mut groups = Groups::new();
    for path in paths {
        let file = std::fs::File::open(path)?;
        for row in read_results(file, &path.display().to_string())? {
            let Some(cov) = row.coverage else { continue };
            let entry = groups.entry((row.method, row.estimator, row.metric)).or_default();
            entry.0.push(cov);
            if let Some(l) = row.mean_lpb {
                entry.1.push(l);
            }
        }
    }
    Ok(groups
        .into_iter()
        .map(|((method, estimator, metric), (cov, lpb))| {
            let n = cov.len();
            let mean = cov.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (cov.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                method,
                estimator,
                metric,
                n,
                mean_coverage: mean,
                sd_coverage: sd,
                min_coverage: cov.iter().copied().fold(f64::INFINITY, f64::min),
                max_coverage: cov.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_lpb: (!lpb.is_empty()).then(|| lpb.iter().sum::<f64>() / lpb.len() as f64),
            }
        })
        .collect())
}

pub fn write_summary<W: Write>(writer: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(SUMMARY_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
