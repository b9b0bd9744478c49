//! Observed and full-data records, datasets and their CSV formats.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One subject: covariates, follow-up time `Y = min(T, C)` and event
/// indicator `Delta = 1{T <= C}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedRecord {
    pub covariates: Vec<f64>,
    pub time: f64,
    pub event: bool,
}

impl ObservedRecord {
    pub fn new(covariates: Vec<f64>, time: f64, event: bool) -> Result<Self> {
        if !(time.is_finite() && time > 0.0) {
            return Err(Error::InvalidInput(format!(
                "follow-up time must be positive and finite, got {time}"
            )));
        }
        if covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("covariates must be finite".into()));
        }
        Ok(Self {
            covariates,
            time,
            event,
        })
    }
}

/// Synthetic subject with both latent times available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullRecord {
    pub covariates: Vec<f64>,
    pub event_time: f64,
    /// May be `+inf` for uncensored designs.
    pub censor_time: f64,
}

impl FullRecord {
    pub fn observed(&self) -> ObservedRecord {
        ObservedRecord {
            covariates: self.covariates.clone(),
            time: self.event_time.min(self.censor_time),
            event: self.event_time <= self.censor_time,
        }
    }
}

/// Ordered collection of observed records sharing covariate dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    records: Vec<ObservedRecord>,
}

impl Dataset {
    pub fn new(d: usize, records: Vec<ObservedRecord>) -> Result<Self> {
        if let Some((i, r)) = records
            .iter()
            .enumerate()
            .find(|(_, r)| r.covariates.len() != d)
        {
            return Err(Error::InvalidInput(format!(
                "record {i} has {} covariates, expected {d}",
                r.covariates.len()
            )));
        }
        Ok(Self { d, records })
    }

    pub fn from_full(d: usize, full: &[FullRecord]) -> Result<Self> {
        Self::new(d, full.iter().map(FullRecord::observed).collect())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ObservedRecord] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ObservedRecord> {
        self.records.iter()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            d: self.d,
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Same dataset with every event indicator flipped.
    pub fn with_flipped_events(&self) -> Dataset {
        Dataset {
            d: self.d,
            records: self
                .records
                .iter()
                .map(|r| ObservedRecord {
                    event: !r.event,
                    ..r.clone()
                })
                .collect(),
        }
    }

    /// Fraction of records with `event = false`.
    pub fn censoring_fraction(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| !r.event).count() as f64 / self.records.len() as f64
    }

    /// Distinct follow-up times of censored records, ascending.
    pub fn censoring_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .records
            .iter()
            .filter(|r| !r.event)
            .map(|r| r.time)
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }
}

fn covariate_header(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

fn parse_field(path: &str, row: usize, name: &str, raw: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_string(),
        row,
        message: format!("field `{name}`: cannot parse `{raw}` as a number"),
    })
}

fn parse_event(path: &str, row: usize, raw: &str) -> Result<bool> {
    match raw.trim() {
        "1" => Ok(true),
        "0" => Ok(false),
        other => Err(Error::Parse {
            path: path.to_string(),
            row,
            message: format!("field `event` must be 0 or 1, got `{other}`"),
        }),
    }
}

/// Checks for `x1..xd` followed by `tail`, returning `d`.
fn check_header(path: &str, header: &csv::StringRecord, tail: &[&str]) -> Result<usize> {
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    if fields.len() < tail.len() || fields[fields.len() - tail.len()..] != *tail {
        return Err(Error::Parse {
            path: path.to_string(),
            row: 0,
            message: format!("header must end with `{}`", tail.join(",")),
        });
    }
    let d = fields.len() - tail.len();
    for (j, name) in fields[..d].iter().enumerate() {
        if *name != format!("x{}", j + 1) {
            return Err(Error::Parse {
                path: path.to_string(),
                row: 0,
                message: format!("expected covariate column `x{}`, found `{name}`", j + 1),
            });
        }
    }
    Ok(d)
}

/// Reads `x1,...,xd,time,event`.
pub fn read_dataset<R: Read>(reader: R, source: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let d = check_header(source, rdr.headers()?, &["time", "event"])?;
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 1;
        if row.len() != d + 2 {
            return Err(Error::Parse {
                path: source.to_string(),
                row: line,
                message: format!("expected {} fields, found {}", d + 2, row.len()),
            });
        }
        let covariates = (0..d)
            .map(|j| parse_field(source, line, &format!("x{}", j + 1), &row[j]))
            .collect::<Result<Vec<_>>>()?;
        let time = parse_field(source, line, "time", &row[d])?;
        let event = parse_event(source, line, &row[d + 1])?;
        let record = ObservedRecord::new(covariates, time, event).map_err(|e| Error::Parse {
            path: source.to_string(),
            row: line,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Dataset::new(d, records)
}

pub fn read_dataset_file(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, &path.display().to_string())
}

pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = covariate_header(data.dim());
    header.extend(["time".to_string(), "event".to_string()]);
    wtr.write_record(&header)?;
    for r in data.iter() {
        let mut row: Vec<String> = r.covariates.iter().map(|v| v.to_string()).collect();
        row.push(r.time.to_string());
        row.push(if r.event { "1" } else { "0" }.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `x1..xd,event_time,censor_time,time,event`. The observed columns
/// must agree with the latent ones.
pub fn read_full_data<R: Read>(reader: R, source: &str) -> Result<(usize, Vec<FullRecord>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let d = check_header(
        source,
        rdr.headers()?,
        &["event_time", "censor_time", "time", "event"],
    )?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 1;
        if row.len() != d + 4 {
            return Err(Error::Parse {
                path: source.to_string(),
                row: line,
                message: format!("expected {} fields, found {}", d + 4, row.len()),
            });
        }
        let covariates = (0..d)
            .map(|j| parse_field(source, line, &format!("x{}", j + 1), &row[j]))
            .collect::<Result<Vec<_>>>()?;
        let event_time = parse_field(source, line, "event_time", &row[d])?;
        let censor_time = parse_field(source, line, "censor_time", &row[d + 1])?;
        let time = parse_field(source, line, "time", &row[d + 2])?;
        let event = parse_event(source, line, &row[d + 3])?;
        let rec = FullRecord {
            covariates,
            event_time,
            censor_time,
        };
        let obs = rec.observed();
        if obs.time != time || obs.event != event {
            return Err(Error::Parse {
                path: source.to_string(),
                row: line,
                message: "observed columns disagree with event_time/censor_time".into(),
            });
        }
        out.push(rec);
    }
    Ok((d, out))
}

pub fn write_full_data<W: Write>(writer: W, d: usize, records: &[FullRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = covariate_header(d);
    header.extend(
        ["event_time", "censor_time", "time", "event"]
            .iter()
            .map(|s| s.to_string()),
    );
    wtr.write_record(&header)?;
    for r in records {
        let obs = r.observed();
        let mut row: Vec<String> = r.covariates.iter().map(|v| v.to_string()).collect();
        row.push(r.event_time.to_string());
        row.push(r.censor_time.to_string());
        row.push(obs.time.to_string());
        row.push(if obs.event { "1" } else { "0" }.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
