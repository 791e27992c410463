use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::curvespace::CurveBasis;
use crate::error::{Error, Result};
use crate::mtgp::TaskSet;
use crate::objective::Status;
use crate::schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Space-filling seed evaluations, not charged to the budget.
    Init,
    Explore,
}

/// One evaluated action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub step: usize,
    pub phase: Phase,
    pub x: Vec<f64>,
    /// One-based task index, the target being the last.
    pub task: usize,
    pub epochs: u32,
    pub y: Option<f64>,
    pub status: Status,
    /// Budget charged for this action.
    pub cost: f64,
    pub cumulative_cost: f64,
    pub gain: Option<f64>,
    pub score: Option<f64>,
    /// Cost reported by the objective itself, e.g. trainer wall time.
    pub reported_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Everything a resumed run must agree on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub seed: u64,
    pub basis: CurveBasis,
    pub layers: usize,
    pub tasks: TaskSet,
    pub budget: f64,
    pub max_evaluations: Option<usize>,
    pub pool_size: usize,
    pub dim: usize,
}

/// Append-only JSON-lines log: a header line, then one record per action.
pub struct HistoryLog {
    file: File,
}

impl HistoryLog {
    /// Creates (or truncates) `path` and writes the header.
    pub fn create(path: &Path, header: &RunHeader) -> Result<Self> {
        let mut file = File::create(path)?;
        let line = schema::with_header(schema::HISTORY, serde_json::to_value(header)?);
        writeln!(file, "{}", serde_json::to_string(&line)?)?;
        Ok(HistoryLog { file })
    }

    pub fn append_to(path: &Path) -> Result<Self> {
        Ok(HistoryLog {
            file: OpenOptions::new().append(true).open(path)?,
        })
    }

    pub fn write(&mut self, record: &HistoryRecord) -> Result<()> {
        writeln!(self.file, "{}", serde_json::to_string(record)?)?;
        self.file.flush()?;
        Ok(())
    }
}

/// Reads a log written by [`HistoryLog`]. A torn final line is ignored.
pub fn read_history(path: &Path) -> Result<(RunHeader, Vec<HistoryRecord>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let first = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::format(format!("{}: empty history", path.display())))?;
    let head: Value = serde_json::from_str(&first)?;
    schema::check(schema::HISTORY, &head)?;
    let header: RunHeader = serde_json::from_value(head)?;
    let all: Vec<String> = lines.collect::<std::io::Result<_>>()?;
    let mut records = Vec::with_capacity(all.len());
    for (i, line) in all.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<HistoryRecord>(line) {
            Ok(r) => records.push(r),
            Err(_) if i + 1 == all.len() => break,
            Err(e) => return Err(Error::format(format!("{}: line {}: {e}", path.display(), i + 2))),
        }
    }
    Ok((header, records))
}
