//! Episode log rows and their CSV form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// First line of every episode log.
pub const EPISODES_HEADER: &str = "# rlvqsd episodes v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub phase: Phase,
    pub success: bool,
    pub final_cost: f64,
    /// Squared eigenvalue error over all `2^N` values.
    pub delta: f64,
    pub one_qubit: usize,
    pub two_qubit: usize,
    pub depth: usize,
    pub steps: usize,
    pub wall_seconds: f64,
    /// Space-separated action indices in order.
    pub actions: String,
}

impl EpisodeRecord {
    pub fn total_gates(&self) -> usize {
        self.one_qubit + self.two_qubit
    }
}

pub fn write_episodes(path: &Path, records: &[EpisodeRecord]) -> Result<(), HarnessError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{EPISODES_HEADER}")?;
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record([
            "episode", "phase", "success", "final_cost", "delta", "one_qubit", "two_qubit", "depth", "steps",
            "wall_seconds", "actions",
        ])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_episodes(path: &Path) -> Result<Vec<EpisodeRecord>, HarnessError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim_end() != EPISODES_HEADER {
        return Err(HarnessError::Runtime(format!("{} is not a v1 episode log", path.display())));
    }
    csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<Result<Vec<EpisodeRecord>, _>>()
        .map_err(HarnessError::from)
}

/// Writes any serializable rows as CSV with a header derived from the fields.
pub fn write_table<T: Serialize>(path: &Path, comment: &str, rows: &[T]) -> Result<(), HarnessError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# {comment}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
