//! Line-delimited JSON records shared by the pipeline tools.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Candidate, Cluster, RawArgument, VoteSheet};
use crate::kb::ConcernLabel;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Every record kind the pipeline reads or writes, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PipelineRecord {
    RawArgument(RawArgument),
    Candidate(Candidate),
    VoteSheet(VoteSheet),
    Explanation { id: String, text: String },
    Cluster(Cluster),
    Unclustered { id: String },
    ConcernLabel { id: String, label: ConcernLabel },
}

pub fn parse_jsonl<T: DeserializeOwned>(input: &str) -> Result<Vec<T>, RecordError> {
    read_lines(input.lines().map(|l| Ok(l.to_owned())))
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, RecordError> {
    let f = fs::File::open(path)?;
    read_lines(BufReader::new(f).lines())
}

fn read_lines<T, I>(lines: I) -> Result<Vec<T>, RecordError>
where
    T: DeserializeOwned,
    I: Iterator<Item = std::io::Result<String>>,
{
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| RecordError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(mut w: impl Write, items: impl IntoIterator<Item = T>) -> Result<(), RecordError> {
    for item in items {
        let line = serde_json::to_string(&item).map_err(|e| RecordError::Parse { line: 0, message: e.to_string() })?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
