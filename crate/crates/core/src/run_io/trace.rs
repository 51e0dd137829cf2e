use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One decomposed (o, a) from a greedy replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub episode: u64,
    pub t: u64,
    pub q_tot: f64,
    pub per_agent: Vec<f64>,
    pub unattributed: f64,
    /// Relevance absorbed by biases, summed over layers.
    pub bias_absorbed: f64,
    pub residual: f64,
}

pub fn write_relevance_trace(records: &[TraceRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::format(path, e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_relevance_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let recs = vec![
            TraceRecord {
                episode: 0,
                t: 0,
                q_tot: 0.1 + 0.2,
                per_agent: vec![0.25, -1.0 / 3.0],
                unattributed: 1e-300,
                bias_absorbed: 0.0,
                residual: -2.5e-17,
            },
            TraceRecord {
                episode: 1,
                t: 4,
                q_tot: -7.0,
                per_agent: vec![],
                unattributed: 0.0,
                bias_absorbed: 3.5,
                residual: 0.0,
            },
        ];
        write_relevance_trace(&recs, &path).unwrap();
        assert_eq!(read_relevance_trace(&path).unwrap(), recs);
    }
}
