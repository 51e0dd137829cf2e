use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::trainer::{MetricsRow, RunConfig};

use super::metrics::{metrics_line, METRICS_HEADER};

pub const MANIFEST_FORMAT: &str = "rdn-run-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub run_id: String,
    pub crate_version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub started_at: String,
    pub finished_at: String,
    pub metrics_header: String,
    /// Final metrics row in CSV form; absent when no evaluation block ran.
    pub final_row: Option<String>,
    pub final_win_rate: Option<f64>,
    pub metrics_sha256: String,
}

impl RunManifest {
    pub fn new(
        config: &RunConfig,
        metrics: &[MetricsRow],
        metrics_sha256: String,
        started_at: chrono::DateTime<chrono::Utc>,
        finished_at: chrono::DateTime<chrono::Utc>,
    ) -> Self {
        let last = metrics.last();
        RunManifest {
            format: MANIFEST_FORMAT.into(),
            run_id: config.run_id(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            seed: config.training.seed,
            config: config.clone(),
            started_at: started_at.to_rfc3339(),
            finished_at: finished_at.to_rfc3339(),
            metrics_header: METRICS_HEADER.join(","),
            final_row: last.map(metrics_line),
            final_win_rate: last.map(|r| r.win_rate),
            metrics_sha256,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::format(
                path,
                format!("unknown manifest format `{}`", m.format),
            ));
        }
        Ok(m)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
