//! Config loading, on-disk run directories, metrics CSV, relevance traces and
//! SVG plots.
//!
//! A run directory looks like
//!
//! ```text
//! <out>/<run-id>/
//!     config.json       normalised config, reloadable as-is
//!     manifest.json     seed, timestamps, final row, metrics digest
//!     metrics.csv
//!     snapshots/agent_000.json ... critic.json critic_target.json
//!     relevance.jsonl   written later by `relevance`
//! ```

mod config;
mod manifest;
mod metrics;
mod svg;
mod trace;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{
    config_from_value, load_config, normalized_json, parse_config_str, parse_override,
};
pub use manifest::{sha256_file, sha256_hex, RunManifest, MANIFEST_FORMAT};
pub use metrics::{
    fmt_f64, metric_column, metrics_line, read_metrics, write_metrics, METRICS_HEADER,
};
pub use svg::{emit_svg_curves, line_chart, write_chart, ChartSpec, Series};
pub use trace::{read_relevance_trace, write_relevance_trace, TraceRecord};

use crate::error::{Error, Result};
use crate::tensor_net::MlpSnapshot;
use crate::trainer::{run, RunConfig, RunOutput, SweepTable};

pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TRACE_FILE: &str = "relevance.jsonl";
pub const SNAPSHOT_DIR: &str = "snapshots";

fn agent_snapshot_name(i: usize) -> String {
    format!("agent_{i:03}.json")
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes a finished run under `<out>/<run-id>/` and returns that directory.
pub fn write_run_dir(
    out: &Path,
    config: &RunConfig,
    output: &RunOutput,
    started_at: chrono::DateTime<chrono::Utc>,
) -> Result<PathBuf> {
    let finished_at = chrono::Utc::now();
    let dir = out.join(config.run_id());
    create_dir(&dir)?;
    let cfg_path = dir.join(CONFIG_FILE);
    fs::write(&cfg_path, normalized_json(config)).map_err(|e| Error::io(&cfg_path, e))?;
    let metrics_path = dir.join(METRICS_FILE);
    write_metrics(&output.metrics, &metrics_path)?;
    if config.io.snapshots {
        let snap = dir.join(SNAPSHOT_DIR);
        create_dir(&snap)?;
        for (i, a) in output.agents.iter().enumerate() {
            a.save(&snap.join(agent_snapshot_name(i)))?;
        }
        if let Some(c) = &output.critic {
            c.save(&snap.join("critic.json"))?;
        }
        if let Some(c) = &output.critic_target {
            c.save(&snap.join("critic_target.json"))?;
        }
    }
    let manifest = RunManifest::new(
        config,
        &output.metrics,
        sha256_file(&metrics_path)?,
        started_at,
        finished_at,
    );
    manifest.save(&dir.join(MANIFEST_FILE))?;
    Ok(dir)
}

/// Trains `config` and writes its run directory under `out`.
pub fn train_to_dir(config: &RunConfig, out: &Path) -> Result<(PathBuf, RunOutput)> {
    let started_at = chrono::Utc::now();
    let output = run(config)?;
    let dir = write_run_dir(out, config, &output, started_at)?;
    Ok((dir, output))
}

/// A run directory read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub manifest: RunManifest,
    pub agents: Vec<MlpSnapshot>,
    pub critic: Option<MlpSnapshot>,
}

pub fn load_run_dir(dir: &Path) -> Result<LoadedRun> {
    let config = load_config(&dir.join(CONFIG_FILE), &[])?;
    let manifest = RunManifest::load(&dir.join(MANIFEST_FILE))?;
    let snap = dir.join(SNAPSHOT_DIR);
    let n = config.env.n_agents();
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        agents.push(MlpSnapshot::load(&snap.join(agent_snapshot_name(i)))?);
    }
    let critic_path = snap.join("critic.json");
    let critic = if critic_path.exists() {
        Some(MlpSnapshot::load(&critic_path)?)
    } else {
        None
    };
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        config,
        manifest,
        agents,
        critic,
    })
}

/// Recomputes the metrics digest and compares it with the manifest.
pub fn verify_run_dir(dir: &Path) -> Result<bool> {
    let manifest = RunManifest::load(&dir.join(MANIFEST_FILE))?;
    Ok(sha256_file(&dir.join(METRICS_FILE))? == manifest.metrics_sha256)
}

/// `strategy,redundant,n,median,iqr,failures` per sweep cell.
pub fn write_sweep_summary(table: &SweepTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut write = || -> std::result::Result<(), csv::Error> {
        w.write_record(["strategy", "redundant", "n", "median", "iqr", "failures"])?;
        for c in &table.cells {
            w.write_record([
                c.strategy.name().to_string(),
                c.redundant.to_string(),
                c.final_win_rates.len().to_string(),
                fmt_f64(c.median),
                fmt_f64(c.iqr),
                c.failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| Error::format(path, e.to_string()))
}

/// Median final win rate against redundant-agent count, one line per strategy,
/// with counts in sweep order along the x axis.
pub fn write_sweep_svg(table: &SweepTable, redundant: &[usize], path: &Path) -> Result<()> {
    let mut strategies = Vec::new();
    for c in &table.cells {
        if !strategies.contains(&c.strategy) {
            strategies.push(c.strategy);
        }
    }
    let series: Vec<Series> = strategies
        .iter()
        .map(|&s| Series {
            name: s.name().to_string(),
            points: redundant
                .iter()
                .enumerate()
                .filter_map(|(i, &r)| table.cell(s, r).map(|c| (i as f64, c.median)))
                .collect(),
        })
        .collect();
    let spec = ChartSpec {
        title: "final win rate (median over seeds)".into(),
        x_label: "redundant agents".into(),
        y_label: "win rate".into(),
        y_range: Some((0.0, 1.0)),
        x_ticks: Some(
            redundant
                .iter()
                .enumerate()
                .map(|(i, r)| (i as f64, r.to_string()))
                .collect(),
        ),
    };
    write_chart(&spec, &series, path)
}
