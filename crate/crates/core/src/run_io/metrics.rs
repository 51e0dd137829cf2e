use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trainer::MetricsRow;

pub const METRICS_HEADER: [&str; 10] = [
    "episode",
    "win_rate",
    "mean_return",
    "critic_loss",
    "agent_loss",
    "conservation_residual",
    "epsilon",
    "essential_mean_abs_rel",
    "redundant_mean_abs_rel",
    "wall_ms",
];

/// 17 significant digits: enough for any f64 to read back bit-identically.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn metrics_line(r: &MetricsRow) -> String {
    let floats = [
        r.win_rate,
        r.mean_return,
        r.critic_loss,
        r.agent_loss,
        r.conservation_residual,
        r.epsilon,
        r.essential_mean_abs_rel,
        r.redundant_mean_abs_rel,
    ]
    .map(fmt_f64);
    format!("{},{},{}", r.episode, floats.join(","), r.wall_ms)
}

pub fn write_metrics(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "{}", METRICS_HEADER.join(","))?;
        for r in rows {
            writeln!(w, "{}", metrics_line(r))?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let header = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    if header.iter().ne(METRICS_HEADER.iter().copied()) {
        return Err(Error::format(path, "unexpected metrics header"));
    }
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let bad = |col: &str| Error::format(path, format!("row {}: bad {col}", line + 1));
        let f = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(METRICS_HEADER[i])) };
        let u = |i: usize| -> Result<u64> { rec[i].parse().map_err(|_| bad(METRICS_HEADER[i])) };
        rows.push(MetricsRow {
            episode: u(0)?,
            win_rate: f(1)?,
            mean_return: f(2)?,
            critic_loss: f(3)?,
            agent_loss: f(4)?,
            conservation_residual: f(5)?,
            epsilon: f(6)?,
            essential_mean_abs_rel: f(7)?,
            redundant_mean_abs_rel: f(8)?,
            wall_ms: u(9)?,
        });
    }
    Ok(rows)
}

/// Values of one named column (any header entry except `episode`).
pub fn metric_column(rows: &[MetricsRow], name: &str) -> Option<Vec<f64>> {
    let pick: fn(&MetricsRow) -> f64 = match name {
        "win_rate" => |r| r.win_rate,
        "mean_return" => |r| r.mean_return,
        "critic_loss" => |r| r.critic_loss,
        "agent_loss" => |r| r.agent_loss,
        "conservation_residual" => |r| r.conservation_residual,
        "epsilon" => |r| r.epsilon,
        "essential_mean_abs_rel" => |r| r.essential_mean_abs_rel,
        "redundant_mean_abs_rel" => |r| r.redundant_mean_abs_rel,
        "wall_ms" => |r| r.wall_ms as f64,
        _ => return None,
    };
    Some(rows.iter().map(pick).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(i: u64, x: f64) -> MetricsRow {
        MetricsRow {
            episode: i,
            win_rate: x.abs().min(1.0),
            mean_return: x,
            critic_loss: x * x,
            agent_loss: x / 3.0,
            conservation_residual: x * 1e-12,
            epsilon: 0.05,
            essential_mean_abs_rel: x.abs(),
            redundant_mean_abs_rel: f64::NAN,
            wall_ms: 0,
        }
    }

    #[test]
    fn line_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows: Vec<_> = (1..=10).map(|i| row(i * 10, 0.1 * i as f64)).collect();
        write_metrics(&rows, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 11);
        write_metrics(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{}\n", METRICS_HEADER.join(",")));
        assert!(read_metrics(&path).unwrap().is_empty());
    }

    #[test]
    fn unknown_column_is_none() {
        assert!(metric_column(&[], "accuracy").is_none());
        assert!(metric_column(&[], "win_rate").is_some());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(xs in proptest::collection::vec(any::<f64>(), 1..20)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.csv");
            let rows: Vec<_> = xs.iter().enumerate().map(|(i, &x)| row(i as u64, x)).collect();
            write_metrics(&rows, &path).unwrap();
            let back = read_metrics(&path).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for (a, b) in rows.iter().zip(&back) {
                prop_assert!(a.bit_eq(b), "{:?} vs {:?}", a, b);
            }
        }
    }
}
