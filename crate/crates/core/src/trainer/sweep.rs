use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::marl::StrategyKind;
use crate::tensor_net::derive_seed;

use super::config::RunConfig;
use super::run::{run, RunOutput};

/// Redundant-agent counts around a fixed essential core, most redundant first.
pub const DEFAULT_REDUNDANT_COUNTS: [usize; 4] = [20, 15, 10, 0];

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub base: RunConfig,
    pub redundant: Vec<usize>,
    pub seeds: Vec<u64>,
    pub strategies: Vec<StrategyKind>,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub strategy: StrategyKind,
    pub redundant: usize,
    /// User-facing seed from the plan.
    pub seed: u64,
    /// Fully resolved config, including the derived run seed.
    pub config: RunConfig,
    pub started_at: chrono::DateTime<chrono::Utc>,
    pub outcome: std::result::Result<RunOutput, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub strategy: StrategyKind,
    pub redundant: usize,
    pub final_win_rates: Vec<f64>,
    pub median: f64,
    pub iqr: f64,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub runs: Vec<SweepRun>,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn cell(&self, strategy: StrategyKind, redundant: usize) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.strategy == strategy && c.redundant == redundant)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().map(|c| c.failures).sum()
    }
}

/// Linear-interpolation quantile of sorted data (`q` in [0, 1]).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.redundant.is_empty() || self.seeds.is_empty() || self.strategies.is_empty() {
            return Err(Error::config(
                "sweep",
                "redundant counts, seeds and strategies must all be non-empty",
            ));
        }
        if self.jobs == 0 {
            return Err(Error::config("sweep.jobs", "must be >= 1"));
        }
        for &n in &self.redundant {
            let mut probe = self.base.clone();
            probe.env.n_redundant = n;
            probe.validate()?;
        }
        Ok(())
    }

    /// Resolved config for one cell member. The run seed is derived from
    /// (strategy, count, seed) so every run has its own streams.
    pub fn run_config(&self, strategy: StrategyKind, redundant: usize, seed: u64) -> RunConfig {
        let mut c = self.base.clone();
        c.strategy = strategy;
        c.env.n_redundant = redundant;
        c.training.seed = derive_seed(seed, &format!("{}/{}", strategy.name(), redundant));
        c
    }

    fn members(&self) -> Vec<(StrategyKind, usize, u64)> {
        let mut out = Vec::new();
        for &s in &self.strategies {
            for &n in &self.redundant {
                for &seed in &self.seeds {
                    out.push((s, n, seed));
                }
            }
        }
        out
    }
}

/// Runs the cross product of strategies × counts × seeds. A failing run is
/// recorded in its cell and the sweep carries on. `on_run` is invoked as
/// each run finishes (from worker threads, in completion order).
pub fn sweep<F>(plan: &SweepPlan, on_run: F) -> Result<SweepTable>
where
    F: Fn(&SweepRun) + Sync,
{
    plan.validate()?;
    let members = plan.members();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.jobs)
        .build()
        .map_err(|e| Error::config("sweep.jobs", e.to_string()))?;
    let runs: Vec<SweepRun> = pool.install(|| {
        members
            .par_iter()
            .map(|&(strategy, redundant, seed)| {
                let config = plan.run_config(strategy, redundant, seed);
                let started_at = chrono::Utc::now();
                let outcome = run(&config).map_err(|e| e.to_string());
                let r = SweepRun {
                    strategy,
                    redundant,
                    seed,
                    config,
                    started_at,
                    outcome,
                };
                on_run(&r);
                r
            })
            .collect()
    });

    let mut cells = Vec::new();
    for &strategy in &plan.strategies {
        for &redundant in &plan.redundant {
            let members: Vec<&SweepRun> = runs
                .iter()
                .filter(|r| r.strategy == strategy && r.redundant == redundant)
                .collect();
            let mut finals: Vec<f64> = members
                .iter()
                .filter_map(|r| r.outcome.as_ref().ok().and_then(|o| o.final_win_rate()))
                .collect();
            let failures = members.len() - finals.len();
            let in_seed_order = finals.clone();
            finals.sort_by(f64::total_cmp);
            cells.push(SweepCell {
                strategy,
                redundant,
                median: quantile(&finals, 0.5),
                iqr: quantile(&finals, 0.75) - quantile(&finals, 0.25),
                final_win_rates: in_seed_order,
                failures,
            });
        }
    }
    Ok(SweepTable { runs, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile(&v, 0.5), 1.5);
        assert_eq!(quantile(&v, 0.25), 0.75);
        assert_eq!(quantile(&[0.4], 0.75), 0.4);
        assert!(quantile(&[], 0.5).is_nan());
    }
}
