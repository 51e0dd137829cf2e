//! Acceptance suite. Criteria run sequentially in one test so that runtime
//! limits are measured without other tests competing for cores. Each prints
//! one `PASS`/`FAIL criterion N` line; artifacts land in
//! `target/tmp/acceptance/`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rdn_core::envs::{corridor_oracle, enumerate_oracle, EnvSpec};
use rdn_core::lrp::{lrp_backward, LrpRule};
use rdn_core::marl::{vdn_mix, AgentBank, Learner, LearnerSettings, StrategyKind};
use rdn_core::run_io::{
    emit_svg_curves, load_config, read_metrics, write_chart, write_run_dir, write_sweep_summary,
    write_sweep_svg, ChartSpec, Series, METRICS_FILE,
};
use rdn_core::tensor_net::{finite_diff_grad, max_relative_error, Mlp, OptimizerKind, Rng};
use rdn_core::trainer::{quantile, run, sweep, RunConfig, SweepPlan};

const SWEEP_REDUNDANT: [usize; 4] = [20, 15, 10, 0];
const SEEDS: u64 = 5;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn out_dir() -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn example_config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    load_config(&path, &[]).unwrap()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    quantile(&xs, 0.5)
}

fn random_scalar_net(rng: &mut Rng, with_bias: bool) -> (Mlp<f64>, Vec<f64>) {
    let depth = 1 + rng.below(3);
    let mut sizes = vec![1 + rng.below(16)];
    for _ in 1..depth {
        sizes.push(1 + rng.below(16));
    }
    sizes.push(1);
    let mut net = Mlp::new(&sizes, rng).unwrap();
    if with_bias {
        for l in 0..net.layers().len() {
            let (_, b) = net.params_mut(l);
            for v in b.iter_mut() {
                *v = 0.5 * rng.normal();
            }
        }
    }
    let x = (0..sizes[0]).map(|_| rng.normal()).collect();
    (net, x)
}

fn c1_conservation() -> Verdict {
    let mut rng = Rng::new(101);
    let (mut worst_plain, mut worst_bias) = (0.0f64, 0.0f64);
    for with_bias in [false, true] {
        for _ in 0..100 {
            let (net, x) = random_scalar_net(&mut rng, with_bias);
            let (_, cache) = net.forward(&x).unwrap();
            let rep = lrp_backward(&net, &cache, LrpRule::epsilon(0.0)).unwrap();
            let mut explained: f64 = rep.r_in.iter().sum();
            if with_bias {
                explained += rep.bias_absorbed.iter().sum::<f64>();
            }
            let err = (rep.q_tot - explained).abs() / rep.q_tot.abs().max(1.0);
            if with_bias {
                worst_bias = worst_bias.max(err);
            } else {
                worst_plain = worst_plain.max(err);
            }
        }
    }
    verdict(
        worst_plain <= 1e-9 && worst_bias <= 1e-9,
        format!("worst scaled error zero-bias {worst_plain:.2e}, biased {worst_bias:.2e}"),
    )
}

fn c2_gradients() -> Verdict {
    let mut rng = Rng::new(202);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let sizes: Vec<usize> = (0..2 + rng.below(3)).map(|_| 1 + rng.below(16)).collect();
        let mut net = Mlp::<f64>::new(&sizes, &mut rng).unwrap();
        for l in 0..net.layers().len() {
            let (_, b) = net.params_mut(l);
            for v in b.iter_mut() {
                *v = 0.3 * rng.normal();
            }
        }
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.normal()).collect();
        let c: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.normal()).collect();
        let (_, cache) = net.forward(&x).unwrap();
        let analytic = net.backward(&cache, &c).unwrap();
        let loss = |y: &[f64]| y.iter().zip(&c).map(|(a, b)| a * b).sum();
        let numeric = finite_diff_grad(&net, &x, loss, 1e-6);
        worst = worst.max(max_relative_error(&analytic, &numeric, 1e-3));
    }
    verdict(
        worst <= 1e-5,
        format!("max relative error {worst:.2e} over 50 nets"),
    )
}

fn c3_vdn_identity() -> Verdict {
    let mut rng = Rng::new(303);
    let mut mismatches = 0;
    let mut worst_grad = 0.0f64;
    let settings = LearnerSettings {
        gamma: 0.99,
        sync_interval: 10,
        rule: LrpRule::default(),
        decompose_target: false,
    };
    for trial in 0..200 {
        let m = 1 + trial % 24;
        let bank = AgentBank::<f64>::new(m, 5, &[8], 3, true, OptimizerKind::Adam, 1e-3, &mut rng)
            .unwrap();
        let learner = Learner::new(StrategyKind::Vdn, bank, None, settings, vec![true; m]).unwrap();
        let obs: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..5).map(|_| rng.normal()).collect())
            .collect();
        let actions: Vec<usize> = (0..m).map(|_| rng.below(3)).collect();
        let chosen: Vec<f64> = (0..m)
            .map(|i| learner.bank().q_values(i, &obs[i]).unwrap()[actions[i]])
            .collect();
        let mut exact = 0.0;
        for q in &chosen {
            exact += q;
        }
        if learner.vdn_q_tot(&obs, &actions).unwrap().to_bits() != exact.to_bits() {
            mismatches += 1;
        }
        let h = 1e-6;
        for i in 0..m {
            let mut up = chosen.clone();
            let mut down = chosen.clone();
            up[i] += h;
            down[i] -= h;
            let g = (vdn_mix(&up) - vdn_mix(&down)) / (up[i] - down[i]);
            worst_grad = worst_grad.max((g - 1.0).abs());
        }
    }
    verdict(
        mismatches == 0 && worst_grad <= 1e-6,
        format!("{mismatches} sum mismatches in 200 trials, max |dQtot/dQi - 1| {worst_grad:.2e}"),
    )
}

fn c4_oracle_reachability() -> Verdict {
    let base = example_config("levers.json");
    let optimum = enumerate_oracle(&base.env).unwrap().optimal_value;
    let mut rates = Vec::new();
    for seed in 0..SEEDS {
        let mut c = base.clone();
        c.training.seed = seed;
        rates.push(run(&c).unwrap().final_win_rate().unwrap());
    }
    let med = median(rates.clone());
    verdict(
        med >= 0.95 && optimum == 1.0,
        format!("oracle optimum {optimum}, final win rates {rates:?}, median {med:.3}"),
    )
}

struct SweepArtifacts {
    runs: Vec<(StrategyKind, usize, u64, PathBuf)>,
}

fn c5_redundancy_trend(out: &Path) -> (Verdict, SweepArtifacts) {
    let dir = out.join("sweep");
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    let plan = SweepPlan {
        base: example_config("levers_sweep.json"),
        redundant: SWEEP_REDUNDANT.to_vec(),
        seeds: (0..SEEDS).collect(),
        strategies: vec![StrategyKind::Rdn, StrategyKind::Vdn],
        jobs: 4,
    };
    let written = Mutex::new(Vec::new());
    let table = sweep(&plan, |r| {
        if let Ok(output) = &r.outcome {
            let path = write_run_dir(&dir, &r.config, output, r.started_at).unwrap();
            written
                .lock()
                .unwrap()
                .push((r.strategy, r.redundant, r.seed, path));
        }
    })
    .unwrap();
    write_sweep_summary(&table, &dir.join("sweep_summary.csv")).unwrap();
    write_sweep_svg(&table, &plan.redundant, &dir.join("sweep_summary.svg")).unwrap();

    println!("  strategy redundant median   iqr      failures  final win rates");
    for c in &table.cells {
        println!(
            "  {:<8} {:<9} {:<8.3} {:<8.3} {:<9} {:?}",
            c.strategy.name(),
            c.redundant,
            c.median,
            c.iqr,
            c.failures,
            c.final_win_rates
        );
    }
    let rdn = table.cell(StrategyKind::Rdn, 20).unwrap();
    let vdn = table.cell(StrategyKind::Vdn, 20).unwrap();
    let passed = table.failures() == 0 && rdn.median >= vdn.median - 0.05;
    let detail = format!(
        "redundant=20: rdn median {:.3} vs vdn median {:.3}; table in {}",
        rdn.median,
        vdn.median,
        dir.display()
    );
    let mut runs = written.into_inner().unwrap();
    runs.sort_by_key(|r| (r.0.name(), r.1, r.2));
    (verdict(passed, detail), SweepArtifacts { runs })
}

fn c6_corridor() -> Verdict {
    let calibration = corridor_oracle(&EnvSpec::corridor(1, 0, 3, 20)).unwrap();
    let oracle = calibration.result.optimal_value;
    let base = example_config("corridor.json");
    let mut rates = Vec::new();
    for seed in 0..SEEDS {
        let mut c = base.clone();
        c.training.seed = seed;
        rates.push(run(&c).unwrap().final_win_rate().unwrap());
    }
    let med = median(rates.clone());
    verdict(
        med >= 0.8 && (oracle - 1.18).abs() < 1e-12 && base.training.episodes <= 30_000,
        format!(
            "calibration optimum {oracle:.4}; {} episodes, final win rates {rates:?}, median {med:.3}",
            base.training.episodes
        ),
    )
}

fn rdn_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rdn"))
        .args(args)
        .output()
        .unwrap()
}

fn c7_determinism(out: &Path) -> Verdict {
    let dir = out.join("determinism");
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    let mut config = example_config("levers.json");
    config.env.n_redundant = 2;
    config.training.episodes = 400;
    let cfg = dir.join("config.json");
    fs::write(&cfg, serde_json::to_string(&config).unwrap()).unwrap();
    let cfg = cfg.to_str().unwrap();

    let mut metrics = Vec::new();
    for name in ["train_a", "train_b"] {
        let o = dir.join(name);
        let res = rdn_cli(&["train", "--config", cfg, "--out", o.to_str().unwrap()]);
        assert!(
            res.status.success(),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
        metrics.push(fs::read(o.join(config.run_id()).join(METRICS_FILE)).unwrap());
    }
    let mut summaries = Vec::new();
    for jobs in ["1", "4"] {
        let o = dir.join(format!("sweep_jobs{jobs}"));
        let res = rdn_cli(&[
            "sweep",
            "--config",
            cfg,
            "--out",
            o.to_str().unwrap(),
            "--redundant",
            "2,0",
            "--seeds",
            "2",
            "--strategies",
            "rdn,vdn,iql",
            "--jobs",
            jobs,
        ]);
        assert!(
            res.status.success(),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
        summaries.push(fs::read(o.join("sweep_summary.csv")).unwrap());
    }
    let same_metrics = metrics[0] == metrics[1];
    let same_summary = summaries[0] == summaries[1];
    verdict(
        same_metrics && same_summary,
        format!("train metrics.csv identical: {same_metrics}; sweep summary identical across --jobs 1/4: {same_summary}"),
    )
}

fn c8_relevance_separation(out: &Path, sweep: &SweepArtifacts) -> Verdict {
    let dir = out.join("relevance");
    fs::create_dir_all(&dir).unwrap();
    let mut lines = Vec::new();
    let mut logged = true;
    for &redundant in &SWEEP_REDUNDANT[..3] {
        let runs: Vec<(String, &Path)> = sweep
            .runs
            .iter()
            .filter(|r| r.0 == StrategyKind::Rdn && r.1 == redundant)
            .map(|r| (format!("seed {}", r.2), r.3.as_path()))
            .collect();
        let metrics: Vec<PathBuf> = runs.iter().map(|(_, p)| p.join(METRICS_FILE)).collect();
        let named: Vec<(String, &Path)> = runs
            .iter()
            .map(|(n, _)| n.clone())
            .zip(metrics.iter().map(PathBuf::as_path))
            .collect();
        for metric in ["essential_mean_abs_rel", "redundant_mean_abs_rel"] {
            emit_svg_curves(
                metric,
                &named,
                &dir.join(format!("{metric}_r{redundant}.svg")),
            )
            .unwrap();
        }

        // Seed-median of both roles per evaluation block, on one chart.
        let all: Vec<_> = metrics.iter().map(|p| read_metrics(p).unwrap()).collect();
        let blocks = all[0].len();
        let mut ess = Vec::new();
        let mut red = Vec::new();
        for b in 0..blocks {
            let ep = all[0][b].episode as f64;
            let e: Vec<f64> = all
                .iter()
                .map(|rows| rows[b].essential_mean_abs_rel)
                .filter(|v| v.is_finite())
                .collect();
            let r: Vec<f64> = all
                .iter()
                .map(|rows| rows[b].redundant_mean_abs_rel)
                .filter(|v| v.is_finite())
                .collect();
            if b > 0 && (e.is_empty() || r.is_empty()) {
                logged = false;
            }
            if !e.is_empty() && !r.is_empty() {
                ess.push((ep, median(e)));
                red.push((ep, median(r)));
            }
        }
        let spec = ChartSpec {
            title: format!("mean |credit| by role, n_e=4, redundant={redundant}"),
            x_label: "episode".into(),
            y_label: "mean |Q~_i|".into(),
            ..Default::default()
        };
        let series = [
            Series {
                name: "essential".into(),
                points: ess.clone(),
            },
            Series {
                name: "redundant".into(),
                points: red.clone(),
            },
        ];
        write_chart(
            &spec,
            &series,
            &dir.join(format!("separation_r{redundant}.svg")),
        )
        .unwrap();
        if let (Some(e), Some(r)) = (ess.last(), red.last()) {
            lines.push(format!(
                "redundant={redundant}: final essential {:.4} vs redundant {:.4} (ratio {:.2})",
                e.1,
                r.1,
                e.1 / r.1
            ));
        }
    }
    for l in &lines {
        println!("  {l}");
    }
    verdict(
        logged,
        format!(
            "per-block credit by role logged and plotted in {}",
            dir.display()
        ),
    )
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn report(n: usize, v: &Verdict, elapsed: Duration, limit: Option<Duration>) -> bool {
    let in_time = limit.is_none_or(|l| elapsed < l);
    let passed = v.passed && in_time;
    let limit_note = limit.map_or(String::new(), |l| format!(" limit {}s", l.as_secs()));
    println!(
        "{} criterion {n}: {} [{:.1}s{limit_note}]",
        if passed { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64()
    );
    passed
}

#[test]
fn acceptance_criteria() {
    println!();
    let out = out_dir();
    let mut failed = Vec::new();
    let mut record = |n: usize, ok: bool| {
        if !ok {
            failed.push(n);
        }
    };

    let (v, t) = timed(c1_conservation);
    record(1, report(1, &v, t, Some(Duration::from_secs(5))));
    let (v, t) = timed(c2_gradients);
    record(2, report(2, &v, t, Some(Duration::from_secs(30))));
    let (v, t) = timed(c3_vdn_identity);
    record(3, report(3, &v, t, None));
    let (v, t) = timed(c4_oracle_reachability);
    record(4, report(4, &v, t, Some(Duration::from_secs(120))));
    let ((v, artifacts), t) = timed(|| c5_redundancy_trend(&out));
    record(5, report(5, &v, t, Some(Duration::from_secs(45 * 60))));
    let (v, t) = timed(c6_corridor);
    record(6, report(6, &v, t, None));
    let (v, t) = timed(|| c7_determinism(&out));
    record(7, report(7, &v, t, None));
    let (v, t) = timed(|| c8_relevance_separation(&out, &artifacts));
    record(8, report(8, &v, t, None));

    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
