use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use rdn_core::checks::{run_checks, CheckOptions};
use rdn_core::marl::StrategyKind;
use rdn_core::run_io::{
    emit_svg_curves, load_config, load_run_dir, train_to_dir, write_relevance_trace, write_run_dir,
    write_sweep_summary, write_sweep_svg, METRICS_FILE, TRACE_FILE,
};
use rdn_core::tensor_net::Rng;
use rdn_core::trainer::{
    evaluate, relevance_trace, sweep, RunConfig, SweepPlan, DEFAULT_REDUNDANT_COUNTS,
};
use rdn_core::Error;

#[derive(Parser)]
#[command(
    name = "rdn",
    version,
    about = "Relevance-decomposed multi-agent Q-learning workbench"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write its run directory.
    Train(TrainArgs),
    /// Train every (strategy, redundant count, seed) combination.
    Sweep(SweepArgs),
    /// Greedy evaluation of a saved run.
    Eval(EvalArgs),
    /// Replay a saved RDN run and dump per-step per-agent relevance.
    Relevance(RelevanceArgs),
    /// Plot one metrics column from several runs as SVG.
    Plot(PlotArgs),
    /// Run the built-in property suite.
    Check(CheckArgs),
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Dotted-path override applied after the file, e.g. training.seed=7.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: ConfigArgs,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: ConfigArgs,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_REDUNDANT_COUNTS)]
    redundant: Vec<usize>,
    /// Number of seeds per cell, counting up from training.seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "rdn,vdn,iql")]
    strategies: Vec<String>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long, default_value_t = 100)]
    episodes: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RelevanceArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long, default_value_t = 10)]
    episodes: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to relevance.jsonl inside the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, default_value = "win_rate")]
    metric: String,
    #[arg(long)]
    out: PathBuf,
    /// Run directories or metrics.csv files.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, hide = true, default_value_t = 0.0)]
    fault_lrp_denominator: f64,
}

/// Failure that has already been reported and maps to exit code 1.
#[derive(Debug)]
struct Reported;

impl std::fmt::Display for Reported {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("one or more checks or runs failed")
    }
}

impl std::error::Error for Reported {}

fn fmt_rate(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), |v| format!("{v:.4}"))
}

fn summary_line(config: &RunConfig, final_win_rate: Option<f64>) -> String {
    format!(
        "run={} strategy={} redundant={} final_win_rate={}",
        config.run_id(),
        config.strategy.name(),
        config.env.n_redundant,
        fmt_rate(final_win_rate)
    )
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let mut overrides = args.common.overrides;
    if let Some(seed) = args.seed {
        overrides.push(format!("training.seed={seed}"));
    }
    let config = load_config(&args.common.config, &overrides)?;
    let (_, output) = train_to_dir(&config, &args.common.out)?;
    println!("{}", summary_line(&config, output.final_win_rate()));
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let base = load_config(&args.common.config, &args.common.overrides)?;
    let strategies = args
        .strategies
        .iter()
        .map(|s| {
            StrategyKind::parse(s.trim())
                .ok_or_else(|| Error::config("--strategies", format!("unknown strategy `{s}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if args.seeds == 0 {
        return Err(Error::config("--seeds", "must be >= 1").into());
    }
    let seeds = (0..args.seeds).map(|i| base.training.seed + i).collect();
    let plan = SweepPlan {
        base,
        redundant: args.redundant.clone(),
        seeds,
        strategies,
        jobs: args.jobs,
    };
    let out = args.common.out;
    let write_errors = Mutex::new(Vec::new());
    let table = sweep(&plan, |r| match &r.outcome {
        Ok(output) => {
            if let Err(e) = write_run_dir(&out, &r.config, output, r.started_at) {
                write_errors
                    .lock()
                    .unwrap()
                    .push(format!("{}: {e}", r.config.run_id()));
            }
            println!("{}", summary_line(&r.config, output.final_win_rate()));
        }
        Err(e) => eprintln!("run={} failed: {e}", r.config.run_id()),
    })?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_sweep_summary(&table, &out.join("sweep_summary.csv"))?;
    write_sweep_svg(&table, &plan.redundant, &out.join("sweep_summary.svg"))?;
    for c in &table.cells {
        println!(
            "cell strategy={} redundant={} median={} iqr={} failures={}",
            c.strategy.name(),
            c.redundant,
            fmt_rate(Some(c.median)),
            fmt_rate(Some(c.iqr)),
            c.failures
        );
    }
    let write_errors = write_errors.into_inner().unwrap();
    for e in &write_errors {
        eprintln!("write failed: {e}");
    }
    if table.failures() > 0 || !write_errors.is_empty() {
        return Err(Reported.into());
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    let run = load_run_dir(&args.run)?;
    let mut rng = Rng::new(args.seed).child("eval");
    let res = evaluate(&run.agents, &run.config, args.episodes, &mut rng)?;
    println!(
        "run={} strategy={} redundant={} win_rate={:.4} mean_return={:.4} episodes={}",
        run.config.run_id(),
        run.config.strategy.name(),
        run.config.env.n_redundant,
        res.win_rate,
        res.mean_return,
        res.episodes
    );
    Ok(())
}

fn cmd_relevance(args: RelevanceArgs) -> anyhow::Result<()> {
    let run = load_run_dir(&args.run)?;
    let critic = run.critic.as_ref().ok_or_else(|| {
        Error::Usage(format!(
            "run `{}` has no critic snapshot; relevance needs an rdn run",
            args.run.display()
        ))
    })?;
    let mut rng = Rng::new(args.seed).child("relevance");
    let records = relevance_trace(&run.config, &run.agents, critic, args.episodes, &mut rng)?;
    let out = args.out.unwrap_or_else(|| args.run.join(TRACE_FILE));
    write_relevance_trace(&records, &out)?;
    println!("records={} path={}", records.len(), out.display());
    Ok(())
}

fn metrics_source(p: &Path) -> (String, PathBuf) {
    if p.is_dir() {
        let label = p.file_name().map_or_else(
            || p.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        (label, p.join(METRICS_FILE))
    } else {
        let label = p.parent().and_then(Path::file_name).map_or_else(
            || p.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        (label, p.to_path_buf())
    }
}

fn cmd_plot(args: PlotArgs) -> anyhow::Result<()> {
    let sources: Vec<(String, PathBuf)> = args.runs.iter().map(|p| metrics_source(p)).collect();
    let runs: Vec<(String, &Path)> = sources
        .iter()
        .map(|(l, p)| (l.clone(), p.as_path()))
        .collect();
    emit_svg_curves(&args.metric, &runs, &args.out)?;
    println!("plot={}", args.out.display());
    Ok(())
}

fn cmd_check(args: CheckArgs) -> anyhow::Result<()> {
    let opts = CheckOptions {
        seed: args.seed,
        lrp_denominator_shift: args.fault_lrp_denominator,
    };
    let outcomes = run_checks(&opts);
    for c in &outcomes {
        println!(
            "{} {} ({}) [{:.2}s]",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail,
            c.elapsed.as_secs_f64()
        );
    }
    if outcomes.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Reported.into())
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Reported>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_config() => 2,
        Some(Error::Usage(_)) => 2,
        Some(Error::Io { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Relevance(a) => cmd_relevance(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<Reported>().is_none() {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
