use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use treeswarm::experiment::{
    run_sweep, run_trials, summarize, write_artifacts, write_summary_csv, ExperimentConfig, SweepConfig,
    TrialError, TrialOutcome,
};
use treeswarm::protocol::{audit_trace, Protocol, RunTrace};
use treeswarm::{plan, replay, LabeledTree, PlanError, TransformPlan};

#[derive(Parser)]
#[command(name = "treeswarm", version, about = "Spanning-tree rewiring for robot swarms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trials of one experiment and write per-trial artifacts.
    Run(RunArgs),
    /// Run every size/protocol cell and write a summary table.
    Sweep(SweepArgs),
    /// Plan a transformation between two trees.
    Plan {
        initial: PathBuf,
        target: PathBuf,
        /// Plan file to write; printed to stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Replay a plan file and check it reaches its target.
    Replay { plan: PathBuf },
    /// Check an event log for messages or rewires beyond the allowed hop range.
    Audit { log: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with experiment settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    protocol: Option<Protocol>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML file with sweep settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Swarm sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Protocols, comma separated.
    #[arg(long, value_delimiter = ',')]
    protocol: Option<Vec<Protocol>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit 1: a run or check failed. Exit 2: bad input.
enum Failure {
    Check(anyhow::Error),
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Plan { initial, target, output } => cmd_plan(&initial, &target, output.as_deref()),
        Command::Replay { plan } => cmd_replay(&plan),
        Command::Audit { log } => cmd_audit(&log),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    match path {
        Some(p) => toml::from_str(&read(p)?).with_context(|| format!("bad config {}", p.display())),
        None => Ok(T::default()),
    }
}

fn config_error(e: TrialError) -> Failure {
    match e {
        TrialError::Config(_) | TrialError::Spatial(treeswarm::spatial::SpatialError::InvalidConfig(_)) => {
            Failure::Usage(e.into())
        }
        other => Failure::Check(other.into()),
    }
}

fn write_trial(o: &TrialOutcome, dir: &Path) -> anyhow::Result<bool> {
    write_artifacts(o, dir).with_context(|| format!("cannot write artifacts to {}", dir.display()))?;
    let failures = o.failures();
    println!(
        "n={} {} trial {} seed {}: {} rounds, {} ops, transform {:.1} s, arrange {:.1} s, λ2 {:.6}, coverage {:.2} -> {:.2}{}",
        o.n,
        o.protocol,
        o.trial,
        o.seed,
        o.rounds,
        o.ops_committed,
        o.transform_time,
        o.arrange_time,
        o.final_lambda2_tree,
        o.initial_coverage,
        o.final_coverage,
        if failures.is_empty() { String::new() } else { format!(" FAILED: {}", failures.join("; ")) }
    );
    Ok(failures.is_empty())
}

fn write_summary(rows: &[treeswarm::experiment::SummaryRow], dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join("summary.csv");
    let file = fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    write_summary_csv(rows, file)?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Outcome {
    let mut cfg: ExperimentConfig = load_config(args.config.as_deref())?;
    cfg.n = args.n.unwrap_or(cfg.n);
    cfg.protocol = args.protocol.unwrap_or(cfg.protocol);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.trials = args.trials.unwrap_or(cfg.trials);
    cfg.max_rounds = args.max_rounds.or(cfg.max_rounds);
    cfg.out = args.out.unwrap_or(cfg.out);
    cfg.validate().map_err(config_error)?;

    let mut ok = true;
    let mut done = Vec::new();
    for (t, result) in run_trials(&cfg).into_iter().enumerate() {
        match result {
            Ok(o) => {
                ok &= write_trial(&o, &cfg.out)?;
                done.push(o);
            }
            Err(e) => {
                ok = false;
                println!("n={} {} trial {t}: FAILED: {e}", cfg.n, cfg.protocol);
            }
        }
    }
    write_summary(&[summarize(&cfg, &done)], &cfg.out)?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Check(anyhow!("some trials failed")))
    }
}

fn cmd_sweep(args: SweepArgs) -> Outcome {
    let mut cfg: SweepConfig = load_config(args.config.as_deref())?;
    cfg.sizes = args.n.unwrap_or(cfg.sizes);
    cfg.protocols = args.protocol.unwrap_or(cfg.protocols);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.trials = args.trials.unwrap_or(cfg.trials);
    cfg.max_rounds = args.max_rounds.or(cfg.max_rounds);
    cfg.out = args.out.unwrap_or(cfg.out);
    if cfg.sizes.is_empty() || cfg.protocols.is_empty() {
        return Err(Failure::Usage(anyhow!("a sweep needs at least one size and one protocol")));
    }
    for cell in cfg.cells() {
        cell.validate().map_err(config_error)?;
    }
    let outcome = run_sweep(&cfg).map_err(config_error)?;
    let mut ok = true;
    for (cell, trials) in &outcome.cells {
        for o in trials {
            ok &= write_trial(o, &cell.out)?;
        }
    }
    write_summary(&outcome.summary, &cfg.out)?;
    println!("summary: {}", cfg.out.join("summary.csv").display());
    if ok {
        Ok(())
    } else {
        Err(Failure::Check(anyhow!("some trials failed their checks")))
    }
}

fn load_tree(path: &Path) -> anyhow::Result<LabeledTree> {
    read(path)?
        .parse()
        .with_context(|| format!("bad tree file {}", path.display()))
}

fn cmd_plan(initial: &Path, target: &Path, output: Option<&Path>) -> Outcome {
    let (a, b) = (load_tree(initial)?, load_tree(target)?);
    let p = plan(&a, &b).map_err(|e| match e {
        PlanError::SizeMismatch { .. } => Failure::Usage(e.into()),
        other => Failure::Check(other.into()),
    })?;
    match output {
        Some(path) => {
            fs::write(path, p.to_string()).with_context(|| format!("cannot write {}", path.display()))?;
        }
        None => print!("{p}"),
    }
    eprintln!("{} steps", p.steps.len());
    Ok(())
}

fn cmd_replay(path: &Path) -> Outcome {
    let p = TransformPlan::parse(&read(path)?).with_context(|| format!("bad plan file {}", path.display()))?;
    let r = replay(&p).map_err(|e| Failure::Check(e.into()))?;
    if r.final_tree != p.target {
        return Err(Failure::Check(anyhow!("replay ends at a tree other than the target")));
    }
    let worst = r.log.iter().map(|e| e.max_certificate_hops()).max().unwrap_or(0);
    println!("{} steps replayed, target reached, widest rewire {worst} hops", r.log.len());
    Ok(())
}

fn cmd_audit(path: &Path) -> Outcome {
    let trace = RunTrace::parse(&read(path)?).with_context(|| format!("bad event log {}", path.display()))?;
    let report = audit_trace(&trace);
    for v in &report.violations {
        println!("{v}");
    }
    println!(
        "{} messages, {} rewires, {} violations",
        report.messages,
        report.commits,
        report.violations.len()
    );
    if report.is_clean() {
        Ok(())
    } else {
        Err(Failure::Check(anyhow!("locality audit failed")))
    }
}
