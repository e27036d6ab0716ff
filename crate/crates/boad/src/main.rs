//! Thin command-line front end. All behavior lives in the library; this
//! binary parses flags, loads files, and prints results.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use boad::archive::{rank_arms, Archive, RankMetric};
use boad::config::{BackendKind, ProviderKind, RunConfig};
use boad::credit::CreditMetric;
use boad::error::{Error, Result};
use boad::policy::{mean_regret, run_policy, write_sim_outputs, Policy, SimRunConfig, SimRunResult};
use boad::report::write_report;
use boad::runner::{export_top_arms, make_provider, resume_run, run_optimize, RunOutcome};
use boad::simenv::{builtin_world, WorldModel};

#[derive(Parser)]
#[command(
    name = "boad",
    about = "Bandit-driven discovery of sub-agent designs for hierarchical agent systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the optimization loop and write an event log, archive snapshot,
    /// and export bundle
    Optimize(OptimizeArgs),
    /// Rank the designs in an archive snapshot
    Rank(RankArgs),
    /// Bundle the top designs from a snapshot for hand-over
    Export(ExportArgs),
    /// Compare selection policies in the simulated environment
    Simulate(SimulateArgs),
    /// Summarize a run's event log into flat tables
    Report(ReportArgs),
}

#[derive(Args)]
struct OptimizeArgs {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the run
    #[arg(long, default_value = "boad_run")]
    out: PathBuf,
    /// Resume from an existing event log instead of starting fresh
    /// (configuration comes from the log; other flags are ignored)
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Stop after this many rounds, leaving a resumable log
    #[arg(long)]
    stop_after: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Total optimization rounds
    #[arg(long)]
    budget: Option<u64>,
    /// Team size per round
    #[arg(long)]
    k: Option<usize>,
    /// Expansion concentration
    #[arg(long)]
    theta: Option<f64>,
    /// Refinement rounds for each new arm
    #[arg(long)]
    warmup_rounds: Option<u32>,
    /// Evaluation backend: simulated | llm_scaffold
    #[arg(long)]
    backend: Option<String>,
    /// Credit metric: helpfulness | success_rate
    #[arg(long)]
    credit: Option<String>,
    /// Chat provider: mock | http
    #[arg(long)]
    provider: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// World-model JSON for the simulated backend
    #[arg(long)]
    world: Option<PathBuf>,
    /// Design-set episodes evaluated per round
    #[arg(long)]
    instances_per_round: Option<usize>,
    /// Disable archive expansion (fixed bootstrap arms only)
    #[arg(long)]
    no_expansion: bool,
    /// Use the fixed generic orchestrator plan instead of a customized one
    #[arg(long)]
    generic_orchestrator: bool,
}

#[derive(Args)]
struct RankArgs {
    /// Archive snapshot JSON
    #[arg(long)]
    snapshot: PathBuf,
    /// Ranking metric: helpfulness_mean | success_rate_mean
    #[arg(long, default_value = "helpfulness_mean")]
    metric: String,
    #[arg(long, default_value_t = 5)]
    k: usize,
}

#[derive(Args)]
struct ExportArgs {
    /// Archive snapshot JSON
    #[arg(long)]
    snapshot: PathBuf,
    /// Where to write the bundle
    #[arg(long, default_value = "export.json")]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Ranking metric: helpfulness_mean | success_rate_mean
    #[arg(long, default_value = "helpfulness_mean")]
    metric: String,
    /// Chat provider for plan generation: mock | http
    #[arg(long, default_value = "mock")]
    provider: String,
    #[arg(long, default_value = "boad-mock")]
    model: String,
    /// Ship the generic plan instead of generating a customized one
    #[arg(long)]
    generic_plan: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// World-model JSON (defaults to the built-in calibration world)
    #[arg(long)]
    world: Option<PathBuf>,
    /// Policy to run: ucb | random | greedy | evolution (repeatable)
    #[arg(long = "policy", default_values_t = vec!["ucb".to_owned()])]
    policies: Vec<String>,
    #[arg(long, default_value_t = 20)]
    rounds: u64,
    /// Number of seeds per policy, starting at --seed
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 2.0)]
    theta: f64,
    #[arg(long, default_value_t = 12)]
    instances: usize,
    #[arg(long, default_value_t = 3)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.25)]
    mutation_scale: f64,
    #[arg(long)]
    no_expansion: bool,
    /// Output directory for the result tables
    #[arg(long, default_value = "sim_out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Event log of the run to summarize
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value = "boad_report")]
    out: PathBuf,
}

fn parse_backend(s: &str) -> Result<BackendKind> {
    match s {
        "simulated" => Ok(BackendKind::Simulated),
        "llm_scaffold" | "scaffold" => Ok(BackendKind::LlmScaffold),
        other => Err(Error::invalid(format!(
            "unknown backend {other:?} (expected simulated or llm_scaffold)"
        ))),
    }
}

fn parse_credit(s: &str) -> Result<CreditMetric> {
    match s {
        "helpfulness" => Ok(CreditMetric::Helpfulness),
        "success_rate" => Ok(CreditMetric::SuccessRate),
        other => Err(Error::invalid(format!(
            "unknown credit metric {other:?} (expected helpfulness or success_rate)"
        ))),
    }
}

fn parse_provider(s: &str) -> Result<ProviderKind> {
    match s {
        "mock" => Ok(ProviderKind::Mock),
        "http" => Ok(ProviderKind::Http),
        other => Err(Error::invalid(format!(
            "unknown provider {other:?} (expected mock or http)"
        ))),
    }
}

fn parse_metric(s: &str) -> Result<RankMetric> {
    match s {
        "helpfulness_mean" | "helpfulness" => Ok(RankMetric::HelpfulnessMean),
        "success_rate_mean" | "success_rate" => Ok(RankMetric::SuccessRateMean),
        other => Err(Error::invalid(format!(
            "unknown metric {other:?} (expected helpfulness_mean or success_rate_mean)"
        ))),
    }
}

fn export_metric(credit: CreditMetric) -> RankMetric {
    match credit {
        CreditMetric::Helpfulness => RankMetric::HelpfulnessMean,
        CreditMetric::SuccessRate => RankMetric::SuccessRateMean,
    }
}

fn load_snapshot(path: &Path) -> Result<Archive> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read snapshot {}: {e}", path.display())))?;
    Archive::restore(&text)
}

fn sim_world(path: Option<&Path>) -> Result<WorldModel> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::invalid(format!("cannot read world {}: {e}", p.display())))?;
            WorldModel::from_json(&text)
        }
        None => builtin_world("acceptance"),
    }
}

fn cmd_optimize(args: OptimizeArgs) -> Result<()> {
    let outcome = if let Some(log) = &args.resume {
        resume_run(log, args.stop_after)?
    } else {
        let mut cfg = match &args.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = args.seed {
            cfg.seed = v;
        }
        if let Some(v) = args.budget {
            cfg.budget = v;
        }
        if let Some(v) = args.k {
            cfg.k = v;
        }
        if let Some(v) = args.theta {
            cfg.theta = v;
        }
        if let Some(v) = args.warmup_rounds {
            cfg.warmup_rounds = v;
        }
        if let Some(v) = &args.backend {
            cfg.evaluation_backend = parse_backend(v)?;
        }
        if let Some(v) = &args.credit {
            cfg.credit_metric = parse_credit(v)?;
        }
        if let Some(v) = &args.provider {
            cfg.provider = parse_provider(v)?;
        }
        if let Some(v) = &args.model {
            cfg.model = v.clone();
        }
        if let Some(v) = &args.world {
            cfg.world = Some(v.clone());
        }
        if let Some(v) = args.instances_per_round {
            cfg.instances_per_round = Some(v);
        }
        if args.no_expansion {
            cfg.expansion_enabled = false;
        }
        if args.generic_orchestrator {
            cfg.customized_orchestrator = false;
        }
        run_optimize(&cfg, &args.out, args.stop_after)?
    };

    println!("rounds completed: {}", outcome.rounds_completed);
    println!("archive size: {}", outcome.archive.len());
    println!("event log: {}", outcome.log_path.display());
    println!("snapshot: {}", outcome.snapshot_path.display());
    if outcome.rounds_completed >= 1 {
        let path = write_run_export(&outcome)?;
        println!("export: {}", path.display());
    }
    Ok(())
}

fn write_run_export(outcome: &RunOutcome) -> Result<PathBuf> {
    let cfg = &outcome.config;
    let provider = make_provider(cfg)?;
    let bundle = export_top_arms(
        &outcome.archive,
        cfg.export_top_k,
        export_metric(cfg.credit_metric),
        cfg.customized_orchestrator,
        provider.as_ref(),
        &cfg.model,
    )?;
    let path = outcome
        .log_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join("export.json");
    fs::write(&path, serde_json::to_string_pretty(&bundle)?)?;
    Ok(path)
}

fn cmd_rank(args: RankArgs) -> Result<()> {
    let archive = load_snapshot(&args.snapshot)?;
    let metric = parse_metric(&args.metric)?;
    let ranked = rank_arms(&archive, metric, args.k)?;
    if ranked.is_empty() {
        println!("no evaluated arms in the snapshot");
        return Ok(());
    }
    println!("{:<28} {:>8} {:>8} {:>14}", "arm", "mean", "n", "created_round");
    for row in &ranked {
        println!(
            "{:<28} {:>8.3} {:>8} {:>14}",
            row.arm_id.as_str(),
            row.mean,
            row.sample_count,
            row.created_round
        );
    }
    Ok(())
}

fn cmd_export(args: ExportArgs) -> Result<()> {
    let archive = load_snapshot(&args.snapshot)?;
    let metric = parse_metric(&args.metric)?;
    let cfg = RunConfig {
        provider: parse_provider(&args.provider)?,
        model: args.model.clone(),
        ..RunConfig::default()
    };
    let provider = make_provider(&cfg)?;
    let bundle = export_top_arms(
        &archive,
        args.k,
        metric,
        !args.generic_plan,
        provider.as_ref(),
        &cfg.model,
    )?;
    fs::write(&args.out, serde_json::to_string_pretty(&bundle)?)?;
    println!(
        "exported {} designs to {}",
        bundle.arms.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let world = sim_world(args.world.as_deref())?;
    let mut results: Vec<SimRunResult> = Vec::new();
    for name in &args.policies {
        let policy: Policy = name.parse()?;
        for s in 0..args.seeds {
            let cfg = SimRunConfig {
                policy,
                rounds: args.rounds,
                k: args.k,
                instances_per_round: args.instances,
                theta: args.theta,
                expansion: !args.no_expansion,
                bootstrap: args.bootstrap,
                mutation_scale: args.mutation_scale,
                seed: args.seed + s,
            };
            results.push(run_policy(&world, &cfg)?);
        }
    }
    write_sim_outputs(&args.out, &results)?;
    println!(
        "{:<10} {:>6} {:>14} {:>12} {:>12}",
        "policy", "seed", "export_value", "regret_early", "regret_late"
    );
    for r in &results {
        let half = args.rounds / 2;
        println!(
            "{:<10} {:>6} {:>14.4} {:>12.4} {:>12.4}",
            r.policy.to_string(),
            r.seed,
            r.exported_value,
            mean_regret(&r.rounds, 1, half.max(1)),
            mean_regret(&r.rounds, half + 1, args.rounds),
        );
    }
    println!("tables in {}", args.out.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let report = write_report(&args.log, &args.out)?;
    for file in &report.files {
        println!("wrote {}", file.display());
    }
    let summary = args.out.join("summary.txt");
    print!("{}", fs::read_to_string(summary)?);
    Ok(())
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Optimize(args) => cmd_optimize(args),
        Cmd::Rank(args) => cmd_rank(args),
        Cmd::Export(args) => cmd_export(args),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Report(args) => cmd_report(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
