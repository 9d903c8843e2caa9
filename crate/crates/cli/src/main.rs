use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tfscreen::pipeline::{self, parse_steps, PipelineConfig, RunOptions, Step};
use tfscreen::sim::{simulate_screen, SimConfig};

#[derive(Parser)]
#[command(name = "tfscreen", version, about = "Analysis of pooled single-cell TF overexpression screens")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "TFSCREEN_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run pipeline steps in dependency order, skipping completed ones.
    Run(RunArgs),
    /// Write a synthetic screen, its truth tables and a ready-to-run config.
    Simulate(SimulateArgs),
    /// Rebuild report.md from whatever step outputs exist.
    Report(ConfigArg),
}

#[derive(Args)]
struct ConfigArg {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Comma-separated steps, e.g. `qc,merge` (default: all).
    #[arg(long)]
    steps: Option<String>,
    /// Re-run the selected steps even when up to date.
    #[arg(long)]
    force: bool,
    /// Overrides the GSEA permutation seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation parameters (TOML); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config(path: &Path) -> Result<PipelineConfig> {
    PipelineConfig::from_file(path).with_context(|| format!("loading {}", path.display()))
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(&args.config.config)?;
    if let Some(seed) = args.seed {
        cfg.gsea_seed = seed;
    }
    let steps = args.steps.as_deref().map(parse_steps).transpose()?;
    let summary = pipeline::run(&cfg, &RunOptions { steps, force: args.force })?;
    let executed = summary.executed().len();
    println!(
        "{} step(s) executed, {} skipped; outputs in {}",
        executed,
        summary.skipped().len(),
        cfg.out_dir().display()
    );
    Ok(())
}

fn report(args: ConfigArg) -> Result<()> {
    let cfg = load_config(&args.config)?;
    pipeline::run(
        &cfg,
        &RunOptions {
            steps: Some(vec![Step::Report]),
            force: false,
        },
    )?;
    println!("{}", cfg.out_dir().join(Step::Report.dir()).join("report.md").display());
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SimConfig::from_toml(&text).with_context(|| format!("loading {}", path.display()))?
        }
        None => SimConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let screen = simulate_screen(&cfg)?;
    screen.write_dataset(&args.out)?;
    println!(
        "simulated {} cells x {} genes ({} TFs, {} artifact genes, seed {}) into {}",
        screen.counts.n_cells(),
        screen.counts.n_genes(),
        cfg.n_tfs,
        cfg.n_artifact_genes,
        cfg.seed,
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "[{}] {}", record.level(), record.args()))
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Simulate(a) => simulate(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
