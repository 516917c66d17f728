use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use htq_cli::commands::{self, Command, Run};
use htq_cli::config::{ExperimentConfig, PlotConfig};
use htq_cli::{parse_config, CliError, Result};

#[derive(Parser)]
#[command(name = "htq", version, about = "Horizontal traffic queue lab")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); a manifest from an earlier run also works.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replications.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the queue: trace CSV and summary.
    Simulate,
    /// Busy period distribution under a constant service rate.
    BusyDist,
    /// Throughput bounds.
    Bounds,
    /// Batch release policy on the tandem queues.
    Tandem,
    /// Finite-horizon throughput estimate by simulation.
    Throughput,
    /// Invariant and oracle suite.
    Validate,
    /// Plot CSV columns to SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct PlotArgs {
    /// CSV files; without them the `plot` block of the config is used.
    files: Vec<PathBuf>,
    #[arg(long, default_value = "m")]
    x: String,
    #[arg(long, default_value = "lambda_lower")]
    y: String,
    #[arg(long)]
    group_by: Option<String>,
    #[arg(long)]
    log_y: bool,
    /// One SVG with every file as a series.
    #[arg(long)]
    overlay: bool,
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            parse_config(&text)
        }
        None => Ok(ExperimentConfig::empty()),
    }
}

fn main_inner(cli: Cli) -> Result<commands::Report> {
    let mut cfg = load(&cli.common)?;
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.common.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        cfg.jobs = Some(jobs);
    }
    cfg.manifest = None;
    let command = match cli.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::BusyDist => Command::BusyDist,
        Cmd::Bounds => Command::Bounds,
        Cmd::Tandem => Command::Tandem,
        Cmd::Throughput => Command::Throughput,
        Cmd::Validate => Command::Validate,
        Cmd::Plot(args) => {
            if !args.files.is_empty() {
                cfg.plot = Some(PlotConfig {
                    plots: commands::plot_specs_for(
                        &args.files,
                        &args.x,
                        &args.y,
                        args.group_by.as_deref(),
                        args.log_y,
                        args.overlay,
                    ),
                });
            }
            Command::Plot
        }
    };
    let out = cli
        .common
        .out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let run = Run { cfg, out };
    pool.install(|| commands::execute(command, &run))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            if let Some(msg) = report.invariant_failure {
                eprintln!("error: invariant failure: {msg}");
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
