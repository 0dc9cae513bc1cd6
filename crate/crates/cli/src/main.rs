use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use busshare_cli::fixture::{write_fixture, FixtureOptions};
use busshare_cli::{Pipeline, PipelineConfig, Stage, StageReport};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "busshare", version, about = "Taxi/bus trip shareability pipeline")]
struct Cli {
    /// Pipeline config (flat TOML; BUSSHARE_<KEY> variables override keys).
    #[arg(long, global = true, env = "BUSSHARE_CONFIG", default_value = "busshare.toml")]
    config: PathBuf,

    /// Overrides `rng_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Rerun stages even when their inputs are unchanged.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load, clean, cluster and reduce the road network.
    NetworkPrepare,
    /// Map-match taxi GPS traces onto the network.
    MapMatch,
    /// Generate one day of bus trips from aggregate demand.
    BusSynth,
    /// Enumerate candidates and solve the assignment for every sweep cell.
    Match,
    /// Hourly statistics CSV and SVG charts.
    Report,
    /// All stages in order.
    RunAll,
    /// Write the synthetic desk-scale fixture and its config.
    MakeFixture {
        /// Target directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_report(r: &StageReport) {
    for line in &r.summary {
        println!("[{}] {line}", r.stage);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads {n}: {e}");
            return ExitCode::from(2);
        }
    }

    if let Command::MakeFixture { out } = &cli.command {
        let opts = FixtureOptions { seed: cli.seed.unwrap_or(FixtureOptions::default().seed), ..Default::default() };
        return match write_fixture(out, &opts) {
            Ok(cfg) => {
                println!("[make-fixture] wrote {}", cfg.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: [make-fixture] {e:#}");
                ExitCode::FAILURE
            }
        };
    }

    let setup = PipelineConfig::load(&cli.config, std::env::vars())
        .map(|mut cfg| {
            if let Some(seed) = cli.seed {
                cfg.rng_seed = seed;
            }
            cfg
        })
        .and_then(|cfg| Pipeline::new(cfg, cli.force).context("invalid configuration"));
    let mut pipeline = match setup {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: [config] {e:#}");
            return ExitCode::from(2);
        }
    };

    let stages: Vec<Stage> = match cli.command {
        Command::NetworkPrepare => vec![Stage::NetworkPrepare],
        Command::MapMatch => vec![Stage::MapMatch],
        Command::BusSynth => vec![Stage::BusSynth],
        Command::Match => vec![Stage::Match],
        Command::Report => vec![Stage::Report],
        Command::RunAll => Stage::ALL.to_vec(),
        Command::MakeFixture { .. } => unreachable!("handled above"),
    };
    for stage in stages {
        match pipeline.run(stage) {
            Ok(r) => print_report(&r),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        }
    }
    if let Err(e) = pipeline.finish() {
        eprintln!("error: [manifest] {e:#}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
