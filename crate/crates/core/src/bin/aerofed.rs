use std::path::PathBuf;
use std::process::ExitCode;

use aerofed::config::{load_config, RunConfig};
use aerofed::experiment::run_experiment;
use aerofed::scheduler::Algo;
use aerofed::Error;
use clap::Parser;

/// Run one UAV/HAPS federated anomaly-detection experiment.
#[derive(Debug, Parser)]
#[command(name = "aerofed", version)]
struct Cli {
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ca2c_afl, dqn_afl, ddpg_fl, standalone or random.
    #[arg(long)]
    algo: Option<Algo>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trace file (plain or gzip) or `synthetic`.
    #[arg(long)]
    dataset: Option<String>,
}

fn resolve(cli: Cli) -> aerofed::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(a) = cli.algo {
        cfg.run.algo = a;
    }
    if let Some(s) = cli.seed {
        cfg.run.seed = Some(s);
    }
    if let Some(e) = cli.episodes {
        cfg.run.episodes = e;
    }
    if let Some(o) = cli.out {
        cfg.run.output_dir = o;
    }
    if let Some(d) = cli.dataset {
        cfg.run.dataset = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DatasetMissing(_) => 2,
        Error::NonFinite(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = resolve(cli).and_then(|cfg| run_experiment(&cfg).map(|o| (cfg, o)));
    match outcome {
        Ok((cfg, o)) => {
            if o.skipped_lines > 0 {
                eprintln!("skipped {} malformed trace lines", o.skipped_lines);
            }
            println!(
                "{} seed={} episodes={} precision={:.4} recall={:.4} f1={:.4} -> {}",
                cfg.run.algo,
                o.seed,
                o.episodes.len(),
                o.detection.precision,
                o.detection.recall,
                o.detection.f1,
                cfg.run.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
