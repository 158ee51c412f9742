use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qlab_core::experiment::{run, ExperimentConfig, ExperimentKind, RunOptions};
use qlab_core::parallel::set_threads;

#[derive(Parser)]
#[command(name = "qlab", version, about = "Numerical experiments for Q-valued minimizers and their cones")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frequency at the corner of a quarter ball.
    QuarterFrequency(Common),
    /// Forced sheet collisions under square-root boundary data on a cylinder.
    CylinderSingularity(Common),
    /// Strong excess of a perturbed cornered open book across scales.
    ExcessDecay(Common),
    /// Census of boundary configurations, books and decompositions.
    ConeCensus(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the data-parallel kernels.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Replace the solver output by exact samples of the known solution.
    #[arg(long)]
    oracle_mode: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (kind, common) = match cli.command {
        Command::QuarterFrequency(c) => (ExperimentKind::QuarterFrequency, c),
        Command::CylinderSingularity(c) => (ExperimentKind::CylinderSingularity, c),
        Command::ExcessDecay(c) => (ExperimentKind::ExcessDecay, c),
        Command::ConeCensus(c) => (ExperimentKind::ConeCensus, c),
    };
    let cfg = match ExperimentConfig::load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qlab: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let Some(out) = common.out.or_else(|| cfg.out.clone()) else {
        eprintln!("qlab: no output directory; pass --out or set `out` in the config");
        return ExitCode::from(2);
    };
    let threads = common.threads.map(|t| t as usize);
    if let Some(t) = threads {
        if !set_threads(t) {
            eprintln!("qlab: warning: --threads {t} ignored in this build");
        }
    }
    let opts = RunOptions { out, oracle_mode: common.oracle_mode, threads };
    match run(kind, &cfg, &opts) {
        Ok(summary) => {
            for (name, ok) in &summary.checks {
                println!("{name} {}", if *ok { "PASS" } else { "FAIL" });
            }
            println!("{} {}", kind.as_str(), summary.status.as_str());
            ExitCode::from(summary.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("qlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
