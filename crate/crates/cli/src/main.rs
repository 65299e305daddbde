use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mgda_cli::{execute, CliError, ExperimentConfig, Kind, Overrides};

#[derive(Parser)]
#[command(
    name = "mgda",
    version,
    about = "Multi-objective descent and cooperative MARL experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run MGDA or MGDA++ on a synthetic problem and classify the endpoints.
    RunSynthetic(Flags),
    /// Train tabular policies on a gridworld scenario or the matrix game.
    RunMarl(Flags),
    /// Classify the endpoints of stored descent traces.
    Verify(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON experiment config.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Seed to run; repeat for several. Replaces the config's list.
    #[arg(long = "seed", value_name = "N")]
    seeds: Vec<u64>,
    /// Output root.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Algorithm name: mgda, mgda_pp, independent, mgpo or mgpo_pp.
    #[arg(long = "algo", value_name = "NAME")]
    algo: Option<String>,
    /// MGDA++ / MGPO++ gradient filter threshold.
    #[arg(long, value_name = "X")]
    epsilon: Option<f64>,
}

fn run(kind: Kind, flags: Flags) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(&flags.config)?;
    if config.kind != kind {
        return Err(CliError::Config(format!(
            "config describes a `{}` experiment; use `mgda {}`",
            serde_json::to_value(config.kind)
                .unwrap_or_default()
                .as_str()
                .unwrap_or("?"),
            config.kind.command()
        )));
    }
    config.apply(&Overrides {
        seeds: flags.seeds,
        out: flags.out,
        algorithm: flags.algo,
        epsilon: flags.epsilon,
    });
    let plan = config.plan()?;
    let report = execute(&plan)?;
    for line in &report.lines {
        println!("{line}");
    }
    println!("wrote {}", report.path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = match cli.command {
        Command::RunSynthetic(f) => (Kind::Synthetic, f),
        Command::RunMarl(f) => (Kind::Marl, f),
        Command::Verify(f) => (Kind::Verify, f),
    };
    match run(kind, flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.exit_code() == 2 {
                eprintln!("usage: mgda <run-synthetic|run-marl|verify> --config PATH [--seed N]... [--out DIR] [--algo NAME] [--epsilon X]");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
