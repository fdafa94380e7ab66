use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rawpriv_cli::{
    resolve_output_dir, run_experiment, validate, write_artifacts, CliError, ExperimentConfig,
    OUT_ENV,
};

#[derive(Parser)]
#[command(
    name = "rawpriv",
    version,
    about = "Location-privacy experiments for shared raw sensor data"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Dotted-path override, e.g. `schedule.stack.open_period=0.4`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check every constraint without running.
    Validate { config: PathBuf },
}

fn run(
    config: PathBuf,
    set: Vec<String>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&config, &set)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if jobs.is_some() {
        cfg.jobs = jobs;
    }
    let env = std::env::var(OUT_ENV).ok();
    let dir = resolve_output_dir(out.as_deref(), &cfg, env.as_deref());
    let art = run_experiment(&cfg)?;
    for p in write_artifacts(&dir, &art)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run {
            config,
            set,
            out,
            seed,
            jobs,
        } => run(config, set, out, seed, jobs),
        Cmd::Validate { config } => match validate(&config) {
            Ok(report) => {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("serializable")
                );
                return if report.valid {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                };
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
