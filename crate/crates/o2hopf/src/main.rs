use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use o2hopf::cli::{self, Command, RunConfig, ENV_OUT, ENV_THREADS};
use o2hopf::Error;

#[derive(Parser)]
#[command(name = "o2hopf", version, about = "Transverse O(2) Hopf bifurcation of planar fronts in a periodic channel")]
struct Args {
    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand)]
enum Action {
    /// Run one pipeline stage.
    Run {
        #[arg(value_enum)]
        command: Command,
        /// TOML run configuration; the built-in M0 configuration if omitted.
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Output directory (overrides the config and O2HOPF_OUT).
        #[arg(short, long)]
        out: Option<String>,
        /// Worker threads (overrides the config and O2HOPF_THREADS).
        #[arg(short, long)]
        threads: Option<usize>,
    },
    /// Print a default configuration.
    DefaultConfig {
        #[arg(long, default_value = "m0")]
        model: String,
    },
}

fn env_threads() -> Result<Option<usize>, Error> {
    match std::env::var(ENV_THREADS) {
        Ok(v) => v.parse().map(Some).map_err(|_| Error::InvalidInput(format!("{ENV_THREADS}={v} is not a count"))),
        Err(_) => Ok(None),
    }
}

fn execute(command: Command, config: Option<PathBuf>, out: Option<String>, threads: Option<usize>) -> Result<cli::Manifest, Error> {
    let mut cfg = match config {
        Some(p) => cli::load_config(&p)?,
        None => RunConfig::default(),
    };
    if let Ok(dir) = std::env::var(ENV_OUT) {
        cfg.output_dir = dir;
    }
    if let Some(t) = env_threads()? {
        cfg.threads = t;
    }
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
    cli::run(command, &cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.action {
        Action::DefaultConfig { model } => {
            let cfg = match model.as_str() {
                "m0" => RunConfig::m0(),
                "m1" => RunConfig::m1(),
                other => {
                    let e = Error::InvalidInput(format!("unknown model {other}"));
                    eprintln!("{}", cli::error_json(None, &e));
                    return ExitCode::from(e.exit_code() as u8);
                }
            };
            match cfg.to_toml() {
                Ok(t) => {
                    print!("{t}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{}", cli::error_json(None, &e));
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Action::Run { command, config, out, threads } => match execute(command, config, out, threads) {
            Ok(m) => {
                println!("{}", serde_json::to_string(&m.summary).unwrap_or_default());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{}", cli::error_json(Some(command), &e));
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
