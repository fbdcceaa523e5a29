use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpbo::MigMode;
use gpbo_cli::commands::{self, CommandError};
use gpbo_cli::config::{parse_config, ExperimentConfig};

/// GP Bayesian-optimization experiments and bound verifiers.
#[derive(Parser)]
#[command(name = "gpbo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a flat key = value config file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write CSV/JSON artifacts.
    Run(CommonArgs),
    /// Run the lemma/bound verifier suite; exit 1 if any check fails.
    Verify(CommonArgs),
    /// Compute the maximum information gain for the configured domain.
    Mig {
        #[command(flatten)]
        common: CommonArgs,
        /// Subset size T (default: min(horizon, |X|)).
        #[arg(long)]
        steps: Option<usize>,
        /// greedy (certified sandwich) or exact (enumeration).
        #[arg(long, default_value = "greedy")]
        mode: String,
    },
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, CommandError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CommandError::Io {
        path: args.config.clone(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode, CommandError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load_config(&args)?;
            let artifacts = commands::run_experiment(&cfg, args.jobs)?;
            println!(
                "wrote {} artifacts to {}",
                artifacts.len(),
                cfg.out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            let cfg = load_config(&args)?;
            let reports = commands::run_verifiers(&cfg, args.jobs)?;
            let failures = commands::report_failures(&mut std::io::stdout().lock(), &reports)
                .map_err(|source| CommandError::Io {
                    path: "<stdout>".into(),
                    source,
                })?;
            let path = commands::write_verify_report(&reports, &cfg.out_dir)?;
            println!("report written to {}", path.display());
            if failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("failed checks: {}", failures.join(", "));
                Ok(ExitCode::from(1))
            }
        }
        Command::Mig {
            common,
            steps,
            mode,
        } => {
            let cfg = load_config(&common)?;
            let mode = match mode.as_str() {
                "greedy" => MigMode::Greedy,
                "exact" => MigMode::Exact,
                other => {
                    eprintln!("unknown mode `{other}` (expected greedy or exact)");
                    return Ok(ExitCode::from(2));
                }
            };
            let value = commands::mig_report(&cfg, steps, mode)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&value).expect("serializable")
            );
            if common.out.is_some() {
                std::fs::create_dir_all(&cfg.out_dir).map_err(|source| CommandError::Io {
                    path: cfg.out_dir.clone(),
                    source,
                })?;
                let path = cfg.out_dir.join("mig.json");
                let mut text = serde_json::to_string_pretty(&value).expect("serializable");
                text.push('\n');
                std::fs::write(&path, text).map_err(|source| CommandError::Io { path, source })?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
