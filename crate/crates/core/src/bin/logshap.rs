use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use logshap::features::FeatureId;
use logshap::pipeline::{self, RunConfig};

#[derive(Parser)]
#[command(name = "logshap", version, about = "Meta-feature attribution study runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the configuration count and ids.
    Enumerate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma separated feature ids (overrides the config).
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<FeatureId>>,
        #[arg(long)]
        values: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        /// Print only the count.
        #[arg(long)]
        count_only: bool,
    },
    /// Start or continue a study.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Continue the study stored in a directory.
    Resume {
        #[arg(long)]
        out: PathBuf,
        /// Must match the stored snapshot.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Rebuild report files from stored results.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute games and Shapley values only.
    Shapley {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: Option<&PathBuf>) -> logshap::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn main_inner(cli: Cli) -> logshap::Result<()> {
    match cli.command {
        Command::Enumerate {
            config,
            features,
            values,
            k_max,
            count_only,
        } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(f) = features {
                cfg.k_max = cfg.k_max.min(f.len());
                cfg.features = f;
            }
            if let Some(v) = values {
                cfg.values_per_feature = v;
            }
            if let Some(k) = k_max {
                cfg.k_max = k;
            }
            cfg.validate()?;
            let n = pipeline::configuration_count(cfg.features.len(), cfg.values_per_feature, cfg.k_max);
            let mut so = std::io::stdout().lock();
            writeln!(so, "{n}")?;
            if !count_only {
                for c in pipeline::enumerate_configurations(&cfg) {
                    // a closed pipe (e.g. `| head`) just ends the listing
                    if writeln!(so, "{}", c.id).is_err() {
                        break;
                    }
                }
            }
        }
        Command::Run {
            config,
            out,
            parallelism,
        } => {
            let mut cfg = load(config.as_ref())?;
            if parallelism.is_some() {
                cfg.parallelism = parallelism;
            }
            pipeline::ensure_writable(&out)?;
            let st = pipeline::run(&cfg, &out)?;
            println!("{}/{} configurations complete", st.completed, st.configurations);
        }
        Command::Resume { out, config } => {
            let supplied = config.as_deref().map(RunConfig::load).transpose()?;
            let st = pipeline::resume(&out, supplied.as_ref())?;
            println!(
                "{} processed now, {}/{} configurations complete",
                st.processed_now, st.completed, st.configurations
            );
        }
        Command::Report { out } => {
            pipeline::report(&out)?;
            print!("{}", std::fs::read_to_string(out.join("summary.txt"))?);
        }
        Command::Shapley { out } => {
            let rows = pipeline::shapley_stage(&out)?;
            println!("{} shapley rows", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
