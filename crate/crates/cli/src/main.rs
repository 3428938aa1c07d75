use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use perspective_cea::config::load_model_spec;
use perspective_cea::pipeline::{
    init_project, run_pipeline_with, OutputFormat, PerspectiveSelection, RunOptions, SpecOverrides,
};

/// Multi-perspective cost-effectiveness analysis.
#[derive(Debug, Parser)]
#[command(name = "pcea", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create a project skeleton with a reference config and a demo model.
    Init {
        /// Directory to create; must be absent or empty.
        dir: PathBuf,
    },
    /// Run the full analysis pipeline.
    Run {
        #[arg(long, default_value = "config.yaml")]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        output_dir: PathBuf,
        /// Number of PSA iterations.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        iterations: Option<u64>,
        /// Master random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Willingness to pay per QALY.
        #[arg(long, value_parser = non_negative)]
        wtp: Option<f64>,
        /// Inequality aversion for the equity weights.
        #[arg(long, value_parser = non_negative)]
        epsilon: Option<f64>,
        /// hs, societal or both.
        #[arg(long, default_value = "both")]
        perspective: PerspectiveSelection,
        /// json, csv or all.
        #[arg(long, default_value = "all")]
        format: OutputFormat,
    },
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("`{s}` must be a finite value >= 0"))
    }
}

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Init { dir } => match init_project(&dir) {
            Ok(files) => {
                for f in files {
                    println!("created {}", dir.join(f).display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_FAILURE)
            }
        },
        Command::Run {
            config,
            output_dir,
            iterations,
            seed,
            wtp,
            epsilon,
            perspective,
            format,
        } => {
            let mut spec = match load_model_spec(&config) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_FAILURE);
                }
            };
            let overrides = SpecOverrides {
                iterations: iterations.map(|n| n as usize),
                seed,
                wtp,
                epsilon,
            };
            if let Err(e) = overrides.apply(&mut spec) {
                eprintln!("error: invalid override: {e}");
                eprintln!("\nFor more information, try 'pcea run --help'.");
                return ExitCode::from(EXIT_USAGE);
            }
            let options = RunOptions {
                perspectives: perspective,
                format,
            };
            match run_pipeline_with(&spec, &output_dir, &options) {
                Ok(bundle) => {
                    for p in &bundle.deterministic.perspectives {
                        println!(
                            "{}: {} ({})",
                            p.perspective.label(),
                            p.decision.verdict(),
                            p.decision.chosen_strategy
                        );
                    }
                    println!(
                        "value of perspective: {:.2} per person (expected {:.2})",
                        bundle.deterministic.deterministic_vop, bundle.voi.vop.evop
                    );
                    println!("results written to {}", output_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAILURE)
                }
            }
        }
    }
}
