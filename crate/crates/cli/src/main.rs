//! `analyze`: batch CLI for the two-asset factor analysis pipeline.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error,
//! 3 numeric error.

mod fixtures;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tandem_core::pipeline::{self, ExperimentConfig, OutputFormat};
use tandem_core::{Error, ErrorClass, Result};

#[derive(Parser)]
#[command(
    name = "analyze",
    about = "Feature engineering, PCA/CCA analysis and OLS forecasting over two assets' OHLCV history"
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Experiment configuration (JSON)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override the configured output directory
    #[arg(long)]
    output: Option<PathBuf>,

    /// Comma-separated output formats: json,md,csv
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Bundled dataset utilities
    Fixtures {
        #[command(subcommand)]
        action: FixturesCmd,
    },
}

#[derive(Subcommand)]
enum FixturesCmd {
    /// Recompute dataset hashes and compare against the manifest
    Verify {
        /// Directory holding the dataset and manifest.json
        #[arg(long, default_value = "fixtures")]
        dir: PathBuf,
    },
    /// Regenerate the bundled synthetic dataset in place
    Generate {
        #[arg(long, default_value = "fixtures")]
        dir: PathBuf,
    },
}

fn parse_formats(s: &str) -> Result<Vec<OutputFormat>> {
    let mut formats = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let f: OutputFormat = part.parse()?;
        if !formats.contains(&f) {
            formats.push(f);
        }
    }
    if formats.is_empty() {
        return Err(Error::Config("no output formats selected".into()));
    }
    Ok(formats)
}

fn run_analysis(cli: &Cli) -> Result<()> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(out) = &cli.output {
        cfg.output_dir = out.clone();
    }
    if let Some(fmt) = &cli.format {
        cfg.formats = parse_formats(fmt)?;
    }
    cfg.validate()?;

    let report = pipeline::run_experiment(&cfg)?;
    let written = pipeline::emit_report(&report, &cfg)?;

    println!(
        "analyzed {} in-sample rows, {} out-of-sample rows",
        report.provenance.n_in_sample, report.provenance.n_out_sample
    );
    println!("model            in-sample RMSE   out-of-sample RMSE");
    for m in &report.models {
        let oos = report
            .out_of_sample
            .metrics
            .iter()
            .find(|o| o.name == m.name)
            .map(|o| o.metrics.rmse);
        println!(
            "{:<16} {:>14.5} {:>20.5}",
            m.name,
            m.in_sample.rmse,
            oos.unwrap_or(f64::NAN)
        );
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        None => run_analysis(cli),
        Some(Command::Fixtures { action }) => match action {
            FixturesCmd::Verify { dir } => {
                let results = fixtures::verify(dir)?;
                let mut all_ok = true;
                for (path, ok) in &results {
                    println!("{} {}", if *ok { "OK  " } else { "FAIL" }, path);
                    all_ok &= ok;
                }
                if all_ok {
                    Ok(())
                } else {
                    Err(Error::InsufficientData(
                        "fixture hashes do not match the manifest".into(),
                    ))
                }
            }
            FixturesCmd::Generate { dir } => {
                for path in fixtures::generate(dir)? {
                    println!("wrote {}", path.display());
                }
                Ok(())
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e.class() {
                ErrorClass::Config => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numeric => 3,
            };
            ExitCode::from(code)
        }
    }
}
