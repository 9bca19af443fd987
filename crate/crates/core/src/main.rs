use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mast::benchmarks::catalog;
use mast::harness::{report, run_experiment, run_sweep, ExperimentConfig, ExperimentOutcome, SweepKind, SweepSpec};
use mast::Error;

#[derive(Parser)]
#[command(name = "mast", version, about = "Multi-fidelity surrogate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment block from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one experiment block per grid value.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// allocation, budget or discrepancy
        #[arg(long)]
        kind: String,
        /// Comma-separated grid values, e.g. 0.1,0.5,0.9
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
    },
    /// Aggregate the record files in a directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Print the benchmark catalog.
    ListProblems,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn print_block(o: &ExperimentOutcome) -> usize {
    let failures = o.failures();
    println!(
        "{}: {} records ({} failed) -> {}",
        o.metadata.block,
        o.records.len(),
        failures,
        o.path.display()
    );
    failures
}

fn finish(failures: usize) -> ExitCode {
    if failures > 0 {
        eprintln!("{failures} method runs failed; see the status column");
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let outcome = match ExperimentConfig::load(&config).and_then(|c| run_experiment(&c)) {
                Ok(o) => o,
                Err(e) => return fail(e),
            };
            finish(print_block(&outcome))
        }
        Command::Sweep { config, kind, grid } => {
            let Some(kind) = SweepKind::parse(&kind) else {
                return fail(Error::Configuration(format!(
                    "unknown sweep kind {kind:?}; expected allocation, budget or discrepancy"
                )));
            };
            let result = ExperimentConfig::load(&config).and_then(|cfg| {
                let spec = SweepSpec::new(kind, SweepSpec::parse_grid(&grid)?)?;
                run_sweep(&cfg, &spec)
            });
            match result {
                Ok(blocks) => finish(blocks.iter().map(|(_, o)| print_block(o)).sum()),
                Err(e) => fail(e),
            }
        }
        Command::Report { dir } => match report(&dir) {
            Ok(r) => {
                println!(
                    "{:<24} {:<8} {:>5} {:>12} {:>12} {:>10} {:>10}",
                    "block", "method", "ok", "rmse", "mean_pdf", "norm_rmse", "norm_pdf"
                );
                let show = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
                for row in &r.rows {
                    println!(
                        "{:<24} {:<8} {:>5} {:>12} {:>12} {:>10} {:>10}",
                        row.block,
                        row.method.as_str(),
                        row.n_ok,
                        show(row.rmse.map(|d| d.mean)),
                        show(row.mean_pdf.map(|d| d.mean)),
                        show(row.normalized_rmse),
                        show(row.normalized_mean_pdf),
                    );
                }
                for w in &r.warnings {
                    eprintln!("warning: {w}");
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::ListProblems => {
            for p in catalog() {
                println!(
                    "{:<10} D={:<3} {}",
                    p.name(),
                    p.dimension(),
                    p.discrepancy_kind().as_str()
                );
            }
            ExitCode::SUCCESS
        }
    }
}
