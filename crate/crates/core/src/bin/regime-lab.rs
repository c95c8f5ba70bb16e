use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use regime_lab::data::sample_orders;
use regime_lab::runner::{emit_reports, parse_config, run_matrix, tau_matrix_csv, CellStatus, RunOptions};
use regime_lab::verifier::{fuzz_descent_with, StepSizeMode};
use regime_lab::Error;

#[derive(Parser)]
#[command(name = "regime-lab", version, about = "Continual-learning runs across trainable-depth regimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) the experiment matrix, then write reports.
    Run {
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Stop after this many cells; rerun to resume.
        #[arg(long)]
        max_cells: Option<usize>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Write summary, tau and gradient/forgetting reports from stored results.
    Analyze { results_dir: PathBuf },
    /// Print the regime agreement matrix recomputed from stored results.
    Tau { results_dir: PathBuf },
    /// Fuzz the projected-descent bound on random quadratics.
    BoundCheck {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        dim_max: usize,
        /// Use eta = 1/L instead of eta drawn from (0, 1/L].
        #[arg(long)]
        boundary: bool,
        /// Write one CSV row per trial.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the task orders for (tasks, random orders, seed), one per line.
    Orders {
        #[arg(long)]
        tasks: usize,
        #[arg(long)]
        random: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

fn read_config(path: &PathBuf) -> Result<regime_lab::runner::ExperimentConfig, Error> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run {
            config,
            jobs,
            max_cells,
            output_dir,
        } => {
            let cfg = read_config(&config)?;
            let started = Instant::now();
            let out = run_matrix(&cfg, &RunOptions { jobs, max_cells, output_dir })?;
            let m = &out.manifest;
            println!(
                "cells: {} done, {} failed, {} pending ({} run, {} resumed) in {:.1}s",
                m.count(CellStatus::Done),
                m.count(CellStatus::Failed),
                m.count(CellStatus::Pending),
                out.executed,
                out.skipped,
                started.elapsed().as_secs_f64()
            );
            let report = emit_reports(&out.output_dir)?;
            println!("reports: {}", out.output_dir.display());
            for p in &report.problems {
                eprintln!("missing: {p}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { results_dir } => {
            let report = emit_reports(&results_dir)?;
            for f in &report.files {
                println!("{}", f.display());
            }
            for p in &report.problems {
                eprintln!("missing: {p}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Tau { results_dir } => {
            print!("{}", tau_matrix_csv(&results_dir)?.0);
            Ok(ExitCode::SUCCESS)
        }
        Command::BoundCheck {
            trials,
            seed,
            dim_max,
            boundary,
            csv,
        } => {
            let mode = if boundary { StepSizeMode::Boundary } else { StepSizeMode::Uniform };
            let summary = fuzz_descent_with(trials, dim_max, seed, mode)?;
            if let Some(path) = csv {
                std::fs::write(path, summary.to_csv())?;
            }
            println!(
                "trials: {} violations: {} sharp_violations: {} max_excess: {:e}",
                summary.trials, summary.violations, summary.sharp_violations, summary.max_excess
            );
            println!("violations: {}", summary.violations);
            Ok(if summary.violations == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Orders { tasks, random, seed } => {
            if tasks == 0 {
                return Err(Error::OutOfRange {
                    field: "tasks".into(),
                    detail: "must be positive".into(),
                });
            }
            let mut out = std::io::stdout().lock();
            for order in sample_orders(tasks, random, seed) {
                let line: Vec<String> = order.tasks.iter().map(usize::to_string).collect();
                if writeln!(out, "{}", line.join(" ")).is_err() {
                    break;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let cfg = read_config(&config)?;
            println!(
                "ok: {} regimes x {} methods x {} orders",
                cfg.regimes.len(),
                cfg.methods.len(),
                cfg.n_random_orders + 1
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            let mut line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            if let Error::Config(errors) = &e {
                line["errors"] = serde_json::json!(errors);
            }
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
