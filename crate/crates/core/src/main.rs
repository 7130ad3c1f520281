use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fva_core::cli::{load_config, run_scenario, CliError, RunOptions};
use fva_core::Execution;

/// Value adjustments under investor-chosen pricing measures.
#[derive(Debug, Parser)]
#[command(name = "fva", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve every sweep point of a scenario and write CSV reports.
    Run {
        config: PathBuf,
        /// Also run the Monte Carlo oracle.
        #[arg(long)]
        mc: bool,
        /// Output directory; overrides `output.dir` (default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Solver panels per year; overrides `numerics.panels_per_year`.
        #[arg(long)]
        panels: Option<usize>,
        /// Single-threaded execution.
        #[arg(long)]
        serial: bool,
    },
    /// Check a scenario config and list every problem found.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    match dispatch(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(args: Args) -> Result<(), CliError> {
    match args.command {
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let scenario = cfg.validate().map_err(CliError::ConfigInvalid)?;
            println!(
                "ok: {} regime(s), {} sweep point(s)",
                scenario.regimes.len(),
                fva_core::cli::sweep_points(&scenario).len()
            );
            Ok(())
        }
        Command::Run {
            config,
            mc,
            out,
            panels,
            serial,
        } => {
            let cfg = load_config(&config)?;
            let scenario = cfg.validate().map_err(CliError::ConfigInvalid)?;
            let options = RunOptions {
                monte_carlo: mc,
                panels_per_year: panels,
                execution: if serial { Execution::Serial } else { Execution::Parallel },
            };
            if panels == Some(0) {
                return Err(CliError::ConfigInvalid(vec![fva_core::cli::Diagnostic {
                    code: "invalid_numerics",
                    message: "--panels must be positive".into(),
                }]));
            }
            let report = run_scenario(&scenario, options)?;
            let dir = out
                .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            let written = report.write(&dir)?;

            println!("{:<14} {:>5} {:>10} {:>8} {:>13} {:>13} {:>13} {:>9}", "regime", "point", "lambda_bar", "theta", "v_X", "u", "v", "mc_z");
            for r in report.summary_rows() {
                let theta = r.theta.map(|t| format!("{t}")).unwrap_or_default();
                let z = r.mc_z.map(|z| format!("{z:.2}")).unwrap_or_default();
                println!(
                    "{:<14} {:>5} {:>10.6} {:>8} {:>13.9} {:>13.9} {:>13.9} {:>9}",
                    r.regime.as_str(),
                    r.sweep_index,
                    r.lambda_bar_investor,
                    theta,
                    r.collateral_value,
                    r.u,
                    r.v,
                    z
                );
            }
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}
