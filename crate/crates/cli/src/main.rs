use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use jkoflow_cli::config::{apply_file, VariantName};
use jkoflow_cli::convergence::run_convergence;
use jkoflow_cli::experiment::run_experiment;
use jkoflow_cli::presets::{default_sbp, preset};
use jkoflow_cli::{proxcheck, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "jkoflow", version, about = "Bound-preserving JKO experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset and write diagnostics.csv and snapshots.
    Run {
        preset: String,
        /// TOML file whose keys override the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Uniform cell size; recomputes the cell counts.
        #[arg(long)]
        dx: Option<f64>,
        #[arg(long, value_enum)]
        variant: Option<VariantName>,
        /// Use the Schrödinger-bridge regularised step.
        #[arg(long)]
        sbp: bool,
    },
    /// Refinement study against the closed-form steady state.
    Converge {
        preset: String,
        #[arg(long, value_delimiter = ',', required = true)]
        dx_list: Vec<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        variant: Option<VariantName>,
    },
    /// Compare the prox against a brute-force oracle on random instances.
    Proxcheck {
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn resolve(name: &str, file: Option<&PathBuf>) -> Result<ExperimentConfig> {
    let base = preset(name)?;
    match file {
        Some(path) => apply_file(&base, path),
        None => Ok(base),
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            preset,
            config,
            out,
            seed,
            dx,
            variant,
            sbp,
        } => {
            let mut cfg = resolve(&preset, config.as_ref())?;
            if let Some(out) = out {
                cfg.out = out;
            }
            if seed.is_some() {
                cfg.seed = seed;
            }
            if let Some(dx) = dx {
                cfg.grid.set_spacing(dx)?;
            }
            if let Some(v) = variant {
                cfg.solver.variant = v;
            }
            if sbp && cfg.sbp.is_none() {
                cfg.sbp = Some(default_sbp());
            }
            cfg.validate()?;
            let outcome = run_experiment(&cfg)?;
            let last = outcome.trajectory.diagnostics.last().expect("initial row");
            println!(
                "{}: {} steps, t = {}, energy {:.6e}, mass {:.12}, rho in [{:.6}, {:.6}] -> {}",
                cfg.preset,
                last.step,
                last.time,
                last.energy,
                last.mass,
                last.rho_min,
                last.rho_max,
                cfg.out.display()
            );
            if outcome.unconverged_steps > 0 {
                eprintln!(
                    "warning: {} steps stopped at the inner iteration cap",
                    outcome.unconverged_steps
                );
            }
            Ok(())
        }
        Command::Converge {
            preset,
            dx_list,
            config,
            out,
            variant,
        } => {
            let mut cfg = resolve(&preset, config.as_ref())?;
            if let Some(out) = out {
                cfg.out = out;
            }
            if let Some(v) = variant {
                cfg.solver.variant = v;
            }
            cfg.validate()?;
            let report = run_convergence(&cfg, &dx_list)?;
            std::fs::create_dir_all(&cfg.out).map_err(|e| jkoflow_cli::CliError::io(&cfg.out, e))?;
            let path = cfg.out.join("convergence.csv");
            report.write_csv(&path)?;
            println!("dx\terror\torder");
            for (i, (dx, err)) in report.errors.iter().enumerate() {
                let order = if i == 0 { "-".to_string() } else { format!("{:.3}", report.orders[i - 1]) };
                println!("{dx}\t{err:.4e}\t{order}");
            }
            println!("-> {}", path.display());
            Ok(())
        }
        Command::Proxcheck { count, seed } => {
            let report = proxcheck::run_proxcheck(count, seed)?;
            println!(
                "{count} instances, max |rho - oracle| = {:.3e}, max objective excess = {:.3e}, failures = {}",
                report.max_deviation, report.max_objective_excess, report.failures
            );
            println!("per case (1..7): {:?}", &report.per_case[1..]);
            if report.passed() {
                Ok(())
            } else {
                Err(jkoflow_cli::CliError::OracleMismatch {
                    failures: report.failures,
                    count,
                    max_dev: report.max_deviation,
                })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
