use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hamsuspend::pipeline::{
    run_demo, run_norms, run_suspension, run_sweep, run_verify, sweep_csv, write_atomic,
    CheckStatus, ExperimentConfig,
};
use hamsuspend::{Error, SectionRecord};

/// Trajectory CSVs written by `suspend`.
const EXPORTED_TRAJECTORIES: usize = 4;

#[derive(Parser)]
#[command(name = "hamsuspend", version, about = "Realize near-identity symplectic maps as time-one section maps of a Hamiltonian flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML config; defaults are used for anything missing.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Integrator tolerance, overriding the config.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the suspension and run the section map over the grid.
    Suspend,
    /// Repeat `suspend` over the sweep lists and write a table.
    Sweep,
    /// Run every invariant check.
    Verify,
    /// Estimate the norms entering the perturbation bound.
    Norms,
    /// One section run with its trajectory.
    Demo,
    /// Print the effective config.
    Config,
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = common.tol {
        cfg.integrator.tol = tol;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn status(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    let cfg = load(&cli.common)?;
    let out: &Path = &cfg.output_dir;
    let quiet = cli.common.quiet;
    match cli.command {
        Command::Suspend => {
            let outcome = run_suspension(&cfg)?;
            outcome.write(out, EXPORTED_TRAJECTORIES)?;
            if !quiet {
                print!("{}", outcome.report.summary());
            }
            Ok(status(outcome.report.passed()))
        }
        Command::Sweep => {
            let rows = run_sweep(&cfg)?;
            write_atomic(&out.join("sweep.csv"), &sweep_csv(&rows))?;
            if !quiet {
                print!("{}", sweep_csv(&rows));
            }
            Ok(status(rows.iter().all(|r| r.status == CheckStatus::Pass)))
        }
        Command::Verify => {
            let report = run_verify(&cfg)?;
            write_atomic(&out.join("verify_report.json"), &report.to_json())?;
            if !quiet {
                print!("{}", report.summary());
            }
            Ok(status(report.passed()))
        }
        Command::Norms => {
            let norms = run_norms(&cfg)?;
            let text = norms.to_flat_text();
            write_atomic(&out.join("norms.txt"), &text)?;
            if !quiet {
                print!("{text}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Demo => {
            let demo = run_demo(&cfg)?;
            write_atomic(&out.join("demo_trajectory.csv"), &demo.trajectory.to_csv())?;
            if !quiet {
                println!("{}", SectionRecord::csv_header(cfg.half_dim()));
                println!("{}", demo.record.csv_row());
                println!("energy drift {:e}", demo.trajectory.energy_drift());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Config => {
            print!("{}", cfg.to_toml_string());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
