//! `signorini`: command-line driver for the obstacle-problem laboratory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use signorini_lab::config::{Batch, ExperimentConfig};
use signorini_lab::experiments::{self, Command, RunOutput};
use signorini_lab::report::Status;

/// Exit status for configuration and input errors.
const CONFIG_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "signorini", version, about = "Thin obstacle problems on the unit disk")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's `output`, else `signorini-out/<name>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid nodes per axis (odd, at least 33).
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Print only the final status line.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the configured obstacle problem and write u.
    Solve,
    /// Capacity density profile of the contact set at the origin.
    Capacity,
    /// Frequency, ACF and oscillation profiles at the origin.
    Frequency,
    /// Blowup classification at the origin.
    Blowup,
    /// Run a named experiment.
    Experiment {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(experiments::EXPERIMENTS))]
        name: String,
    },
    /// Run every [[run]] of a batch file concurrently.
    Batch { file: PathBuf },
    /// List the named experiments.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}

fn dispatch(cli: &Cli) -> signorini_lab::Result<Status> {
    if let Cmd::List = cli.cmd {
        for name in experiments::EXPERIMENTS {
            println!("{name}");
        }
        return Ok(Status::Pass);
    }
    if let Cmd::Batch { file } = &cli.cmd {
        return batch(cli, file);
    }
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.resolution.is_some() {
        cfg.resolution = cli.resolution;
        cfg.resolutions = None;
    }
    cfg.validate()?;
    let (name, out) = match &cli.cmd {
        Cmd::Solve => ("solve", run_single(Command::Solve, &cfg, cli)?),
        Cmd::Capacity => ("capacity", run_single(Command::Capacity, &cfg, cli)?),
        Cmd::Frequency => ("frequency", run_single(Command::Frequency, &cfg, cli)?),
        Cmd::Blowup => ("blowup", run_single(Command::Blowup, &cfg, cli)?),
        Cmd::Experiment { name } => {
            let dir = out_dir(cli, &cfg, name);
            (name.as_str(), experiments::run(name, &cfg, Some(&dir))?)
        }
        Cmd::Batch { .. } | Cmd::List => unreachable!(),
    };
    print_run(name, &out, cli.quiet);
    Ok(out.report.status)
}

fn run_single(cmd: Command, cfg: &ExperimentConfig, cli: &Cli) -> signorini_lab::Result<RunOutput> {
    let dir = out_dir(cli, cfg, cmd.name());
    experiments::run_command(cmd, cfg, Some(&dir))
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| Path::new("signorini-out").join(name))
}

fn batch(cli: &Cli, file: &Path) -> signorini_lab::Result<Status> {
    let mut b = Batch::load(file)?;
    if cli.resolution.is_some() {
        for (_, cfg) in &mut b.runs {
            cfg.resolution = cli.resolution;
            cfg.resolutions = None;
        }
    }
    let root = cli.out.clone().unwrap_or_else(|| PathBuf::from("signorini-out"));
    let mut status = Status::Pass;
    let mut failed = false;
    for (dir, result) in experiments::run_batch(&b, Some(&root)) {
        match result {
            Ok(out) => {
                print_run(&dir, &out, cli.quiet);
                status = status.worst(out.report.status);
            }
            Err(e) => {
                eprintln!("error in {dir}: {e}");
                failed = true;
            }
        }
    }
    if failed {
        return Err(signorini_lab::Error::Config("one or more batch runs failed".into()));
    }
    Ok(status)
}

fn print_run(name: &str, out: &RunOutput, quiet: bool) {
    if !quiet {
        for c in &out.report.checks {
            let tag = c.criterion.map_or(String::new(), |n| format!(" [C{n}]"));
            println!(
                "{} {}{tag}: {:.6e} ({})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold
            );
        }
        for (label, s) in &out.report.solves {
            if !s.converged {
                println!("NOT CONVERGED {label}: {} sweeps, last update {:.3e}", s.iterations, s.final_update);
            }
        }
    }
    println!("{name}: {:?}", out.report.status);
}
