//! `pulsecal`: simulate, analyze and sweep bootstrap calibration experiments.
//!
//! Exit codes: 0 success, 1 failed acceptance criteria, 2 bad input,
//! 3 model-inconsistent data under `--strict`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pulsecal::config::{ExperimentConfig, SweepKind};
use pulsecal::experiment::{run_analyze, run_qpt, run_simulate, run_sweep};
use pulsecal::io::{read_signals, report_to_json, write_signals};
use pulsecal::measurement::ShotConfig;
use pulsecal::verify::{self, DEFAULT_SEED};

#[derive(Parser)]
#[command(
    name = "pulsecal",
    version,
    about = "Bootstrap calibration of single-qubit pulse errors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Random seed for sampled signals, or for the verify suite.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Shots per sequence; enables sampling.
    #[arg(long, global = true)]
    shots: Option<u64>,

    /// Exact signals, ignoring any shot configuration.
    #[arg(long, global = true, conflicts_with = "shots")]
    exact: bool,

    /// Exit with code 3 when data are flagged as model-inconsistent.
    #[arg(long, global = true)]
    strict: bool,

    /// Estimator name (closed-form, least-squares, refit).
    #[arg(long, global = true)]
    estimator: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the twelve calibration signals as CSV.
    Simulate,
    /// Estimate pulse errors from a signals CSV; writes a JSON report.
    Analyze {
        /// Signals table produced by `simulate` or by an experiment.
        signals: PathBuf,
    },
    /// Raw and corrected process tomography across a sweep (CSV).
    Qpt {
        /// Also write the full report with χ matrices (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sweep the drive phase of the π/2_Y pulse (CSV).
    SweepPhase,
    /// Sweep the detuning of all pulses (CSV).
    SweepDetuning,
    /// Run the acceptance suite; writes a JSON report.
    Verify,
}

enum Failure {
    BadInput(String),
    Inconsistent(String),
    CriteriaFailed,
}

impl From<pulsecal::Error> for Failure {
    fn from(e: pulsecal::Error) -> Self {
        Failure::BadInput(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::BadInput(e.to_string())
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)
            .map_err(|e| Failure::BadInput(format!("{}: {e}", path.display())))?,
        None => ExperimentConfig::default(),
    };
    if cli.exact {
        cfg.shots = None;
    }
    if let Some(n) = cli.shots {
        let seed = cfg.shots.map(|s| s.seed).unwrap_or(0);
        cfg.shots = Some(ShotConfig {
            shots_per_sequence: n,
            seed,
        });
    }
    if let (Some(seed), Some(shots)) = (cli.seed, cfg.shots.as_mut()) {
        shots.seed = seed;
    }
    if let Some(name) = &cli.estimator {
        cfg.estimator = name.clone();
    }
    if cli.out.is_some() {
        cfg.output = cli.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| {
                Failure::BadInput(format!("{}: {e}", p.display()))
            })?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    let mut w = open_output(path)?;
    w.write_all(text.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn check_strict(strict: bool, inconsistent: bool) -> Result<(), Failure> {
    if strict && inconsistent {
        return Err(Failure::Inconsistent(
            "model-inconsistent data: consistency residual above threshold".into(),
        ));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Command::Verify = cli.command {
        let seed = cli.seed.unwrap_or(DEFAULT_SEED);
        let report = verify::verify(seed)?;
        for c in &report.criteria {
            eprintln!(
                "{} {:>2}. {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.id,
                c.name,
                c.summary
            );
        }
        write_text(cli.out.as_deref(), &report.to_json()?)?;
        return if report.all_passed() {
            Ok(())
        } else {
            Err(Failure::CriteriaFailed)
        };
    }

    let cfg = load_config(cli)?;
    let out = cfg.output.as_deref();
    match &cli.command {
        Command::Simulate => {
            let rows = run_simulate(&cfg)?;
            let w = open_output(out)?;
            write_signals(&rows, w)?;
        }
        Command::Analyze { signals } => {
            let file = File::open(signals)
                .map_err(|e| Failure::BadInput(format!("{}: {e}", signals.display())))?;
            let rows = read_signals(file)
                .map_err(|e| Failure::BadInput(format!("{}: {e}", signals.display())))?;
            let report = run_analyze(&rows, &cfg.estimator)?;
            write_text(out, &report_to_json(&report)?)?;
            check_strict(cli.strict, report.model_inconsistent)?;
        }
        Command::Qpt { report } => {
            let run = run_qpt(&cfg)?;
            run.write_csv(open_output(out)?)?;
            if let Some(path) = report {
                write_text(Some(path), &run.to_json()?)?;
            }
        }
        Command::SweepPhase | Command::SweepDetuning => {
            let kind = match cli.command {
                Command::SweepPhase => SweepKind::Phase,
                _ => SweepKind::Detuning,
            };
            let table = run_sweep(&cfg, kind)?;
            table.write_csv(open_output(out)?)?;
            check_strict(cli.strict, table.any_inconsistent())?;
        }
        Command::Verify => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::BadInput(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Inconsistent(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::CriteriaFailed) => {
            eprintln!("error: acceptance criteria failed");
            ExitCode::from(1)
        }
    }
}
