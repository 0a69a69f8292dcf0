//! `learnfabric run | verify | check`.
//!
//! Exit codes: 0 success, 1 parse or validation error, 2 I/O error,
//! 3 tick limit reached (`run`), 4 oracle divergence (`verify`).

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::engine::{RunOutcome, Simulation, Tick};
use crate::oracle;
use crate::scenario::{parse_scenario, Scenario};
use crate::trace::{read_trace, write_trace, TraceError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_TICK_LIMIT: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "learnfabric", version, about = "Simulate a sequence-learning memory fabric")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write its trace and report.
    Run {
        scenario: PathBuf,
        /// Defaults to `<scenario stem>.trace.jsonl` beside the scenario.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Defaults to `<scenario stem>.report.json` beside the scenario.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Overrides the scenario's `maxticks`.
        #[arg(long)]
        max_ticks: Option<Tick>,
        #[arg(long, hide = true)]
        no_loop_suppression: bool,
    },
    /// Recount a trace with the oracle and compare.
    Verify {
        scenario: PathBuf,
        /// Defaults to `<scenario stem>.trace.jsonl` beside the scenario.
        trace: Option<PathBuf>,
    },
    /// Parse and validate a scenario, then print its canonical form.
    Check { scenario: PathBuf },
}

pub fn default_trace_path(scenario: &Path) -> PathBuf {
    scenario.with_extension("trace.jsonl")
}

pub fn default_report_path(scenario: &Path) -> PathBuf {
    scenario.with_extension("report.json")
}

enum Failure {
    Invalid(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Io(m) => m,
        }
    }
}

fn load(path: &Path, err: &mut dyn Write) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let scenario = parse_scenario(&text)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    for w in scenario.warnings() {
        let _ = writeln!(err, "warning: {}: {w}", path.display());
    }
    Ok(scenario)
}

/// Runs a parsed command line. `out` receives only `check`'s canonical
/// echo; everything else goes to `err`.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Run {
            scenario,
            trace,
            report,
            max_ticks,
            no_loop_suppression,
        } => cmd_run(&scenario, trace, report, max_ticks, no_loop_suppression, err),
        Command::Verify { scenario, trace } => cmd_verify(&scenario, trace, err),
        Command::Check { scenario } => cmd_check(&scenario, out, err),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

fn cmd_run(
    path: &Path,
    trace_path: Option<PathBuf>,
    report_path: Option<PathBuf>,
    max_ticks: Option<Tick>,
    no_loop_suppression: bool,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let scenario = load(path, err)?;
    let mut sim = Simulation::from_scenario(&scenario).map_err(|e| Failure::Invalid(e.to_string()))?;
    if no_loop_suppression {
        sim.set_loop_suppression(false);
    }
    let outcome = sim
        .run_to_quiescence(max_ticks.unwrap_or(scenario.max_tick))
        .map_err(|e| Failure::Invalid(format!("simulation aborted: {e}")))?;

    let trace_path = trace_path.unwrap_or_else(|| default_trace_path(path));
    let report_path = report_path.unwrap_or_else(|| default_report_path(path));
    let io_err = |p: &Path, e: io::Error| Failure::Io(format!("{}: {e}", p.display()));

    let file = File::create(&trace_path).map_err(|e| io_err(&trace_path, e))?;
    write_trace(sim.trace(), BufWriter::new(file)).map_err(|e| io_err(&trace_path, e))?;
    let file = File::create(&report_path).map_err(|e| io_err(&report_path, e))?;
    sim.report(outcome)
        .write(BufWriter::new(file))
        .map_err(|e| io_err(&report_path, e))?;

    match outcome {
        RunOutcome::Quiescent(t) => {
            let _ = writeln!(err, "quiescent at tick {t}; {} records", sim.trace().len());
            Ok(EXIT_OK)
        }
        RunOutcome::TickLimitReached => {
            let _ = writeln!(err, "tick limit reached at tick {}", sim.now());
            Ok(EXIT_TICK_LIMIT)
        }
    }
}

fn cmd_verify(path: &Path, trace_path: Option<PathBuf>, err: &mut dyn Write) -> Result<i32, Failure> {
    let scenario = load(path, err)?;
    let trace_path = trace_path.unwrap_or_else(|| default_trace_path(path));
    let file = File::open(&trace_path)
        .map_err(|e| Failure::Io(format!("{}: {e}", trace_path.display())))?;
    let trace = read_trace(BufReader::new(file)).map_err(|e| match e {
        TraceError::Io(e) => Failure::Io(format!("{}: {e}", trace_path.display())),
        e => Failure::Invalid(format!("{}: {e}", trace_path.display())),
    })?;
    match oracle::verify(&scenario, &trace) {
        Ok(s) => {
            let _ = writeln!(
                err,
                "agree: {} learned pairs, {} auto enables checked, {} probe episodes compared ({} skipped)",
                s.learned_pairs, s.auto_enables_checked, s.episodes_compared, s.episodes_skipped
            );
            Ok(EXIT_OK)
        }
        Err(d) => {
            let _ = writeln!(err, "divergence: {d}");
            Ok(EXIT_DIVERGED)
        }
    }
}

fn cmd_check(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let scenario = load(path, err)?;
    write!(out, "{scenario}").map_err(|e| Failure::Io(e.to_string()))?;
    Ok(EXIT_OK)
}
