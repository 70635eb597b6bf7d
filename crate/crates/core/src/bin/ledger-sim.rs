//! `ledger-sim`: run a scenario file and write its trace.
//!
//! Exit status is 0 when every check passed and nothing invalid was
//! produced, 1 when a check found a counterexample or a block or chain was
//! invalid, and 2 when the scenario could not be loaded or run.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use ledger_dynamics::runner::{run, RunOutcome};
use ledger_dynamics::scenario::{Scenario, TraceFormat};
use ledger_dynamics::trace::write_trace;
use ledger_dynamics::value::library::Library;
use ledger_dynamics::value::Verdict;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Parser)]
#[command(name = "ledger-sim", version, about = "Run a ledger, network or value-function scenario")]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trace destination; `-` for standard output.
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Additional built-in check, by name. Repeatable.
    #[arg(long = "check")]
    checks: Vec<String>,
    /// Suppress the summary on standard error.
    #[arg(long)]
    quiet: bool,
}

fn open(dest: Option<&str>) -> io::Result<Box<dyn Write>> {
    Ok(match dest {
        None | Some("-") => Box::new(BufWriter::new(io::stdout().lock())),
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
    })
}

fn write_counterexamples(outcome: &RunOutcome, dest: Option<&str>) -> io::Result<()> {
    let failing: Vec<_> = outcome.checks.iter().filter(|r| !r.passed()).collect();
    if failing.is_empty() {
        return Ok(());
    }
    let mut out: Box<dyn Write> = match dest {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stderr().lock()),
    };
    for report in failing {
        serde_json::to_writer(&mut out, report).map_err(io::Error::other)?;
        writeln!(out)?;
    }
    out.flush()
}

fn summary(outcome: &RunOutcome) {
    eprintln!("{} steps", outcome.records.len());
    for r in &outcome.checks {
        let verdict = match &r.verdict {
            Verdict::Pass => "pass".to_string(),
            Verdict::Counterexample(w) => format!(
                "counterexample in {} ({}): V {} -> {}",
                w.method, w.action, w.v_before, w.v_after
            ),
            Verdict::SandboxViolation { method, error, .. } => {
                format!("sandbox violation in {method}: {error}")
            }
        };
        eprintln!(
            "check {}: {verdict} [{} trials, {:?}]",
            r.check, r.trials, r.coverage
        );
    }
    for t in &outcome.tracking {
        eprintln!(
            "check {}: V = {} exceeds bound {} at step {}",
            t.check, t.v, t.bound, t.step
        );
    }
    for v in &outcome.violations {
        eprintln!("invalid at step {}: {}", v.step, v.message);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let library = Library::builtin();

    let mut scenario = match Scenario::from_path(&cli.scenario, &library) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("ledger-sim: {}: {e}", cli.scenario.display());
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    for name in &cli.checks {
        if let Err(e) = scenario.add_check(name, &library) {
            eprintln!("ledger-sim: --check {name}: {e}");
            return ExitCode::from(2);
        }
    }
    let format = match cli.format {
        Some(Format::Csv) => TraceFormat::Csv,
        Some(Format::Jsonl) => TraceFormat::Jsonl,
        None => scenario.output.format,
    };

    let outcome = match run(&scenario, &library) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("ledger-sim: {e}");
            return ExitCode::from(2);
        }
    };

    let dest = cli.out.as_deref().or(scenario.output.trace.as_deref());
    let written = open(dest).and_then(|mut w| {
        write_trace(&mut w, format, &outcome.columns, &outcome.records)?;
        w.flush()
    });
    if let Err(e) = written {
        eprintln!("ledger-sim: writing trace: {e}");
        return ExitCode::from(2);
    }
    if let Err(e) = write_counterexamples(&outcome, scenario.output.counterexamples.as_deref()) {
        eprintln!("ledger-sim: writing counterexamples: {e}");
        return ExitCode::from(2);
    }
    if !cli.quiet {
        summary(&outcome);
    }
    if outcome.success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
