//! `eig` argument parsing and the exit-code contract: 0 on success, 2 on
//! usage errors, 1 on numerical or IO failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use shiftinvert::{spike_sampler, ReplayData, SolverChoice};

use crate::error::{HarnessError, Result};
use crate::record::{Payload, RunRecord};
use crate::run::execute;
use crate::spec::{Input, Mode, RunSpec};

#[derive(Debug, Parser)]
#[command(name = "eig", version, about = "Top eigenvector by shift-and-invert power iteration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Top eigenvector of AᵀA from a matrix
    Offline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Top eigenvector of a covariance from a sample stream
    Online {
        #[command(flatten)]
        common: Common,
        /// Hard cap on samples drawn
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Shift search only
    EstimateShift {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Plain, accelerated and power iteration on shared seeds
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Re-run a spec saved as JSON (a bare spec or a full record)
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write stream samples to a replay file (.bin or .csv)
    Record {
        #[arg(long)]
        generator: String,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Matrix Market file, or a replay file in online mode
    #[arg(long, conflicts_with = "generator", required_unless_present = "generator")]
    input: Option<PathBuf>,
    /// Generator spec such as `planted:d=10,gap=0.3`
    #[arg(long)]
    generator: Option<String>,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value = "plain", value_parser = parse_solver)]
    solver: SolverChoice,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON record path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace_csv: Option<PathBuf>,
    /// Config override `key=value`, repeatable; `preset=faithful` selects
    /// the unscaled constants
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn parse_solver(s: &str) -> std::result::Result<SolverChoice, String> {
    match s {
        "plain" => Ok(SolverChoice::Plain),
        "accelerated" => Ok(SolverChoice::Accelerated),
        _ => Err(format!("expected plain or accelerated, got `{s}`")),
    }
}

impl Common {
    fn into_spec(self, mode: Mode) -> Result<RunSpec> {
        let input = match (self.input, self.generator) {
            (Some(p), None) => Input::Path(p),
            (None, Some(g)) => Input::Generator(g),
            _ => return Err(HarnessError::usage("give exactly one of --input and --generator")),
        };
        let mut overrides = BTreeMap::new();
        for kv in self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| HarnessError::usage(format!("--set `{kv}` is not key=value")))?;
            if overrides.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(HarnessError::usage(format!("--set key `{}` given twice", k.trim())));
            }
        }
        Ok(RunSpec {
            epsilon: self.epsilon,
            delta: self.delta,
            solver: self.solver,
            seed: self.seed,
            out: self.out,
            trace_csv: self.trace_csv,
            overrides,
            ..RunSpec::new(mode, input)
        })
    }
}

fn build_spec(command: Command) -> Result<Option<RunSpec>> {
    let spec = match command {
        Command::Offline { common, alpha } => RunSpec {
            alpha,
            ..common.into_spec(Mode::Offline)?
        },
        Command::EstimateShift { common, alpha } => RunSpec {
            alpha,
            ..common.into_spec(Mode::EstimateShift)?
        },
        Command::Online { common, samples } => RunSpec {
            samples,
            ..common.into_spec(Mode::Online)?
        },
        Command::Bench { common, alpha, trials } => RunSpec {
            alpha,
            trials,
            ..common.into_spec(Mode::Bench)?
        },
        Command::Run { spec, out } => {
            let text = std::fs::read_to_string(&spec)?;
            let mut s: RunSpec = match serde_json::from_str::<RunRecord>(&text) {
                Ok(r) => r.spec,
                Err(_) => serde_json::from_str(&text).map_err(|e| HarnessError::usage(format!("{}: {e}", spec.display())))?,
            };
            if out.is_some() {
                s.out = out;
            }
            s
        }
        Command::Record { generator, samples, out } => {
            let g: crate::generator::Generator = generator.parse()?;
            let params = g
                .spike_params()
                .ok_or_else(|| HarnessError::usage("record needs a stream generator"))?;
            let mut stream = spike_sampler(params)?;
            ReplayData::record::<f64, _>(&mut stream, samples)?.write_file(&out)?;
            return Ok(None);
        }
    };
    Ok(Some(spec))
}

fn emit(record: &RunRecord) -> Result<()> {
    let json = record.to_json()?;
    match &record.spec.out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{json}")?;
        }
    }
    if let Payload::Bench(table) = &record.result {
        eprint!("{table}");
    }
    for c in record.checks.iter().filter(|c| !c.passed) {
        eprintln!("warning: check {} failed: {}", c.name, c.detail);
    }
    Ok(())
}

/// Parses `argv` (program name first), runs, and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = build_spec(cli.command).and_then(|spec| match spec {
        Some(spec) => execute(&spec).and_then(|r| emit(&r)),
        None => Ok(()),
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
