//! Command-line front end: instance files, solver commands, verification
//! and run reports.
//!
//! Exit status: 0 on success, 1 for invalid input, 2 when a resource limit
//! is hit, 3 for an internal invariant breach or a failed verification.

pub mod commands;
pub mod error;
pub mod schema;
pub mod table;
pub mod verify;

use std::ffi::OsString;
use std::io::Write;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use sha2::{Digest, Sha256};

use combicon::functions::{DEFAULT_BRUTE_FORCE_LIMIT, MAX_ACTIONS};

use crate::commands::{execute, Cli, Command, Context, Output};
use crate::error::{CliError, ExitStatus};
use crate::table::{render, PlainTable};

/// Overrides the largest `n` handled by exhaustive enumeration.
pub const LIMIT_VAR: &str = "COMBICON_BRUTE_FORCE_LIMIT";

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub version: u32,
    pub command: String,
    /// SHA-256 over the arguments and the contents of every input file.
    pub inputs_sha256: String,
    pub exit_code: i32,
    pub results: Vec<PlainTable>,
    pub queries: Option<u64>,
    pub error: Option<String>,
    /// The only field that varies between identical runs.
    pub wall_time_ms: f64,
}

pub fn brute_force_limit() -> Result<usize, CliError> {
    match std::env::var(LIMIT_VAR) {
        Err(_) => Ok(DEFAULT_BRUTE_FORCE_LIMIT),
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(limit) if (1..=MAX_ACTIONS).contains(&limit) => Ok(limit),
            _ => Err(CliError::Usage(format!("{LIMIT_VAR} must be an integer in [1, {MAX_ACTIONS}], got {raw:?}"))),
        },
    }
}

fn command_name(command: &Command) -> &'static str {
    use crate::commands::{GenCommand, RobustCommand};
    match command {
        Command::Solve { .. } => "solve",
        Command::CriticalSet { .. } => "critical-set",
        Command::Demand { .. } => "demand",
        Command::Succ { .. } => "succ",
        Command::Fptas { .. } => "fptas",
        Command::Gen { what, .. } => match what {
            GenCommand::SubsetSum { .. } => "gen subset-sum",
            GenCommand::CoverageTower { .. } => "gen coverage-tower",
            GenCommand::Random { .. } => "gen random",
            GenCommand::General { .. } => "gen general",
            GenCommand::Perturb { .. } => "gen perturb",
        },
        Command::Robust { what } => match what {
            RobustCommand::Linearize { .. } => "robust linearize",
            RobustCommand::SolveLinear { .. } => "robust solve-linear",
        },
        Command::Verify { .. } => "verify",
    }
}

/// Arguments that identify a run: everything except the report path.
fn identifying_args(args: &[OsString]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for arg in args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()) {
        if skip {
            skip = false;
        } else if arg == "--report" {
            skip = true;
        } else if !arg.starts_with("--report=") {
            out.push(arg);
        }
    }
    out
}

fn digest(args: &[String], ctx: &Context) -> String {
    let mut hasher = Sha256::new();
    for arg in args {
        hasher.update(arg.as_bytes());
        hasher.update([0]);
    }
    for (_, text) in &ctx.inputs {
        hasher.update([1]);
        hasher.update(text.as_bytes());
    }
    hex::encode(hasher.finalize())
}

fn emit(cli: &Cli, output: &Output, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(doc) = &output.document {
        match &cli.command {
            Command::Gen { output: Some(path), .. } => std::fs::write(path, doc)?,
            _ => out.write_all(doc.as_bytes())?,
        }
    } else {
        out.write_all(render(&output.tables, cli.format, cli.decimal).as_bytes())?;
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { ExitStatus::Validation as i32 } else { ExitStatus::Success as i32 };
        }
    };
    let started = Instant::now();
    let mut ctx = Context { limit: DEFAULT_BRUTE_FORCE_LIMIT, inputs: Vec::new() };
    let result = brute_force_limit().and_then(|limit| {
        ctx.limit = limit;
        execute(&cli.command, &mut ctx)
    });
    let result = result.and_then(|output| {
        emit(&cli, &output, out)?;
        if output.failed > 0 {
            return Err(CliError::ChecksFailed(output.failed));
        }
        Ok(output)
    });
    let (code, output, error) = match result {
        Ok(output) => (ExitStatus::Success as i32, Some(output), None),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            (e.status() as i32, None, Some(e.to_string()))
        }
    };
    if let Some(path) = &cli.report {
        let report = RunReport {
            version: REPORT_VERSION,
            command: command_name(&cli.command).into(),
            inputs_sha256: digest(&identifying_args(&args), &ctx),
            exit_code: code,
            results: output.as_ref().map(|o| o.tables.iter().map(|t| t.plain()).collect()).unwrap_or_default(),
            queries: output.as_ref().and_then(|o| o.queries),
            error,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        let text = serde_json::to_string_pretty(&report).expect("reports serialize") + "\n";
        if let Err(e) = std::fs::write(path, text) {
            let _ = writeln!(err, "error: cannot write report {}: {e}", path.display());
            return code.max(ExitStatus::Validation as i32);
        }
    }
    code
}
