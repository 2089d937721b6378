//! Command-line entry points. [`run`] returns the process exit code so the
//! binary stays a one-liner and tests can drive it in-process.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::io::{
    effective_threads, emit_results, parse_config, predict_report, run_bloch, run_scan, run_simulation, Format,
    OutputKind, Plan, ResultBundle, RunError, SimJob, THREADS_ENV,
};

#[derive(Parser, Debug)]
#[command(name = "echo-sim", version, about = "Photon echo simulator for three-level lambda ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the ensemble and write the configured outputs.
    Simulate { config: PathBuf },
    /// Rephasing-delay scan, one ensemble run per R1 start time.
    Scan {
        config: PathBuf,
        /// R1 start times in us, comma separated. Defaults to scan.r1_us.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        r1: Vec<f64>,
    },
    /// Echo timing and phase-matching report, without integration.
    Predict { config: PathBuf },
    /// Single-atom trajectory with Bloch vector columns.
    Bloch {
        config: PathBuf,
        /// Optical detuning in kHz.
        #[arg(long, allow_negative_numbers = true)]
        delta: f64,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code: 0 success, 1 invalid input, 2 runtime failure.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                1
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let env = std::env::var(THREADS_ENV).ok();
    match dispatch(cli.command, env.as_deref(), out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.to_string().replace('\n', "\nerror: "));
            e.exit_code()
        }
    }
}

fn load(path: &Path, env_threads: Option<&str>) -> Result<(SimJob, Plan), RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        RunError::Config(crate::io::ConfigError::Invalid(vec![crate::io::ConfigIssue {
            path: String::new(),
            message: format!("cannot read {}: {e}", path.display()),
        }]))
    })?;
    let mut job = parse_config(&text)?;
    job.threads = effective_threads(job.threads, env_threads)?;
    let plan = job.plan()?;
    Ok((job, plan))
}

fn finish(
    job: &SimJob,
    bundle: &ResultBundle,
    fallback: OutputKind,
    out: &mut dyn Write,
) -> Result<(), RunError> {
    let written = emit_results(bundle, &job.outputs)?;
    if written.is_empty() {
        if let Some(text) = bundle.render(fallback, Format::Csv) {
            let _ = out.write_all(text.as_bytes());
        }
    }
    Ok(())
}

fn dispatch(cmd: Command, env_threads: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), RunError> {
    let warn = |plan: &Plan, err: &mut dyn Write| {
        for w in &plan.warnings {
            let _ = writeln!(err, "warning: {w}");
        }
    };
    match cmd {
        Command::Simulate { config } => {
            let (job, plan) = load(&config, env_threads)?;
            warn(&plan, err);
            let sim = run_simulation(&job, &plan)?;
            finish(&job, &sim.bundle, OutputKind::Echoes, out)
        }
        Command::Scan { config, r1 } => {
            let (job, plan) = load(&config, env_threads)?;
            warn(&plan, err);
            let scan = run_scan(&job, &plan, &r1)?;
            finish(&job, &scan.bundle, OutputKind::Scan, out)
        }
        Command::Predict { config } => {
            let (job, plan) = load(&config, env_threads)?;
            let _ = out.write_all(predict_report(&job, &plan).as_bytes());
            Ok(())
        }
        Command::Bloch { config, delta } => {
            let (job, plan) = load(&config, env_threads)?;
            warn(&plan, err);
            let b = run_bloch(&job, &plan, delta)?;
            finish(&job, &b.bundle, OutputKind::Bloch, out)
        }
    }
}
