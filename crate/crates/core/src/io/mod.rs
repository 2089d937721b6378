//! JSON job documents, result tables and the runners behind the command line.

mod config;
mod output;
mod run;

pub use config::{
    job_from_value, parse_config, preset, preset_names, AtomSpec, ChannelName, ConfigIssue, DecaySpec, EchoSpec,
    Format, GridSpec, IntegratorSpec, LabelName, OutputKind, OutputSpec, Plan, ProtocolKind, PulseSpec,
    ReferenceName, ScanModeName, ScanSpec, SequenceSpec, ShapeSpec, ShapesSpec, SimJob, TimingSpec, TimingsSpec,
    WindowSpec, CONFIG_VERSION,
};
pub use output::{
    bloch_table, echo_table, emit_results, format_number, round_sig9, scan_table, timeseries_table, write_atomic,
    Cell, Metadata, ResultBundle, Table, BLOCH_COLUMNS, ECHO_COLUMNS, SCAN_COLUMNS, TIMESERIES_COLUMNS,
};
pub use run::{
    effective_threads, predict_report, run_bloch, run_scan, run_simulation, BlochOutput, ScanOutput,
    SimulationOutput, THREADS_ENV,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::bloch::DynamicsError;
use crate::ensemble::EnsembleError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<ConfigIssue>),
}

impl ConfigError {
    /// Issues as (path, message) pairs; a syntax error has an empty path.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        match self {
            ConfigError::Syntax { .. } => vec![ConfigIssue {
                path: String::new(),
                message: self.to_string(),
            }],
            ConfigError::Invalid(v) => v.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {}: {source}", .path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Failure of a command: invalid input, or a run that could not complete.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl RunError {
    /// 1 for invalid input, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            _ => 2,
        }
    }
}
