//! Inhomogeneous ensembles: detuning grids, parallel ensemble runs, echo
//! detection and rephasing-delay scans.

mod echo;
mod grid;
mod run;
mod scan;

pub use echo::{default_windows, detect_echoes, EchoEvent, EchoWindow, DEFAULT_HALF_WIDTH, DEFAULT_THRESHOLD};
pub use grid::{build_grid, gaussian, DetuningGrid};
pub use run::{
    intensity, polarization, population_trace, run_ensemble, AtomDiagnostics, AtomSeries, EnsembleConfig,
    EnsembleResult,
};
pub use scan::{scan_rephase_delay, ScanMode, ScanPoint, ScanRow, ScanSetup};

use thiserror::Error;

use crate::bloch::DynamicsError;
use crate::protocol::ProtocolError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("invalid detuning grid: {0}")]
    InvalidGrid(String),
    #[error("invalid echo window: {0}")]
    InvalidWindow(String),
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("{}: {source}", match .index { Some(i) => format!("atom #{i}"), None => "atom template".to_string() })]
    Atom {
        index: Option<usize>,
        source: DynamicsError,
    },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}
