//! Single-atom dynamics of the Λ system.
//!
//! Levels |1⟩ and |2⟩ are the ground and spin (shelving) states, |3⟩ is the
//! optically excited state. Channel A drives |1⟩–|3⟩ and channel B drives
//! |2⟩–|3⟩. Evolution is a pure function of its inputs, so atoms can be
//! simulated on any thread.

mod atom;
mod density;
mod dynamics;
mod pulse;
mod rotation;

pub use atom::{AtomParams, Decay, Rates};
pub use density::{DensityMatrix, Level, C64};
pub use dynamics::{
    build_hamiltonian, evolve, evolve_with, master_rhs, sample_times, Drive, Integrator, Trajectory,
};
pub(crate) use dynamics::{check_request, sample_index};
pub use pulse::{
    carrier_from_wavelength_nm, Channel, Pulse, PulseLabel, DEFAULT_WAVELENGTH_NM, SPEED_OF_LIGHT,
};
pub use rotation::{bloch_vector, hard_pulse_rotation, rotation_unitary, BlochVector};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("invalid atom parameters: {0}")]
    InvalidAtom(String),
    #[error("pulse {label} at t = {t_start} us: {field} {reason}")]
    InvalidPulse {
        label: PulseLabel,
        t_start: f64,
        field: &'static str,
        reason: String,
    },
    #[error("invalid time span [{t0}, {t1}]")]
    InvalidSpan { t0: f64, t1: f64 },
    #[error("invalid integrator: {0}")]
    InvalidIntegrator(String),
    #[error("step dt = {dt} us exceeds 1/20 of pulse #{index} ({label}, duration {duration} us)")]
    StepTooLarge {
        index: usize,
        label: PulseLabel,
        duration: f64,
        dt: f64,
    },
}
