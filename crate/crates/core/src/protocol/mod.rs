//! Pulse sequences for the two-pulse and double-rephasing echo protocols,
//! analytic echo timing, and plane-wave phase matching.

mod phase_match;
mod sequence;
mod timing;

pub use phase_match::{phase_match_e1, phase_match_e2, phase_match_sequence, PhaseMatchResult};
pub use sequence::{
    has_errors, make_apc_sequence, make_two_pulse_sequence, validate_sequence, ApcTimings, Directions, Finding,
    ProtocolTag, PulseSequence, PulseShape, SequenceShape, Severity,
};
pub use timing::{
    predict_e1_time, predict_e2_time, predict_sequence, E2Prediction, Prediction, TimeReference, TimingOptions,
    TimingPrediction,
};

use thiserror::Error;

use crate::bloch::{Channel, DynamicsError, PulseLabel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("{later} (t = {later_t} us) must start after {earlier} (t = {earlier_t} us)")]
    Ordering {
        earlier: PulseLabel,
        earlier_t: f64,
        later: PulseLabel,
        later_t: f64,
    },
    #[error("{first} (t = {first_t} us) and {second} (t = {second_t} us) overlap on channel {channel}")]
    Overlap {
        channel: Channel,
        first: PulseLabel,
        first_t: f64,
        second: PulseLabel,
        second_t: f64,
    },
    #[error("sequence has no data pulse")]
    NoDataPulse,
    #[error("sequence has no {0} pulse")]
    MissingPulse(PulseLabel),
    #[error("rephasing pulse at t = {t_r1} us precedes data pulse at t = {t_d} us")]
    RephaseBeforeData { t_d: f64, t_r1: f64 },
    #[error("non-finite input")]
    NonFinite,
    #[error("{0} wave vector has zero length")]
    ZeroWaveVector(&'static str),
    #[error("generated frequency {0} rad/s is not positive")]
    UnphysicalFrequency(f64),
    #[error(transparent)]
    Pulse(#[from] DynamicsError),
}
