use nalgebra::Vector3;

use super::sequence::PulseSequence;
use super::ProtocolError;
use crate::bloch::{PulseLabel, SPEED_OF_LIGHT};

/// Plane-wave four-wave-mixing output.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMatchResult {
    /// Generated wave vector (rad/m).
    pub k_out: Vector3<f64>,
    /// Generated angular frequency (rad/s).
    pub omega_out: f64,
    /// | |k_out| − ω_out/c | in rad/m.
    pub mismatch: f64,
    /// k_out / |k_out|, or zero when k_out vanishes.
    pub direction: Vector3<f64>,
    /// Emission opposite to the data beam.
    pub backward: bool,
}

fn finish(k_out: Vector3<f64>, omega_out: f64, k_d: &Vector3<f64>) -> PhaseMatchResult {
    let norm = k_out.norm();
    let direction = if norm > 0.0 { k_out / norm } else { Vector3::zeros() };
    PhaseMatchResult {
        mismatch: (norm - omega_out / SPEED_OF_LIGHT).abs(),
        backward: direction.dot(k_d) < 0.0,
        k_out,
        omega_out,
        direction,
    }
}

fn nonzero(k: &Vector3<f64>, which: &'static str) -> Result<(), ProtocolError> {
    if k.iter().any(|x| !x.is_finite()) {
        return Err(ProtocolError::NonFinite);
    }
    if k.norm() == 0.0 {
        return Err(ProtocolError::ZeroWaveVector(which));
    }
    Ok(())
}

/// Forward echo: k_E1 = 2k_D − k_R1 at the data frequency ω_D = c|k_D|.
pub fn phase_match_e1(k_d: &Vector3<f64>, k_r1: &Vector3<f64>) -> Result<PhaseMatchResult, ProtocolError> {
    nonzero(k_d, "D")?;
    nonzero(k_r1, "R1")?;
    let k_out = 2.0 * k_d - k_r1;
    Ok(finish(k_out, SPEED_OF_LIGHT * k_d.norm(), k_d))
}

/// Controlled echo: k_E2 = k_D − k_C1 + k_C2, ω_E2 = ω_D − ω_C1 + ω_C2.
pub fn phase_match_e2(
    k_d: &Vector3<f64>,
    k_c1: &Vector3<f64>,
    k_c2: &Vector3<f64>,
    omega_d: f64,
    omega_c1: f64,
    omega_c2: f64,
) -> Result<PhaseMatchResult, ProtocolError> {
    nonzero(k_d, "D")?;
    nonzero(k_c1, "C1")?;
    nonzero(k_c2, "C2")?;
    if ![omega_d, omega_c1, omega_c2].iter().all(|w| w.is_finite()) {
        return Err(ProtocolError::NonFinite);
    }
    let omega_out = omega_d - omega_c1 + omega_c2;
    if omega_out <= 0.0 {
        return Err(ProtocolError::UnphysicalFrequency(omega_out));
    }
    Ok(finish(k_d - k_c1 + k_c2, omega_out, k_d))
}

/// Phase matching of a sequence's first data pulse: E1 when R1 is present,
/// E2 when C1 and C2 are present.
pub fn phase_match_sequence(
    seq: &PulseSequence,
) -> Result<(Option<PhaseMatchResult>, Option<PhaseMatchResult>), ProtocolError> {
    let d = seq.find(PulseLabel::D).ok_or(ProtocolError::NoDataPulse)?;
    let e1 = match seq.find(PulseLabel::R1) {
        Some(r1) => Some(phase_match_e1(&d.wave_vector(), &r1.wave_vector())?),
        None => None,
    };
    let e2 = match (seq.find(PulseLabel::C1), seq.find(PulseLabel::C2)) {
        (Some(c1), Some(c2)) => Some(phase_match_e2(
            &d.wave_vector(),
            &c1.wave_vector(),
            &c2.wave_vector(),
            d.omega,
            c1.omega,
            c2.omega,
        )?),
        _ => None,
    };
    Ok((e1, e2))
}
