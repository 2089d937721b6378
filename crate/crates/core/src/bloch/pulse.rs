use std::fmt;

use nalgebra::Vector3;

use super::DynamicsError;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default carrier wavelength (nm), the Pr:YSO ³H₄–¹D₂ line.
pub const DEFAULT_WAVELENGTH_NM: f64 = 605.977;

/// Angular carrier frequency (rad/s) for a vacuum wavelength in nm.
pub fn carrier_from_wavelength_nm(nm: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (nm * 1e-9)
}

/// Optical drive channel of the Λ system.
///
/// Channel A couples |1⟩–|3⟩, channel B couples |2⟩–|3⟩.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    A,
    B,
}

impl Channel {
    /// Index of the lower level driven by this channel (0 for |1⟩, 1 for |2⟩).
    pub(crate) fn lower(self) -> usize {
        match self {
            Channel::A => 0,
            Channel::B => 1,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::A => f.write_str("A"),
            Channel::B => f.write_str("B"),
        }
    }
}

/// Role of a pulse in the echo protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PulseLabel {
    /// Data pulse.
    D,
    /// First rephasing pulse.
    R1,
    /// Second rephasing pulse.
    R2,
    /// First control (deshelving) pulse.
    C1,
    /// Second control pulse.
    C2,
    Custom,
}

impl fmt::Display for PulseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PulseLabel::D => "D",
            PulseLabel::R1 => "R1",
            PulseLabel::R2 => "R2",
            PulseLabel::C1 => "C1",
            PulseLabel::C2 => "C2",
            PulseLabel::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// A square drive segment.
///
/// Times are in μs, the area in radians. The Rabi amplitude during the
/// pulse is `area / duration`. `k_dir` and `omega` only enter the
/// phase-matching algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct Pulse {
    pub channel: Channel,
    pub label: PulseLabel,
    pub t_start: f64,
    pub duration: f64,
    pub area: f64,
    pub carrier_phase: f64,
    pub k_dir: Vector3<f64>,
    /// Carrier angular frequency (rad/s).
    pub omega: f64,
}

impl Pulse {
    /// A pulse propagating along +x at the default carrier frequency.
    pub fn new(channel: Channel, label: PulseLabel, t_start: f64, duration: f64, area: f64) -> Self {
        Pulse {
            channel,
            label,
            t_start,
            duration,
            area,
            carrier_phase: 0.0,
            k_dir: Vector3::x(),
            omega: carrier_from_wavelength_nm(DEFAULT_WAVELENGTH_NM),
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.carrier_phase = phase;
        self
    }

    pub fn with_direction(mut self, k_dir: Vector3<f64>) -> Self {
        self.k_dir = k_dir;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }

    pub fn center(&self) -> f64 {
        self.t_start + 0.5 * self.duration
    }

    /// Rabi angular frequency in rad/s.
    pub fn rabi_rad_s(&self) -> f64 {
        self.area / (self.duration * 1e-6)
    }

    /// Wave vector in rad/m.
    pub fn wave_vector(&self) -> Vector3<f64> {
        self.k_dir * (self.omega / SPEED_OF_LIGHT)
    }

    pub fn check(&self) -> Result<(), DynamicsError> {
        let bad = |field: &'static str, reason: String| DynamicsError::InvalidPulse {
            label: self.label,
            t_start: self.t_start,
            field,
            reason,
        };
        if !(self.t_start.is_finite()) {
            return Err(bad("t_start", "must be finite".into()));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(bad("duration", format!("must be > 0, got {}", self.duration)));
        }
        if !(self.area >= 0.0 && self.area.is_finite()) {
            return Err(bad("area", format!("must be >= 0, got {}", self.area)));
        }
        if !self.carrier_phase.is_finite() {
            return Err(bad("carrier_phase", "must be finite".into()));
        }
        if (self.k_dir.norm() - 1.0).abs() > 1e-9 {
            return Err(bad("k_dir", format!("must be a unit vector, norm is {}", self.k_dir.norm())));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(bad("omega", format!("must be > 0, got {}", self.omega)));
        }
        Ok(())
    }

    /// True when the pulse drives the whole of `[a, b]`.
    pub(crate) fn covers(&self, a: f64, b: f64) -> bool {
        let mid = 0.5 * (a + b);
        self.t_start < mid && mid < self.t_end()
    }
}
