use std::f64::consts::TAU;

use super::DynamicsError;

/// Relaxation constants in kHz.
///
/// A value of 1 kHz is a direct exponential rate of 10³ s⁻¹; no 2π factor
/// is applied. `pop*` are population decay rates, `coh*` coherence decay
/// rates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Decay {
    /// |3⟩ → |1⟩
    pub pop31: f64,
    /// |3⟩ → |2⟩
    pub pop32: f64,
    /// |2⟩ → |1⟩
    pub pop21: f64,
    pub coh31: f64,
    pub coh32: f64,
    pub coh21: f64,
}

impl Decay {
    pub const NONE: Decay = Decay {
        pop31: 0.0,
        pop32: 0.0,
        pop21: 0.0,
        coh31: 0.0,
        coh32: 0.0,
        coh21: 0.0,
    };

    /// Optical decay with equal rates on both optical legs and a frozen spin
    /// transition.
    pub fn optical(population: f64, coherence: f64) -> Self {
        Decay {
            pop31: population,
            pop32: population,
            pop21: 0.0,
            coh31: coherence,
            coh32: coherence,
            coh21: 0.0,
        }
    }

    fn fields(&self) -> [(&'static str, f64); 6] {
        [
            ("pop31", self.pop31),
            ("pop32", self.pop32),
            ("pop21", self.pop21),
            ("coh31", self.coh31),
            ("coh32", self.coh32),
            ("coh21", self.coh21),
        ]
    }
}

/// Parameters of one atom of the ensemble.
///
/// Detunings are ordinary frequencies in kHz; they are converted to angular
/// frequencies only in [`AtomParams::rates`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AtomParams {
    pub delta_opt_khz: f64,
    pub delta_spin_khz: f64,
    pub decay: Decay,
}

/// SI view of [`AtomParams`]: detunings in rad/s, rates in s⁻¹.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub delta_opt: f64,
    pub delta_spin: f64,
    pub pop31: f64,
    pub pop32: f64,
    pub pop21: f64,
    pub coh31: f64,
    pub coh32: f64,
    pub coh21: f64,
}

const KHZ: f64 = 1e3;

impl AtomParams {
    pub fn new(delta_opt_khz: f64, decay: Decay) -> Self {
        AtomParams {
            delta_opt_khz,
            delta_spin_khz: 0.0,
            decay,
        }
    }

    /// Same atom with its optical detuning replaced.
    pub fn with_detuning(&self, delta_opt_khz: f64) -> Self {
        AtomParams {
            delta_opt_khz,
            ..*self
        }
    }

    pub fn rates(&self) -> Rates {
        let d = &self.decay;
        Rates {
            delta_opt: TAU * self.delta_opt_khz * KHZ,
            delta_spin: TAU * self.delta_spin_khz * KHZ,
            pop31: d.pop31 * KHZ,
            pop32: d.pop32 * KHZ,
            pop21: d.pop21 * KHZ,
            coh31: d.coh31 * KHZ,
            coh32: d.coh32 * KHZ,
            coh21: d.coh21 * KHZ,
        }
    }

    /// Rejects negative or non-finite values and returns physicality
    /// warnings (coherences decaying slower than their populations allow).
    pub fn validate(&self) -> Result<Vec<String>, DynamicsError> {
        if !self.delta_opt_khz.is_finite() || !self.delta_spin_khz.is_finite() {
            return Err(DynamicsError::InvalidAtom("detunings must be finite".into()));
        }
        for (name, value) in self.decay.fields() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(DynamicsError::InvalidAtom(format!(
                    "decay rate {name} must be finite and >= 0, got {value}"
                )));
            }
        }
        let d = &self.decay;
        let mut warnings = Vec::new();
        let excited_loss = d.pop31 + d.pop32;
        if d.coh31 < 0.5 * excited_loss {
            warnings.push(format!(
                "coh31 = {} kHz is below (pop31 + pop32)/2 = {} kHz",
                d.coh31,
                0.5 * excited_loss
            ));
        }
        if d.coh32 < 0.5 * (excited_loss + d.pop21) {
            warnings.push(format!(
                "coh32 = {} kHz is below (pop31 + pop32 + pop21)/2 = {} kHz",
                d.coh32,
                0.5 * (excited_loss + d.pop21)
            ));
        }
        Ok(warnings)
    }
}
