use super::sequence::{ProtocolTag, PulseSequence};
use super::ProtocolError;
use crate::bloch::{Pulse, PulseLabel};

/// Which instant of a pulse counts as its arrival time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TimeReference {
    #[default]
    Center,
    LeadingEdge,
}

impl TimeReference {
    pub fn of(self, p: &Pulse) -> f64 {
        match self {
            TimeReference::Center => p.center(),
            TimeReference::LeadingEdge => p.t_start,
        }
    }
}

/// Options for the analytic echo-time predictions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TimingOptions {
    pub reference: TimeReference,
    /// Largest C1 delay δT (μs) that still yields E2. `None` uses
    /// T_R2 − T_E1, the remaining rephasing time after R2.
    pub halt_bound: Option<f64>,
}

/// A predicted time with an optional warning.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub time: f64,
    pub warning: Option<String>,
}

/// Conventional two-pulse echo time 2·T_R1 − T_D.
pub fn predict_e1_time(t_d: f64, t_r1: f64) -> Result<Prediction, ProtocolError> {
    if !(t_d.is_finite() && t_r1.is_finite()) {
        return Err(ProtocolError::NonFinite);
    }
    if t_r1 < t_d {
        return Err(ProtocolError::RephaseBeforeData { t_d, t_r1 });
    }
    let warning = (t_r1 == t_d).then(|| "rephasing pulse coincides with data pulse; echo is degenerate".to_string());
    Ok(Prediction {
        time: 2.0 * t_r1 - t_d,
        warning,
    })
}

/// Second-echo time and whether the halt condition suppresses it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct E2Prediction {
    pub time: f64,
    pub halted: bool,
    pub bound: f64,
}

/// T_E2 = T_C2 + (T_R2 − T_E1) − δT, evaluated verbatim.
///
/// `halted` is set when δT exceeds `halt_bound` (default T_R2 − T_E1).
pub fn predict_e2_time(
    t_c2: f64,
    t_r2: f64,
    t_e1: f64,
    delta_t: f64,
    halt_bound: Option<f64>,
) -> Result<E2Prediction, ProtocolError> {
    let all = [t_c2, t_r2, t_e1, delta_t];
    if all.iter().any(|x| !x.is_finite()) || halt_bound.is_some_and(|b| !b.is_finite()) {
        return Err(ProtocolError::NonFinite);
    }
    let bound = halt_bound.unwrap_or(t_r2 - t_e1);
    Ok(E2Prediction {
        time: t_c2 + (t_r2 - t_e1) - delta_t,
        halted: delta_t > bound,
        bound,
    })
}

/// Predicted echo times for one data pulse of a sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingPrediction {
    pub t_d: f64,
    pub t_r1: f64,
    pub t_r2: Option<f64>,
    pub t_c1: Option<f64>,
    pub t_c2: Option<f64>,
    pub t_e1: f64,
    pub t_e2: Option<f64>,
    /// C1 delay after R2 (μs).
    pub delta_t: Option<f64>,
    pub halt_bound: Option<f64>,
    pub halted: bool,
}

impl TimingPrediction {
    /// E2 time unless the halt condition applies.
    pub fn emitted_e2(&self) -> Option<f64> {
        self.t_e2.filter(|_| !self.halted)
    }
}

/// One prediction per data pulse, in time order.
///
/// δT is measured from R2 to C1: the coherence is parked in the spin state
/// for C2 − C1 and rephases T_R2 − T_E1 after R2 in optical time, which
/// makes the E2 relation exact for that choice.
pub fn predict_sequence(seq: &PulseSequence, opts: &TimingOptions) -> Result<Vec<TimingPrediction>, ProtocolError> {
    let at = |label: PulseLabel| seq.find(label).map(|p| opts.reference.of(p));
    let t_r1 = at(PulseLabel::R1).ok_or(ProtocolError::MissingPulse(PulseLabel::R1))?;
    let apc = seq.tag() == ProtocolTag::ApcDoubleRephase;
    let (t_r2, t_c1, t_c2) = if apc {
        let need = |l| at(l).ok_or(ProtocolError::MissingPulse(l));
        (Some(need(PulseLabel::R2)?), Some(need(PulseLabel::C1)?), Some(need(PulseLabel::C2)?))
    } else {
        (None, None, None)
    };
    let data: Vec<&Pulse> = seq.data_pulses().collect();
    if data.is_empty() {
        return Err(ProtocolError::NoDataPulse);
    }

    data.into_iter()
        .map(|d| {
            let t_d = opts.reference.of(d);
            let t_e1 = predict_e1_time(t_d, t_r1)?.time;
            let mut out = TimingPrediction {
                t_d,
                t_r1,
                t_r2,
                t_c1,
                t_c2,
                t_e1,
                t_e2: None,
                delta_t: None,
                halt_bound: None,
                halted: false,
            };
            if let (Some(r2), Some(c1), Some(c2)) = (t_r2, t_c1, t_c2) {
                let delta_t = c1 - r2;
                let e2 = predict_e2_time(c2, r2, t_e1, delta_t, opts.halt_bound)?;
                out.t_e2 = Some(e2.time);
                out.delta_t = Some(delta_t);
                out.halt_bound = Some(e2.bound);
                out.halted = e2.halted;
            }
            Ok(out)
        })
        .collect()
}
