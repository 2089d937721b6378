use std::f64::consts::PI;

use nalgebra::Vector3;

use super::timing::{predict_sequence, TimingOptions};
use super::ProtocolError;
use crate::bloch::{carrier_from_wavelength_nm, Channel, Pulse, PulseLabel, DEFAULT_WAVELENGTH_NM};

/// Which protocol a sequence implements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolTag {
    /// Data pulse(s) followed by one rephasing pulse.
    TwoPulseEcho,
    /// Data, double rephasing (R1, R2) and two deshelving controls (C1, C2).
    ApcDoubleRephase,
    Custom,
}

/// Pulses ordered by start time.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    pulses: Vec<Pulse>,
    tag: ProtocolTag,
}

impl PulseSequence {
    pub fn new(mut pulses: Vec<Pulse>, tag: ProtocolTag) -> Self {
        pulses.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
        PulseSequence { pulses, tag }
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn tag(&self) -> ProtocolTag {
        self.tag
    }

    /// First pulse carrying `label`.
    pub fn find(&self, label: PulseLabel) -> Option<&Pulse> {
        self.pulses.iter().find(|p| p.label == label)
    }

    pub fn data_pulses(&self) -> impl Iterator<Item = &Pulse> {
        self.pulses.iter().filter(|p| p.label == PulseLabel::D)
    }

    pub fn end_time(&self) -> f64 {
        self.pulses.iter().map(Pulse::t_end).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Same pulses with `pred` ones removed.
    pub fn without(&self, pred: impl Fn(&Pulse) -> bool) -> Self {
        let pulses = self.pulses.iter().filter(|p| !pred(p)).cloned().collect();
        PulseSequence::new(pulses, ProtocolTag::Custom)
    }
}

/// Area (rad) and duration (μs) of one pulse role.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseShape {
    pub area: f64,
    pub duration: f64,
}

/// Per-role pulse shapes and beam geometry used by the sequence builders.
///
/// The default is the published parameter set: a π/10, 1 μs data pulse and
/// 100 ns π pulses for R1, R2, C1, C2. Beams D, R1, R2 and C1 propagate along
/// +x and C2 along −x, so the second echo is emitted backward.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceShape {
    pub data: PulseShape,
    pub r1: PulseShape,
    pub r2: PulseShape,
    pub c1: PulseShape,
    pub c2: PulseShape,
    pub directions: Directions,
    /// Carrier of channel A (rad/s).
    pub omega_a: f64,
    /// Carrier of channel B (rad/s).
    pub omega_b: f64,
}

/// Unit propagation directions per pulse role.
#[derive(Clone, Debug, PartialEq)]
pub struct Directions {
    pub d: Vector3<f64>,
    pub r1: Vector3<f64>,
    pub r2: Vector3<f64>,
    pub c1: Vector3<f64>,
    pub c2: Vector3<f64>,
}

impl Default for Directions {
    fn default() -> Self {
        Directions {
            d: Vector3::x(),
            r1: Vector3::x(),
            r2: Vector3::x(),
            c1: Vector3::x(),
            c2: -Vector3::x(),
        }
    }
}

impl Default for SequenceShape {
    fn default() -> Self {
        let pi = PulseShape {
            area: PI,
            duration: 0.1,
        };
        let omega = carrier_from_wavelength_nm(DEFAULT_WAVELENGTH_NM);
        SequenceShape {
            data: PulseShape {
                area: PI / 10.0,
                duration: 1.0,
            },
            r1: pi,
            r2: pi,
            c1: pi,
            c2: pi,
            directions: Directions::default(),
            omega_a: omega,
            omega_b: omega,
        }
    }
}

impl SequenceShape {
    fn pulse(&self, label: PulseLabel, t_start: f64) -> Pulse {
        let (shape, dir, channel) = match label {
            PulseLabel::D | PulseLabel::Custom => (self.data, self.directions.d, Channel::A),
            PulseLabel::R1 => (self.r1, self.directions.r1, Channel::A),
            PulseLabel::R2 => (self.r2, self.directions.r2, Channel::A),
            PulseLabel::C1 => (self.c1, self.directions.c1, Channel::B),
            PulseLabel::C2 => (self.c2, self.directions.c2, Channel::B),
        };
        let omega = match channel {
            Channel::A => self.omega_a,
            Channel::B => self.omega_b,
        };
        Pulse::new(channel, label, t_start, shape.duration, shape.area)
            .with_direction(dir)
            .with_omega(omega)
    }
}

/// Start times (μs) of the double-rephasing protocol. Several data starts
/// make a data train.
#[derive(Clone, Debug, PartialEq)]
pub struct ApcTimings {
    pub data: Vec<f64>,
    pub r1: f64,
    pub r2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl ApcTimings {
    /// Same protocol with R1 moved to `r1`.
    pub fn with_r1(&self, r1: f64) -> Self {
        ApcTimings { r1, ..self.clone() }
    }

    /// R1 moved to `r1`, and R2, C1, C2 moved by the same amount.
    pub fn shifted_from_r1(&self, r1: f64) -> Self {
        let shift = r1 - self.r1;
        ApcTimings {
            data: self.data.clone(),
            r1,
            r2: self.r2 + shift,
            c1: self.c1 + shift,
            c2: self.c2 + shift,
        }
    }
}

fn build_checked(pulses: Vec<Pulse>, tag: ProtocolTag) -> Result<PulseSequence, ProtocolError> {
    for p in &pulses {
        p.check()?;
    }
    // strict start order in the given role order
    for w in pulses.windows(2) {
        if !(w[1].t_start > w[0].t_start) {
            return Err(ProtocolError::Ordering {
                earlier: w[0].label,
                earlier_t: w[0].t_start,
                later: w[1].label,
                later_t: w[1].t_start,
            });
        }
    }
    let seq = PulseSequence::new(pulses, tag);
    if let Some((a, b)) = first_overlap(seq.pulses()) {
        return Err(ProtocolError::Overlap {
            channel: a.channel,
            first: a.label,
            first_t: a.t_start,
            second: b.label,
            second_t: b.t_start,
        });
    }
    Ok(seq)
}

fn data_pulses(starts: &[f64], shape: &SequenceShape) -> Result<Vec<Pulse>, ProtocolError> {
    if starts.is_empty() {
        return Err(ProtocolError::NoDataPulse);
    }
    Ok(starts.iter().map(|&t| shape.pulse(PulseLabel::D, t)).collect())
}

/// Data pulse(s) then R1, all on channel A.
pub fn make_two_pulse_sequence(
    data: &[f64],
    t_r1: f64,
    shape: &SequenceShape,
) -> Result<PulseSequence, ProtocolError> {
    let mut pulses = data_pulses(data, shape)?;
    pulses.push(shape.pulse(PulseLabel::R1, t_r1));
    build_checked(pulses, ProtocolTag::TwoPulseEcho)
}

/// D… R1 R2 on channel A, C1 C2 on channel B, in strict time order.
pub fn make_apc_sequence(timings: &ApcTimings, shape: &SequenceShape) -> Result<PulseSequence, ProtocolError> {
    let mut pulses = data_pulses(&timings.data, shape)?;
    for (label, t) in [
        (PulseLabel::R1, timings.r1),
        (PulseLabel::R2, timings.r2),
        (PulseLabel::C1, timings.c1),
        (PulseLabel::C2, timings.c2),
    ] {
        pulses.push(shape.pulse(label, t));
    }
    build_checked(pulses, ProtocolTag::ApcDoubleRephase)
}

fn first_overlap(pulses: &[Pulse]) -> Option<(&Pulse, &Pulse)> {
    for (i, a) in pulses.iter().enumerate() {
        for b in &pulses[i + 1..] {
            if a.channel == b.channel && b.t_start < a.t_end() - 1e-12 && a.t_start < b.t_end() - 1e-12 {
                return Some((a, b));
            }
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// One validation result.
#[derive(Clone, Debug, PartialEq)]
pub struct Finding {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
}

impl Finding {
    fn error(code: &'static str, message: String) -> Self {
        Finding {
            severity: Severity::Error,
            code,
            message,
        }
    }

    fn warning(code: &'static str, message: String) -> Self {
        Finding {
            severity: Severity::Warning,
            code,
            message,
        }
    }
}

pub fn has_errors(findings: &[Finding]) -> bool {
    findings.iter().any(|f| f.severity == Severity::Error)
}

const AREA_TOL: f64 = 1e-6;

/// Deterministic list of problems with `seq`; empty means valid.
pub fn validate_sequence(seq: &PulseSequence, opts: &TimingOptions) -> Vec<Finding> {
    let mut out = Vec::new();
    for p in seq.pulses() {
        if let Err(e) = p.check() {
            out.push(Finding::error("pulse", e.to_string()));
        }
    }
    let pulses = seq.pulses();
    for (i, a) in pulses.iter().enumerate() {
        for b in &pulses[i + 1..] {
            if a.channel == b.channel && b.t_start < a.t_end() - 1e-12 && a.t_start < b.t_end() - 1e-12 {
                out.push(Finding::error(
                    "overlap",
                    format!(
                        "pulses {} (t = {}) and {} (t = {}) overlap on channel {}",
                        a.label, a.t_start, b.label, b.t_start, a.channel
                    ),
                ));
            }
        }
    }

    let required: &[PulseLabel] = match seq.tag() {
        ProtocolTag::Custom => return out,
        ProtocolTag::TwoPulseEcho => &[PulseLabel::R1],
        ProtocolTag::ApcDoubleRephase => &[PulseLabel::R1, PulseLabel::R2, PulseLabel::C1, PulseLabel::C2],
    };
    check_roles(seq, required, &mut out);
    if has_errors(&out) {
        return out;
    }

    if seq.tag() == ProtocolTag::ApcDoubleRephase {
        match predict_sequence(seq, opts) {
            Ok(predictions) => {
                for (i, p) in predictions.iter().enumerate() {
                    if p.halted {
                        out.push(Finding::warning(
                            "halt",
                            format!(
                                "rephasing halt, no E2 expected for data pulse #{i}: delay {:.4} us exceeds bound {:.4} us",
                                p.delta_t.unwrap_or(f64::NAN),
                                p.halt_bound.unwrap_or(f64::NAN)
                            ),
                        ));
                    }
                }
            }
            Err(e) => out.push(Finding::error("timing", e.to_string())),
        }
    }
    out
}

fn check_roles(seq: &PulseSequence, required: &[PulseLabel], out: &mut Vec<Finding>) {
    let data: Vec<&Pulse> = seq.data_pulses().collect();
    if data.is_empty() {
        out.push(Finding::error("missing", "sequence has no data pulse".into()));
    }
    for d in &data {
        if d.channel != Channel::A {
            out.push(Finding::error("channel", format!("data pulse at t = {} must be on channel A", d.t_start)));
        }
        if seq.tag() == ProtocolTag::ApcDoubleRephase && d.area >= PI / 2.0 {
            out.push(Finding::warning(
                "area",
                format!("data pulse at t = {} has area {:.4} rad >= pi/2", d.t_start, d.area),
            ));
        }
    }

    let mut previous: Option<&Pulse> = data.last().copied();
    for &label in required {
        let found: Vec<&Pulse> = seq.pulses().iter().filter(|p| p.label == label).collect();
        let p = match found.as_slice() {
            [p] => *p,
            [] => {
                out.push(Finding::error("missing", format!("sequence has no {label} pulse")));
                continue;
            }
            _ => {
                out.push(Finding::error("duplicate", format!("sequence has {} {label} pulses", found.len())));
                continue;
            }
        };
        let want = match label {
            PulseLabel::C1 | PulseLabel::C2 => Channel::B,
            _ => Channel::A,
        };
        if p.channel != want {
            out.push(Finding::error("channel", format!("{label} must be on channel {want}")));
        }
        if (p.area - PI).abs() > AREA_TOL {
            let what = match label {
                PulseLabel::R1 | PulseLabel::R2 => "non-ideal rephasing",
                _ => "non-ideal control",
            };
            out.push(Finding::warning(
                "area",
                format!("{what}: {label} area is {:.4} rad, expected pi", p.area),
            ));
        }
        if let Some(prev) = previous {
            if !(p.t_start > prev.t_start) || (label == PulseLabel::R1 && prev.t_end() > p.t_start + 1e-12) {
                out.push(Finding::error(
                    "order",
                    format!("{label} (t = {}) must follow {} (t = {})", p.t_start, prev.label, prev.t_start),
                ));
            }
        }
        previous = Some(p);
    }
}
