use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::ConfigError;
use crate::bloch::{
    carrier_from_wavelength_nm, AtomParams, Channel, Decay, DensityMatrix, DynamicsError, Integrator, Pulse,
    PulseLabel, DEFAULT_WAVELENGTH_NM,
};
use crate::ensemble::{build_grid, default_windows, DetuningGrid, EchoWindow, EnsembleConfig, ScanMode};
use crate::protocol::{
    make_apc_sequence, make_two_pulse_sequence, predict_sequence, validate_sequence, ApcTimings, Directions,
    ProtocolTag, PulseSequence, PulseShape, SequenceShape, Severity, TimeReference, TimingOptions,
    TimingPrediction,
};

/// Schema version understood by this build.
pub const CONFIG_VERSION: u32 = 1;

const PRESETS: [(&str, &str); 3] = [
    ("fig2", include_str!("../../configs/fig2.json")),
    ("fig3-blue", include_str!("../../configs/fig3-blue.json")),
    ("fig3-red", include_str!("../../configs/fig3-red.json")),
];

/// Names accepted by the top-level `preset` key.
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// The fully resolved job of a named preset.
pub fn preset(name: &str) -> Option<SimJob> {
    let text = PRESETS.iter().find(|(n, _)| *n == name)?.1;
    Some(parse_config(text).expect("shipped preset is valid"))
}

/// A complete simulation job. Times are μs, frequencies kHz, pulse areas in
/// units of π.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimJob {
    pub version: u32,
    #[serde(default)]
    pub atom: AtomSpec,
    #[serde(default)]
    pub grid: GridSpec,
    pub sequence: SequenceSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub echo: EchoSpec,
    #[serde(default)]
    pub timing: TimingSpec,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default)]
    pub outputs: Vec<OutputSpec>,
    /// Worker threads for the ensemble, 0 for automatic.
    #[serde(default)]
    pub threads: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomSpec {
    pub delta_opt_khz: f64,
    pub delta_spin_khz: f64,
    pub decay: DecaySpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySpec {
    pub pop31: f64,
    pub pop32: f64,
    pub pop21: f64,
    pub coh31: f64,
    pub coh32: f64,
    pub coh21: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub fwhm_khz: f64,
    pub span_khz: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            fwhm_khz: 60.0,
            span_khz: 100.0,
            n: 201,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Apc,
    TwoPulse,
}

/// Either a protocol with start times, or an explicit pulse list.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<TimingsSpec>,
    #[serde(default, skip_serializing_if = "ShapesSpec::is_empty")]
    pub shapes: ShapesSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_a_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_b_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulses: Option<Vec<PulseSpec>>,
}

/// Pulse start times. `data_us` takes one number or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingsSpec {
    #[serde(deserialize_with = "one_or_many")]
    pub data_us: Vec<f64>,
    pub r1_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2_us: Option<f64>,
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    match OneOrMany::deserialize(d) {
        Ok(OneOrMany::One(x)) => Ok(vec![x]),
        Ok(OneOrMany::Many(v)) => Ok(v),
        Err(_) => Err(serde::de::Error::custom("expected a number or a list of numbers")),
    }
}

/// Per-role overrides of area, duration and beam direction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapesSpec {
    #[serde(skip_serializing_if = "ShapeSpec::is_empty")]
    pub data: ShapeSpec,
    #[serde(skip_serializing_if = "ShapeSpec::is_empty")]
    pub r1: ShapeSpec,
    #[serde(skip_serializing_if = "ShapeSpec::is_empty")]
    pub r2: ShapeSpec,
    #[serde(skip_serializing_if = "ShapeSpec::is_empty")]
    pub c1: ShapeSpec,
    #[serde(skip_serializing_if = "ShapeSpec::is_empty")]
    pub c2: ShapeSpec,
}

impl ShapesSpec {
    fn is_empty(&self) -> bool {
        *self == ShapesSpec::default()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub area_pi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_us: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 3]>,
}

impl ShapeSpec {
    fn is_empty(&self) -> bool {
        *self == ShapeSpec::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelName {
    D,
    R1,
    R2,
    C1,
    C2,
    #[serde(rename = "custom")]
    Custom,
}

impl From<LabelName> for PulseLabel {
    fn from(l: LabelName) -> Self {
        match l {
            LabelName::D => PulseLabel::D,
            LabelName::R1 => PulseLabel::R1,
            LabelName::R2 => PulseLabel::R2,
            LabelName::C1 => PulseLabel::C1,
            LabelName::C2 => PulseLabel::C2,
            LabelName::Custom => PulseLabel::Custom,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelName {
    A,
    B,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub label: LabelName,
    pub channel: ChannelName,
    pub t_start_us: f64,
    pub duration_us: f64,
    pub area_pi: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default = "plus_x")]
    pub direction: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
}

fn plus_x() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSpec {
    pub dt_us: f64,
    pub stride: usize,
    pub t_start_us: f64,
    /// Automatic when absent: one μs past the last expected echo window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end_us: Option<f64>,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        let i = Integrator::default();
        IntegratorSpec {
            dt_us: i.dt,
            stride: i.stride,
            t_start_us: 0.0,
            t_end_us: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EchoSpec {
    pub threshold: f64,
    pub half_width_us: f64,
    /// Explicit search windows; derived from the timing prediction when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<WindowSpec>>,
}

impl Default for EchoSpec {
    fn default() -> Self {
        EchoSpec {
            threshold: crate::ensemble::DEFAULT_THRESHOLD,
            half_width_us: crate::ensemble::DEFAULT_HALF_WIDTH,
            windows: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub label: String,
    pub t_lo_us: f64,
    pub t_hi_us: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceName {
    #[default]
    Center,
    LeadingEdge,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSpec {
    pub reference: ReferenceName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub halt_bound_us: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanModeName {
    #[default]
    ShiftTail,
    FixedTail,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSpec {
    pub mode: ScanModeName,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub r1_us: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Timeseries,
    Echoes,
    Scan,
    Bloch,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub kind: OutputKind,
    pub path: String,
    #[serde(default)]
    pub format: Format,
}

/// One problem found in a config document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigIssue {
    /// Location in the document, e.g. `sequence.pulses[2].duration_us`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Default)]
struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ConfigIssue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.push(path, format!("must be a finite number > 0, got {v}"));
        }
    }

    fn non_negative(&mut self, path: &str, v: f64) {
        if !(v >= 0.0 && v.is_finite()) {
            self.push(path, format!("must be a finite number >= 0, got {v}"));
        }
    }

    fn finite(&mut self, path: &str, v: f64) {
        if !v.is_finite() {
            self.push(path, format!("must be finite, got {v}"));
        }
    }
}

/// Everything a job needs to run, built from a validated [`SimJob`].
#[derive(Clone, Debug)]
pub struct Plan {
    pub atom: AtomParams,
    pub grid: DetuningGrid,
    pub sequence: PulseSequence,
    pub timing: TimingOptions,
    pub predictions: Vec<TimingPrediction>,
    pub config: EnsembleConfig,
    pub windows: Vec<EchoWindow>,
    pub threshold: f64,
    pub half_width: f64,
    /// Start times and shapes when the job uses the double-rephasing preset.
    pub apc: Option<(ApcTimings, SequenceShape)>,
    pub scan_mode: ScanMode,
    pub warnings: Vec<String>,
}

/// Parses and validates a config document.
///
/// A top-level `"preset"` names a shipped job; the remaining keys are merged
/// over it, objects key by key. An explicit `sequence.pulses` list replaces
/// the preset's sequence.
pub fn parse_config(text: &str) -> Result<SimJob, ConfigError> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if let Value::Object(map) = &mut doc {
        if let Some(name) = map.remove("preset") {
            let base = match name.as_str().and_then(|n| PRESETS.iter().find(|(p, _)| *p == n)) {
                Some((_, text)) => serde_json::from_str::<Value>(text).expect("shipped preset is JSON"),
                None => {
                    return Err(ConfigError::Invalid(vec![ConfigIssue {
                        path: "preset".into(),
                        message: format!("unknown preset {name}, expected one of {}", preset_names().join(", ")),
                    }]))
                }
            };
            let replace_sequence = map
                .get("sequence")
                .and_then(|s| s.get("pulses"))
                .is_some();
            let mut merged = base;
            if replace_sequence {
                if let Value::Object(m) = &mut merged {
                    m.remove("sequence");
                }
            }
            merge(&mut merged, Value::Object(std::mem::take(map)));
            doc = merged;
        }
    }
    let job: SimJob = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        let message = match message.strip_prefix("unknown field") {
            Some(rest) => format!("unknown key{rest}"),
            None => message,
        };
        ConfigError::Invalid(vec![ConfigIssue {
            path: if path == "." { String::new() } else { path },
            message,
        }])
    })?;
    job.plan()?;
    Ok(job)
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn direction(v: [f64; 3], path: &str, issues: &mut Issues) -> Vector3<f64> {
    let k = Vector3::from(v);
    let n = k.norm();
    if !(n > 0.0 && n.is_finite()) {
        issues.push(path, "must be a finite non-zero vector");
        return Vector3::x();
    }
    k / n
}

fn wavelength(v: Option<f64>, path: &str, issues: &mut Issues) -> f64 {
    let nm = v.unwrap_or(DEFAULT_WAVELENGTH_NM);
    issues.positive(path, nm);
    carrier_from_wavelength_nm(if nm > 0.0 { nm } else { DEFAULT_WAVELENGTH_NM })
}

fn pulse_issue(path: &str, e: &DynamicsError) -> ConfigIssue {
    match e {
        DynamicsError::InvalidPulse { field, .. } => ConfigIssue {
            path: format!("{path}.{}", pulse_field_key(field)),
            message: e.to_string(),
        },
        _ => ConfigIssue {
            path: path.into(),
            message: e.to_string(),
        },
    }
}

fn pulse_field_key(field: &str) -> &str {
    match field {
        "t_start" => "t_start_us",
        "duration" => "duration_us",
        "area" => "area_pi",
        "carrier_phase" => "phase_rad",
        "k_dir" => "direction",
        "omega" => "wavelength_nm",
        other => other,
    }
}

impl SimJob {
    /// Canonical JSON text: sorted keys, outputs and thread count dropped.
    pub fn canonical_json(&self) -> String {
        let mut job = self.clone();
        job.outputs.clear();
        job.threads = 0;
        serde_json::to_value(&job).expect("job serializes").to_string()
    }

    /// SHA-256 of [`SimJob::canonical_json`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("job serializes")
    }

    /// Validates every section and builds the runnable pieces.
    pub fn plan(&self) -> Result<Plan, ConfigError> {
        let mut issues = Issues::default();
        let mut warnings = Vec::new();

        if self.version != CONFIG_VERSION {
            issues.push("version", format!("unsupported version {}, expected {CONFIG_VERSION}", self.version));
        }

        let a = &self.atom;
        issues.finite("atom.delta_opt_khz", a.delta_opt_khz);
        issues.finite("atom.delta_spin_khz", a.delta_spin_khz);
        let d = &a.decay;
        for (name, v) in [
            ("pop31", d.pop31),
            ("pop32", d.pop32),
            ("pop21", d.pop21),
            ("coh31", d.coh31),
            ("coh32", d.coh32),
            ("coh21", d.coh21),
        ] {
            issues.non_negative(&format!("atom.decay.{name}"), v);
        }
        let atom = AtomParams {
            delta_opt_khz: a.delta_opt_khz,
            delta_spin_khz: a.delta_spin_khz,
            decay: Decay {
                pop31: d.pop31,
                pop32: d.pop32,
                pop21: d.pop21,
                coh31: d.coh31,
                coh32: d.coh32,
                coh21: d.coh21,
            },
        };
        if let Ok(w) = atom.validate() {
            warnings.extend(w.into_iter().map(|m| format!("atom.decay: {m}")));
        }

        let g = &self.grid;
        issues.positive("grid.fwhm_khz", g.fwhm_khz);
        issues.positive("grid.span_khz", g.span_khz);
        if g.n == 0 {
            issues.push("grid.n", "must be >= 1");
        }
        let grid = build_grid(g.fwhm_khz, g.span_khz, g.n).ok();

        let timing = TimingOptions {
            reference: match self.timing.reference {
                ReferenceName::Center => TimeReference::Center,
                ReferenceName::LeadingEdge => TimeReference::LeadingEdge,
            },
            halt_bound: self.timing.halt_bound_us,
        };
        if let Some(b) = self.timing.halt_bound_us {
            issues.non_negative("timing.halt_bound_us", b);
        }

        let (sequence, apc) = self.build_sequence(&mut issues);
        let mut predictions = Vec::new();
        if let Some(seq) = &sequence {
            for f in validate_sequence(seq, &timing) {
                let where_ = if self.sequence.pulses.is_some() { "sequence.pulses" } else { "sequence" };
                match f.severity {
                    Severity::Error => issues.push(where_, f.message),
                    Severity::Warning => warnings.push(format!("{where_}: {}", f.message)),
                }
            }
            let predictable = seq.find(PulseLabel::R1).is_some() && seq.find(PulseLabel::D).is_some();
            match predict_sequence(seq, &timing).or_else(|e| if predictable { Err(e) } else { Ok(Vec::new()) }) {
                Ok(p) => predictions = p,
                Err(e) => issues.push("sequence", e.to_string()),
            }
        }

        let it = &self.integrator;
        issues.positive("integrator.dt_us", it.dt_us);
        if it.stride == 0 {
            issues.push("integrator.stride", "must be >= 1");
        }
        issues.finite("integrator.t_start_us", it.t_start_us);
        let e = &self.echo;
        if !(0.0..=1.0).contains(&e.threshold) {
            issues.push("echo.threshold", format!("must lie in [0, 1], got {}", e.threshold));
        }
        issues.positive("echo.half_width_us", e.half_width_us);

        let t0 = it.t_start_us;
        let t1 = match it.t_end_us {
            Some(t) => t,
            None => {
                let latest = predictions
                    .iter()
                    .flat_map(|p| [Some(p.t_e1), p.emitted_e2()])
                    .flatten()
                    .fold(sequence.as_ref().map_or(t0, |s| s.end_time()), f64::max);
                (latest + e.half_width_us.max(0.0) + 1.0).ceil()
            }
        };
        if !(t1.is_finite() && t1 > t0) {
            issues.push("integrator.t_end_us", format!("must be finite and > t_start_us, got {t1}"));
        }
        let integrator = Integrator {
            dt: it.dt_us,
            stride: it.stride.max(1),
        };
        if let Some(seq) = &sequence {
            if it.dt_us > 0.0 && t1 > t0 {
                let check = crate::bloch::check_request(&DensityMatrix::ground(), seq.pulses(), t0, t1, &integrator);
                if let Err(err @ DynamicsError::StepTooLarge { .. }) = check {
                    issues.push("integrator.dt_us", err.to_string());
                }
            }
        }

        let windows = match &e.windows {
            Some(ws) => {
                let mut labels = BTreeSet::new();
                let mut out = Vec::new();
                for (i, w) in ws.iter().enumerate() {
                    let path = format!("echo.windows[{i}]");
                    if w.label.is_empty() {
                        issues.push(format!("{path}.label"), "must not be empty");
                    } else if !labels.insert(w.label.clone()) {
                        issues.push(format!("{path}.label"), format!("duplicate label {}", w.label));
                    }
                    if !(w.t_lo_us < w.t_hi_us) {
                        issues.push(&path, "t_lo_us must be below t_hi_us");
                    } else if w.t_lo_us < t0 || w.t_hi_us > t1 {
                        issues.push(&path, format!("window lies outside the simulated span [{t0}, {t1}] us"));
                    }
                    out.push(EchoWindow::new(w.label.clone(), w.t_lo_us, w.t_hi_us));
                }
                let mut sorted: Vec<_> = out.iter().collect();
                sorted.sort_by(|a, b| a.t_lo.total_cmp(&b.t_lo));
                for p in sorted.windows(2) {
                    if p[1].t_lo < p[0].t_hi {
                        issues.push("echo.windows", format!("windows {} and {} overlap", p[0].label, p[1].label));
                    }
                }
                out
            }
            None => default_windows(&predictions, e.half_width_us, t0, t1),
        };

        for (i, r) in self.scan.r1_us.iter().enumerate() {
            issues.finite(&format!("scan.r1_us[{i}]"), *r);
        }
        let mut paths = BTreeSet::new();
        for (i, o) in self.outputs.iter().enumerate() {
            if o.path.is_empty() {
                issues.push(format!("outputs[{i}].path"), "must not be empty");
            } else if !paths.insert(o.path.as_str()) {
                issues.push(format!("outputs[{i}].path"), format!("duplicate output path {}", o.path));
            }
        }

        if !issues.0.is_empty() {
            return Err(ConfigError::Invalid(issues.0));
        }
        Ok(Plan {
            atom,
            grid: grid.expect("grid validated"),
            sequence: sequence.expect("sequence validated"),
            timing,
            predictions,
            config: EnsembleConfig {
                integrator,
                t0,
                t1,
                threads: self.threads,
            },
            windows,
            threshold: e.threshold,
            half_width: e.half_width_us,
            apc,
            scan_mode: match self.scan.mode {
                ScanModeName::ShiftTail => ScanMode::ShiftTail,
                ScanModeName::FixedTail => ScanMode::FixedTail,
            },
            warnings,
        })
    }

    fn build_sequence(&self, issues: &mut Issues) -> (Option<PulseSequence>, Option<(ApcTimings, SequenceShape)>) {
        let s = &self.sequence;
        match (&s.pulses, s.protocol) {
            (Some(_), Some(_)) => {
                issues.push("sequence", "give either protocol or pulses, not both");
                (None, None)
            }
            (None, None) => {
                issues.push("sequence", "missing protocol or pulses");
                (None, None)
            }
            (Some(list), None) => {
                for key in [
                    ("timings", s.timings.is_some()),
                    ("shapes", !s.shapes.is_empty()),
                    ("wavelength_a_nm", s.wavelength_a_nm.is_some()),
                    ("wavelength_b_nm", s.wavelength_b_nm.is_some()),
                ] {
                    if key.1 {
                        issues.push(format!("sequence.{}", key.0), "only used together with protocol");
                    }
                }
                (self.explicit_sequence(list, issues), None)
            }
            (None, Some(kind)) => self.protocol_sequence(kind, issues),
        }
    }

    fn explicit_sequence(&self, list: &[PulseSpec], issues: &mut Issues) -> Option<PulseSequence> {
        if list.is_empty() {
            issues.push("sequence.pulses", "must contain at least one pulse");
            return None;
        }
        let before = issues.0.len();
        let mut pulses = Vec::with_capacity(list.len());
        for (i, p) in list.iter().enumerate() {
            let path = format!("sequence.pulses[{i}]");
            let channel = match p.channel {
                ChannelName::A => Channel::A,
                ChannelName::B => Channel::B,
            };
            let dir = direction(p.direction, &format!("{path}.direction"), issues);
            let omega = wavelength(p.wavelength_nm, &format!("{path}.wavelength_nm"), issues);
            let pulse = Pulse::new(channel, p.label.into(), p.t_start_us, p.duration_us, p.area_pi * PI)
                .with_phase(p.phase_rad)
                .with_direction(dir)
                .with_omega(omega);
            if let Err(e) = pulse.check() {
                issues.0.push(pulse_issue(&path, &e));
            }
            pulses.push(pulse);
        }
        if issues.0.len() > before {
            return None;
        }
        let has = |l: PulseLabel| pulses.iter().any(|p| p.label == l);
        let tag = if [PulseLabel::R1, PulseLabel::R2, PulseLabel::C1, PulseLabel::C2].into_iter().all(has) {
            ProtocolTag::ApcDoubleRephase
        } else if has(PulseLabel::R1) {
            ProtocolTag::TwoPulseEcho
        } else {
            ProtocolTag::Custom
        };
        Some(PulseSequence::new(pulses, tag))
    }

    fn protocol_sequence(
        &self,
        kind: ProtocolKind,
        issues: &mut Issues,
    ) -> (Option<PulseSequence>, Option<(ApcTimings, SequenceShape)>) {
        let s = &self.sequence;
        let Some(t) = &s.timings else {
            issues.push("sequence.timings", "missing required field");
            return (None, None);
        };
        let before = issues.0.len();
        if t.data_us.is_empty() {
            issues.push("sequence.timings.data_us", "must contain at least one start time");
        }
        for (i, v) in t.data_us.iter().enumerate() {
            issues.finite(&format!("sequence.timings.data_us[{i}]"), *v);
        }
        issues.finite("sequence.timings.r1_us", t.r1_us);
        let tail = [("r2_us", t.r2_us), ("c1_us", t.c1_us), ("c2_us", t.c2_us)];
        for (name, v) in tail {
            let path = format!("sequence.timings.{name}");
            match (kind, v) {
                (ProtocolKind::Apc, None) => issues.push(path, "missing required field for protocol apc"),
                (ProtocolKind::Apc, Some(x)) => issues.finite(&path, x),
                (ProtocolKind::TwoPulse, Some(_)) => issues.push(path, "not used by protocol two_pulse"),
                (ProtocolKind::TwoPulse, None) => {}
            }
        }

        let defaults = SequenceShape::default();
        let dirs = Directions::default();
        let mut role = |name: &str, spec: &ShapeSpec, base: PulseShape, dir: Vector3<f64>| {
            let path = format!("sequence.shapes.{name}");
            let area = spec.area_pi.map_or(base.area, |a| a * PI);
            let duration = spec.duration_us.unwrap_or(base.duration);
            issues.non_negative(&format!("{path}.area_pi"), area);
            issues.positive(&format!("{path}.duration_us"), duration);
            let dir = spec.direction.map_or(dir, |v| direction(v, &format!("{path}.direction"), issues));
            (PulseShape { area, duration }, dir)
        };
        let sh = &s.shapes;
        let (data, d_dir) = role("data", &sh.data, defaults.data, dirs.d);
        let (r1, r1_dir) = role("r1", &sh.r1, defaults.r1, dirs.r1);
        let (r2, r2_dir) = role("r2", &sh.r2, defaults.r2, dirs.r2);
        let (c1, c1_dir) = role("c1", &sh.c1, defaults.c1, dirs.c1);
        let (c2, c2_dir) = role("c2", &sh.c2, defaults.c2, dirs.c2);
        if kind == ProtocolKind::TwoPulse {
            for (name, spec) in [("r2", &sh.r2), ("c1", &sh.c1), ("c2", &sh.c2)] {
                if !spec.is_empty() {
                    issues.push(format!("sequence.shapes.{name}"), "not used by protocol two_pulse");
                }
            }
        }
        let shape = SequenceShape {
            data,
            r1,
            r2,
            c1,
            c2,
            directions: Directions {
                d: d_dir,
                r1: r1_dir,
                r2: r2_dir,
                c1: c1_dir,
                c2: c2_dir,
            },
            omega_a: wavelength(s.wavelength_a_nm, "sequence.wavelength_a_nm", issues),
            omega_b: wavelength(s.wavelength_b_nm, "sequence.wavelength_b_nm", issues),
        };
        if issues.0.len() > before {
            return (None, None);
        }

        match kind {
            ProtocolKind::TwoPulse => match make_two_pulse_sequence(&t.data_us, t.r1_us, &shape) {
                Ok(seq) => (Some(seq), None),
                Err(e) => {
                    issues.push("sequence.timings", e.to_string());
                    (None, None)
                }
            },
            ProtocolKind::Apc => {
                let timings = ApcTimings {
                    data: t.data_us.clone(),
                    r1: t.r1_us,
                    r2: t.r2_us.unwrap_or_default(),
                    c1: t.c1_us.unwrap_or_default(),
                    c2: t.c2_us.unwrap_or_default(),
                };
                match make_apc_sequence(&timings, &shape) {
                    Ok(seq) => (Some(seq), Some((timings, shape))),
                    Err(e) => {
                        issues.push("sequence.timings", e.to_string());
                        (None, None)
                    }
                }
            }
        }
    }
}

/// Convenience for tests and examples: a job from a JSON value.
pub fn job_from_value(v: Value) -> Result<SimJob, ConfigError> {
    parse_config(&v.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal_apc() -> Value {
        json!({
            "version": 1,
            "sequence": {
                "protocol": "apc",
                "timings": { "data_us": 5.0, "r1_us": 20.0, "r2_us": 45.0, "c1_us": 45.5, "c2_us": 60.0 }
            }
        })
    }

    fn issues(e: ConfigError) -> Vec<ConfigIssue> {
        match e {
            ConfigError::Invalid(v) => v,
            other => panic!("expected validation issues, got {other:?}"),
        }
    }

    #[test]
    fn minimal_document_gives_five_pulses() {
        let job = job_from_value(minimal_apc()).unwrap();
        let plan = job.plan().unwrap();
        assert_eq!(plan.sequence.pulses().len(), 5);
        assert_eq!(plan.grid.n, 201);
        assert_eq!(plan.config.t1, 74.0);
    }

    #[test]
    fn presets_match_published_parameters() {
        let fig2 = preset("fig2").unwrap();
        assert_eq!(fig2.grid, GridSpec::default());
        let plan = fig2.plan().unwrap();
        assert_eq!(plan.sequence.pulses().len(), 5);
        assert_eq!(plan.config.t1, 80.0);
        let blue = preset("fig3-blue").unwrap().plan().unwrap();
        assert_eq!(blue.sequence.data_pulses().count(), 3);
        assert_eq!(blue.atom.decay.coh31, 2.0);
        let red = preset("fig3-red").unwrap().plan().unwrap();
        assert_eq!(red.atom.decay.coh32, 5.0);
    }

    #[test]
    fn preset_key_merges_overrides() {
        let job = job_from_value(json!({ "version": 1, "preset": "fig2", "grid": { "n": 11 } })).unwrap();
        assert_eq!(job.grid.n, 11);
        assert_eq!(job.grid.fwhm_khz, 60.0);
        assert_eq!(job.sequence, preset("fig2").unwrap().sequence);
        let e = issues(job_from_value(json!({ "version": 1, "preset": "fig9" })).unwrap_err());
        assert_eq!(e[0].path, "preset");
    }

    #[test]
    fn negative_duration_names_pulse_and_field() {
        let doc = json!({
            "version": 1,
            "sequence": { "pulses": [
                { "label": "D", "channel": "A", "t_start_us": 5.0, "duration_us": 1.0, "area_pi": 0.1 },
                { "label": "R1", "channel": "A", "t_start_us": 20.0, "duration_us": -1.0, "area_pi": 1.0 }
            ]}
        });
        let e = issues(job_from_value(doc).unwrap_err());
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].path, "sequence.pulses[1].duration_us");
        assert!(e[0].message.contains("R1"), "{}", e[0].message);
    }

    #[test]
    fn unknown_key_is_reported() {
        let mut doc = minimal_apc();
        doc["integrator"] = json!({ "durration": 1.0 });
        let e = issues(job_from_value(doc).unwrap_err());
        assert!(e[0].message.starts_with("unknown key"), "{}", e[0].message);
        assert!(e[0].path.starts_with("integrator"), "{}", e[0].path);
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_config("{ \"version\": 1,\n  oops }") {
            Err(ConfigError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_and_out_of_range_fields() {
        let e = issues(job_from_value(json!({ "version": 1 })).unwrap_err());
        assert!(e[0].message.contains("missing field `sequence`"), "{}", e[0].message);

        let mut doc = minimal_apc();
        doc["grid"] = json!({ "fwhm_khz": -1.0, "n": 0 });
        doc["version"] = json!(2);
        let paths: Vec<String> = issues(job_from_value(doc).unwrap_err()).into_iter().map(|i| i.path).collect();
        assert_eq!(paths, ["version", "grid.fwhm_khz", "grid.n"]);
    }

    #[test]
    fn protocol_specific_timings() {
        let mut doc = minimal_apc();
        doc["sequence"]["timings"].as_object_mut().unwrap().remove("c2_us");
        let e = issues(job_from_value(doc).unwrap_err());
        assert_eq!(e[0].path, "sequence.timings.c2_us");

        let doc = json!({ "version": 1, "sequence": { "protocol": "two_pulse",
            "timings": { "data_us": 5.0, "r1_us": 20.0, "c1_us": 3.0 } } });
        let e = issues(job_from_value(doc).unwrap_err());
        assert_eq!(e[0].path, "sequence.timings.c1_us");
    }

    #[test]
    fn ordering_and_step_errors() {
        let mut doc = minimal_apc();
        doc["sequence"]["timings"]["r2_us"] = json!(10.0);
        let e = issues(job_from_value(doc).unwrap_err());
        assert_eq!(e[0].path, "sequence.timings");

        let mut doc = minimal_apc();
        doc["integrator"] = json!({ "dt_us": 0.01 });
        let e = issues(job_from_value(doc).unwrap_err());
        assert_eq!(e[0].path, "integrator.dt_us");
        assert!(e[0].message.contains("R1"), "{}", e[0].message);
    }

    #[test]
    fn window_checks() {
        let mut doc = minimal_apc();
        doc["echo"] = json!({ "windows": [
            { "label": "E1", "t_lo_us": 30.0, "t_hi_us": 40.0 },
            { "label": "E2", "t_lo_us": 39.0, "t_hi_us": 45.0 }
        ]});
        let e = issues(job_from_value(doc).unwrap_err());
        assert_eq!(e[0].path, "echo.windows");
    }

    #[test]
    fn round_trip_of_preset() {
        for name in preset_names() {
            let job = preset(name).unwrap();
            assert_eq!(parse_config(&job.to_json_pretty()).unwrap(), job);
        }
    }

    #[test]
    fn hash_ignores_outputs_and_threads() {
        let a = preset("fig2").unwrap();
        let mut b = a.clone();
        b.threads = 4;
        b.outputs.push(OutputSpec {
            kind: OutputKind::Echoes,
            path: "x.csv".into(),
            format: Format::Csv,
        });
        assert_eq!(a.hash(), b.hash());
        b.grid.n = 11;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
