use super::echo::{default_windows, detect_echoes, EchoEvent};
use super::grid::DetuningGrid;
use super::run::{run_ensemble, EnsembleConfig};
use super::EnsembleError;
use crate::bloch::AtomParams;
use crate::protocol::{make_apc_sequence, predict_sequence, ApcTimings, SequenceShape, TimingOptions};

/// How the rest of the sequence follows a moved R1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScanMode {
    /// R2, C1 and C2 move with R1, keeping the R1→R2 delay fixed. E2 then
    /// stays at the same time and carries the same optical decay.
    #[default]
    ShiftTail,
    /// Only R1 moves; R2 and the controls keep their absolute times. The E2
    /// amplitude then scales as exp(−2γ₃₁(T_R2 − T_R1)).
    FixedTail,
}

/// Base protocol of a rephasing-delay scan.
#[derive(Clone, Debug)]
pub struct ScanSetup {
    pub atom: AtomParams,
    pub timings: ApcTimings,
    pub shape: SequenceShape,
    pub grid: DetuningGrid,
    pub config: EnsembleConfig,
    pub timing: TimingOptions,
    pub threshold: f64,
    pub half_width: f64,
    pub mode: ScanMode,
}

/// Echoes found for one R1 time. Labels refer to the first data pulse.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanPoint {
    pub predicted_e1: f64,
    pub predicted_e2: Option<f64>,
    pub e1: Option<EchoEvent>,
    pub e2: Option<EchoEvent>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub t_r1: f64,
    pub outcome: Result<ScanPoint, EnsembleError>,
}

impl ScanRow {
    pub fn e1_abs(&self) -> Option<f64> {
        self.outcome.as_ref().ok()?.e1.as_ref().map(|e| e.amplitude.norm())
    }

    pub fn e2_abs(&self) -> Option<f64> {
        self.outcome.as_ref().ok()?.e2.as_ref().map(|e| e.amplitude.norm())
    }
}

fn scan_point(setup: &ScanSetup, t_r1: f64) -> Result<ScanPoint, EnsembleError> {
    let timings = match setup.mode {
        ScanMode::ShiftTail => setup.timings.shifted_from_r1(t_r1),
        ScanMode::FixedTail => setup.timings.with_r1(t_r1),
    };
    let seq = make_apc_sequence(&timings, &setup.shape)?;
    let predictions = predict_sequence(&seq, &setup.timing)?;

    let latest = predictions
        .iter()
        .flat_map(|p| [Some(p.t_e1), p.emitted_e2()])
        .flatten()
        .fold(seq.end_time(), f64::max);
    let mut cfg = setup.config;
    cfg.t1 = cfg.t1.max(latest + setup.half_width + 1.0);

    let result = run_ensemble(&setup.atom, &seq, &setup.grid, &cfg)?;
    let windows = default_windows(&predictions, setup.half_width, cfg.t0, cfg.t1);
    let events = detect_echoes(&result.times, &result.polarization, &windows, setup.threshold)?;

    let single = predictions.len() == 1;
    let pick = |kind: &str| {
        let label = if single { kind.to_string() } else { format!("{kind}a") };
        events.iter().find(|e| e.window_label == label).cloned()
    };
    Ok(ScanPoint {
        predicted_e1: predictions[0].t_e1,
        predicted_e2: predictions[0].emitted_e2(),
        e1: pick("E1"),
        e2: pick("E2"),
    })
}

/// One ensemble simulation per R1 start time. A row whose sequence is
/// invalid records the error; the scan continues.
pub fn scan_rephase_delay(setup: &ScanSetup, r1_times: &[f64]) -> Vec<ScanRow> {
    r1_times
        .iter()
        .map(|&t_r1| ScanRow {
            t_r1,
            outcome: scan_point(setup, t_r1),
        })
        .collect()
}
