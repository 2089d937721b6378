use std::fmt::Write as _;
use std::time::Instant;

use super::config::{Plan, SimJob};
use super::output::{bloch_table, format_number as num, echo_table, scan_table, timeseries_table, Metadata, ResultBundle};
use super::{ConfigError, ConfigIssue, RunError};
use crate::bloch::{evolve, DensityMatrix, PulseLabel, Trajectory};
use crate::ensemble::{
    detect_echoes, run_ensemble, scan_rephase_delay, EchoEvent, EnsembleResult, ScanRow, ScanSetup,
};
use crate::protocol::phase_match_sequence;

/// Environment variable capping the ensemble worker count.
pub const THREADS_ENV: &str = "ECHO_SIM_THREADS";

/// Worker count after applying the environment cap. A cap of 0 leaves the
/// configured value alone; a configured 0 means automatic.
pub fn effective_threads(configured: usize, env: Option<&str>) -> Result<usize, ConfigError> {
    let Some(raw) = env else { return Ok(configured) };
    let cap: usize = raw.trim().parse().map_err(|_| {
        ConfigError::Invalid(vec![ConfigIssue {
            path: THREADS_ENV.into(),
            message: format!("expected a non-negative integer, got {raw:?}"),
        }])
    })?;
    Ok(match (cap, configured) {
        (0, c) => c,
        (n, 0) => n,
        (n, c) => n.min(c),
    })
}

pub struct SimulationOutput {
    pub result: EnsembleResult,
    pub events: Vec<EchoEvent>,
    pub bundle: ResultBundle,
}

pub fn run_simulation(job: &SimJob, plan: &Plan) -> Result<SimulationOutput, RunError> {
    let start = Instant::now();
    let result = run_ensemble(&plan.atom, &plan.sequence, &plan.grid, &plan.config)?;
    let events = detect_echoes(&result.times, &result.polarization, &plan.windows, plan.threshold)?;
    let mut bundle = ResultBundle::new(Metadata::new(job.hash(), start.elapsed().as_secs_f64()));
    bundle.timeseries = Some(timeseries_table(&result));
    bundle.echoes = Some(echo_table(&events));
    Ok(SimulationOutput {
        result,
        events,
        bundle,
    })
}

pub struct ScanOutput {
    pub rows: Vec<ScanRow>,
    pub bundle: ResultBundle,
}

/// Rephasing-delay scan over `r1_times`, or over the job's own list when
/// that is empty.
pub fn run_scan(job: &SimJob, plan: &Plan, r1_times: &[f64]) -> Result<ScanOutput, RunError> {
    let invalid = |path: &str, message: &str| {
        RunError::Config(ConfigError::Invalid(vec![ConfigIssue {
            path: path.into(),
            message: message.into(),
        }]))
    };
    let Some((timings, shape)) = &plan.apc else {
        return Err(invalid("sequence.protocol", "a delay scan needs protocol apc"));
    };
    let r1 = if r1_times.is_empty() { &job.scan.r1_us[..] } else { r1_times };
    if r1.is_empty() {
        return Err(invalid("scan.r1_us", "no R1 times given"));
    }
    if r1.iter().any(|t| !t.is_finite()) {
        return Err(invalid("scan.r1_us", "R1 times must be finite"));
    }
    let start = Instant::now();
    let setup = ScanSetup {
        atom: plan.atom,
        timings: timings.clone(),
        shape: shape.clone(),
        grid: plan.grid.clone(),
        config: plan.config,
        timing: plan.timing,
        threshold: plan.threshold,
        half_width: plan.half_width,
        mode: plan.scan_mode,
    };
    let rows = scan_rephase_delay(&setup, r1);
    let mut bundle = ResultBundle::new(Metadata::new(job.hash(), start.elapsed().as_secs_f64()));
    bundle.scan = Some(scan_table(&rows));
    Ok(ScanOutput { rows, bundle })
}

pub struct BlochOutput {
    pub trajectory: Trajectory,
    pub bundle: ResultBundle,
}

/// Single atom at optical detuning `delta_khz`, started in |1⟩.
pub fn run_bloch(job: &SimJob, plan: &Plan, delta_khz: f64) -> Result<BlochOutput, RunError> {
    if !delta_khz.is_finite() {
        return Err(RunError::Config(ConfigError::Invalid(vec![ConfigIssue {
            path: "--delta".into(),
            message: "must be finite".into(),
        }])));
    }
    let start = Instant::now();
    let atom = plan.atom.with_detuning(delta_khz);
    let c = &plan.config;
    let trajectory = evolve(&DensityMatrix::ground(), plan.sequence.pulses(), &atom, c.t0, c.t1, &c.integrator)?;
    let mut bundle = ResultBundle::new(Metadata::new(job.hash(), start.elapsed().as_secs_f64()));
    bundle.bloch = Some(bloch_table(&trajectory));
    Ok(BlochOutput { trajectory, bundle })
}

/// Timing and phase-matching report; no integration.
pub fn predict_report(job: &SimJob, plan: &Plan) -> String {
    let mut s = String::new();
    let reference = match job.timing.reference {
        super::ReferenceName::Center => "pulse centers",
        super::ReferenceName::LeadingEdge => "leading edges",
    };
    let _ = writeln!(s, "job {}", job.hash());
    let _ = writeln!(s, "times in us, measured at {reference}");
    for p in plan.sequence.pulses() {
        let _ = writeln!(
            s,
            "pulse {:<6} channel {} start {} duration {} area {} pi",
            p.label.to_string(),
            p.channel,
            num(p.t_start),
            num(p.duration),
            num(p.area / std::f64::consts::PI)
        );
    }
    let many = plan.predictions.len() > 1;
    for (i, p) in plan.predictions.iter().enumerate() {
        let tag = if many { format!("[{}]", (b'a' + i as u8) as char) } else { String::new() };
        let _ = writeln!(s, "data{tag} t_d = {}", num(p.t_d));
        let _ = writeln!(s, "  t_e1 = {}", num(p.t_e1));
        if let (Some(e2), Some(dt), Some(bound)) = (p.t_e2, p.delta_t, p.halt_bound) {
            let _ = writeln!(s, "  delta_t = {} (C1 after R2), halt bound = {}", num(dt), num(bound));
            if p.halted {
                let _ = writeln!(s, "  t_e2 = none (rephasing halted, delta_t exceeds bound; nominal {})", num(e2));
            } else {
                let _ = writeln!(s, "  t_e2 = {}", num(e2));
            }
        }
    }
    match phase_match_sequence(&plan.sequence) {
        Ok((e1, e2)) => {
            for (name, r) in [("E1", e1), ("E2", e2)] {
                if let Some(r) = r {
                    let d = r.direction;
                    let _ = writeln!(
                        s,
                        "phase match {name}: direction ({}, {}, {}), mismatch {} rad/m, {}",
                        num(d.x),
                        num(d.y),
                        num(d.z),
                        num(r.mismatch),
                        if r.backward { "backward" } else { "forward" }
                    );
                }
            }
        }
        Err(e) => {
            let _ = writeln!(s, "phase match: {e}");
        }
    }
    if plan.sequence.find(PulseLabel::D).is_none() {
        let _ = writeln!(s, "no data pulse");
    }
    for w in &plan.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}
