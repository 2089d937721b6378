//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use common::{peak, polarization, sample_step, FreeAtom, Kick};
use echo_sim::bloch::{evolve, AtomParams, Channel, Decay, DensityMatrix, Integrator, Level, Pulse, PulseLabel};
use echo_sim::ensemble::{detect_echoes, run_ensemble, EnsembleResult, ScanMode};
use echo_sim::io::{parse_config, preset, run_scan, run_simulation, ConfigError, Plan, SimJob};
use echo_sim::protocol::{
    make_two_pulse_sequence, phase_match_e1, phase_match_e2, phase_match_sequence, predict_e2_time, predict_sequence,
    SequenceShape, TimingOptions,
};
use nalgebra::Vector3;
use serde_json::json;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, n: u32, ok: bool, what: &str, detail: String) {
        if !ok {
            self.failures += 1;
        }
        println!("criterion {n:>2} {}: {what} ({detail})", if ok { "PASS" } else { "FAIL" });
    }
}

fn run(plan: &Plan) -> EnsembleResult {
    run_ensemble(&plan.atom, &plan.sequence, &plan.grid, &plan.config).expect("ensemble run")
}

fn load(name: &str) -> (SimJob, Plan) {
    let job = preset(name).expect("preset");
    let plan = job.plan().expect("plan");
    (job, plan)
}

fn physical_sanity(r: &mut Report) {
    let (_, plan) = load("fig2");
    let start = Instant::now();
    let res = run(&plan);
    let secs = start.elapsed().as_secs_f64();
    let tr = res.diagnostics.iter().map(|d| d.max_trace_error).fold(0.0, f64::max);
    let herm = res.diagnostics.iter().map(|d| d.max_hermiticity_error).fold(0.0, f64::max);
    let eig = res.diagnostics.iter().map(|d| d.min_eigenvalue).fold(f64::MAX, f64::min);
    r.line(
        1,
        tr < 1e-9 && herm < 1e-10 && eig > -1e-6 && secs < 60.0 && res.per_atom.len() == 201,
        "physical sanity over the fig2 run",
        format!(
            "{} atoms, max |Tr-1| {tr:.1e}, max Hermiticity {herm:.1e}, min eigenvalue {eig:.1e}, {secs:.2} s",
            res.per_atom.len()
        ),
    );
}

fn rabi_and_decay(r: &mut Report) {
    let mut worst_rabi: f64 = 0.0;
    for k in 1..=20 {
        let theta = PI * k as f64 / 20.0;
        let p = Pulse::new(Channel::A, PulseLabel::D, 1.0, 0.1, theta);
        let traj =
            evolve(&DensityMatrix::ground(), &[p], &AtomParams::new(0.0, Decay::NONE), 0.0, 2.0, &Integrator::default())
                .unwrap();
        worst_rabi = worst_rabi.max((traj.last().unwrap().rho33() - (theta / 2.0).sin().powi(2)).abs());
    }
    let decay = Decay::optical(1.0, 1.0);
    let traj = evolve(
        &DensityMatrix::pure(Level::Excited),
        &[],
        &AtomParams::new(0.0, decay),
        0.0,
        500.0,
        &Integrator::default(),
    )
    .unwrap();
    let worst_decay = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, rho)| (rho.rho33() - (-2000.0 * t * 1e-6).exp()).abs())
        .fold(0.0, f64::max);
    r.line(
        2,
        worst_rabi < 1e-6 && worst_decay < 1e-6,
        "resonant Rabi population and excited-state decay",
        format!("max Rabi error {worst_rabi:.1e} over 20 areas, max decay error {worst_decay:.1e}"),
    );
}

fn e1_timing(r: &mut Report) {
    let (_, base) = load("fig2");
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, r1) in [(5.0, 20.0), (2.0, 12.0), (10.0, 30.0)] {
        let seq = make_two_pulse_sequence(&[d], r1, &SequenceShape::default()).unwrap();
        let pred = predict_sequence(&seq, &TimingOptions::default()).unwrap();
        let mut cfg = base.config;
        cfg.t1 = pred[0].t_e1 + 8.0;
        let res = run_ensemble(&base.atom, &seq, &base.grid, &cfg).unwrap();
        let windows = echo_sim::ensemble::default_windows(&pred, 3.0, cfg.t0, cfg.t1);
        let events = detect_echoes(&res.times, &res.polarization, &windows, 0.05).unwrap();
        let step = sample_step(&res);
        let found = events.iter().find(|e| e.window_label == "E1").map(|e| e.t_peak);
        let good = found.is_some_and(|t| (t - pred[0].t_e1).abs() <= step + 1e-9);
        ok &= good;
        parts.push(format!(
            "D {d}/R1 {r1}: predicted {:.2}, peak {}",
            pred[0].t_e1,
            found.map_or("none".into(), |t| format!("{t:.2}"))
        ));
    }
    r.line(3, ok, "E1 at 2 T_R1 - T_D within one sample", parts.join("; "));
}

fn e2_timing(r: &mut Report, plan: &Plan, res: &EnsembleResult) {
    let events = detect_echoes(&res.times, &res.polarization, &plan.windows, plan.threshold).unwrap();
    let t = events.iter().find(|e| e.window_label == "E2").map(|e| e.t_peak);
    let p = &plan.predictions[0];
    let e2 = predict_e2_time(p.t_c2.unwrap(), p.t_r2.unwrap(), p.t_e1, p.delta_t.unwrap(), None).unwrap();
    let ok = t.is_some_and(|t| (t - 70.0).abs() <= 0.5) && (e2.time - 70.0).abs() < 1e-9 && !e2.halted;
    r.line(
        4,
        ok,
        "E2 at 70 us and timing relation",
        format!(
            "peak {}, predict_e2_time({:.2}, {:.2}, {:.2}, {:.2}) = {:.9}",
            t.map_or("none".into(), |t| format!("{t:.2}")),
            p.t_c2.unwrap(),
            p.t_r2.unwrap(),
            p.t_e1,
            p.delta_t.unwrap(),
            e2.time
        ),
    );
}

fn no_inversion(r: &mut Report, plan: &Plan, res: &EnsembleResult) {
    let at = |l| plan.sequence.find(l).unwrap();
    let after_d = res.populations[res.index_at(at(PulseLabel::D).t_end()).unwrap()][2];
    let (r1_end, r2_start, r2_end) = (at(PulseLabel::R1).t_end(), at(PulseLabel::R2).t_start, at(PulseLabel::R2).t_end());
    let rows = || res.times.iter().zip(&res.populations);
    let worst = rows().filter(|(t, _)| **t >= r2_end).map(|(_, p)| p[2]).fold(0.0, f64::max);
    let inverted = rows().filter(|(t, _)| **t >= r1_end && **t <= r2_start).map(|(_, p)| p[2]).fold(1.0, f64::min);
    r.line(
        5,
        worst <= 1.05 * after_d && inverted > 0.9,
        "no inversion after R2, inversion between R1 and R2",
        format!("after D {after_d:.6}, max after R2 {worst:.6} (ratio {:.4}), min between R1 and R2 {inverted:.4}", worst / after_d),
    );
}

fn phase_flip(r: &mut Report, plan: &Plan, res: &EnsembleResult) {
    let i0 = res.index_at(plan.sequence.find(PulseLabel::C1).unwrap().t_start).unwrap();
    let i1 = res.index_at(plan.sequence.find(PulseLabel::C2).unwrap().t_end()).unwrap();
    let (mut mag, mut ph, mut n): (f64, f64, usize) = (0.0, 0.0, 0);
    for (j, &d) in plan.grid.points.iter().enumerate() {
        if d.abs() <= 60.0 {
            let ratio = -res.per_atom[j].rho13[i1] / res.per_atom[j].rho13[i0];
            mag = mag.max((ratio.norm() - 1.0).abs());
            ph = ph.max(ratio.arg().abs());
            n += 1;
        }
    }
    r.line(
        6,
        mag < 0.01 && ph < 0.05,
        "controls add a pi phase to every atom with |delta| <= 60 kHz",
        format!("{n} atoms, max magnitude error {mag:.2e}, max phase error {ph:.4} rad"),
    );
}

fn ordering(r: &mut Report) {
    let (_, plan) = load("fig3-blue");
    let res = run(&plan);
    let events = detect_echoes(&res.times, &res.polarization, &plan.windows, plan.threshold).unwrap();
    let step = sample_step(&res);
    let get = |l: &str| events.iter().find(|e| e.window_label == l).map(|e| e.t_peak);
    let e1: Vec<Option<f64>> = ["E1a", "E1b", "E1c"].iter().map(|l| get(l)).collect();
    let e2: Vec<Option<f64>> = ["E2a", "E2b", "E2c"].iter().map(|l| get(l)).collect();
    let mut ok = e1.iter().chain(&e2).all(Option::is_some);
    if ok {
        let e1: Vec<f64> = e1.iter().map(|t| t.unwrap()).collect();
        let e2: Vec<f64> = e2.iter().map(|t| t.unwrap()).collect();
        let d: Vec<f64> = plan.predictions.iter().map(|p| p.t_d).collect();
        ok &= e1[2] < e1[1] && e1[1] < e1[0] && e2[0] < e2[1] && e2[1] < e2[2];
        for k in 0..2 {
            let gap = d[k + 1] - d[k];
            ok &= ((e1[k] - e1[k + 1]) - gap).abs() <= step + 1e-9;
            ok &= ((e2[k + 1] - e2[k]) - gap).abs() <= step + 1e-9;
        }
        for (k, p) in plan.predictions.iter().enumerate() {
            ok &= (e1[k] - p.t_e1).abs() <= step + 1e-9 && (e2[k] - p.t_e2.unwrap()).abs() <= step + 1e-9;
        }
        r.line(
            7,
            ok,
            "data train: E1 reversed and mirrored, E2 in original order",
            format!("data centers {d:?}, E1 {e1:?}, E2 {e2:?}"),
        );
    } else {
        r.line(7, false, "data train: E1 reversed and mirrored, E2 in original order", format!("missing events {events:?}"));
    }
}

fn flat_e2(r: &mut Report) {
    let text = include_str!("../configs/delay-scan.json");
    let job = parse_config(text).unwrap();
    let plan = job.plan().unwrap();
    let r1: Vec<f64> = (0..7).map(|i| 15.0 + 2.5 * i as f64).collect();
    let gamma = plan.atom.decay.coh31 * 1e3;
    let scan = |mode| {
        let plan = Plan { scan_mode: mode, ..plan.clone() };
        run_scan(&job, &plan, &r1).unwrap().rows
    };
    let rows = scan(ScanMode::ShiftTail);
    let e1: Vec<f64> = rows.iter().map(|r| r.e1_abs().unwrap_or(f64::NAN)).collect();
    let e2: Vec<f64> = rows.iter().map(|r| r.e2_abs().unwrap_or(f64::NAN)).collect();
    let worst_e1 = r1
        .iter()
        .zip(&e1)
        .map(|(t, a)| {
            let expected = (-2.0 * gamma * (t - r1[0]) * 1e-6).exp();
            ((a / e1[0]) / expected - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let spread = |v: &[f64]| {
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        let min = v.iter().cloned().fold(f64::MAX, f64::min);
        (max - min) / (v.iter().sum::<f64>() / v.len() as f64)
    };
    let s2 = spread(&e2);
    r.line(
        8,
        worst_e1 < 0.05 && s2 <= 0.02,
        "delay scan: E1 follows exp(-2 gamma tau), E2 flat",
        format!("R1 15..30 us, gamma {gamma} 1/s, max E1 deviation {:.2}%, E2 spread {:.2}%", 100.0 * worst_e1, 100.0 * s2),
    );
    let fixed = scan(ScanMode::FixedTail);
    let e2_fixed: Vec<String> = fixed
        .iter()
        .map(|r| r.e2_abs().map_or("none".to_string(), |a| format!("{a:.4}")))
        .collect();
    println!("   note: with R2, C1, C2 held fixed instead, |E2| = [{}]", e2_fixed.join(", "));
}

fn oracle_equivalence(r: &mut Report, plan: &Plan, res: &EnsembleResult) {
    let kicks: Vec<Kick> = plan.sequence.pulses().iter().map(Kick::from_pulse).collect();
    let oracle = polarization(&FreeAtom::default(), &plan.grid.points, &plan.grid.weights, &kicks, 0.0, &res.times);
    let step = sample_step(res);
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, w) in plan.windows.iter().map(|w| (w.label.clone(), w)) {
        let (ts, ps) = peak(&res.times, &res.polarization, w.t_lo, w.t_hi);
        let (to, po) = peak(&res.times, &oracle, w.t_lo, w.t_hi);
        let rel = (ps.norm() - po.norm()).abs() / po.norm();
        ok &= (ts - to).abs() <= step + 1e-9 && rel < 0.03;
        parts.push(format!("{name}: t {ts:.2} vs {to:.2}, |P| {:.5} vs {:.5} ({:.2}%)", ps.norm(), po.norm(), 100.0 * rel));
    }
    r.line(9, ok, "numeric ensemble agrees with hard-pulse oracle", parts.join("; "));
}

fn phase_matching(r: &mut Report) {
    let (_, plan) = load("fig2");
    let (e1, e2) = phase_match_sequence(&plan.sequence).unwrap();
    let (e1, e2) = (e1.unwrap(), e2.unwrap());
    let k_d = plan.sequence.find(PulseLabel::D).unwrap().wave_vector();
    let exact = e2.k_out == -k_d;
    let k = Vector3::new(1.0e7, 0.0, 0.0);
    let direct = phase_match_e2(&k, &k, &-k, 3e15, 3e15, 3e15).unwrap();
    let collinear = phase_match_e1(&k, &k).unwrap();
    r.line(
        10,
        exact && e2.backward && direct.k_out == -k && e1.mismatch == 0.0 && collinear.mismatch == 0.0,
        "counter-propagating controls give k_E2 = -k_D, collinear E1 is matched",
        format!(
            "k_E2 + k_D = {:?}, backward {}, E1 mismatch {} rad/m",
            (e2.k_out + k_d).as_slice(),
            e2.backward,
            e1.mismatch
        ),
    );
}

fn determinism_and_parser(r: &mut Report) {
    let base = preset("fig2").unwrap();
    let csv = |threads| {
        let job = SimJob { threads, ..base.clone() };
        let plan = job.plan().unwrap();
        let out = run_simulation(&job, &plan).unwrap();
        (out.bundle.timeseries.unwrap().to_csv(), out.bundle.echoes.unwrap().to_csv())
    };
    let one = csv(1);
    let identical = [2, 4, 7].iter().all(|&n| csv(n) == one);

    let apc = json!({ "protocol": "apc",
        "timings": { "data_us": 5.0, "r1_us": 20.0, "r2_us": 45.0, "c1_us": 45.5, "c2_us": 60.0 } });
    let cases: Vec<(String, &str)> = vec![
        (
            json!({ "version": 1, "sequence": { "pulses": [
                { "label": "D", "channel": "A", "t_start_us": 5.0, "duration_us": 1.0, "area_pi": 0.1 },
                { "label": "R1", "channel": "A", "t_start_us": 20.0, "duration_us": -1.0, "area_pi": 1.0 }] } })
            .to_string(),
            "sequence.pulses[1].duration_us",
        ),
        (json!({ "version": 1, "sequence": apc, "integrator": { "durration": 1.0 } }).to_string(), "integrator"),
        (json!({ "version": 2, "sequence": apc }).to_string(), "version"),
        (json!({ "version": 1, "sequence": apc, "grid": { "n": 0 } }).to_string(), "grid.n"),
        (json!({ "version": 1, "sequence": apc, "grid": { "fwhm_khz": -60.0 } }).to_string(), "grid.fwhm_khz"),
        (json!({ "version": 1, "sequence": apc, "atom": { "decay": { "coh31": -1.0 } } }).to_string(), "atom.decay.coh31"),
        (json!({ "version": 1, "sequence": apc, "echo": { "threshold": 2.0 } }).to_string(), "echo.threshold"),
        (json!({ "version": 1, "sequence": apc, "integrator": { "dt_us": 0.01 } }).to_string(), "integrator.dt_us"),
        (json!({ "version": 1, "preset": "fig9" }).to_string(), "preset"),
        (json!({ "version": 1, "sequence": { "protocol": "apc",
            "timings": { "data_us": 5.0, "r1_us": 20.0, "r2_us": 45.0, "c1_us": 45.5 } } }).to_string(),
            "sequence.timings.c2_us"),
        (json!({ "version": 1, "sequence": { "protocol": "apc",
            "timings": { "data_us": 5.0, "r1_us": 20.0, "r2_us": 10.0, "c1_us": 45.5, "c2_us": 60.0 } } }).to_string(),
            "sequence.timings"),
        (json!({ "version": 1, "sequence": apc, "echo": { "windows": [
            { "label": "E1", "t_lo_us": 30.0, "t_hi_us": 40.0 },
            { "label": "E2", "t_lo_us": 35.0, "t_hi_us": 45.0 }] } }).to_string(), "echo.windows"),
        (json!({ "version": 1, "sequence": apc, "outputs": [{ "kind": "plot", "path": "x" }] }).to_string(), "outputs[0].kind"),
    ];
    let mut rejected = 0;
    let mut misses = Vec::new();
    for (doc, path) in &cases {
        match parse_config(doc) {
            Err(ConfigError::Invalid(issues)) if issues.iter().any(|i| i.path.starts_with(path)) => rejected += 1,
            other => misses.push(format!("{path}: {other:?}")),
        }
    }
    let syntax = matches!(parse_config("{ \"version\": 1,"), Err(ConfigError::Syntax { .. }));
    let missing = matches!(parse_config("{ \"version\": 1 }"),
        Err(ConfigError::Invalid(ref v)) if v[0].message.contains("missing field `sequence`"));
    r.line(
        11,
        identical && rejected == cases.len() && syntax && missing && misses.is_empty(),
        "byte-identical CSV across worker counts, path-precise config errors",
        format!(
            "CSV identical for 1/2/4/7 workers: {identical}; {rejected}/{} invalid documents rejected at the expected path{}",
            cases.len(),
            if misses.is_empty() { String::new() } else { format!("; misses: {}", misses.join(" | ")) }
        ),
    );
}

fn main() {
    let mut r = Report { failures: 0 };
    physical_sanity(&mut r);
    rabi_and_decay(&mut r);
    e1_timing(&mut r);
    let (_, fig2) = load("fig2");
    let res = run(&fig2);
    e2_timing(&mut r, &fig2, &res);
    no_inversion(&mut r, &fig2, &res);
    phase_flip(&mut r, &fig2, &res);
    ordering(&mut r);
    flat_e2(&mut r);
    oracle_equivalence(&mut r, &fig2, &res);
    phase_matching(&mut r);
    determinism_and_parser(&mut r);
    if r.failures > 0 {
        println!("{} criteria failed", r.failures);
        std::process::exit(1);
    }
    println!("all 11 criteria passed");
}
