//! Runs the bundled `fig2` preset and prints both echoes plus a coarse |P|²
//! trace.
//!
//! cargo run --release --example double_echo

use echo_sim::ensemble::{detect_echoes, intensity, run_ensemble};
use echo_sim::io::preset;

fn main() {
    let plan = preset("fig2").expect("bundled preset").plan().expect("valid preset");
    let res = run_ensemble(&plan.atom, &plan.sequence, &plan.grid, &plan.config).expect("run");

    for p in plan.sequence.pulses() {
        println!("{:?} on {:?}: start {} us, {} us long", p.label, p.channel, p.t_start, p.duration);
    }
    let events = detect_echoes(&res.times, &res.polarization, &plan.windows, plan.threshold).unwrap();
    for e in &events {
        println!("{} at {:.2} us, |P| = {:.4}", e.window_label, e.t_peak, e.amplitude.norm());
    }

    let i = intensity(&res);
    let max = i.iter().cloned().fold(0.0, f64::max);
    for (t, v) in res.times.iter().zip(&i).step_by(10) {
        let bar = (60.0 * (v / max).sqrt()).round() as usize;
        println!("{t:6.1} {}", "#".repeat(bar));
    }
}
