//! Single detuned atom through the full sequence, printed as its optical
//! Bloch vector and the three populations.
//!
//! cargo run --example bloch_trajectory -- 10

use echo_sim::bloch::{bloch_vector, evolve, DensityMatrix};
use echo_sim::io::preset;

fn main() {
    let delta: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let plan = preset("fig2").unwrap().plan().unwrap();
    let atom = plan.atom.with_detuning(delta);
    let c = &plan.config;
    let traj = evolve(&DensityMatrix::ground(), plan.sequence.pulses(), &atom, c.t0, c.t1, &c.integrator).unwrap();
    println!("delta = {delta} kHz");
    println!("  t_us      u        v        w     rho11  rho22  rho33");
    for (t, rho) in traj.times.iter().zip(&traj.states).step_by(20) {
        let b = bloch_vector(rho);
        let [p1, p2, p3] = rho.populations();
        println!("{t:6.1} {:8.4} {:8.4} {:8.4}  {p1:.3}  {p2:.3}  {p3:.3}", b.u, b.v, b.w);
    }
}
