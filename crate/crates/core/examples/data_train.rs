//! Three data pulses: the first echo train comes out time-reversed, the
//! controlled echo train in the original order.
//!
//! cargo run --release --example data_train

use echo_sim::ensemble::{detect_echoes, run_ensemble};
use echo_sim::io::preset;

fn main() {
    for name in ["fig3-blue", "fig3-red"] {
        let plan = preset(name).unwrap().plan().unwrap();
        let res = run_ensemble(&plan.atom, &plan.sequence, &plan.grid, &plan.config).unwrap();
        let events = detect_echoes(&res.times, &res.polarization, &plan.windows, plan.threshold).unwrap();
        println!("{name}: optical dephasing {} kHz", plan.atom.decay.coh31);
        for p in &plan.predictions {
            println!("  data at {:5.2} us -> E1 {:5.2}, E2 {:?}", p.t_d, p.t_e1, p.t_e2);
        }
        for e in &events {
            println!("  found {:4} at {:5.2} us, |P| = {:.4}", e.window_label, e.t_peak, e.amplitude.norm());
        }
    }
}
