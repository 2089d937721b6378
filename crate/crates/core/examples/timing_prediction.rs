//! Echo times from the pulse schedule alone, including the halt condition
//! when C1 comes too late after R2.
//!
//! cargo run --example timing_prediction

use echo_sim::protocol::{make_apc_sequence, predict_sequence, ApcTimings, SequenceShape, TimeReference, TimingOptions};

fn main() {
    let shape = SequenceShape::default();
    for c1 in [45.5, 50.0, 56.0] {
        let timings = ApcTimings { data: vec![5.0], r1: 20.0, r2: 45.0, c1, c2: 60.0 };
        let seq = make_apc_sequence(&timings, &shape).unwrap();
        for reference in [TimeReference::Center, TimeReference::LeadingEdge] {
            let opts = TimingOptions { reference, halt_bound: None };
            let p = &predict_sequence(&seq, &opts).unwrap()[0];
            println!(
                "C1 at {c1:4.1} ({reference:?}): E1 {:.2}, delay {:.2}, bound {:.2}, E2 {}",
                p.t_e1,
                p.delta_t.unwrap(),
                p.halt_bound.unwrap(),
                p.emitted_e2().map_or("halted".to_string(), |t| format!("{t:.2}"))
            );
        }
    }
}
