//! Moves R1 and reports both echo amplitudes. With R2, C1 and C2 moving along
//! with R1, E2 stays flat while E1 decays as exp(-2 gamma tau).
//!
//! cargo run --release --example delay_scan

use echo_sim::ensemble::ScanMode;
use echo_sim::io::{parse_config, run_scan, Plan};

fn main() {
    let job = parse_config(include_str!("../configs/delay-scan.json")).unwrap();
    let plan = job.plan().unwrap();
    let r1 = &job.scan.r1_us;
    for mode in [ScanMode::ShiftTail, ScanMode::FixedTail] {
        let plan = Plan { scan_mode: mode, ..plan.clone() };
        let out = run_scan(&job, &plan, r1).unwrap();
        println!("{mode:?}");
        println!("  t_r1   |E1|     |E2|");
        for row in &out.rows {
            let fmt = |a: Option<f64>| a.map_or("   -   ".to_string(), |a| format!("{a:.5}"));
            println!("  {:5.1}  {}  {}", row.t_r1, fmt(row.e1_abs()), fmt(row.e2_abs()));
        }
    }
}
