//! Emission directions for collinear and tilted beam geometries.
//!
//! cargo run --example phase_matching

use echo_sim::bloch::{carrier_from_wavelength_nm, SPEED_OF_LIGHT};
use echo_sim::protocol::{phase_match_e1, phase_match_e2};
use nalgebra::Vector3;

fn main() {
    let omega = carrier_from_wavelength_nm(606.0);
    let k = omega / SPEED_OF_LIGHT;
    let x = Vector3::x() * k;

    let e2 = phase_match_e2(&x, &x, &-x, omega, omega, omega).unwrap();
    println!("counter-propagating C2: direction {:?}, backward {}", e2.direction.as_slice(), e2.backward);

    for deg in [0.0f64, 1.0, 5.0, 10.0] {
        let a = deg.to_radians();
        let r1 = Vector3::new(a.cos(), a.sin(), 0.0) * k;
        let e1 = phase_match_e1(&x, &r1).unwrap();
        println!("R1 tilted {deg:4.1} deg: E1 mismatch {:.3e} rad/m ({:.2e} of |k|)", e1.mismatch, e1.mismatch / k);
    }
}
