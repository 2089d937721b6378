use nalgebra::Matrix3;

use super::density::{DensityMatrix, C64};
use super::pulse::Channel;

/// U = exp(−i(θ/2)(cosφ σx + sinφ σy)) on the subspace driven by `channel`,
/// identity on the remaining level. σ matrices are taken in the
/// (lower, |3⟩) ordering, which makes U the exact resonant propagator of
/// the drive term in the Hamiltonian.
pub fn rotation_unitary(channel: Channel, area: f64, phase: f64) -> Matrix3<C64> {
    let lo = channel.lower();
    let hi = 2;
    let (s, c) = (0.5 * area).sin_cos();
    let minus_i = C64::new(0.0, -1.0);

    let mut u = Matrix3::identity();
    u[(lo, lo)] = C64::from(c);
    u[(hi, hi)] = C64::from(c);
    u[(lo, hi)] = minus_i * s * C64::from_polar(1.0, -phase);
    u[(hi, lo)] = minus_i * s * C64::from_polar(1.0, phase);
    u
}

/// Instantaneous pulse: ρ → UρU†.
pub fn hard_pulse_rotation(rho: &DensityMatrix, channel: Channel, area: f64, phase: f64) -> DensityMatrix {
    let u = rotation_unitary(channel, area, phase);
    DensityMatrix::from_matrix_unchecked(u * rho.matrix() * u.adjoint())
}

/// Optical Bloch vector of the |1⟩–|3⟩ transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

/// u = 2 Re ρ₁₃, v = 2 Im ρ₁₃, w = ρ₃₃ − ρ₁₁.
pub fn bloch_vector(rho: &DensityMatrix) -> BlochVector {
    let c = rho.rho13();
    BlochVector {
        u: 2.0 * c.re,
        v: 2.0 * c.im,
        w: rho.rho33() - rho.rho11(),
    }
}
