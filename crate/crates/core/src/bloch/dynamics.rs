use nalgebra::Matrix3;

use super::atom::{AtomParams, Rates};
use super::density::{DensityMatrix, C64};
use super::pulse::{Channel, Pulse};
use super::DynamicsError;

const I: C64 = C64::new(0.0, 1.0);

/// Two coincident breakpoints closer than this (μs) are merged.
const TIME_EPS: f64 = 1e-9;

/// Complex Rabi amplitudes Ωe^{iφ} (rad/s) on both channels at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Drive {
    pub a: C64,
    pub b: C64,
}

impl Drive {
    pub fn is_zero(&self) -> bool {
        self.a == C64::new(0.0, 0.0) && self.b == C64::new(0.0, 0.0)
    }

    /// Sum of all pulses in `pulses` that drive the whole of `[a, b]` (μs).
    pub(crate) fn over(pulses: &[Pulse], a: f64, b: f64) -> Drive {
        let mut drive = Drive::default();
        for p in pulses.iter().filter(|p| p.covers(a, b)) {
            let amp = C64::from_polar(p.rabi_rad_s(), p.carrier_phase);
            match p.channel {
                Channel::A => drive.a += amp,
                Channel::B => drive.b += amp,
            }
        }
        drive
    }
}

/// Rotating-frame Hamiltonian H/ħ in rad/s.
///
/// H = δ_opt|3⟩⟨3| + δ_spin|2⟩⟨2| + ½(Ω_A e^{iφ_A}|3⟩⟨1| + Ω_B e^{iφ_B}|3⟩⟨2| + h.c.).
/// With this sign free evolution gives ρ₁₃ ∝ e^{+iδt}.
pub fn build_hamiltonian(drive: Drive, atom: &AtomParams) -> Matrix3<C64> {
    hamiltonian(drive, &atom.rates())
}

pub(crate) fn hamiltonian(drive: Drive, r: &Rates) -> Matrix3<C64> {
    let half = 0.5;
    let mut h = Matrix3::zeros();
    h[(1, 1)] = C64::new(r.delta_spin, 0.0);
    h[(2, 2)] = C64::new(r.delta_opt, 0.0);
    h[(2, 0)] = drive.a * half;
    h[(0, 2)] = drive.a.conj() * half;
    h[(2, 1)] = drive.b * half;
    h[(1, 2)] = drive.b.conj() * half;
    h
}

/// dρ/dt (s⁻¹): −i[H, ρ] plus trace-preserving relaxation.
pub fn master_rhs(rho: &Matrix3<C64>, h: &Matrix3<C64>, atom: &AtomParams) -> Matrix3<C64> {
    rhs(rho, h, &atom.rates())
}

pub(crate) fn rhs(rho: &Matrix3<C64>, h: &Matrix3<C64>, r: &Rates) -> Matrix3<C64> {
    let mut d = (h * rho - rho * h) * (-I);

    let p22 = rho[(1, 1)];
    let p33 = rho[(2, 2)];
    d[(2, 2)] -= p33 * (r.pop31 + r.pop32);
    d[(0, 0)] += p33 * r.pop31 + p22 * r.pop21;
    d[(1, 1)] += p33 * r.pop32 - p22 * r.pop21;

    for (i, j, g) in [(0, 2, r.coh31), (1, 2, r.coh32), (0, 1, r.coh21)] {
        d[(i, j)] -= rho[(i, j)] * g;
        d[(j, i)] -= rho[(j, i)] * g;
    }
    d
}

fn rk4_step(rho: &Matrix3<C64>, h: &Matrix3<C64>, r: &Rates, dt: f64) -> Matrix3<C64> {
    let k1 = rhs(rho, h, r);
    let k2 = rhs(&(rho + k1 * C64::from(0.5 * dt)), h, r);
    let k3 = rhs(&(rho + k2 * C64::from(0.5 * dt)), h, r);
    let k4 = rhs(&(rho + k3 * C64::from(dt)), h, r);
    rho + (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(dt / 6.0)
}

/// (e^{−a t} − e^{−b t}) / (b − a), finite as b → a.
fn exp_difference(a: f64, b: f64, t: f64) -> f64 {
    let x = (b - a) * t;
    if x.abs() < 1e-12 {
        return t * (-a * t).exp();
    }
    (-a * t).exp() * -(-x).exp_m1() / (b - a)
}

/// Exact undriven evolution over `t` seconds.
pub(crate) fn free_evolve(rho: &Matrix3<C64>, r: &Rates, t: f64) -> Matrix3<C64> {
    let mut out = *rho;

    let trace = rho[(0, 0)].re + rho[(1, 1)].re + rho[(2, 2)].re;
    let excited_loss = r.pop31 + r.pop32;
    let p33 = rho[(2, 2)].re * (-excited_loss * t).exp();
    let p22 = rho[(1, 1)].re * (-r.pop21 * t).exp()
        + r.pop32 * rho[(2, 2)].re * exp_difference(r.pop21, excited_loss, t);
    out[(0, 0)] = C64::new(trace - p22 - p33, 0.0);
    out[(1, 1)] = C64::new(p22, 0.0);
    out[(2, 2)] = C64::new(p33, 0.0);

    // dρ_ij/dt = −i(H_ii − H_jj)ρ_ij − γ_ij ρ_ij
    let energies = [0.0, r.delta_spin, r.delta_opt];
    for (i, j, g) in [(0, 2, r.coh31), (1, 2, r.coh32), (0, 1, r.coh21)] {
        let factor = C64::from_polar((-g * t).exp(), (energies[j] - energies[i]) * t);
        out[(i, j)] = rho[(i, j)] * factor;
        out[(j, i)] = out[(i, j)].conj();
    }
    out
}

/// Fixed-step integrator settings. Times are in μs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integrator {
    /// Upper bound on the RK4 step inside pulses.
    pub dt: f64,
    /// Output sample spacing in units of `dt`.
    pub stride: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator {
            dt: 0.002,
            stride: 50,
        }
    }
}

impl Integrator {
    /// Output sample spacing (μs).
    pub fn sample_step(&self) -> f64 {
        self.dt * self.stride as f64
    }
}

/// Sampled single-atom evolution.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub sample_stride: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the sample at `t` (within 1e-9 μs), if any.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        sample_index(&self.times, t)
    }

    pub fn state_at(&self, t: f64) -> Option<&DensityMatrix> {
        self.index_at(t).map(|i| &self.states[i])
    }

    pub fn last(&self) -> Option<&DensityMatrix> {
        self.states.last()
    }
}

pub(crate) fn sample_index(times: &[f64], t: f64) -> Option<usize> {
    let i = times.partition_point(|&x| x < t - TIME_EPS);
    (i < times.len() && (times[i] - t).abs() <= TIME_EPS).then_some(i)
}

/// Sample times for `[t0, t1]`: the uniform output grid merged with every
/// pulse boundary inside the span. Identical for every atom that shares the
/// pulse list, so ensemble members line up sample by sample.
pub fn sample_times(pulses: &[Pulse], t0: f64, t1: f64, integ: &Integrator) -> Vec<f64> {
    let step = integ.sample_step();
    let n = ((t1 - t0) / step + TIME_EPS).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * step).collect();
    times.push(t1);
    for p in pulses {
        for t in [p.t_start, p.t_end()] {
            if t > t0 && t < t1 {
                times.push(t);
            }
        }
    }
    times.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::with_capacity(times.len());
    for t in times {
        match merged.last_mut() {
            Some(last) if t - *last <= TIME_EPS => {
                // keep the exact pulse boundary over the rounded grid value
                if pulses.iter().any(|p| p.t_start == t || p.t_end() == t) {
                    *last = t;
                }
            }
            _ => merged.push(t),
        }
    }
    merged
}

/// Checks the integration request before any stepping.
pub(crate) fn check_request(
    rho0: &DensityMatrix,
    pulses: &[Pulse],
    t0: f64,
    t1: f64,
    integ: &Integrator,
) -> Result<(), DynamicsError> {
    if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
        return Err(DynamicsError::InvalidSpan { t0, t1 });
    }
    if !(integ.dt > 0.0 && integ.dt.is_finite()) || integ.stride == 0 {
        return Err(DynamicsError::InvalidIntegrator(format!(
            "dt must be > 0 and stride >= 1 (dt = {}, stride = {})",
            integ.dt, integ.stride
        )));
    }
    DensityMatrix::from_matrix(*rho0.matrix())?;
    for (index, p) in pulses.iter().enumerate() {
        p.check()?;
        let overlaps = p.t_start < t1 && p.t_end() > t0;
        if overlaps && integ.dt > p.duration / 20.0 * (1.0 + 1e-12) {
            return Err(DynamicsError::StepTooLarge {
                index,
                label: p.label,
                duration: p.duration,
                dt: integ.dt,
            });
        }
    }
    Ok(())
}

/// Integrates from `t0` to `t1` (μs), calling `observe` at every sample time.
///
/// Driven intervals are stepped with RK4 at a step no larger than
/// `integ.dt`; undriven intervals use the exact free-evolution propagator.
pub fn evolve_with<F>(
    rho0: &DensityMatrix,
    pulses: &[Pulse],
    atom: &AtomParams,
    t0: f64,
    t1: f64,
    integ: &Integrator,
    mut observe: F,
) -> Result<(), DynamicsError>
where
    F: FnMut(f64, &DensityMatrix),
{
    check_request(rho0, pulses, t0, t1, integ)?;
    let rates = atom.rates();
    let times = sample_times(pulses, t0, t1, integ);

    let mut rho = *rho0.matrix();
    observe(times[0], rho0);
    for w in times.windows(2) {
        let (a, b) = (w[0], w[1]);
        let drive = Drive::over(pulses, a, b);
        if drive.is_zero() {
            rho = free_evolve(&rho, &rates, (b - a) * 1e-6);
        } else {
            let h = hamiltonian(drive, &rates);
            let steps = ((b - a) / integ.dt - 1e-9).ceil().max(1.0) as usize;
            let dt = (b - a) * 1e-6 / steps as f64;
            for _ in 0..steps {
                rho = rk4_step(&rho, &h, &rates, dt);
            }
        }
        observe(b, &DensityMatrix::from_matrix_unchecked(rho));
    }
    Ok(())
}

/// Integrates and keeps the full density matrix at every sample.
pub fn evolve(
    rho0: &DensityMatrix,
    pulses: &[Pulse],
    atom: &AtomParams,
    t0: f64,
    t1: f64,
    integ: &Integrator,
) -> Result<Trajectory, DynamicsError> {
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        sample_stride: integ.stride,
    };
    evolve_with(rho0, pulses, atom, t0, t1, integ, |t, rho| {
        traj.times.push(t);
        traj.states.push(*rho);
    })?;
    Ok(traj)
}
