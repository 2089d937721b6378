//! Hard-pulse reference model shared by the integration tests and the
//! acceptance run. Pulses act as instantaneous rotations at their centers;
//! between pulses the density matrix evolves with the closed-form solution
//! of the free equations. Nothing here calls the library's propagators.
#![allow(dead_code)]

use std::f64::consts::TAU;

use echo_sim::bloch::{Channel, Pulse};
use echo_sim::ensemble::EnsembleResult;
use nalgebra::Complex;

pub type C = Complex<f64>;
pub type Rho = [[C; 3]; 3];

#[derive(Clone, Copy, Debug)]
pub struct Kick {
    /// 0 for the |1⟩–|3⟩ transition, 1 for |2⟩–|3⟩.
    pub lower: usize,
    pub t: f64,
    pub theta: f64,
    pub phase: f64,
}

impl Kick {
    pub fn from_pulse(p: &Pulse) -> Self {
        Kick {
            lower: match p.channel {
                Channel::A => 0,
                Channel::B => 1,
            },
            t: p.t_start + 0.5 * p.duration,
            theta: p.area,
            phase: p.carrier_phase,
        }
    }
}

/// Detuning (kHz) and relaxation constants (kHz, direct rates).
#[derive(Clone, Copy, Debug, Default)]
pub struct FreeAtom {
    pub delta_khz: f64,
    pub delta_spin_khz: f64,
    pub pop31: f64,
    pub pop32: f64,
    pub pop21: f64,
    pub coh31: f64,
    pub coh32: f64,
    pub coh21: f64,
}

pub fn ground() -> Rho {
    let z = C::new(0.0, 0.0);
    let mut r = [[z; 3]; 3];
    r[0][0] = C::new(1.0, 0.0);
    r
}

/// U ρ U† for a rotation on the (lower, excited) pair.
pub fn kick(rho: &Rho, k: &Kick) -> Rho {
    let (c, s) = ((k.theta / 2.0).cos(), (k.theta / 2.0).sin());
    let z = C::new(0.0, 0.0);
    let mut u = [[z; 3]; 3];
    for (i, row) in u.iter_mut().enumerate() {
        row[i] = C::new(1.0, 0.0);
    }
    let (l, e) = (k.lower, 2);
    u[l][l] = C::new(c, 0.0);
    u[e][e] = C::new(c, 0.0);
    u[l][e] = C::new(0.0, -s) * C::from_polar(1.0, -k.phase);
    u[e][l] = C::new(0.0, -s) * C::from_polar(1.0, k.phase);
    let mut tmp = [[z; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for m in 0..3 {
                tmp[i][j] += u[i][m] * rho[m][j];
            }
        }
    }
    let mut out = [[z; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for m in 0..3 {
                out[i][j] += tmp[i][m] * u[j][m].conj();
            }
        }
    }
    out
}

/// Closed-form free evolution over `dt_us`.
pub fn drift(rho: &Rho, a: &FreeAtom, dt_us: f64) -> Rho {
    let t = dt_us * 1e-6;
    let w = TAU * 1e3 * a.delta_khz;
    let ws = TAU * 1e3 * a.delta_spin_khz;
    let g3 = 1e3 * (a.pop31 + a.pop32);
    let g21 = 1e3 * a.pop21;
    let g32 = 1e3 * a.pop32;

    let p3 = rho[2][2].re;
    let p2 = rho[1][1].re;
    let p3t = p3 * (-g3 * t).exp();
    let feed = if (g3 - g21).abs() > 1e-9 {
        g32 * ((-g21 * t).exp() - (-g3 * t).exp()) / (g3 - g21)
    } else {
        g32 * t * (-g3 * t).exp()
    };
    let p2t = p2 * (-g21 * t).exp() + p3 * feed;
    let p1t = rho[0][0].re + rho[1][1].re + rho[2][2].re - p2t - p3t;

    let phase = |omega: f64, gamma_khz: f64| C::new(-1e3 * gamma_khz * t, omega * t).exp();
    let mut out = *rho;
    out[0][0] = C::new(p1t, 0.0);
    out[1][1] = C::new(p2t, 0.0);
    out[2][2] = C::new(p3t, 0.0);
    out[0][2] = rho[0][2] * phase(w, a.coh31);
    out[1][2] = rho[1][2] * phase(w - ws, a.coh32);
    out[0][1] = rho[0][1] * phase(ws, a.coh21);
    for (i, j) in [(0, 2), (1, 2), (0, 1)] {
        out[j][i] = out[i][j].conj();
    }
    out
}

/// State at each of `times` (sorted), starting in |1⟩ at `t0`.
pub fn trajectory(a: &FreeAtom, kicks: &[Kick], t0: f64, times: &[f64]) -> Vec<Rho> {
    let mut kicks = kicks.to_vec();
    kicks.sort_by(|x, y| x.t.total_cmp(&y.t));
    let mut rho = ground();
    let mut now = t0;
    let mut next = 0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        while next < kicks.len() && kicks[next].t <= t {
            rho = drift(&rho, a, kicks[next].t - now);
            rho = kick(&rho, &kicks[next]);
            now = kicks[next].t;
            next += 1;
        }
        rho = drift(&rho, a, t - now);
        now = t;
        out.push(rho);
    }
    out
}

/// Weighted ρ13 over a detuning grid at each of `times`.
pub fn polarization(
    template: &FreeAtom,
    points: &[f64],
    weights: &[f64],
    kicks: &[Kick],
    t0: f64,
    times: &[f64],
) -> Vec<C> {
    let mut p = vec![C::new(0.0, 0.0); times.len()];
    for (&d, &w) in points.iter().zip(weights) {
        let atom = FreeAtom {
            delta_khz: d,
            ..*template
        };
        for (acc, rho) in p.iter_mut().zip(trajectory(&atom, kicks, t0, times)) {
            *acc += rho[0][2] * w;
        }
    }
    p
}

/// Index and value of the largest |P| inside [lo, hi].
pub fn peak(times: &[f64], p: &[C], lo: f64, hi: f64) -> (f64, C) {
    let mut best = (f64::NAN, C::new(0.0, 0.0));
    for (&t, &v) in times.iter().zip(p) {
        if t >= lo && t <= hi && (best.0.is_nan() || v.norm() > best.1.norm()) {
            best = (t, v);
        }
    }
    best
}

/// Largest spacing of the regular output grid of a result.
pub fn sample_step(result: &EnsembleResult) -> f64 {
    result.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}
