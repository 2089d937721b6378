use rayon::prelude::*;

use super::grid::DetuningGrid;
use super::EnsembleError;
use crate::bloch::{evolve_with, sample_index, sample_times, AtomParams, DensityMatrix, Integrator, C64};
use crate::protocol::{has_errors, validate_sequence, PulseSequence, Severity, TimingOptions};

/// Time span, step control and worker count of an ensemble run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub integrator: Integrator,
    pub t0: f64,
    pub t1: f64,
    /// Worker threads; 0 picks the rayon default.
    pub threads: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            integrator: Integrator::default(),
            t0: 0.0,
            t1: 80.0,
            threads: 0,
        }
    }
}

/// Reduced observables of one atom at every shared sample time.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomSeries {
    pub rho13: Vec<C64>,
    /// (ρ₁₁, ρ₂₂, ρ₃₃)
    pub populations: Vec<[f64; 3]>,
}

/// Worst-case invariant deviations seen along one atom's trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomDiagnostics {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl Default for AtomDiagnostics {
    fn default() -> Self {
        AtomDiagnostics {
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }
}

impl AtomDiagnostics {
    fn record(&mut self, rho: &DensityMatrix) {
        let tr = rho.trace();
        self.max_trace_error = self.max_trace_error.max((tr - C64::new(1.0, 0.0)).norm());
        self.max_hermiticity_error = self.max_hermiticity_error.max(rho.hermiticity_error());
        self.min_eigenvalue = self.min_eigenvalue.min(rho.min_eigenvalue());
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub grid: DetuningGrid,
    pub times: Vec<f64>,
    pub per_atom: Vec<AtomSeries>,
    pub diagnostics: Vec<AtomDiagnostics>,
    /// P(t) = Σⱼ wⱼ ρ₁₃⁽ʲ⁾(t), summed in grid order.
    pub polarization: Vec<C64>,
    /// Weighted populations, summed in grid order.
    pub populations: Vec<[f64; 3]>,
}

impl EnsembleResult {
    /// Index of the sample at `t`, if `t` is a sample time.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        sample_index(&self.times, t)
    }

    /// Index of the sample nearest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&x| x < t);
        match i {
            0 => 0,
            i if i >= self.times.len() => self.times.len() - 1,
            i if (self.times[i] - t) < (t - self.times[i - 1]) => i,
            i => i - 1,
        }
    }

    /// Weighted P(t) over a subset of atoms (no renormalization).
    pub fn band_polarization(&self, atoms: &[usize]) -> Vec<C64> {
        let mut p = vec![C64::new(0.0, 0.0); self.times.len()];
        for &j in atoms {
            let w = self.grid.weights[j];
            for (acc, c) in p.iter_mut().zip(&self.per_atom[j].rho13) {
                *acc += c * w;
            }
        }
        p
    }
}

pub fn polarization(result: &EnsembleResult) -> &[C64] {
    &result.polarization
}

/// |P(t)|² alongside [`polarization`].
pub fn intensity(result: &EnsembleResult) -> Vec<f64> {
    result.polarization.iter().map(|p| p.norm_sqr()).collect()
}

/// Ensemble-averaged (ρ₁₁, ρ₂₂, ρ₃₃) per sample.
pub fn population_trace(result: &EnsembleResult) -> &[[f64; 3]] {
    &result.populations
}

fn simulate_atom(
    atom: &AtomParams,
    seq: &PulseSequence,
    cfg: &EnsembleConfig,
    capacity: usize,
) -> Result<(AtomSeries, AtomDiagnostics), crate::bloch::DynamicsError> {
    let mut series = AtomSeries {
        rho13: Vec::with_capacity(capacity),
        populations: Vec::with_capacity(capacity),
    };
    let mut diag = AtomDiagnostics::default();
    evolve_with(&DensityMatrix::ground(), seq.pulses(), atom, cfg.t0, cfg.t1, &cfg.integrator, |_, rho| {
        series.rho13.push(rho.rho13());
        series.populations.push(rho.populations());
        diag.record(rho);
    })?;
    Ok((series, diag))
}

/// Evolves every grid atom from the ground state and reduces the ensemble
/// observables in fixed grid order, so the result does not depend on the
/// number of workers.
pub fn run_ensemble(
    template: &AtomParams,
    seq: &PulseSequence,
    grid: &DetuningGrid,
    cfg: &EnsembleConfig,
) -> Result<EnsembleResult, EnsembleError> {
    let findings = validate_sequence(seq, &TimingOptions::default());
    if has_errors(&findings) {
        let msgs: Vec<String> = findings
            .into_iter()
            .filter(|f| f.severity == Severity::Error)
            .map(|f| f.message)
            .collect();
        return Err(EnsembleError::InvalidSequence(msgs.join("; ")));
    }
    template.validate().map_err(|source| EnsembleError::Atom { index: None, source })?;

    let times = sample_times(seq.pulses(), cfg.t0, cfg.t1, &cfg.integrator);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| EnsembleError::ThreadPool(e.to_string()))?;

    let outcomes: Vec<_> = pool.install(|| {
        grid.points
            .par_iter()
            .enumerate()
            .map(|(index, &delta)| {
                simulate_atom(&template.with_detuning(delta), seq, cfg, times.len())
                    .map_err(|source| EnsembleError::Atom { index: Some(index), source })
            })
            .collect()
    });

    let mut per_atom = Vec::with_capacity(grid.len());
    let mut diagnostics = Vec::with_capacity(grid.len());
    for outcome in outcomes {
        let (series, diag) = outcome?;
        per_atom.push(series);
        diagnostics.push(diag);
    }

    let n = times.len();
    let mut pol = vec![C64::new(0.0, 0.0); n];
    let mut pops = vec![[0.0; 3]; n];
    for (series, &w) in per_atom.iter().zip(&grid.weights) {
        for k in 0..n {
            pol[k] += series.rho13[k] * w;
            for (acc, p) in pops[k].iter_mut().zip(series.populations[k]) {
                *acc += w * p;
            }
        }
    }

    Ok(EnsembleResult {
        grid: grid.clone(),
        times,
        per_atom,
        diagnostics,
        polarization: pol,
        populations: pops,
    })
}
