use super::EnsembleError;

/// Gaussian-weighted detunings (kHz) of an inhomogeneously broadened line.
#[derive(Clone, Debug, PartialEq)]
pub struct DetuningGrid {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub fwhm: f64,
    pub span: f64,
    pub n: usize,
}

/// `n` evenly spaced points on [−span, span] with normalized Gaussian
/// weights of the given FWHM. `n = 1` is the single resonant atom.
pub fn build_grid(fwhm: f64, span: f64, n: usize) -> Result<DetuningGrid, EnsembleError> {
    if !(fwhm > 0.0 && fwhm.is_finite()) {
        return Err(EnsembleError::InvalidGrid(format!("fwhm must be > 0, got {fwhm}")));
    }
    if !(span > 0.0 && span.is_finite()) {
        return Err(EnsembleError::InvalidGrid(format!("span must be > 0, got {span}")));
    }
    if n == 0 {
        return Err(EnsembleError::InvalidGrid("n must be >= 1".into()));
    }
    let points: Vec<f64> = if n == 1 {
        vec![0.0]
    } else {
        // integer numerator keeps p[n-1-i] == -p[i] exactly
        let m = (n - 1) as f64;
        (0..n).map(|i| span * (2.0 * i as f64 - m) / m).collect()
    };
    let raw: Vec<f64> = points.iter().map(|&d| gaussian(d, fwhm)).collect();
    let total: f64 = raw.iter().sum();
    Ok(DetuningGrid {
        weights: raw.iter().map(|w| w / total).collect(),
        points,
        fwhm,
        span,
        n,
    })
}

/// Unnormalized Gaussian with peak 1 and full width `fwhm` at half maximum.
pub fn gaussian(delta: f64, fwhm: f64) -> f64 {
    (-4.0 * std::f64::consts::LN_2 * (delta / fwhm).powi(2)).exp()
}

impl DetuningGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of atoms with |δ − center| ≤ half_width.
    pub fn select_band(&self, center: f64, half_width: f64) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, &d)| (d - center).abs() <= half_width + 1e-12)
            .map(|(i, _)| i)
            .collect()
    }
}
