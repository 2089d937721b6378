use nalgebra::{Complex, Matrix3};

use super::DynamicsError;

pub type C64 = Complex<f64>;

/// Three-level density matrix in the basis |1⟩ (ground), |2⟩ (spin), |3⟩ (excited).
///
/// Element `(i, j)` is ⟨i+1|ρ|j+1⟩, so the optical coherence ρ₁₃ lives at `(0, 2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(Matrix3<C64>);

/// Atomic level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Ground,
    Spin,
    Excited,
}

impl Level {
    pub fn index(self) -> usize {
        match self {
            Level::Ground => 0,
            Level::Spin => 1,
            Level::Excited => 2,
        }
    }
}

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-9;

impl DensityMatrix {
    /// All population in `level`.
    pub fn pure(level: Level) -> Self {
        let mut m = Matrix3::zeros();
        m[(level.index(), level.index())] = C64::new(1.0, 0.0);
        DensityMatrix(m)
    }

    pub fn ground() -> Self {
        Self::pure(Level::Ground)
    }

    /// Checks Hermiticity and unit trace.
    pub fn from_matrix(m: Matrix3<C64>) -> Result<Self, DynamicsError> {
        let rho = DensityMatrix(m);
        let herm = rho.hermiticity_error();
        if !(herm <= HERMITIAN_TOL) {
            return Err(DynamicsError::InvalidState(format!(
                "matrix is not Hermitian (max deviation {herm:e})"
            )));
        }
        let tr = rho.trace();
        if !((tr.re - 1.0).abs() <= TRACE_TOL && tr.im.abs() <= TRACE_TOL) {
            return Err(DynamicsError::InvalidState(format!("trace is {tr}, expected 1")));
        }
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix3<C64>) -> Self {
        DensityMatrix(m)
    }

    /// Populations `p` on the diagonal and a single optical coherence ρ₁₃.
    pub fn with_optical_coherence(p: [f64; 3], rho13: C64) -> Result<Self, DynamicsError> {
        let mut m = Matrix3::zeros();
        for (i, &pi) in p.iter().enumerate() {
            m[(i, i)] = C64::new(pi, 0.0);
        }
        m[(0, 2)] = rho13;
        m[(2, 0)] = rho13.conj();
        Self::from_matrix(m)
    }

    pub fn matrix(&self) -> &Matrix3<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix3<C64> {
        self.0
    }

    /// Zero-based element access.
    pub fn element(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn rho11(&self) -> f64 {
        self.0[(0, 0)].re
    }

    pub fn rho22(&self) -> f64 {
        self.0[(1, 1)].re
    }

    pub fn rho33(&self) -> f64 {
        self.0[(2, 2)].re
    }

    pub fn rho12(&self) -> C64 {
        self.0[(0, 1)]
    }

    pub fn rho13(&self) -> C64 {
        self.0[(0, 2)]
    }

    pub fn rho23(&self) -> C64 {
        self.0[(1, 2)]
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.rho11(), self.rho22(), self.rho33()]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// max |ρᵢⱼ − conj(ρⱼᵢ)| over all pairs, diagonal included.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in i..3 {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().min()
    }
}
