//! Symmetric positive-definite matrices and the manifold layers that reduce
//! them: bilinear projection (BiMap), eigenvalue rectification (ReEig) and
//! the matrix logarithm (LogEig).

mod chain;
mod eig;
mod layers;

use nalgebra::DMatrix;
use thiserror::Error;

pub use chain::{
    init_stiefel, load_chain, save_chain, spd_reduce, BiMapLayer, SpdChain, SpdChainConfig, DEFAULT_EPSILON,
};
pub use eig::{sym_eig, sym_eig_checked, EigenPair, MAX_SWEEPS, OFF_DIAGONAL_TOL};
pub use layers::{affine_distance, bimap, expm, logeig, reeig};

/// Relative Frobenius asymmetry accepted by [`SymMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SpdError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (relative asymmetry {relative:e})")]
    AsymmetricInput { relative: f64 },
    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("Jacobi iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("non-positive eigenvalue {value:e}")]
    NonPositiveEigenvalue { value: f64 },
    #[error("dimension mismatch: {a} vs {b}")]
    DimMismatch { a: usize, b: usize },
    #[error("cannot build a {d_out}x{d_in} Stiefel point")]
    BadShape { d_out: usize, d_in: usize },
    #[error("weight rows are not orthonormal (||W W^T - I||_F = {error:e})")]
    NotStiefel { error: f64 },
    #[error("invalid SPD schedule: {0}")]
    BadSchedule(String),
    #[error(transparent)]
    Format(#[from] crate::tensorio::FormatError),
}

/// Square matrix with certified symmetry (stored exactly symmetric).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Accepts `m` if it is square and symmetric within [`SYMMETRY_TOL`]
    /// relative Frobenius, then averages it with its transpose.
    pub fn new(m: DMatrix<f64>) -> Result<Self, SpdError> {
        if !m.is_square() {
            return Err(SpdError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(SpdError::AsymmetricInput { relative: f64::NAN });
        }
        let norm = m.norm();
        let asym = (&m - m.transpose()).norm();
        if norm > 0.0 && asym > SYMMETRY_TOL * norm {
            return Err(SpdError::AsymmetricInput { relative: asym / norm });
        }
        Ok(Self::symmetrized(m))
    }

    /// `(m + m^T) / 2` without a tolerance check.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut out = m;
        for j in 0..n {
            for i in 0..j {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Self(out)
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn eig(&self) -> Result<EigenPair, SpdError> {
        sym_eig(self)
    }
}

/// Symmetric positive (semi-)definite matrix.
///
/// Constructed either through the checked [`SpdMatrix::new`] or by
/// operations that guarantee the property (pooling with ridge, BiMap,
/// ReEig, matrix exponential).
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(SymMatrix);

impl SpdMatrix {
    /// Checks symmetry and `min eigenvalue >= -1e-8 * trace / d`.
    pub fn new(m: DMatrix<f64>) -> Result<Self, SpdError> {
        let sym = SymMatrix::new(m)?;
        let d = sym.dim().max(1) as f64;
        let min = sym.eig()?.min_value();
        if min < -1e-8 * sym.trace().abs() / d {
            return Err(SpdError::NotPsd { min_eigenvalue: min });
        }
        Ok(Self(sym))
    }

    pub(crate) fn from_sym_unchecked(sym: SymMatrix) -> Self {
        Self(sym)
    }

    pub fn identity(d: usize) -> Self {
        Self(SymMatrix::identity(d))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.0
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.0.as_matrix()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0.into_inner()
    }
}
