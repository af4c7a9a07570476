use super::{BiMapLayer, SpdError, SpdMatrix, SymMatrix};

/// BiMap: `W X W^T` for a row-orthonormal `W` of shape `d_out x d_in`.
///
/// Congruence by a full-row-rank map keeps a PD input PD.
pub fn bimap(x: &SpdMatrix, layer: &BiMapLayer) -> Result<SpdMatrix, SpdError> {
    let w = layer.weights();
    if w.ncols() != x.dim() {
        return Err(SpdError::ShapeMismatch {
            expected: format!("{} input columns", x.dim()),
            found: format!("{}x{} weights", w.nrows(), w.ncols()),
        });
    }
    let out = w * x.as_matrix() * w.transpose();
    Ok(SpdMatrix::from_sym_unchecked(SymMatrix::symmetrized(out)))
}

/// ReEig: `U max(eps I, Sigma) U^T`.
///
/// When no eigenvalue lies below `eps` the input is returned unchanged.
pub fn reeig(x: &SymMatrix, epsilon: f64) -> Result<SpdMatrix, SpdError> {
    if !(epsilon > 0.0) {
        return Err(SpdError::BadSchedule(format!(
            "ReEig threshold must be positive, got {epsilon}"
        )));
    }
    let e = x.eig()?;
    if e.min_value() >= epsilon {
        return Ok(SpdMatrix::from_sym_unchecked(x.clone()));
    }
    Ok(SpdMatrix::from_sym_unchecked(e.recompose(|l| l.max(epsilon))))
}

/// LogEig: `U log(Sigma) U^T`. Every eigenvalue must be strictly positive.
pub fn logeig(x: &SpdMatrix) -> Result<SymMatrix, SpdError> {
    let e = x.as_sym().eig()?;
    let min = e.min_value();
    if !(min > 0.0) {
        return Err(SpdError::NonPositiveEigenvalue { value: min });
    }
    Ok(e.recompose(f64::ln))
}

/// Matrix exponential of a symmetric matrix via its eigen-decomposition.
pub fn expm(x: &SymMatrix) -> Result<SpdMatrix, SpdError> {
    let e = x.eig()?;
    Ok(SpdMatrix::from_sym_unchecked(e.recompose(f64::exp)))
}

/// Affine-invariant geodesic distance `||log(A^{-1/2} B A^{-1/2})||_F`.
pub fn affine_distance(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64, SpdError> {
    if a.dim() != b.dim() {
        return Err(SpdError::DimMismatch { a: a.dim(), b: b.dim() });
    }
    let ea = a.as_sym().eig()?;
    let min = ea.min_value();
    if !(min > 0.0) {
        return Err(SpdError::NonPositiveEigenvalue { value: min });
    }
    let inv_sqrt = ea.recompose(|l| 1.0 / l.sqrt());
    let whitened = SymMatrix::symmetrized(inv_sqrt.as_matrix() * b.as_matrix() * inv_sqrt.as_matrix());
    let ew = whitened.eig()?;
    let min = ew.min_value();
    if !(min > 0.0) {
        return Err(SpdError::NonPositiveEigenvalue { value: min });
    }
    Ok(ew.values.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
}
