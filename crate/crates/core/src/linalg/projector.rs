use super::DenseMatrix;
use crate::error::{Error, Result};

/// Orthogonal projection `q (qᵀ x)` of `x` onto the range of `q`, whose
/// columns are assumed orthonormal.
pub fn projector_apply(q: &DenseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != q.rows() {
        return Err(Error::Dimension(format!(
            "vector of length {} cannot be projected by a {}x{} basis",
            x.len(),
            q.rows(),
            q.cols()
        )));
    }
    Ok(q.matvec(&q.t_matvec(x)))
}
