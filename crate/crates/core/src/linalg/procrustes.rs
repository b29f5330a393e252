use super::{svd_thin, Matrix};
use crate::error::{LmsError, Result};

/// Orthogonal `Q` minimising `‖AQ − B‖_F`, built as `F₁F₂ᵀ` from the SVD
/// `AᵀB = F₁ΣF₂ᵀ`.
pub fn procrustes(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.shape() != b.shape() {
        return Err(LmsError::Shape(format!(
            "procrustes operands {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let m = a.t_matmul(b)?;
    let svd = svd_thin(&m)?;
    svd.u.matmul(&svd.v.transpose())
}
