use super::{axpy, DenseMatrix};
use crate::error::{Error, Result};

/// Returns `R⁻ᵀ M` for upper triangular `r` (b×b) and `m` (b×n), by forward
/// substitution on `Rᵀ X = M`.
pub fn solve_rt(r: &DenseMatrix, m: &DenseMatrix) -> Result<DenseMatrix> {
    check_shapes(r, m)?;
    let b = r.rows();
    let scale = (0..b).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    for j in 0..b {
        let d = r[(j, j)].abs();
        if !(d > f64::EPSILON * scale) || !d.is_normal() {
            return Err(Error::Singular { index: j });
        }
    }
    Ok(forward(r, m.clone(), false))
}

/// Like [`solve_rt`], but an exactly zero pivot yields a zero row in the
/// solution instead of an error. Used when deficient directions were filled
/// with vectors known to be orthogonal to the data.
pub(crate) fn solve_rt_skip_zero(r: &DenseMatrix, m: &DenseMatrix) -> Result<DenseMatrix> {
    check_shapes(r, m)?;
    Ok(forward(r, m.clone(), true))
}

fn check_shapes(r: &DenseMatrix, m: &DenseMatrix) -> Result<()> {
    if r.rows() != r.cols() || r.rows() != m.rows() {
        return Err(Error::Dimension(format!(
            "solve_rt needs square r matching m's rows, got r {}x{} and m {}x{}",
            r.rows(),
            r.cols(),
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

fn forward(r: &DenseMatrix, mut x: DenseMatrix, skip_zero: bool) -> DenseMatrix {
    let (b, n) = x.shape();
    for j in 0..b {
        let d = r[(j, j)];
        let (head, tail) = x.as_mut_slice().split_at_mut((j + 1) * n);
        let xj = &mut head[j * n..];
        if skip_zero && d == 0.0 {
            xj.fill(0.0);
            continue;
        }
        let inv = 1.0 / d;
        for v in xj.iter_mut() {
            *v *= inv;
        }
        for (t, row) in tail.chunks_exact_mut(n).enumerate() {
            let coef = r[(j, j + 1 + t)];
            if coef != 0.0 {
                axpy(-coef, xj, row);
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, qr_unpivoted};

    #[test]
    fn identity_returns_rhs() {
        let m = gaussian_matrix(3, 4, 1).unwrap();
        assert_eq!(solve_rt(&DenseMatrix::identity(3), &m).unwrap(), m);
    }

    #[test]
    fn scalar_case() {
        let r = DenseMatrix::from_rows(&[[2.0]]).unwrap();
        let m = DenseMatrix::from_rows(&[[4.0, 6.0]]).unwrap();
        assert_eq!(solve_rt(&r, &m).unwrap().as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn random_well_conditioned_residual() {
        // R from the QR of a tall Gaussian is well conditioned.
        let r = qr_unpivoted(&gaussian_matrix(200, 8, 3).unwrap()).unwrap().r;
        let m = gaussian_matrix(8, 13, 4).unwrap();
        let x = solve_rt(&r, &m).unwrap();
        let resid = r.t_matmul(&x).sub(&m);
        assert!(resid.max_abs() <= 1e-12, "residual {}", resid.max_abs());
    }

    #[test]
    fn zero_pivot_is_singular() {
        let r = DenseMatrix::from_rows(&[[1.0, 2.0], [0.0, 0.0]]).unwrap();
        let m = DenseMatrix::zeros(2, 3);
        assert!(matches!(solve_rt(&r, &m), Err(Error::Singular { index: 1 })));
        let x = solve_rt_skip_zero(&r, &DenseMatrix::from_rows(&[[1.0], [5.0]]).unwrap()).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let r = DenseMatrix::identity(2);
        assert!(matches!(
            solve_rt(&r, &DenseMatrix::zeros(3, 1)),
            Err(Error::Dimension(_))
        ));
    }
}
