//! Thin Householder QR without pivoting.

use super::{axpy, dot, norm2, DenseMatrix};
use crate::error::{Error, Result};

/// Relative threshold on `|r_jj|` (scaled by the largest input column norm)
/// below which a column counts as linearly dependent.
pub const RANK_TOL: f64 = 1e-12;

/// `q` is m×b with orthonormal columns, `r` is b×b upper triangular with a
/// nonnegative diagonal and `q · r` equals the input.
#[derive(Clone, Debug)]
pub struct QrPair {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
}

/// Factors the m×b matrix `y` (m ≥ b ≥ 1).
pub fn qr_unpivoted(y: &DenseMatrix) -> Result<QrPair> {
    let (m, b) = y.shape();
    if b == 0 || m < b {
        return Err(Error::Dimension(format!(
            "thin QR needs m >= b >= 1, got {m}x{b}"
        )));
    }
    if !y.is_finite() {
        return Err(Error::Input("QR input has non-finite entries".into()));
    }

    // Columns of y become contiguous rows of w.
    let mut w = y.transpose();
    let max_col_norm = (0..b).map(|j| norm2(w.row(j))).fold(0.0, f64::max);
    let tol = RANK_TOL * max_col_norm;
    let mut r = DenseMatrix::zeros(b, b);
    let mut vtv = vec![0.0; b];

    for j in 0..b {
        let (head, tail) = w.as_mut_slice().split_at_mut((j + 1) * m);
        let v = &mut head[j * m + j..(j + 1) * m];
        let norm = norm2(v);
        if !(norm > tol) {
            return Err(Error::RankDeficient { column: j });
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vv = dot(v, v);
        vtv[j] = vv;
        for (k, col) in tail.chunks_exact_mut(m).enumerate() {
            let seg = &mut col[j..];
            let f = 2.0 * dot(v, seg) / vv;
            axpy(-f, v, seg);
            r[(j, j + 1 + k)] = seg[0];
        }
        r[(j, j)] = alpha;
    }

    // Accumulate Q = H_0 ⋯ H_{b-1} [I; 0], stored transposed.
    let mut qt = DenseMatrix::zeros(b, m);
    for k in 0..b {
        qt[(k, k)] = 1.0;
    }
    for j in (0..b).rev() {
        let v = &w.row(j)[j..];
        for k in j..b {
            let seg = &mut qt.row_mut(k)[j..];
            let f = 2.0 * dot(v, seg) / vtv[j];
            axpy(-f, v, seg);
        }
    }

    for j in 0..b {
        if r[(j, j)] < 0.0 {
            for v in &mut r.row_mut(j)[j..] {
                *v = -*v;
            }
            for v in qt.row_mut(j) {
                *v = -*v;
            }
        }
    }

    Ok(QrPair {
        q: qt.transpose(),
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;

    fn assert_upper_nonneg(r: &DenseMatrix) {
        for i in 0..r.rows() {
            assert!(r[(i, i)] >= 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn identity_factors_trivially() {
        let qr = qr_unpivoted(&DenseMatrix::identity(3)).unwrap();
        assert!(qr.q.max_abs_diff(&DenseMatrix::identity(3)) < 1e-15);
        assert!(qr.r.max_abs_diff(&DenseMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn single_column_is_normalized() {
        let y = DenseMatrix::from_rows(&[[3.0], [4.0]]).unwrap();
        let qr = qr_unpivoted(&y).unwrap();
        assert!((qr.q[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((qr.q[(1, 0)] - 0.8).abs() < 1e-15);
        assert!((qr.r[(0, 0)] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn proportional_columns_are_rank_deficient() {
        let y = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        assert!(matches!(
            qr_unpivoted(&y),
            Err(Error::RankDeficient { column: 1 })
        ));
    }

    #[test]
    fn zero_matrix_is_rank_deficient_at_first_column() {
        let y = DenseMatrix::zeros(4, 2);
        assert!(matches!(
            qr_unpivoted(&y),
            Err(Error::RankDeficient { column: 0 })
        ));
    }

    #[test]
    fn wide_input_is_a_dimension_error() {
        assert!(matches!(
            qr_unpivoted(&DenseMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn random_factorization_reconstructs() {
        for (m, b, seed) in [(40, 7, 1), (25, 25, 2), (100, 1, 3), (64, 10, 4)] {
            let y = gaussian_matrix(m, b, seed).unwrap();
            let qr = qr_unpivoted(&y).unwrap();
            assert!(qr.q.orthogonality_error() <= 1e-12);
            let rel = qr.q.matmul(&qr.r).sub(&y).frobenius_norm() / y.frobenius_norm();
            assert!(rel <= 1e-12, "reconstruction {rel}");
            assert_upper_nonneg(&qr.r);
        }
    }

    #[test]
    fn deterministic_for_fixed_input() {
        let y = gaussian_matrix(30, 6, 5).unwrap();
        let a = qr_unpivoted(&y).unwrap();
        let b = qr_unpivoted(&y).unwrap();
        assert_eq!(a.q, b.q);
        assert_eq!(a.r, b.r);
    }
}
