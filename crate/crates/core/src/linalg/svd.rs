//! One-sided (Hestenes) Jacobi SVD for the small, wide sketch matrices.
//!
//! Rows of the working copy are rotated pairwise until mutually orthogonal;
//! their norms are the singular values, the normalized rows the right
//! singular vectors, and the accumulated rotations the left ones.

use super::{axpy, dot, norm2, DenseMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// `u` is rows×p, `v` is cols×p with p = min(rows, cols); `s` is descending.
#[derive(Clone, Debug)]
pub struct SvdTriple {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdTriple {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.s) {
                *x *= s;
            }
        }
        us.matmul_t(&self.v)
    }
}

pub fn dense_svd(b: &DenseMatrix) -> Result<SvdTriple> {
    let (rows, cols) = b.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!("cannot take the SVD of a {rows}x{cols} matrix")));
    }
    if !b.is_finite() {
        return Err(Error::Input("SVD input has non-finite entries".into()));
    }
    if rows <= cols {
        wide_svd(b.clone())
    } else {
        let t = wide_svd(b.transpose())?;
        Ok(SvdTriple {
            u: t.v,
            s: t.s,
            v: t.u,
        })
    }
}

fn wide_svd(mut w: DenseMatrix) -> Result<SvdTriple> {
    let (p, n) = w.shape();
    let mut rot = DenseMatrix::identity(p);
    let tol = f64::EPSILON * (n as f64).sqrt();
    let mut norms: Vec<f64> = (0..p).map(|i| dot(w.row(i), w.row(i))).collect();

    let mut converged = p < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..p - 1 {
            for j in i + 1..p {
                let (alpha, beta) = (norms[i], norms[j]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(w.row(i), w.row(j));
                if gamma.abs() <= tol * (alpha.sqrt() * beta.sqrt()) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, i, j, c, s);
                rotate_rows(&mut rot, i, j, c, s);
                norms[i] = dot(w.row(i), w.row(i));
                norms[j] = dot(w.row(j), w.row(j));
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::Numerical("Jacobi SVD did not converge".into()));
    }

    let sing: Vec<f64> = (0..p).map(|i| norm2(w.row(i))).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| sing[b].total_cmp(&sing[a]));

    let mut u = DenseMatrix::zeros(p, p);
    let mut vt = DenseMatrix::zeros(p, n);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..p {
            u[(k, dst)] = rot[(src, k)];
        }
        let s = sing[src];
        if s > f64::MIN_POSITIVE.sqrt() {
            for (x, y) in vt.row_mut(dst).iter_mut().zip(w.row(src)) {
                *x = y / s;
            }
        } else {
            missing.push(dst);
        }
    }
    complete_rows(&mut vt, &missing);

    Ok(SvdTriple {
        u,
        s: order.iter().map(|&i| sing[i]).collect(),
        v: vt.transpose(),
    })
}

/// `(row_i, row_j) ← (c·row_i − s·row_j, s·row_i + c·row_j)`
fn rotate_rows(m: &mut DenseMatrix, i: usize, j: usize, c: f64, s: f64) {
    let cols = m.cols();
    let (head, tail) = m.as_mut_slice().split_at_mut(j * cols);
    let ri = &mut head[i * cols..(i + 1) * cols];
    let rj = &mut tail[..cols];
    for (a, b) in ri.iter_mut().zip(rj.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Fills the listed rows with unit vectors orthogonal to every other row.
fn complete_rows(vt: &mut DenseMatrix, missing: &[usize]) {
    let n = vt.cols();
    let mut filled: Vec<usize> = (0..vt.rows()).filter(|i| !missing.contains(i)).collect();
    let mut candidate = 0;
    for &row in missing {
        while candidate < n {
            let mut e = vec![0.0; n];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &k in &filled {
                    let proj = dot(vt.row(k), &e);
                    axpy(-proj, vt.row(k), &mut e);
                }
            }
            let len = norm2(&e);
            if len > 0.5 {
                for (x, y) in vt.row_mut(row).iter_mut().zip(&e) {
                    *x = y / len;
                }
                filled.push(row);
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;

    fn check_triple(a: &DenseMatrix, t: &SvdTriple, tol: f64) {
        assert!(t.s.windows(2).all(|w| w[0] >= w[1]));
        assert!(t.s.iter().all(|&s| s >= 0.0));
        assert!(t.u.orthogonality_error() <= 1e-12);
        assert!(t.v.orthogonality_error() <= 1e-12);
        let rel = t.reconstruct().sub(a).frobenius_norm() / a.frobenius_norm().max(1e-300);
        assert!(rel <= tol, "reconstruction error {rel}");
    }

    #[test]
    fn embedded_diagonal() {
        let mut a = DenseMatrix::zeros(3, 5);
        a[(0, 0)] = 3.0;
        a[(1, 1)] = 1.0;
        a[(2, 2)] = 2.0;
        let t = dense_svd(&a).unwrap();
        for (got, want) in t.s.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        check_triple(&a, &t, 1e-15);
    }

    #[test]
    fn rank_one_outer_product() {
        let x = [1.0, -2.0, 0.5];
        let y = [2.0, 0.0, 1.0, -1.0, 3.0];
        let a = DenseMatrix::from_fn(3, 5, |i, j| x[i] * y[j]);
        let t = dense_svd(&a).unwrap();
        let want = norm2(&x) * norm2(&y);
        assert!((t.s[0] - want).abs() < 1e-12 * want);
        assert!(t.s[1..].iter().all(|&s| s < 1e-12));
        check_triple(&a, &t, 1e-14);
    }

    #[test]
    fn zero_matrix_gets_completed_bases() {
        let a = DenseMatrix::zeros(2, 4);
        let t = dense_svd(&a).unwrap();
        assert_eq!(t.s, vec![0.0, 0.0]);
        assert!(t.v.orthogonality_error() <= 1e-15);
    }

    #[test]
    fn tall_input_goes_through_transpose() {
        let a = gaussian_matrix(30, 6, 3).unwrap();
        let t = dense_svd(&a).unwrap();
        assert_eq!(t.u.shape(), (30, 6));
        assert_eq!(t.v.shape(), (6, 6));
        check_triple(&a, &t, 1e-13);
    }

    #[test]
    fn wide_random_reconstructs() {
        let a = gaussian_matrix(20, 200, 9).unwrap();
        check_triple(&a, &dense_svd(&a).unwrap(), 1e-13);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut a = DenseMatrix::zeros(2, 2);
        a[(1, 0)] = f64::NAN;
        assert!(matches!(dense_svd(&a), Err(Error::Input(_))));
    }
}
