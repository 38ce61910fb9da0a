use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};
use crate::rqb::TruncatedSvd;

/// Largest `m·n` accepted by [`exact_truncated_svd`].
pub const EXACT_SVD_LIMIT: usize = 10_000_000;

/// Leading `k` singular triples from a full LAPACK-style SVD (nalgebra),
/// independent of this crate's own kernels.
pub fn exact_truncated_svd(a: &DenseMatrix, k: usize) -> Result<TruncatedSvd> {
    let (m, n) = a.shape();
    if m.saturating_mul(n) > EXACT_SVD_LIMIT {
        return Err(Error::Scale(format!(
            "exact SVD of a {m}x{n} matrix exceeds the {EXACT_SVD_LIMIT}-entry limit; supply a precomputed reference"
        )));
    }
    if k == 0 || k > m.min(n) {
        return Err(Error::Dimension(format!("k = {k} is outside 1..={}", m.min(n))));
    }
    let svd = DMatrix::from_row_slice(m, n, a.as_slice()).svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let order = &order[..k];
    let mut out = TruncatedSvd {
        u: DenseMatrix::from_fn(m, k, |i, j| u[(i, order[j])]),
        s: order.iter().map(|&j| svd.singular_values[j]).collect(),
        v: DenseMatrix::from_fn(n, k, |i, j| vt[(order[j], i)]),
    };
    out.normalize_signs();
    Ok(out)
}

/// Accuracy of a computed factorization against a reference.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    /// `max_j |s_j − ŝ_j|`
    pub max_singval_abs_err: f64,
    /// Pearson correlation of each sign-aligned pair `(v_j, v̂_j)`.
    pub per_component_correlation: Vec<f64>,
    /// `‖A − UΣVᵀ‖_F / ‖A‖_F`, when `A` was supplied.
    pub frobenius_residual_rel: Option<f64>,
    /// Phase name → seconds.
    pub wall_times: BTreeMap<String, f64>,
    pub passes: usize,
    pub retained_floats: usize,
}

pub fn compare(result: &TruncatedSvd, reference: &TruncatedSvd, a: Option<&DenseMatrix>) -> Result<MetricsReport> {
    if result.k() != reference.k() || result.v.rows() != reference.v.rows() {
        return Err(Error::Dimension(format!(
            "cannot compare rank {} (n = {}) against rank {} (n = {})",
            result.k(),
            result.v.rows(),
            reference.k(),
            reference.v.rows()
        )));
    }
    let max_err = result
        .s
        .iter()
        .zip(&reference.s)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let correlations = (0..result.k())
        .map(|j| aligned_correlation(&result.v.column(j), &reference.v.column(j)))
        .collect();
    let residual = match a {
        Some(a) => {
            if a.shape() != (result.u.rows(), result.v.rows()) {
                return Err(Error::Dimension("residual matrix shape does not match the factorization".into()));
            }
            Some(result.reconstruct().sub(a).frobenius_norm() / a.frobenius_norm().max(f64::MIN_POSITIVE))
        }
        None => None,
    };
    Ok(MetricsReport {
        max_singval_abs_err: max_err,
        per_component_correlation: correlations,
        frobenius_residual_rel: residual,
        ..Default::default()
    })
}

/// Pearson correlation after flipping `x` to point the same way as `y`.
/// Constant vectors correlate 1 with equal vectors and 0 otherwise.
fn aligned_correlation(x: &[f64], y: &[f64]) -> f64 {
    let sign = if dot(x, y) < 0.0 { -1.0 } else { 1.0 };
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() * sign / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (sign * a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return if x.iter().zip(y).all(|(a, b)| sign * a == *b) { 1.0 } else { 0.0 };
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

impl MetricsReport {
    /// Column names matching [`csv_record`](Self::csv_record).
    pub fn csv_header(k: usize) -> Vec<String> {
        let mut h: Vec<String> = ["max_err", "residual_rel", "passes", "retained_floats"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend((1..=k).map(|j| format!("corr_{j}")));
        h
    }

    pub fn csv_record(&self) -> Vec<String> {
        let mut r = vec![
            format!("{:e}", self.max_singval_abs_err),
            self.frobenius_residual_rel.map_or(String::new(), |x| format!("{x:e}")),
            self.passes.to_string(),
            self.retained_floats.to_string(),
        ];
        r.extend(self.per_component_correlation.iter().map(|c| format!("{c:.12}")));
        r
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "max singular value error : {:.3e}", self.max_singval_abs_err);
        if let Some(r) = self.frobenius_residual_rel {
            let _ = writeln!(s, "relative residual        : {r:.3e}");
        }
        let c = &self.per_component_correlation;
        if let Some(first) = c.first() {
            let min = c.iter().copied().fold(f64::INFINITY, f64::min);
            let _ = writeln!(s, "correlation, component 1 : {first:.6}");
            let _ = writeln!(s, "correlation, minimum     : {min:.6}");
        }
        let _ = writeln!(s, "passes                   : {}", self.passes);
        let _ = writeln!(s, "retained floats          : {}", self.retained_floats);
        for (phase, t) in &self.wall_times {
            let _ = writeln!(s, "time {phase:<20}: {t:.3} s");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dense_svd, gaussian_matrix};

    #[test]
    fn diagonal_rank_one_truncation() {
        let a = DenseMatrix::diag(&[4.0, 2.0]);
        let t = exact_truncated_svd(&a, 1).unwrap();
        assert_eq!(t.s, vec![4.0]);
        assert!((t.v[(0, 0)].abs() - 1.0).abs() < 1e-15);
        assert!(t.v[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn agrees_with_the_jacobi_kernel() {
        let a = gaussian_matrix(50, 40, 3).unwrap();
        let exact = exact_truncated_svd(&a, 40).unwrap();
        let jacobi = dense_svd(&a).unwrap();
        for (x, y) in exact.s.iter().zip(&jacobi.s) {
            assert!((x - y).abs() <= 1e-10 * exact.s[0]);
        }
    }

    #[test]
    fn size_guard() {
        let a = DenseMatrix::zeros(10_001, 1000);
        assert!(matches!(exact_truncated_svd(&a, 1), Err(Error::Scale(_))));
    }

    #[test]
    fn self_comparison_is_perfect() {
        let a = gaussian_matrix(30, 20, 4).unwrap();
        let t = exact_truncated_svd(&a, 5).unwrap();
        let r = compare(&t, &t, Some(&a)).unwrap();
        assert_eq!(r.max_singval_abs_err, 0.0);
        assert!(r.per_component_correlation.iter().all(|&c| (c - 1.0).abs() < 1e-12));
        assert!(r.frobenius_residual_rel.unwrap() < 1.0);
    }

    #[test]
    fn flipped_component_still_correlates_fully() {
        let a = gaussian_matrix(30, 20, 5).unwrap();
        let t = exact_truncated_svd(&a, 3).unwrap();
        let mut f = t.clone();
        for i in 0..f.v.rows() {
            f.v[(i, 1)] = -f.v[(i, 1)];
        }
        let r = compare(&f, &t, None).unwrap();
        assert!((r.per_component_correlation[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_rank_is_rejected() {
        let a = gaussian_matrix(30, 20, 6).unwrap();
        let x = exact_truncated_svd(&a, 3).unwrap();
        let y = exact_truncated_svd(&a, 4).unwrap();
        assert!(matches!(compare(&x, &y, None), Err(Error::Dimension(_))));
    }

    #[test]
    fn csv_record_matches_header() {
        let r = MetricsReport {
            per_component_correlation: vec![1.0, 0.5],
            ..Default::default()
        };
        assert_eq!(MetricsReport::csv_header(2).len(), r.csv_record().len());
        assert!(r.to_text().contains("correlation, minimum"));
    }
}
