//! Randomized factorizations built on the streaming sketch.
//!
//! * [`blocked_qb`] turns a sketch `G = AΩ`, `H = AᵀG` into `A ≈ QB` one
//!   column block at a time, never touching `A` again.
//! * [`single_pass_pca`] is sketch + blocked QB + small SVD, one pass.
//! * [`basic_rand_svd`] is the classic two-pass scheme (`Q = orth(AΩ)`, `B = QᵀA`).
//! * [`legacy_single_pass`] is the older one-pass method with two test
//!   matrices and a least-squares solve for `B`.
//! * [`power_refine`] re-sketches with `Ω′ = orth(H)` for one extra pass.

mod algorithms;
mod qb;

use crate::error::{Error, Result};
use crate::linalg::{dense_svd, DenseMatrix};

pub use algorithms::{
    basic_rand_svd, legacy_single_pass, legacy_single_pass_diagnostics, power_refine, run_pca,
    single_pass_pca, LegacyDiagnostics, RunReport,
};
pub use qb::{blocked_qb, BlockedQb, QbFactor, QbOptions};

/// What to do when a block of the sketch is numerically rank deficient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DeficiencyPolicy {
    /// Fail with [`Error::BlockDeficient`].
    #[default]
    Error,
    /// Replace each dependent direction with a fresh random unit vector
    /// orthogonal to everything found so far. Its row of `B` is set to zero,
    /// which is exact when the data's range is already exhausted.
    Resample,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Algorithm {
    #[default]
    SinglePass,
    Basic,
    Legacy,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SinglePass => "single-pass",
            Algorithm::Basic => "basic",
            Algorithm::Legacy => "legacy",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-pass" | "single" => Ok(Algorithm::SinglePass),
            "basic" => Ok(Algorithm::Basic),
            "legacy" => Ok(Algorithm::Legacy),
            _ => Err(Error::Config(format!(
                "unknown algorithm '{s}', expected single-pass, basic or legacy"
            ))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaConfig {
    /// Target rank.
    pub k: usize,
    /// Oversampling `s`.
    pub oversample: usize,
    /// Columns per QB iteration.
    pub block_size: usize,
    /// Power scheme exponent, 0 or 1.
    pub power: u8,
    pub seed: u64,
    /// Center the columns of `A` before factoring.
    pub center: bool,
    pub deficiency: DeficiencyPolicy,
    /// Second QR against the accumulated basis. Only turned off to observe
    /// the loss of orthogonality without it.
    pub reorthogonalize: bool,
    /// Rows per streamed block; `None` means `l`.
    pub block_rows: Option<usize>,
    pub compensated_sums: bool,
}

impl PcaConfig {
    pub fn new(k: usize) -> Self {
        PcaConfig {
            k,
            oversample: 10,
            block_size: 10,
            power: 0,
            seed: 0,
            center: false,
            deficiency: DeficiencyPolicy::Error,
            reorthogonalize: true,
            block_rows: None,
            compensated_sums: false,
        }
    }

    pub fn with_oversample(mut self, s: usize) -> Self {
        self.oversample = s;
        self
    }

    pub fn with_block_size(mut self, b: usize) -> Self {
        self.block_size = b;
        self
    }

    pub fn with_power(mut self, p: u8) -> Self {
        self.power = p;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_center(mut self, center: bool) -> Self {
        self.center = center;
        self
    }

    pub fn with_deficiency(mut self, policy: DeficiencyPolicy) -> Self {
        self.deficiency = policy;
        self
    }

    pub fn with_block_rows(mut self, rows: usize) -> Self {
        self.block_rows = Some(rows);
        self
    }

    /// `l`: the smallest multiple of the block size that is at least `k + s`.
    pub fn sketch_width(&self) -> usize {
        let b = self.block_size.max(1);
        (self.k + self.oversample).div_ceil(b) * b
    }

    pub fn stream_block_rows(&self) -> usize {
        self.block_rows.unwrap_or_else(|| self.sketch_width()).max(1)
    }

    /// Checks the configuration against an `m×n` input; `m` may be unknown
    /// until the stream is exhausted.
    pub fn validate(&self, m: Option<usize>, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.block_size == 0 {
            return Err(Error::Config("block size must be at least 1".into()));
        }
        if self.power > 1 {
            return Err(Error::Config(format!("power must be 0 or 1, got {}", self.power)));
        }
        if self.block_rows == Some(0) {
            return Err(Error::Config("block rows must be at least 1".into()));
        }
        let min_dim = m.map_or(n, |m| m.min(n));
        if self.k > min_dim {
            return Err(Error::Config(format!(
                "k = {} exceeds min(m, n) = {min_dim}",
                self.k
            )));
        }
        let l = self.sketch_width();
        if l > min_dim {
            return Err(Error::Config(format!(
                "sketch width l = {l} (k + s rounded up to a multiple of b = {}) exceeds min(m, n) = {min_dim}",
                self.block_size
            )));
        }
        Ok(())
    }
}

/// Leading `k` singular triples: `u` m×k, `s` descending, `v` n×k.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSvd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl TruncatedSvd {
    pub fn k(&self) -> usize {
        self.s.len()
    }

    /// `u · diag(s) · vᵀ`
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.s) {
                *x *= s;
            }
        }
        us.matmul_t(&self.v)
    }

    /// Flips column pairs so the largest-magnitude entry of each `v_j` is
    /// positive (first one on ties).
    pub fn normalize_signs(&mut self) {
        for j in 0..self.s.len() {
            let mut best = 0.0f64;
            let mut sign = 1.0;
            for i in 0..self.v.rows() {
                let x = self.v[(i, j)];
                if x.abs() > best {
                    best = x.abs();
                    sign = x.signum();
                }
            }
            if sign < 0.0 {
                for i in 0..self.v.rows() {
                    self.v[(i, j)] = -self.v[(i, j)];
                }
                for i in 0..self.u.rows() {
                    self.u[(i, j)] = -self.u[(i, j)];
                }
            }
        }
    }
}

/// SVD of `left · core · rightᵀ` truncated to `k`, where `left` and `right`
/// (identity if `None`) have orthonormal columns.
pub(crate) fn svd_of_factored(
    left: &DenseMatrix,
    core: &DenseMatrix,
    right: Option<&DenseMatrix>,
    k: usize,
) -> Result<TruncatedSvd> {
    let small = dense_svd(core)?;
    let k = k.min(small.s.len());
    let u = left.matmul(&small.u.columns(0..k));
    let v_small = small.v.columns(0..k);
    let v = match right {
        Some(r) => r.matmul(&v_small),
        None => v_small,
    };
    let mut out = TruncatedSvd {
        u,
        s: small.s[..k].to_vec(),
        v,
    };
    out.normalize_signs();
    Ok(out)
}

/// Columns of `v` in order: component 1 is `v₁`.
pub fn principal_components(svd: &TruncatedSvd) -> Vec<Vec<f64>> {
    (0..svd.k()).map(|j| svd.v.column(j)).collect()
}

/// `(1 + k/(s−1))^{1/2}`: the expected-error magnification of a rank-`k`
/// sketch with `s` oversampling columns over the optimal tail.
pub fn error_bound_factor(k: usize, s: usize) -> Result<f64> {
    if s < 2 {
        return Err(Error::Domain(format!("the error bound needs s >= 2, got {s}")));
    }
    Ok((1.0 + k as f64 / (s as f64 - 1.0)).sqrt())
}
