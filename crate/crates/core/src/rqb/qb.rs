//! Blocked QB from a one-pass sketch.
//!
//! Iteration `i` (columns `w..w+b`, `Q`/`B` the factors found so far):
//!
//! ```text
//! Y_i = G_i − Q(BΩ_i)
//! [Q_i, R_i] = qr(Y_i)
//! [Q_i, R̃]  = qr(Q_i − Q(QᵀQ_i));  R_i ← R̃·R_i
//! B_i = R_i⁻ᵀ (H_iᵀ − Y_iᵀQB − Ω_iᵀBᵀB)
//! ```
//!
//! The first iteration has `w = 0`, so every term involving `Q` or `B`
//! vanishes. `Q_i` overwrites `G_i` and `B_iᵀ` overwrites `H_i` in place, so
//! the loop needs no storage beyond the sketch itself plus one block.

use super::DeficiencyPolicy;
use crate::error::{Error, Result};
use crate::linalg::{
    axpy, dot, fill_gaussian_row, gemm, norm2, product, qr_unpivoted, solve_rt, solve_rt_skip_zero,
    DenseMatrix, MatRef, QrPair, RANK_TOL,
};

/// `q` m×l with orthonormal columns and `b` l×n, so that `A ≈ q·b`.
#[derive(Clone, Debug)]
pub struct QbFactor {
    pub q: DenseMatrix,
    pub b: DenseMatrix,
}

#[derive(Clone, Copy, Debug)]
pub struct QbOptions {
    pub block_size: usize,
    pub reorthogonalize: bool,
    pub deficiency: DeficiencyPolicy,
    /// Seed for replacement directions under [`DeficiencyPolicy::Resample`].
    pub seed: u64,
}

impl QbOptions {
    pub fn new(block_size: usize) -> Self {
        QbOptions {
            block_size,
            reorthogonalize: true,
            deficiency: DeficiencyPolicy::Error,
            seed: 0,
        }
    }
}

/// The QB loop as an explicit stepper, so callers can inspect `Q` and `B`
/// after every block.
pub struct BlockedQb<'a> {
    q_work: DenseMatrix,
    bt_work: DenseMatrix,
    omega: &'a DenseMatrix,
    opts: QbOptions,
    width: usize,
    transient_peak: usize,
}

impl<'a> BlockedQb<'a> {
    /// Takes ownership of `g` (m×l) and `h` (n×l); their storage is reused
    /// for `Q` and `Bᵀ`.
    pub fn new(g: DenseMatrix, h: DenseMatrix, omega: &'a DenseMatrix, opts: QbOptions) -> Result<Self> {
        let (n, l) = omega.shape();
        let b = opts.block_size;
        if b == 0 || l % b != 0 {
            return Err(Error::Config(format!(
                "sketch width {l} is not a multiple of the block size {b}"
            )));
        }
        if g.cols() != l || h.shape() != (n, l) {
            return Err(Error::Dimension(format!(
                "sketch shapes G {:?} and H {:?} do not match the {n}x{l} test matrix",
                g.shape(),
                h.shape()
            )));
        }
        if g.rows() < l {
            return Err(Error::Dimension(format!(
                "{} rows cannot support a sketch of width {l}",
                g.rows()
            )));
        }
        Ok(BlockedQb {
            q_work: g,
            bt_work: h,
            omega,
            opts,
            width: 0,
            transient_peak: 0,
        })
    }

    /// Columns of `Q` computed so far.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_done(&self) -> bool {
        self.width == self.omega.cols()
    }

    pub fn current_q(&self) -> DenseMatrix {
        self.q_work.columns(0..self.width)
    }

    pub fn current_b(&self) -> DenseMatrix {
        self.bt_work.columns(0..self.width).transpose()
    }

    /// Largest per-iteration scratch allocation so far, in `f64` values.
    pub fn transient_peak_floats(&self) -> usize {
        self.transient_peak
    }

    /// Runs one block iteration. Returns `false` once all blocks are done.
    pub fn step(&mut self) -> Result<bool> {
        if self.is_done() {
            return Ok(false);
        }
        let (w, b) = (self.width, self.opts.block_size);
        let block = w / b;
        let (m, n) = (self.q_work.rows(), self.bt_work.rows());
        let deficient = |e: Error| match e {
            Error::RankDeficient { column } | Error::Singular { index: column } => {
                Error::BlockDeficient { block, column }
            }
            other => other,
        };

        let q_prev = self.q_work.view().col_block(0, w);
        let bt_prev = self.bt_work.view().col_block(0, w);
        let omega_i = self.omega.view().col_block(w, b);

        let b_omega = product(bt_prev.t(), omega_i);
        let mut y = self.q_work.columns(w..w + b);
        let scale = max_column_norm(&y);
        gemm(-1.0, q_prev, b_omega.view(), 1.0, &mut y);

        let seed = crate::linalg::derive_seed(self.opts.seed, block as u64);
        let first = orthonormalize(&y, q_prev, scale, self.opts.deficiency, seed).map_err(deficient)?;
        let (q_i, r_i) = if self.opts.reorthogonalize && w > 0 {
            let proj = product(q_prev.t(), first.q.view());
            let mut z = first.q.clone();
            gemm(-1.0, q_prev, proj.view(), 1.0, &mut z);
            let second = qr_unpivoted(&z).map_err(deficient)?;
            (second.q, second.r.matmul(&first.r))
        } else {
            (first.q, first.r)
        };

        // Mᵀ = H_i − Bᵀ(QᵀY_i + BΩ_i), then B_i = R_i⁻ᵀ M.
        let mut c = b_omega;
        gemm(1.0, q_prev.t(), y.view(), 1.0, &mut c);
        let mut mt = self.bt_work.columns(w..w + b);
        gemm(-1.0, bt_prev, c.view(), 1.0, &mut mt);
        let rhs = mt.transpose();
        let b_i = match self.opts.deficiency {
            DeficiencyPolicy::Error => solve_rt(&r_i, &rhs),
            DeficiencyPolicy::Resample => solve_rt_skip_zero(&r_i, &rhs),
        }
        .map_err(deficient)?;

        self.transient_peak = self.transient_peak.max(4 * m * b + 3 * n * b + 2 * w * b);
        self.q_work.set_columns(w, &q_i);
        self.bt_work.set_columns(w, &b_i.transpose());
        self.width += b;
        Ok(true)
    }

    pub fn finish(mut self) -> Result<QbFactor> {
        while self.step()? {}
        Ok(QbFactor {
            q: self.q_work,
            b: self.bt_work.transpose(),
        })
    }
}

/// Runs all block iterations with re-orthogonalization and the default
/// (erroring) deficiency policy.
pub fn blocked_qb(g: DenseMatrix, h: DenseMatrix, omega: &DenseMatrix, block_size: usize) -> Result<QbFactor> {
    BlockedQb::new(g, h, omega, QbOptions::new(block_size))?.finish()
}

fn max_column_norm(y: &DenseMatrix) -> f64 {
    let mut sq = vec![0.0; y.cols()];
    for i in 0..y.rows() {
        for (s, v) in sq.iter_mut().zip(y.row(i)) {
            *s += v * v;
        }
    }
    sq.into_iter().fold(0.0, f64::max).sqrt()
}

/// Orthonormal `q` with `y = q·r`. A column whose remaining norm is at most
/// `RANK_TOL · scale` is deficient: an error under `Error`, a random
/// direction orthogonal to `prev` and the earlier columns (with `r_jj = 0`)
/// under `Resample`.
pub(crate) fn orthonormalize(
    y: &DenseMatrix,
    prev: MatRef<'_>,
    scale: f64,
    policy: DeficiencyPolicy,
    seed: u64,
) -> Result<QrPair> {
    let tol = RANK_TOL * scale.max(max_column_norm(y));
    let householder = qr_unpivoted(y).and_then(|qr| {
        match (0..qr.r.rows()).find(|&j| !(qr.r[(j, j)] > tol)) {
            Some(column) => Err(Error::RankDeficient { column }),
            None => Ok(qr),
        }
    });
    match (householder, policy) {
        (Ok(qr), _) => Ok(qr),
        (Err(Error::RankDeficient { .. }), DeficiencyPolicy::Resample) => {
            Ok(completed_gram_schmidt(y, prev, tol, seed))
        }
        (Err(e), _) => Err(e),
    }
}

/// Classical Gram-Schmidt with one re-orthogonalization pass, filling
/// deficient columns with random directions.
fn completed_gram_schmidt(y: &DenseMatrix, prev: MatRef<'_>, tol: f64, seed: u64) -> QrPair {
    let (m, b) = y.shape();
    let yt = y.transpose();
    let mut qt = DenseMatrix::zeros(b, m);
    let mut r = DenseMatrix::zeros(b, b);
    for j in 0..b {
        let mut v = yt.row(j).to_vec();
        for _ in 0..2 {
            for k in 0..j {
                let c = dot(qt.row(k), &v);
                r[(k, j)] += c;
                axpy(-c, qt.row(k), &mut v);
            }
        }
        let len = norm2(&v);
        if len > tol {
            r[(j, j)] = len;
            v.iter_mut().for_each(|x| *x /= len);
        } else {
            v = random_orthogonal_direction(&qt, j, prev, seed, j as u64);
        }
        qt.row_mut(j).copy_from_slice(&v);
    }
    QrPair { q: qt.transpose(), r }
}

/// Unit vector orthogonal to the columns of `prev` and the first `j` rows of `qt`.
pub(crate) fn random_orthogonal_direction(
    qt: &DenseMatrix,
    j: usize,
    prev: MatRef<'_>,
    seed: u64,
    stream: u64,
) -> Vec<f64> {
    let m = qt.cols();
    for attempt in 0u64.. {
        let mut v = DenseMatrix::zeros(m, 1);
        fill_gaussian_row(seed, stream + attempt * (1 << 32), v.as_mut_slice());
        let start = norm2(v.as_slice());
        for _ in 0..2 {
            let c = product(prev.t(), v.view());
            gemm(-1.0, prev, c.view(), 1.0, &mut v);
            for k in 0..j {
                let c = dot(qt.row(k), v.as_slice());
                axpy(-c, qt.row(k), v.as_mut_slice());
            }
        }
        let len = norm2(v.as_slice());
        if len > 0.1 * start {
            let mut out = v.into_vec();
            out.iter_mut().for_each(|x| *x /= len);
            return out;
        }
    }
    unreachable!("the attempt counter is unbounded")
}
