//! Test matrices `A = U·diag(σ)·Vᵀ` with Haar-like random orthonormal factors.
//!
//! Both factors are orthonormalizations `X·T` of seeded Gaussian matrices
//! `X`, where `T` is an upper triangular transform found by repeated
//! Cholesky QR: accumulate `(XT)ᵀ(XT)`, stop once it is the identity to
//! working precision, otherwise fold the inverse Cholesky factor into `T`.
//! Rows of `X` are regenerated from their index, so rows of `U` (and of `A`)
//! can be produced in any order while only `V` (n×r) and `T` (r×r) are kept.

use rayon::prelude::*;

use super::spectrum::SpectrumSpec;
use crate::error::{Error, Result};
use crate::linalg::{axpy, derive_seed, fill_gaussian_row, gemm, product, DenseMatrix};
use crate::sketch::{RowBlock, RowStream};

/// Rows produced per generation step. Rows are always computed in these
/// aligned chunks, so every access path yields bit-identical values.
const CHUNK: usize = 64;
const MAX_SWEEPS: usize = 6;
const U_TAG: u64 = 11;
const V_TAG: u64 = 12;

/// A materialized synthetic matrix and its construction factors.
#[derive(Clone, Debug)]
pub struct SyntheticMatrix {
    pub a: DenseMatrix,
    /// `min(m, n)` values, non-increasing.
    pub true_s: Vec<f64>,
    /// m×min(m, n)
    pub true_u: DenseMatrix,
    /// n×min(m, n)
    pub true_v: DenseMatrix,
}

/// Orthonormal `rows×r` factor defined by a seed and its transform.
#[derive(Clone, Debug)]
struct OrthoFactor {
    seed: u64,
    rows: usize,
    r: usize,
    /// `None` when the Gaussian rows are already orthonormal enough.
    t: Option<DenseMatrix>,
}

impl OrthoFactor {
    fn new(seed: u64, rows: usize, r: usize) -> Result<Self> {
        let mut f = OrthoFactor { seed, rows, r, t: None };
        let tol = 4.0 * (r.max(16) as f64) * f64::EPSILON;
        for _ in 0..MAX_SWEEPS {
            let gram = f.gram();
            let err = gram.sub(&DenseMatrix::identity(r)).max_abs();
            if err <= tol {
                return Ok(f);
            }
            let chol = shifted_cholesky(&gram)?;
            let inv = upper_inverse(&chol);
            f.t = Some(match &f.t {
                None => inv,
                Some(t) => t.matmul(&inv),
            });
        }
        Err(Error::Numerical(format!(
            "could not orthonormalize a {rows}x{r} random factor"
        )))
    }

    fn chunk(&self, c: usize) -> DenseMatrix {
        let start = c * CHUNK;
        let h = CHUNK.min(self.rows - start);
        let mut x = DenseMatrix::zeros(h, self.r);
        x.as_mut_slice()
            .par_chunks_mut(self.r)
            .enumerate()
            .for_each(|(i, row)| fill_gaussian_row(self.seed, (start + i) as u64, row));
        match &self.t {
            None => x,
            Some(t) => product(x.view(), t.view()),
        }
    }

    fn n_chunks(&self) -> usize {
        self.rows.div_ceil(CHUNK)
    }

    fn gram(&self) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.r, self.r);
        for c in 0..self.n_chunks() {
            let u = self.chunk(c);
            gemm(1.0, u.view().t(), u.view(), 1.0, &mut g);
        }
        g
    }

    fn materialize(&self) -> DenseMatrix {
        let mut data = Vec::with_capacity(self.rows * self.r);
        for c in 0..self.n_chunks() {
            data.extend_from_slice(self.chunk(c).as_slice());
        }
        DenseMatrix::from_vec(self.rows, self.r, data).expect("chunks cover all rows")
    }
}

/// Upper `R` with `RᵀR = gram`; on breakdown the diagonal is shifted
/// upwards until the factorization succeeds.
fn shifted_cholesky(gram: &DenseMatrix) -> Result<DenseMatrix> {
    let r = gram.rows();
    let scale = (0..r).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Numerical("degenerate Gram matrix".into()));
    }
    let mut shift = 0.0;
    for _ in 0..40 {
        if let Some(c) = cholesky(gram, shift) {
            return Ok(c);
        }
        shift = if shift == 0.0 { 10.0 * r as f64 * f64::EPSILON * scale } else { shift * 10.0 };
    }
    Err(Error::Numerical("Cholesky factorization failed even with a diagonal shift".into()))
}

fn cholesky(gram: &DenseMatrix, shift: f64) -> Option<DenseMatrix> {
    let r = gram.rows();
    let mut c = DenseMatrix::zeros(r, r);
    for j in 0..r {
        let mut row = gram.row(j)[j..].to_vec();
        row[0] += shift;
        for k in 0..j {
            let ckj = c[(k, j)];
            axpy(-ckj, &c.row(k)[j..], &mut row);
        }
        if !(row[0] > 0.0) {
            return None;
        }
        let d = row[0].sqrt();
        row.iter_mut().for_each(|x| *x /= d);
        c.row_mut(j)[j..].copy_from_slice(&row);
    }
    Some(c)
}

/// Inverse of an upper triangular matrix with positive diagonal.
fn upper_inverse(u: &DenseMatrix) -> DenseMatrix {
    let r = u.rows();
    let mut inv = DenseMatrix::zeros(r, r);
    // Row i of U⁻¹ solves x·U = e_i and vanishes before column i.
    for i in 0..r {
        let x = inv.row_mut(i);
        x[i] = 1.0;
        for j in i..r {
            let xj = x[j] / u[(j, j)];
            x[j] = xj;
            axpy(-xj, &u.row(j)[j + 1..], &mut x[j + 1..]);
        }
    }
    inv
}

/// Row generator for `A = U·diag(σ)·Vᵀ`. Keeps `V`, `σ` and the r×r
/// transform of `U`.
#[derive(Clone, Debug)]
pub struct SyntheticSource {
    spec: SpectrumSpec,
    m: usize,
    n: usize,
    seed: u64,
    s: Vec<f64>,
    u: OrthoFactor,
    v: DenseMatrix,
}

impl SyntheticSource {
    pub fn new(spec: &SpectrumSpec, m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Dimension(format!("synthetic matrix needs m, n >= 1, got {m}x{n}")));
        }
        let r = m.min(n);
        let v = OrthoFactor::new(derive_seed(seed, V_TAG), n, r)?.materialize();
        let u = OrthoFactor::new(derive_seed(seed, U_TAG), m, r)?;
        Ok(SyntheticSource {
            spec: spec.clone(),
            m,
            n,
            seed,
            s: spec.values(r),
            u,
            v,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn spec(&self) -> &SpectrumSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.s
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    /// Rows `64c .. 64c + 64` of `A` (fewer in the last chunk).
    fn chunk(&self, c: usize) -> DenseMatrix {
        let mut us = self.u.chunk(c);
        for i in 0..us.rows() {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.s) {
                *x *= s;
            }
        }
        product(us.view(), self.v.view().t())
    }

    pub fn materialize(&self) -> SyntheticMatrix {
        let mut a = Vec::with_capacity(self.m * self.n);
        for c in 0..self.u.n_chunks() {
            a.extend_from_slice(self.chunk(c).as_slice());
        }
        SyntheticMatrix {
            a: DenseMatrix::from_vec(self.m, self.n, a).expect("chunks cover all rows"),
            true_s: self.s.clone(),
            true_u: self.u.materialize(),
            true_v: self.v.clone(),
        }
    }

    pub fn into_stream(self, block_rows: usize) -> SyntheticStream {
        SyntheticStream {
            source: self,
            block_rows: block_rows.max(1),
            next_row: 0,
            cached: None,
        }
    }
}

pub fn synth_matrix(spec: &SpectrumSpec, m: usize, n: usize, seed: u64) -> Result<SyntheticMatrix> {
    Ok(SyntheticSource::new(spec, m, n, seed)?.materialize())
}

pub fn synth_stream(spec: &SpectrumSpec, m: usize, n: usize, seed: u64, block_rows: usize) -> Result<SyntheticStream> {
    Ok(SyntheticSource::new(spec, m, n, seed)?.into_stream(block_rows))
}

/// Resettable stream producing the rows of a [`SyntheticSource`] on demand.
pub struct SyntheticStream {
    source: SyntheticSource,
    block_rows: usize,
    next_row: usize,
    cached: Option<(usize, DenseMatrix)>,
}

impl SyntheticStream {
    pub fn source(&self) -> &SyntheticSource {
        &self.source
    }
}

impl RowStream for SyntheticStream {
    fn n_cols(&self) -> usize {
        self.source.n
    }

    fn n_rows(&self) -> Option<usize> {
        Some(self.source.m)
    }

    fn next_block(&mut self) -> Result<Option<RowBlock>> {
        let (m, n) = self.source.shape();
        if self.next_row >= m {
            return Ok(None);
        }
        let end = (self.next_row + self.block_rows).min(m);
        let mut values = Vec::with_capacity((end - self.next_row) * n);
        let mut row = self.next_row;
        while row < end {
            let c = row / CHUNK;
            if self.cached.as_ref().map(|(k, _)| *k) != Some(c) {
                self.cached = Some((c, self.source.chunk(c)));
            }
            let chunk = &self.cached.as_ref().expect("just filled").1;
            let stop = end.min((c + 1) * CHUNK);
            values.extend_from_slice(&chunk.as_slice()[(row - c * CHUNK) * n..(stop - c * CHUNK) * n]);
            row = stop;
        }
        let block = RowBlock::new(self.next_row, DenseMatrix::from_vec(end - self.next_row, n, values)?);
        self.next_row = end;
        Ok(Some(block))
    }

    fn is_resettable(&self) -> bool {
        true
    }

    fn reset(&mut self) -> Result<()> {
        self.next_row = 0;
        Ok(())
    }
}
