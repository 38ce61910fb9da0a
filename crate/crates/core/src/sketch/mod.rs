//! Streaming access to the data matrix and the one-pass sketch.
//!
//! The data matrix `A` (m×n) is only ever seen as consecutive [`RowBlock`]s
//! pulled from a [`RowStream`]. [`sketch_pass`] turns one traversal into
//! `G = AΩ`, `H = AᵀG` and the column sums of `A`, using
//! `H = Σᵢ aᵢᵀ gᵢ` so that nothing but the current block is ever held.

pub mod file;

use std::borrow::Cow;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{axpy, DenseMatrix};

pub use file::{
    file_row_stream, read_matrix, write_matrix, Dtype, FileLayout, FileRowStream, MatrixFileWriter,
    ReaderStream, HEADER_LEN, MAGIC,
};

/// Consecutive rows `first_row .. first_row + values.rows()` of the data matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RowBlock {
    pub first_row: usize,
    pub values: DenseMatrix,
}

impl RowBlock {
    pub fn new(first_row: usize, values: DenseMatrix) -> Self {
        RowBlock { first_row, values }
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }
}

/// Source of row blocks. One traversal from the first row to end-of-stream
/// is a pass; only resettable streams support more than one.
pub trait RowStream {
    fn n_cols(&self) -> usize;

    /// Total row count, if known before the stream is exhausted.
    fn n_rows(&self) -> Option<usize>;

    /// Next block in row order, or `None` at end of stream.
    fn next_block(&mut self) -> Result<Option<RowBlock>>;

    fn is_resettable(&self) -> bool {
        false
    }

    /// Rewinds to the first row.
    fn reset(&mut self) -> Result<()> {
        Err(Error::Capability("this stream cannot be rewound".into()))
    }
}

impl<S: RowStream + ?Sized> RowStream for &mut S {
    fn n_cols(&self) -> usize {
        (**self).n_cols()
    }
    fn n_rows(&self) -> Option<usize> {
        (**self).n_rows()
    }
    fn next_block(&mut self) -> Result<Option<RowBlock>> {
        (**self).next_block()
    }
    fn is_resettable(&self) -> bool {
        (**self).is_resettable()
    }
    fn reset(&mut self) -> Result<()> {
        (**self).reset()
    }
}

impl<S: RowStream + ?Sized> RowStream for Box<S> {
    fn n_cols(&self) -> usize {
        (**self).n_cols()
    }
    fn n_rows(&self) -> Option<usize> {
        (**self).n_rows()
    }
    fn next_block(&mut self) -> Result<Option<RowBlock>> {
        (**self).next_block()
    }
    fn is_resettable(&self) -> bool {
        (**self).is_resettable()
    }
    fn reset(&mut self) -> Result<()> {
        (**self).reset()
    }
}

/// Streams an in-memory matrix in fixed-size row blocks.
pub struct MatrixStream<'a> {
    matrix: Cow<'a, DenseMatrix>,
    block_rows: usize,
    next_row: usize,
}

impl<'a> MatrixStream<'a> {
    pub fn new(matrix: &'a DenseMatrix, block_rows: usize) -> Self {
        MatrixStream {
            matrix: Cow::Borrowed(matrix),
            block_rows: block_rows.max(1),
            next_row: 0,
        }
    }

    pub fn owned(matrix: DenseMatrix, block_rows: usize) -> MatrixStream<'static> {
        MatrixStream {
            matrix: Cow::Owned(matrix),
            block_rows: block_rows.max(1),
            next_row: 0,
        }
    }
}

impl RowStream for MatrixStream<'_> {
    fn n_cols(&self) -> usize {
        self.matrix.cols()
    }

    fn n_rows(&self) -> Option<usize> {
        Some(self.matrix.rows())
    }

    fn next_block(&mut self) -> Result<Option<RowBlock>> {
        let m = self.matrix.rows();
        if self.next_row >= m {
            return Ok(None);
        }
        let end = (self.next_row + self.block_rows).min(m);
        let block = RowBlock::new(self.next_row, self.matrix.rows_range(self.next_row..end));
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

/// Wraps a stream and records how it was traversed.
pub struct PassCounter<S> {
    inner: S,
    passes_completed: usize,
    rows_read: usize,
    rows_in_pass: usize,
    at_end: bool,
    read_time: Duration,
    largest_block_floats: usize,
}

impl<S: RowStream> PassCounter<S> {
    pub fn new(inner: S) -> Self {
        PassCounter {
            inner,
            passes_completed: 0,
            rows_read: 0,
            rows_in_pass: 0,
            at_end: false,
            read_time: Duration::ZERO,
            largest_block_floats: 0,
        }
    }

    /// Full traversals that reached end-of-stream.
    pub fn passes_completed(&self) -> usize {
        self.passes_completed
    }

    /// Rows delivered over all passes.
    pub fn rows_read(&self) -> usize {
        self.rows_read
    }

    /// True if the current pass started but has not reached the end.
    pub fn partial_pass(&self) -> bool {
        self.rows_in_pass > 0 && !self.at_end
    }

    /// Time spent inside the wrapped stream's `next_block`.
    pub fn read_time(&self) -> Duration {
        self.read_time
    }

    /// Largest block delivered, in `f64` values.
    pub fn largest_block_floats(&self) -> usize {
        self.largest_block_floats
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: RowStream> RowStream for PassCounter<S> {
    fn n_cols(&self) -> usize {
        self.inner.n_cols()
    }

    fn n_rows(&self) -> Option<usize> {
        self.inner.n_rows()
    }

    fn next_block(&mut self) -> Result<Option<RowBlock>> {
        if self.at_end {
            return Ok(None);
        }
        let started = Instant::now();
        let block = self.inner.next_block();
        self.read_time += started.elapsed();
        match block? {
            Some(b) => {
                self.rows_read += b.rows();
                self.rows_in_pass += b.rows();
                self.largest_block_floats = self.largest_block_floats.max(b.values.len());
                Ok(Some(b))
            }
            None => {
                self.passes_completed += 1;
                self.at_end = true;
                Ok(None)
            }
        }
    }

    fn is_resettable(&self) -> bool {
        self.inner.is_resettable()
    }

    fn reset(&mut self) -> Result<()> {
        self.inner.reset()?;
        self.rows_in_pass = 0;
        self.at_end = false;
        Ok(())
    }
}

/// Applies [`normalize_rows`] to every block of the wrapped stream.
pub struct NormalizedRows<S>(pub S);

impl<S: RowStream> RowStream for NormalizedRows<S> {
    fn n_cols(&self) -> usize {
        self.0.n_cols()
    }
    fn n_rows(&self) -> Option<usize> {
        self.0.n_rows()
    }
    fn next_block(&mut self) -> Result<Option<RowBlock>> {
        Ok(self.0.next_block()?.map(normalize_rows))
    }
    fn is_resettable(&self) -> bool {
        self.0.is_resettable()
    }
    fn reset(&mut self) -> Result<()> {
        self.0.reset()
    }
}

/// Subtracts each row's mean and scales it to unit Euclidean norm. Constant
/// rows become zero rows.
pub fn normalize_rows(mut block: RowBlock) -> RowBlock {
    let n = block.values.cols();
    if n == 0 {
        return block;
    }
    for i in 0..block.values.rows() {
        let row = block.values.row_mut(i);
        let mean = row.iter().sum::<f64>() / n as f64;
        for v in row.iter_mut() {
            *v -= mean;
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        } else {
            row.fill(0.0);
        }
    }
    block
}

/// Accumulators of one pass: `g = AΩ` (m×l), `h = AᵀG` (n×l) and the column
/// sums of `A`.
#[derive(Clone, Debug)]
pub struct SketchState {
    pub g: DenseMatrix,
    pub h: DenseMatrix,
    pub col_sums: Vec<f64>,
    pub rows_seen: usize,
}

impl SketchState {
    /// `f64` values held by the state (G, H and the column sums).
    pub fn retained_floats(&self) -> usize {
        self.g.len() + self.h.len() + self.col_sums.len()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SketchOptions {
    /// Neumaier-compensated column sums, for very tall matrices.
    pub compensated_sums: bool,
    /// Do not keep `G`: only `H` and the column sums are wanted. The
    /// resulting state has a 0×l `g`.
    pub discard_g: bool,
}

/// Incremental form of [`sketch_pass`]: feed blocks with [`absorb`](Self::absorb).
pub struct SketchAccumulator<'a> {
    omega: &'a DenseMatrix,
    g: Vec<f64>,
    h: DenseMatrix,
    col_sums: Vec<f64>,
    compensation: Option<Vec<f64>>,
    discard_g: bool,
    scratch: Vec<f64>,
    rows_seen: usize,
}

impl<'a> SketchAccumulator<'a> {
    pub fn new(omega: &'a DenseMatrix, expected_rows: Option<usize>, opts: SketchOptions) -> Self {
        let (n, l) = omega.shape();
        SketchAccumulator {
            omega,
            g: if opts.discard_g {
                Vec::new()
            } else {
                Vec::with_capacity(expected_rows.unwrap_or(0) * l)
            },
            h: DenseMatrix::zeros(n, l),
            col_sums: vec![0.0; n],
            compensation: opts.compensated_sums.then(|| vec![0.0; n]),
            discard_g: opts.discard_g,
            scratch: Vec::new(),
            rows_seen: 0,
        }
    }

    pub fn absorb(&mut self, block: &RowBlock) -> Result<()> {
        let (n, l) = self.omega.shape();
        let a = &block.values;
        check_block(block, n, self.rows_seen)?;
        let rb = a.rows();
        let omega = self.omega;

        if self.discard_g {
            self.scratch.resize(rb * l, 0.0);
            project_rows(a, omega, &mut self.scratch);
            accumulate_outer(&mut self.h, a, &self.scratch);
        } else {
            let start = self.g.len();
            self.g.resize(start + rb * l, 0.0);
            project_rows(a, omega, &mut self.g[start..]);
            accumulate_outer(&mut self.h, a, &self.g[start..]);
        }

        match &mut self.compensation {
            None => add_column_sums(&mut self.col_sums, a),
            Some(comp) => {
                for r in 0..rb {
                    for ((s, c), &x) in self.col_sums.iter_mut().zip(comp.iter_mut()).zip(a.row(r)) {
                        let t = *s + x;
                        if s.abs() >= x.abs() {
                            *c += (*s - t) + x;
                        } else {
                            *c += (x - t) + *s;
                        }
                        *s = t;
                    }
                }
            }
        }
        self.rows_seen += rb;
        Ok(())
    }

    pub fn rows_seen(&self) -> usize {
        self.rows_seen
    }

    pub fn finish(self) -> SketchState {
        let l = self.omega.cols();
        let mut col_sums = self.col_sums;
        if let Some(comp) = self.compensation {
            for (s, c) in col_sums.iter_mut().zip(comp) {
                *s += c;
            }
        }
        let mut g = self.g;
        g.shrink_to_fit();
        SketchState {
            g: DenseMatrix::from_vec(g.len() / l.max(1), l, g).expect("sketch rows have width l"),
            h: self.h,
            col_sums,
            rows_seen: self.rows_seen,
        }
    }
}

/// `acc[j, :] += Σ_r a[r, j] · rows[r, :]` for an `rb×n` block `a` and
/// `rows` holding `rb` contiguous rows of width `acc.cols()`. Each row of
/// `acc` receives the block's rows in stream order, so the result does not
/// depend on how the stream was cut into blocks.
pub(crate) fn accumulate_outer(acc: &mut DenseMatrix, a: &DenseMatrix, rows: &[f64]) {
    let l = acc.cols();
    let rb = a.rows();
    debug_assert_eq!(rows.len(), rb * l);
    if l == 0 {
        return;
    }
    acc.as_mut_slice()
        .par_chunks_mut(l)
        .with_min_len(64)
        .enumerate()
        .for_each(|(j, acc_row)| {
            for r in 0..rb {
                axpy(a[(r, j)], &rows[r * l..(r + 1) * l], acc_row);
            }
        });
}

/// `out[r, :] = a[r, :] · omega` for every row of the block.
pub(crate) fn project_rows(a: &DenseMatrix, omega: &DenseMatrix, out: &mut [f64]) {
    let l = omega.cols();
    if l == 0 {
        return;
    }
    out.par_chunks_mut(l)
        .zip(a.as_slice().par_chunks(a.cols()))
        .for_each(|(g, a_row)| {
            g.fill(0.0);
            for (j, &x) in a_row.iter().enumerate() {
                axpy(x, omega.row(j), g);
            }
        });
}

/// Adds the block's rows to running column sums.
pub(crate) fn add_column_sums(sums: &mut [f64], a: &DenseMatrix) {
    for r in 0..a.rows() {
        for (s, &x) in sums.iter_mut().zip(a.row(r)) {
            *s += x;
        }
    }
}

pub(crate) fn check_block(block: &RowBlock, n_cols: usize, expected_first: usize) -> Result<()> {
    let a = &block.values;
    if a.cols() != n_cols {
        return Err(Error::StreamFormat(format!(
            "block starting at row {} has {} columns, expected {n_cols}",
            block.first_row,
            a.cols()
        )));
    }
    if block.first_row != expected_first {
        return Err(Error::StreamFormat(format!(
            "block starts at row {}, expected row {expected_first}",
            block.first_row
        )));
    }
    if let Some(pos) = a.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::Data {
            row: block.first_row + pos / n_cols,
            col: pos % n_cols,
        });
    }
    Ok(())
}

/// Reads the stream once and returns `G = AΩ`, `H = AᵀG` and column sums.
pub fn sketch_pass<S: RowStream + ?Sized>(stream: &mut S, omega: &DenseMatrix) -> Result<SketchState> {
    sketch_pass_with(stream, omega, SketchOptions::default())
}

pub fn sketch_pass_with<S: RowStream + ?Sized>(
    stream: &mut S,
    omega: &DenseMatrix,
    opts: SketchOptions,
) -> Result<SketchState> {
    if stream.n_cols() != omega.rows() {
        return Err(Error::Dimension(format!(
            "stream has {} columns but the test matrix has {} rows",
            stream.n_cols(),
            omega.rows()
        )));
    }
    let mut acc = SketchAccumulator::new(omega, stream.n_rows(), opts);
    while let Some(block) = stream.next_block()? {
        acc.absorb(&block)?;
    }
    Ok(acc.finish())
}

/// Turns the sketch of `A` into the sketch of the column-centered matrix
/// `A − 1μᵀ`, with `μ` the column means:
/// `G_c = G − 1(μᵀΩ)` and `H_c = H − μ(cᵀΩ)` where `c = mμ` are the column sums.
pub fn center_correct(mut state: SketchState, omega: &DenseMatrix) -> Result<SketchState> {
    if state.rows_seen == 0 {
        return Err(Error::EmptyStream);
    }
    let (n, l) = omega.shape();
    if state.col_sums.len() != n || state.g.cols() != l || state.h.shape() != (n, l) {
        return Err(Error::Dimension("sketch does not match the test matrix".into()));
    }
    let m = state.rows_seen as f64;
    let mean: Vec<f64> = state.col_sums.iter().map(|s| s / m).collect();
    let mean_omega = omega.t_matvec(&mean);
    let sums_omega = omega.t_matvec(&state.col_sums);

    for i in 0..state.g.rows() {
        for (g, w) in state.g.row_mut(i).iter_mut().zip(&mean_omega) {
            *g -= w;
        }
    }
    for (j, &mu) in mean.iter().enumerate() {
        axpy(-mu, &sums_omega, state.h.row_mut(j));
    }
    state.col_sums.fill(0.0);
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;

    fn rel(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.sub(b).frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn identity_matrix_sketch_is_omega() {
        let a = DenseMatrix::identity(5);
        let omega = gaussian_matrix(5, 3, 1).unwrap();
        let s = sketch_pass(&mut MatrixStream::new(&a, 2), &omega).unwrap();
        assert_eq!(s.g, omega);
        assert_eq!(s.h, omega);
        assert_eq!(s.col_sums, vec![1.0; 5]);
    }

    #[test]
    fn zero_matrix_sketch_is_zero() {
        let a = DenseMatrix::zeros(6, 4);
        let omega = gaussian_matrix(4, 2, 1).unwrap();
        let s = sketch_pass(&mut MatrixStream::new(&a, 4), &omega).unwrap();
        assert_eq!(s.g.max_abs(), 0.0);
        assert_eq!(s.h.max_abs(), 0.0);
        assert_eq!(s.col_sums, vec![0.0; 4]);
    }

    #[test]
    fn blocked_stream_matches_in_memory_products() {
        let a = gaussian_matrix(40, 30, 2).unwrap();
        let omega = gaussian_matrix(30, 6, 3).unwrap();
        let s = sketch_pass(&mut MatrixStream::new(&a, 7), &omega).unwrap();
        let g = a.matmul(&omega);
        let h = a.t_matmul(&g);
        assert!(rel(&s.g, &g) <= 1e-12);
        assert!(rel(&s.h, &h) <= 1e-12);
        assert_eq!(s.rows_seen, 40);
    }

    #[test]
    fn block_partition_does_not_change_bits() {
        let a = gaussian_matrix(23, 9, 4).unwrap();
        let omega = gaussian_matrix(9, 4, 5).unwrap();
        let base = sketch_pass(&mut MatrixStream::new(&a, 1), &omega).unwrap();
        for rows in [2, 5, 23, 100] {
            let s = sketch_pass(&mut MatrixStream::new(&a, rows), &omega).unwrap();
            assert_eq!(s.g, base.g);
            assert_eq!(s.h, base.h);
            assert_eq!(s.col_sums, base.col_sums);
        }
    }

    #[test]
    fn omega_t_h_is_symmetric() {
        let a = gaussian_matrix(35, 20, 6).unwrap();
        let omega = gaussian_matrix(20, 5, 7).unwrap();
        let s = sketch_pass(&mut MatrixStream::new(&a, 8), &omega).unwrap();
        let m = omega.t_matmul(&s.h);
        assert!(m.sub(&m.transpose()).frobenius_norm() <= 1e-10 * m.frobenius_norm());
    }

    struct BadColumns;
    impl RowStream for BadColumns {
        fn n_cols(&self) -> usize {
            3
        }
        fn n_rows(&self) -> Option<usize> {
            None
        }
        fn next_block(&mut self) -> Result<Option<RowBlock>> {
            Ok(Some(RowBlock::new(0, DenseMatrix::zeros(1, 2))))
        }
    }

    #[test]
    fn wrong_width_block_is_a_format_error() {
        let omega = gaussian_matrix(3, 2, 1).unwrap();
        assert!(matches!(
            sketch_pass(&mut BadColumns, &omega),
            Err(Error::StreamFormat(_))
        ));
    }

    #[test]
    fn non_finite_value_reports_its_row() {
        let mut a = DenseMatrix::zeros(10, 3);
        a[(7, 2)] = f64::INFINITY;
        let omega = gaussian_matrix(3, 2, 1).unwrap();
        let err = sketch_pass(&mut MatrixStream::new(&a, 4), &omega).unwrap_err();
        assert!(matches!(err, Error::Data { row: 7, col: 2 }));
    }

    #[test]
    fn compensated_sums_agree_with_plain_sums() {
        let a = gaussian_matrix(50, 4, 8).unwrap();
        let omega = gaussian_matrix(4, 2, 9).unwrap();
        let plain = sketch_pass(&mut MatrixStream::new(&a, 3), &omega).unwrap();
        let comp = sketch_pass_with(
            &mut MatrixStream::new(&a, 3),
            &omega,
            SketchOptions { compensated_sums: true, ..Default::default() },
        )
        .unwrap();
        for (x, y) in plain.col_sums.iter().zip(&comp.col_sums) {
            assert!((x - y).abs() <= 1e-13);
        }
        assert_eq!(plain.g, comp.g);
    }

    fn centered(a: &DenseMatrix) -> DenseMatrix {
        let m = a.rows() as f64;
        let means: Vec<f64> = (0..a.cols()).map(|j| a.column(j).iter().sum::<f64>() / m).collect();
        DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] - means[j])
    }

    #[test]
    fn centering_matches_explicit_oracle() {
        let mut a = gaussian_matrix(30, 20, 10).unwrap();
        for i in 0..30 {
            for (j, v) in a.row_mut(i).iter_mut().enumerate() {
                *v += 0.3 * j as f64 - 2.0;
            }
        }
        let omega = gaussian_matrix(20, 5, 11).unwrap();
        let s = sketch_pass(&mut MatrixStream::new(&a, 6), &omega).unwrap();
        let c = center_correct(s, &omega).unwrap();
        let want = sketch_pass(&mut MatrixStream::new(&centered(&a), 6), &omega).unwrap();
        assert!(rel(&c.g, &want.g) <= 1e-10);
        assert!(rel(&c.h, &want.h) <= 1e-10);
    }

    #[test]
    fn centering_is_nearly_a_no_op_on_centered_data() {
        let a = centered(&gaussian_matrix(25, 8, 12).unwrap());
        let omega = gaussian_matrix(8, 3, 13).unwrap();
        let s = sketch_pass(&mut MatrixStream::new(&a, 5), &omega).unwrap();
        let c = center_correct(s.clone(), &omega).unwrap();
        assert!(rel(&c.g, &s.g) <= 1e-12);
        assert!(rel(&c.h, &s.h) <= 1e-12);
    }

    #[test]
    fn centering_annihilates_identical_rows() {
        let row = [1.5, -2.0, 0.25, 4.0];
        let a = DenseMatrix::from_fn(12, 4, |_, j| row[j]);
        let omega = gaussian_matrix(4, 3, 14).unwrap();
        let s = sketch_pass(&mut MatrixStream::new(&a, 5), &omega).unwrap();
        let scale = s.h.max_abs();
        let c = center_correct(s, &omega).unwrap();
        assert!(c.g.max_abs() <= 1e-13);
        assert!(c.h.max_abs() <= 1e-13 * scale);
    }

    #[test]
    fn centering_an_empty_sketch_fails() {
        let omega = gaussian_matrix(3, 2, 1).unwrap();
        let a = DenseMatrix::zeros(0, 3);
        let s = sketch_pass(&mut MatrixStream::new(&a, 2), &omega).unwrap();
        assert!(matches!(center_correct(s, &omega), Err(Error::EmptyStream)));
    }

    #[test]
    fn normalize_known_rows() {
        let block = RowBlock::new(0, DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]]).unwrap());
        let out = normalize_rows(block);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let want = [-r, 0.0, r];
        for (a, b) in out.values.row(0).iter().zip(want) {
            assert!((a - b).abs() <= 1e-15);
        }
        assert_eq!(out.values.row(1), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalized_random_rows_have_zero_mean_unit_norm() {
        let a = gaussian_matrix(20, 37, 15).unwrap().scaled(3.0);
        let out = normalize_rows(RowBlock::new(0, a));
        for i in 0..20 {
            let row = out.values.row(i);
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(mean.abs() <= 1e-14);
            assert!((norm - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn pass_counter_tracks_full_and_partial_passes() {
        let a = gaussian_matrix(10, 2, 1).unwrap();
        let mut s = PassCounter::new(MatrixStream::new(&a, 3));
        s.next_block().unwrap();
        assert!(s.partial_pass());
        assert_eq!(s.passes_completed(), 0);
        while s.next_block().unwrap().is_some() {}
        assert!(s.next_block().unwrap().is_none());
        assert_eq!(s.passes_completed(), 1);
        assert_eq!(s.rows_read(), 10);
        assert!(!s.partial_pass());
        s.reset().unwrap();
        while s.next_block().unwrap().is_some() {}
        assert_eq!(s.passes_completed(), 2);
        assert_eq!(s.rows_read(), 20);
        assert_eq!(s.largest_block_floats(), 6);
    }
}
