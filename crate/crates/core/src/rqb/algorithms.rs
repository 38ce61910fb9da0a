use std::time::{Duration, Instant};

use super::qb::{orthonormalize, BlockedQb, QbOptions};
use super::{svd_of_factored, Algorithm, PcaConfig, TruncatedSvd};
use crate::error::{Error, Result};
use crate::linalg::{
    axpy, dense_svd, derive_seed, fill_gaussian_row, gaussian_matrix, qr_unpivoted, DenseMatrix,
};
use crate::sketch::{
    accumulate_outer, add_column_sums, center_correct, check_block, project_rows, sketch_pass_with,
    PassCounter, RowStream, SketchOptions, SketchState,
};

const OMEGA_TAG: u64 = 1;
const OMEGA_TILDE_TAG: u64 = 2;
const QB_TAG: u64 = 3;
const POWER_TAG: u64 = 4;

/// Condition estimate of the legacy solve above which a warning is attached.
const LEGACY_COND_WARN: f64 = 1e12;

/// Result of [`run_pca`] with the resource accounting of the run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub svd: TruncatedSvd,
    pub rows: usize,
    pub cols: usize,
    pub sketch_width: usize,
    /// Completed traversals of the input.
    pub passes: usize,
    pub rows_read: usize,
    /// Largest set of `f64` buffers held for the whole of a pass or of the
    /// factorization (sketches, test matrices, bases, column sums).
    pub retained_floats: usize,
    /// Largest short-lived scratch allocation (one row block, one QB
    /// iteration or the small SVD), reported separately.
    pub transient_floats: usize,
    pub read_time: Duration,
    pub total_time: Duration,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegacyDiagnostics {
    /// `σ_max / σ_min` of `Ω̃ᵀQ`.
    pub condition_estimate: f64,
    /// `‖Ω̃ᵀQ·B − ỸᵀQ̃‖_F / ‖ỸᵀQ̃‖_F`
    pub solve_residual_rel: f64,
}

impl LegacyDiagnostics {
    pub fn warning(&self) -> Option<String> {
        (!(self.condition_estimate <= LEGACY_COND_WARN)).then(|| {
            format!(
                "legacy solve is ill conditioned (condition estimate {:.3e})",
                self.condition_estimate
            )
        })
    }
}

#[derive(Default)]
struct Usage {
    retained: usize,
    transient: usize,
    warnings: Vec<String>,
}

impl Usage {
    fn retain(&mut self, floats: usize) {
        self.retained = self.retained.max(floats);
    }

    fn scratch(&mut self, floats: usize) {
        self.transient = self.transient.max(floats);
    }
}

/// Runs `algorithm` (with the power refinement when `cfg.power == 1`) and
/// reports passes, timings and memory accounting.
pub fn run_pca<S: RowStream + ?Sized>(stream: &mut S, cfg: &PcaConfig, algorithm: Algorithm) -> Result<RunReport> {
    let started = Instant::now();
    let n = stream.n_cols();
    if stream.n_rows() == Some(0) {
        return Err(Error::EmptyStream);
    }
    cfg.validate(stream.n_rows(), n)?;
    if cfg.power == 1 && algorithm != Algorithm::SinglePass {
        return Err(Error::Config(format!(
            "the power scheme is only available for the single-pass algorithm, not {algorithm}"
        )));
    }
    let multi_pass = cfg.power == 1 || algorithm == Algorithm::Basic;
    if multi_pass && !stream.is_resettable() {
        return Err(Error::Capability(format!(
            "{} needs two passes but the input cannot be rewound",
            if cfg.power == 1 { "the power scheme" } else { "the basic algorithm" }
        )));
    }

    let mut counted = PassCounter::new(stream);
    let mut usage = Usage::default();
    let (svd, m) = match (algorithm, cfg.power) {
        (Algorithm::SinglePass, 0) => single_pass_impl(&mut counted, cfg, &mut usage)?,
        (Algorithm::SinglePass, _) => power_impl(&mut counted, cfg, &mut usage)?,
        (Algorithm::Basic, _) => basic_impl(&mut counted, cfg, &mut usage)?,
        (Algorithm::Legacy, _) => {
            let (svd, m, diag) = legacy_impl(&mut counted, cfg, &mut usage)?;
            usage.warnings.extend(diag.warning());
            (svd, m)
        }
    };
    usage.scratch(counted.largest_block_floats());

    Ok(RunReport {
        algorithm,
        svd,
        rows: m,
        cols: n,
        sketch_width: cfg.sketch_width(),
        passes: counted.passes_completed(),
        rows_read: counted.rows_read(),
        retained_floats: usage.retained,
        transient_floats: usage.transient,
        read_time: counted.read_time(),
        total_time: started.elapsed(),
        warnings: usage.warnings,
    })
}

/// One pass: sketch, optional centering, blocked QB, SVD of `B`.
pub fn single_pass_pca<S: RowStream + ?Sized>(stream: &mut S, cfg: &PcaConfig) -> Result<TruncatedSvd> {
    let cfg = PcaConfig { power: 0, ..cfg.clone() };
    Ok(run_pca(stream, &cfg, Algorithm::SinglePass)?.svd)
}

/// Two passes: `Q = orth(AΩ)`, then `B = QᵀA`.
pub fn basic_rand_svd<S: RowStream + ?Sized>(stream: &mut S, cfg: &PcaConfig) -> Result<TruncatedSvd> {
    Ok(run_pca(stream, cfg, Algorithm::Basic)?.svd)
}

/// The older single-pass method with two test matrices.
pub fn legacy_single_pass<S: RowStream + ?Sized>(stream: &mut S, cfg: &PcaConfig) -> Result<TruncatedSvd> {
    Ok(run_pca(stream, cfg, Algorithm::Legacy)?.svd)
}

pub fn legacy_single_pass_diagnostics<S: RowStream + ?Sized>(
    stream: &mut S,
    cfg: &PcaConfig,
) -> Result<(TruncatedSvd, LegacyDiagnostics)> {
    cfg.validate(stream.n_rows(), stream.n_cols())?;
    let (svd, _, diag) = legacy_impl(stream, cfg, &mut Usage::default())?;
    Ok((svd, diag))
}

/// Two passes: the first pass's `H` is orthonormalized and used as the
/// test matrix of a second single-pass run.
pub fn power_refine<S: RowStream + ?Sized>(stream: &mut S, cfg: &PcaConfig) -> Result<TruncatedSvd> {
    let cfg = PcaConfig { power: 1, ..cfg.clone() };
    Ok(run_pca(stream, &cfg, Algorithm::SinglePass)?.svd)
}

fn sketch_options(cfg: &PcaConfig) -> SketchOptions {
    SketchOptions {
        compensated_sums: cfg.compensated_sums,
        discard_g: false,
    }
}

fn finished_rows(rows: usize, cfg: &PcaConfig, n: usize) -> Result<usize> {
    if rows == 0 {
        return Err(Error::EmptyStream);
    }
    cfg.validate(Some(rows), n)?;
    Ok(rows)
}

fn same_rows(first: usize, second: usize) -> Result<()> {
    if first != second {
        return Err(Error::StreamFormat(format!(
            "second pass delivered {second} rows, the first delivered {first}"
        )));
    }
    Ok(())
}

fn single_pass_impl<S: RowStream + ?Sized>(
    stream: &mut S,
    cfg: &PcaConfig,
    usage: &mut Usage,
) -> Result<(TruncatedSvd, usize)> {
    let n = stream.n_cols();
    let omega = gaussian_matrix(n, cfg.sketch_width(), derive_seed(cfg.seed, OMEGA_TAG))?;
    let state = sketch_pass_with(stream, &omega, sketch_options(cfg))?;
    let m = finished_rows(state.rows_seen, cfg, n)?;
    factor_sketch(state, &omega, cfg, usage).map(|svd| (svd, m))
}

fn factor_sketch(state: SketchState, omega: &DenseMatrix, cfg: &PcaConfig, usage: &mut Usage) -> Result<TruncatedSvd> {
    usage.retain(state.retained_floats() + omega.len());
    let state = if cfg.center { center_correct(state, omega)? } else { state };
    let opts = QbOptions {
        block_size: cfg.block_size,
        reorthogonalize: cfg.reorthogonalize,
        deficiency: cfg.deficiency,
        seed: derive_seed(cfg.seed, QB_TAG),
    };
    let mut qb = BlockedQb::new(state.g, state.h, omega, opts)?;
    while qb.step()? {}
    usage.scratch(qb.transient_peak_floats());
    let factor = qb.finish()?;
    let (l, n) = factor.b.shape();
    usage.scratch(2 * l * n + 2 * l * l);
    svd_of_factored(&factor.q, &factor.b, None, cfg.k)
}

fn power_impl<S: RowStream + ?Sized>(
    stream: &mut S,
    cfg: &PcaConfig,
    usage: &mut Usage,
) -> Result<(TruncatedSvd, usize)> {
    let n = stream.n_cols();
    let l = cfg.sketch_width();
    let omega = gaussian_matrix(n, l, derive_seed(cfg.seed, OMEGA_TAG))?;
    let first_opts = SketchOptions {
        discard_g: true,
        ..sketch_options(cfg)
    };
    let state = sketch_pass_with(stream, &omega, first_opts)?;
    let m = finished_rows(state.rows_seen, cfg, n)?;
    usage.retain(state.retained_floats() + omega.len());
    let state = if cfg.center { center_correct(state, &omega)? } else { state };
    drop(omega);

    let none = DenseMatrix::zeros(n, 0);
    let refined = orthonormalize(&state.h, none.view(), 0.0, cfg.deficiency, derive_seed(cfg.seed, POWER_TAG))?.q;
    drop(state);

    stream.reset()?;
    let second = sketch_pass_with(stream, &refined, sketch_options(cfg))?;
    same_rows(m, second.rows_seen)?;
    factor_sketch(second, &refined, cfg, usage).map(|svd| (svd, m))
}

/// Pass 1 of the basic and legacy schemes: `Y = AΩ` and column sums, plus
/// a caller-supplied per-block hook.
fn range_pass<S: RowStream + ?Sized>(
    stream: &mut S,
    omega: &DenseMatrix,
    mut per_block: impl FnMut(&crate::sketch::RowBlock) -> Result<()>,
) -> Result<(DenseMatrix, Vec<f64>)> {
    let (n, l) = omega.shape();
    let mut y = Vec::with_capacity(stream.n_rows().unwrap_or(0) * l);
    let mut col_sums = vec![0.0; n];
    let mut rows = 0;
    while let Some(block) = stream.next_block()? {
        check_block(&block, n, rows)?;
        let start = y.len();
        y.resize(start + block.rows() * l, 0.0);
        project_rows(&block.values, omega, &mut y[start..]);
        add_column_sums(&mut col_sums, &block.values);
        per_block(&block)?;
        rows += block.rows();
    }
    Ok((DenseMatrix::from_vec(rows, l, y)?, col_sums))
}

fn subtract_mean_image(y: &mut DenseMatrix, omega: &DenseMatrix, col_sums: &[f64]) {
    let m = y.rows() as f64;
    let mean: Vec<f64> = col_sums.iter().map(|s| s / m).collect();
    let shift = omega.t_matvec(&mean);
    for i in 0..y.rows() {
        axpy(-1.0, &shift, y.row_mut(i));
    }
}

fn basic_impl<S: RowStream + ?Sized>(
    stream: &mut S,
    cfg: &PcaConfig,
    usage: &mut Usage,
) -> Result<(TruncatedSvd, usize)> {
    let n = stream.n_cols();
    let l = cfg.sketch_width();
    let omega = gaussian_matrix(n, l, derive_seed(cfg.seed, OMEGA_TAG))?;
    let (mut y, col_sums) = range_pass(stream, &omega, |_| Ok(()))?;
    let m = finished_rows(y.rows(), cfg, n)?;
    usage.retain(y.len() + omega.len() + n);
    if cfg.center {
        subtract_mean_image(&mut y, &omega, &col_sums);
    }
    drop(omega);
    let none = DenseMatrix::zeros(m, 0);
    let q = orthonormalize(&y, none.view(), 0.0, cfg.deficiency, derive_seed(cfg.seed, QB_TAG))?.q;
    drop(y);

    stream.reset()?;
    let mut bt = DenseMatrix::zeros(n, l);
    let mut q_sum = vec![0.0; l];
    let mut rows = 0;
    while let Some(block) = stream.next_block()? {
        check_block(&block, n, rows)?;
        let end = rows + block.rows();
        if end > m {
            return Err(Error::StreamFormat(format!("second pass delivered more than {m} rows")));
        }
        let q_rows = &q.as_slice()[rows * l..end * l];
        accumulate_outer(&mut bt, &block.values, q_rows);
        for r in q_rows.chunks_exact(l) {
            axpy(1.0, r, &mut q_sum);
        }
        rows = end;
    }
    same_rows(m, rows)?;
    usage.retain(q.len() + bt.len() + n + l);
    if cfg.center {
        // Qᵀ(A − 1μᵀ) = QᵀA − (Qᵀ1)μᵀ
        for (j, s) in col_sums.iter().enumerate() {
            axpy(-s / m as f64, &q_sum, bt.row_mut(j));
        }
    }
    usage.scratch(3 * l * n);
    svd_of_factored(&q, &bt.transpose(), None, cfg.k).map(|svd| (svd, m))
}

fn legacy_impl<S: RowStream + ?Sized>(
    stream: &mut S,
    cfg: &PcaConfig,
    usage: &mut Usage,
) -> Result<(TruncatedSvd, usize, LegacyDiagnostics)> {
    let n = stream.n_cols();
    let l = cfg.sketch_width();
    let omega = gaussian_matrix(n, l, derive_seed(cfg.seed, OMEGA_TAG))?;
    let tilde_seed = derive_seed(cfg.seed, OMEGA_TILDE_TAG);

    // Ỹ = AᵀΩ̃ with the rows of Ω̃ regenerated from their index.
    let mut y_tilde = DenseMatrix::zeros(n, l);
    let mut tilde_sum = vec![0.0; l];
    let mut tilde_rows = Vec::new();
    let (mut y, col_sums) = range_pass(stream, &omega, |block| {
        tilde_rows.resize(block.rows() * l, 0.0);
        for (r, row) in tilde_rows.chunks_exact_mut(l).enumerate() {
            fill_gaussian_row(tilde_seed, (block.first_row + r) as u64, row);
            axpy(1.0, row, &mut tilde_sum);
        }
        accumulate_outer(&mut y_tilde, &block.values, &tilde_rows);
        Ok(())
    })?;
    let m = finished_rows(y.rows(), cfg, n)?;
    usage.retain(y.len() + y_tilde.len() + omega.len() + n + l);
    if cfg.center {
        subtract_mean_image(&mut y, &omega, &col_sums);
        for (j, s) in col_sums.iter().enumerate() {
            axpy(-s / m as f64, &tilde_sum, y_tilde.row_mut(j));
        }
    }
    drop(omega);

    let seed = derive_seed(cfg.seed, QB_TAG);
    let q = orthonormalize(&y, DenseMatrix::zeros(m, 0).view(), 0.0, cfg.deficiency, seed)?.q;
    drop(y);
    let q_tilde = orthonormalize(&y_tilde, DenseMatrix::zeros(n, 0).view(), 0.0, cfg.deficiency, seed ^ 1)?.q;

    // Ω̃ᵀQ accumulated row by row.
    let mut lhs = DenseMatrix::zeros(l, l);
    let mut row = vec![0.0; l];
    for i in 0..m {
        fill_gaussian_row(tilde_seed, i as u64, &mut row);
        let q_row = q.row(i);
        for (a, &w) in row.iter().enumerate() {
            axpy(w, q_row, lhs.row_mut(a));
        }
    }
    let rhs = y_tilde.t_matmul(&q_tilde);
    drop(y_tilde);

    let s = dense_svd(&lhs)?.s;
    let condition_estimate = s[0] / s[l - 1];
    let core = least_squares(&lhs, &rhs)?;
    let solve_residual_rel =
        lhs.matmul(&core).sub(&rhs).frobenius_norm() / rhs.frobenius_norm().max(f64::MIN_POSITIVE);
    usage.scratch(4 * l * l);

    let svd = svd_of_factored(&q, &core, Some(&q_tilde), cfg.k)?;
    Ok((
        svd,
        m,
        LegacyDiagnostics {
            condition_estimate,
            solve_residual_rel,
        },
    ))
}

/// Solves `lhs · x = rhs` in the least-squares sense through the QR of `lhs`.
fn least_squares(lhs: &DenseMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix> {
    let qr = qr_unpivoted(lhs).map_err(|e| match e {
        Error::RankDeficient { column } => Error::Numerical(format!(
            "the legacy solve is singular (dependent column {column})"
        )),
        other => other,
    })?;
    let mut x = qr.q.t_matmul(rhs);
    let (b, cols) = x.shape();
    for j in (0..b).rev() {
        let d = qr.r[(j, j)];
        let (head, tail) = x.as_mut_slice().split_at_mut((j + 1) * cols);
        let xj = &mut head[j * cols..];
        for (t, later) in tail.chunks_exact(cols).enumerate() {
            axpy(-qr.r[(j, j + 1 + t)], later, xj);
        }
        xj.iter_mut().for_each(|v| *v /= d);
    }
    Ok(x)
}
