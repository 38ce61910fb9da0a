//! The `spca` command line tool.
//!
//! ```text
//! spca gen     --spectrum type4 --rows 300 --cols 300 --out a.bin
//! spca pca     --input a.bin --rows 300 --cols 300 --k 20 --out-prefix run/a
//! spca compare --spectrum type1 --rows 300 --cols 300 --k 50 --seeds 5 \
//!              --algorithms single-pass,legacy --out report.csv
//! ```
//!
//! Exit codes: 0 success, 1 runtime or data error, 2 usage or configuration
//! error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rqb::{run_pca, Algorithm, DeficiencyPolicy, PcaConfig, RunReport, TruncatedSvd};
use crate::sketch::{
    file_row_stream, read_matrix, write_matrix, Dtype, FileLayout, MatrixFileWriter, MatrixStream,
    NormalizedRows, ReaderStream, RowStream,
};
use crate::synth::{compare, exact_truncated_svd, SpectrumSpec, SyntheticSource, EXACT_SVD_LIMIT};

#[derive(Parser, Debug)]
#[command(name = "spca", version, about = "Single-pass randomized PCA for matrices streamed by rows")]
pub struct Cli {
    /// Worker threads for row-parallel kernels. Results do not depend on it.
    #[arg(long, global = true, env = "SPCA_THREADS", default_value_t = 1)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic matrix with a known spectrum, plus its singular values as CSV.
    Gen(GenArgs),
    /// Factor a matrix file and write U, S, V and a run manifest.
    Pca(PcaArgs),
    /// Run algorithms over several seeds and report accuracy against a reference.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DtypeArg {
    F32,
    F64,
}

impl From<DtypeArg> for Dtype {
    fn from(d: DtypeArg) -> Self {
        match d {
            DtypeArg::F32 => Dtype::F32,
            DtypeArg::F64 => Dtype::F64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Orientation {
    RowMajor,
    ColumnMajor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DeficiencyArg {
    Error,
    Resample,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// type1 … type5, or custom:v1,v2,...
    #[arg(long)]
    pub spectrum: String,
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output matrix file; singular values go to `<out>.truth.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = DtypeArg::F32)]
    pub dtype: DtypeArg,
    /// Prefix the payload with an SPCA1 header.
    #[arg(long)]
    pub header: bool,
}

/// Where the data matrix comes from.
#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Matrix file, or `-` for standard input (single-pass algorithms only).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Rows of a headerless file. Omit both dimensions for SPCA1 files.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Columns of a headerless file or stream.
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long, value_enum, default_value_t = DtypeArg::F32)]
    pub dtype: DtypeArg,
    /// Storage order of the file. Only row-major files can be streamed.
    #[arg(long, value_enum, default_value_t = Orientation::RowMajor)]
    pub orientation: Orientation,
}

/// Factorization parameters shared by `pca` and `compare`.
#[derive(Args, Debug, Clone)]
pub struct FactorArgs {
    #[arg(long)]
    pub k: usize,
    /// Oversampling s; the sketch width l is k + s rounded up to a multiple of b.
    #[arg(long, default_value_t = 10)]
    pub oversample: usize,
    /// Columns per QB iteration (b).
    #[arg(long, default_value_t = 10)]
    pub block_size: usize,
    /// Power scheme exponent (0 or 1). 1 costs a second pass.
    #[arg(long, default_value_t = 0)]
    pub power: u8,
    /// Subtract column means before factoring.
    #[arg(long)]
    pub center: bool,
    /// Subtract each row's mean and scale it to unit norm while streaming.
    #[arg(long)]
    pub normalize_rows: bool,
    /// Rows read per block (default: the sketch width l).
    #[arg(long)]
    pub block_rows: Option<usize>,
    #[arg(long, value_enum, default_value_t = DeficiencyArg::Error)]
    pub deficiency: DeficiencyArg,
}

#[derive(Args, Debug)]
pub struct PcaArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub factor: FactorArgs,
    #[arg(long, default_value = "single-pass")]
    pub algorithm: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Outputs are `<prefix>.U.bin`, `.S.bin`, `.V.bin`, `.S.csv` and `.manifest.txt`.
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Generate the input instead of reading a file (uses --rows and --cols).
    #[arg(long, conflicts_with = "input")]
    pub spectrum: Option<String>,
    /// Seed of the generated input matrix.
    #[arg(long, default_value_t = 1)]
    pub matrix_seed: u64,
    #[command(flatten)]
    pub factor: FactorArgs,
    /// Number of sketch seeds, starting at --first-seed.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 1)]
    pub first_seed: u64,
    /// Comma-separated list of single-pass, basic, legacy.
    #[arg(long, default_value = "single-pass", value_delimiter = ',')]
    pub algorithms: Vec<String>,
    /// Prefix of an earlier `pca` run (its `.S.bin` and `.V.bin`) to use as
    /// the reference instead of an exact SVD.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are printed to standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli, &args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_usage() {
        2
    } else {
        1
    }
}

pub fn run(cli: Cli, argv: &[OsString]) -> Result<()> {
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} threads: {e}", cli.threads)))?;
    let command_line = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    pool.install(|| match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Pca(a) => cmd_pca(a, &command_line, cli.threads),
        Command::Compare(a) => cmd_compare(a),
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_lines(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    for v in values {
        writeln!(w, "{v:e}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_lines`].
pub fn read_lines(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse()
                .map_err(|_| Error::Input(format!("{}: '{l}' is not a number", path.display())))
        })
        .collect()
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let spec: SpectrumSpec = a.spectrum.parse()?;
    let source = SyntheticSource::new(&spec, a.rows, a.cols, a.seed)?;
    let truth = source.singular_values().to_vec();
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut writer = MatrixFileWriter::create(&a.out, a.rows, a.cols, a.dtype.into(), a.header)?;
    let mut stream = source.into_stream(256);
    while let Some(block) = stream.next_block()? {
        writer.write_rows(&block.values)?;
    }
    writer.finish()?;
    write_lines(&sibling(&a.out, ".truth.csv"), &truth)
}

struct OpenedInput {
    stream: Box<dyn RowStream>,
    descriptor: String,
    layout: &'static str,
    dtype: Dtype,
}

fn open_input(input: &InputArgs, block_rows: usize) -> Result<OpenedInput> {
    if input.orientation == Orientation::ColumnMajor {
        return Err(Error::Config(
            "column-major files cannot be streamed by rows; a column-major m×n file is the row-major \
             file of Aᵀ, so run on it with --rows n --cols m and swap the roles of U and V"
                .into(),
        ));
    }
    let path = input
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("an input is required (--input)".into()))?;
    let dtype: Dtype = input.dtype.into();
    if path.as_os_str() == "-" {
        let stdin = std::io::stdin().lock();
        let (stream, layout): (Box<dyn RowStream>, _) = match input.cols {
            Some(cols) => (Box::new(ReaderStream::raw(stdin, cols, dtype, block_rows)?), "raw"),
            None => (Box::new(ReaderStream::with_header(stdin, block_rows)?), "spca1"),
        };
        return Ok(OpenedInput {
            stream,
            descriptor: "<stdin>".into(),
            layout,
            dtype,
        });
    }
    let (layout, name) = match (input.rows, input.cols) {
        (Some(rows), Some(cols)) => (FileLayout::Raw { rows, cols, dtype }, "raw"),
        (None, None) => (FileLayout::Spca1, "spca1"),
        _ => {
            return Err(Error::Config(
                "give both --rows and --cols for a headerless file, or neither for an SPCA1 file".into(),
            ))
        }
    };
    let stream = file_row_stream(path, layout, block_rows)?;
    let dtype = stream.dtype();
    Ok(OpenedInput {
        stream: Box::new(stream),
        descriptor: path.display().to_string(),
        layout: name,
        dtype,
    })
}

fn pca_config(f: &FactorArgs, seed: u64) -> PcaConfig {
    PcaConfig {
        k: f.k,
        oversample: f.oversample,
        block_size: f.block_size,
        power: f.power,
        seed,
        center: f.center,
        deficiency: match f.deficiency {
            DeficiencyArg::Error => DeficiencyPolicy::Error,
            DeficiencyArg::Resample => DeficiencyPolicy::Resample,
        },
        reorthogonalize: true,
        block_rows: f.block_rows,
        compensated_sums: false,
    }
}

fn run_on(stream: Box<dyn RowStream>, cfg: &PcaConfig, algorithm: Algorithm, normalize: bool) -> Result<RunReport> {
    if normalize {
        run_pca(&mut NormalizedRows(stream), cfg, algorithm)
    } else {
        let mut stream = stream;
        run_pca(&mut stream, cfg, algorithm)
    }
}

fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn cmd_pca(a: &PcaArgs, command_line: &str, threads: usize) -> Result<()> {
    let algorithm: Algorithm = a.algorithm.parse()?;
    let cfg = pca_config(&a.factor, a.seed);
    if a.factor.block_rows == Some(0) {
        return Err(Error::Config("--block-rows must be at least 1".into()));
    }
    let started = unix_seconds();
    let input = open_input(&a.input, cfg.stream_block_rows())?;
    let (descriptor, layout, dtype) = (input.descriptor.clone(), input.layout, input.dtype);
    let report = run_on(input.stream, &cfg, algorithm, a.factor.normalize_rows)?;

    let prefix = &a.out_prefix;
    let paths = [".U.bin", ".S.bin", ".V.bin", ".S.csv", ".manifest.txt"].map(|s| sibling(prefix, s));
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let svd = &report.svd;
    write_matrix(&paths[0], &svd.u, Dtype::F64, true)?;
    write_matrix(&paths[1], &DenseMatrix::from_vec(svd.k(), 1, svd.s.clone())?, Dtype::F64, true)?;
    write_matrix(&paths[2], &svd.v, Dtype::F64, true)?;
    write_lines(&paths[3], &svd.s)?;

    let (m, n, l) = (report.rows, report.cols, report.sketch_width);
    let mut kv: Vec<(&str, String)> = vec![
        ("command", command_line.to_string()),
        ("version", env!("CARGO_PKG_VERSION").to_string()),
        ("algorithm", algorithm.to_string()),
        ("input", descriptor),
        ("input_layout", layout.to_string()),
        ("input_dtype", format!("{dtype:?}").to_lowercase()),
        ("rows", m.to_string()),
        ("cols", n.to_string()),
        ("k", cfg.k.to_string()),
        ("oversample", cfg.oversample.to_string()),
        ("block_size", cfg.block_size.to_string()),
        ("sketch_width", l.to_string()),
        ("power", cfg.power.to_string()),
        ("seed", cfg.seed.to_string()),
        ("center", cfg.center.to_string()),
        ("normalize_rows", a.factor.normalize_rows.to_string()),
        ("deficiency", format!("{:?}", a.factor.deficiency).to_lowercase()),
        ("block_rows", cfg.stream_block_rows().to_string()),
        ("threads", threads.to_string()),
        ("passes", report.passes.to_string()),
        ("rows_read", report.rows_read.to_string()),
        ("retained_floats", report.retained_floats.to_string()),
        ("retained_bound", ((m + 2 * n) * l + n).to_string()),
        ("transient_floats", report.transient_floats.to_string()),
        ("t_read", format!("{:.6}", report.read_time.as_secs_f64())),
        ("t_total", format!("{:.6}", report.total_time.as_secs_f64())),
        ("started_unix", format!("{started:.3}")),
        ("finished_unix", format!("{:.3}", unix_seconds())),
        ("output_u", paths[0].display().to_string()),
        ("output_s", paths[1].display().to_string()),
        ("output_v", paths[2].display().to_string()),
        ("output_s_csv", paths[3].display().to_string()),
        ("s_1", format!("{:e}", svd.s[0])),
        ("s_k", format!("{:e}", svd.s[svd.k() - 1])),
    ];
    for w in &report.warnings {
        eprintln!("warning: {w}");
        kv.push(("warning", w.clone()));
    }
    let mut w = create(&paths[4])?;
    for (key, value) in kv {
        writeln!(w, "{key}={}", value.replace('\n', " ")).map_err(|e| Error::io(&paths[4], e))?;
    }
    w.flush().map_err(|e| Error::io(&paths[4], e))
}

/// Parses a manifest into key/value pairs, in file order.
pub fn read_manifest(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

fn load_reference(prefix: &Path, k: usize) -> Result<TruncatedSvd> {
    let s = read_matrix(sibling(prefix, ".S.bin"), FileLayout::Spca1)?;
    let v = read_matrix(sibling(prefix, ".V.bin"), FileLayout::Spca1)?;
    if s.len() < k || v.cols() < k {
        return Err(Error::Input(format!(
            "reference {} has rank {}, fewer than k = {k}",
            prefix.display(),
            s.len()
        )));
    }
    Ok(TruncatedSvd {
        u: DenseMatrix::zeros(0, k),
        s: s.as_slice()[..k].to_vec(),
        v: v.columns(0..k),
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| !x.is_nan());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let algorithms = a
        .algorithms
        .iter()
        .map(|s| s.trim().parse::<Algorithm>())
        .collect::<Result<Vec<_>>>()?;
    if a.seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()));
    }
    let k = a.factor.k;

    // In-memory matrix when the exact oracle or a generated input needs it.
    let matrix: Option<DenseMatrix> = match (&a.spectrum, &a.reference) {
        (Some(spec), _) => {
            let (rows, cols) = a
                .input
                .rows
                .zip(a.input.cols)
                .ok_or_else(|| Error::Config("--spectrum needs --rows and --cols".into()))?;
            if a.reference.is_none() && rows.saturating_mul(cols) > EXACT_SVD_LIMIT {
                return Err(scale_hint(rows, cols));
            }
            let spec: SpectrumSpec = spec.parse()?;
            Some(SyntheticSource::new(&spec, rows, cols, a.matrix_seed)?.materialize().a)
        }
        (None, None) => {
            let probe = open_input(&a.input, 1)?;
            let (rows, cols) = (probe.stream.n_rows().unwrap_or(usize::MAX), probe.stream.n_cols());
            if rows.saturating_mul(cols) > EXACT_SVD_LIMIT {
                return Err(scale_hint(rows, cols));
            }
            let mut stream = probe.stream;
            let mut data = Vec::new();
            let mut m = 0;
            while let Some(b) = stream.next_block()? {
                data.extend_from_slice(b.values.as_slice());
                m += b.rows();
            }
            Some(DenseMatrix::from_vec(m, cols, data)?)
        }
        (None, Some(_)) => None,
    };
    let reference = match &a.reference {
        Some(prefix) => load_reference(prefix, k)?,
        None => {
            let mut m = matrix.clone().expect("materialized above");
            if a.factor.normalize_rows {
                m = crate::sketch::normalize_rows(crate::sketch::RowBlock::new(0, m)).values;
            }
            if a.factor.center {
                let rows = m.rows() as f64;
                let means: Vec<f64> = (0..m.cols()).map(|j| m.column(j).iter().sum::<f64>() / rows).collect();
                m = DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] - means[j]);
            }
            exact_truncated_svd(&m, k)?
        }
    };

    let mut out = csv::Writer::from_writer(create(&a.out)?);
    let csv_err = |e: csv::Error| Error::Input(format!("{}: {e}", a.out.display()));
    let mut header: Vec<String> = ["algorithm", "seed", "k", "l", "power", "t_read", "t_total"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(crate::synth::MetricsReport::csv_header(k));
    out.write_record(&header).map_err(csv_err)?;

    let mut summary = Vec::new();
    for &algorithm in &algorithms {
        let (mut errs, mut corr1, mut resid) = (vec![], vec![], vec![]);
        for seed in a.first_seed..a.first_seed + a.seeds {
            let cfg = pca_config(&a.factor, seed);
            let stream: Box<dyn RowStream> = match &matrix {
                Some(m) => Box::new(MatrixStream::owned(m.clone(), cfg.stream_block_rows())),
                None => open_input(&a.input, cfg.stream_block_rows())?.stream,
            };
            let t0 = Instant::now();
            let report = run_on(stream, &cfg, algorithm, a.factor.normalize_rows)?;
            let total = t0.elapsed().as_secs_f64();
            let residual_input = if a.factor.center || a.factor.normalize_rows { None } else { matrix.as_ref() };
            let mut metrics = compare(&report.svd, &reference, residual_input)?;
            metrics.passes = report.passes;
            metrics.retained_floats = report.retained_floats;
            metrics.wall_times.insert("read".into(), report.read_time.as_secs_f64());
            metrics.wall_times.insert("total".into(), total);
            let mut row = vec![
                algorithm.to_string(),
                seed.to_string(),
                k.to_string(),
                report.sketch_width.to_string(),
                cfg.power.to_string(),
                format!("{:.6}", report.read_time.as_secs_f64()),
                format!("{total:.6}"),
            ];
            row.extend(metrics.csv_record());
            out.write_record(&row).map_err(csv_err)?;
            errs.push(metrics.max_singval_abs_err);
            corr1.push(metrics.per_component_correlation[0]);
            resid.push(metrics.frobenius_residual_rel.unwrap_or(f64::NAN));
        }
        summary.push((algorithm, median(errs), median(corr1), median(resid)));
    }
    out.flush().map_err(|e| Error::io(&a.out, e))?;
    let mut w = out
        .into_inner()
        .map_err(|e| Error::Input(format!("{}: {e}", a.out.display())))?;
    let io = |e| Error::io(&a.out, e);
    writeln!(w, "# summary").map_err(io)?;
    writeln!(w, "algorithm,median_max_err,median_corr_1,median_residual_rel").map_err(io)?;
    for (alg, e, c, r) in summary {
        let r = if r.is_nan() { String::new() } else { format!("{r:e}") };
        writeln!(w, "{alg},{e:e},{c:.12},{r}").map_err(io)?;
    }
    w.flush().map_err(io)
}

fn scale_hint(rows: usize, cols: usize) -> Error {
    Error::Scale(format!(
        "a {rows}x{cols} input is too large for the exact reference SVD; run `spca pca` with a \
         strong configuration (for example --power 1 and a larger --oversample) and pass its \
         prefix with --reference"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd_lists() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }

    #[test]
    fn sibling_appends_suffix() {
        assert_eq!(sibling(Path::new("out/run"), ".S.csv"), PathBuf::from("out/run.S.csv"));
    }

    #[test]
    fn column_major_input_is_a_usage_error() {
        let input = InputArgs {
            input: Some("x".into()),
            rows: Some(2),
            cols: Some(2),
            dtype: DtypeArg::F32,
            orientation: Orientation::ColumnMajor,
        };
        let err = open_input(&input, 1).err().unwrap();
        assert_eq!(exit_code(&err), 2);
    }
}
