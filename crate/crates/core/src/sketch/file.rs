//! Row-major binary matrix files.
//!
//! Two layouts are understood:
//!
//! * raw: headerless little-endian values, shape and element type supplied
//!   by the caller;
//! * SPCA1: a 22-byte header (`"SPCA"`, version byte `1`, `u64` rows, `u64`
//!   cols, dtype byte `1` = f32 / `2` = f64, all little-endian) followed by
//!   the raw payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{RowBlock, RowStream};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const MAGIC: &[u8; 4] = b"SPCA";
pub const HEADER_LEN: u64 = 22;
const VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Dtype {
    #[default]
    F32,
    F64,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 1,
            Dtype::F64 => 2,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(Dtype::F32),
            2 => Ok(Dtype::F64),
            other => Err(Error::StreamFormat(format!("unknown dtype code {other}"))),
        }
    }

    fn decode(self, bytes: &[u8], out: &mut [f64]) {
        match self {
            Dtype::F32 => {
                for (o, c) in out.iter_mut().zip(bytes.chunks_exact(4)) {
                    *o = f32::from_le_bytes(c.try_into().unwrap()) as f64;
                }
            }
            Dtype::F64 => {
                for (o, c) in out.iter_mut().zip(bytes.chunks_exact(8)) {
                    *o = f64::from_le_bytes(c.try_into().unwrap());
                }
            }
        }
    }

    fn encode(self, values: &[f64], out: &mut Vec<u8>) {
        out.clear();
        match self {
            Dtype::F32 => values.iter().for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
            Dtype::F64 => values.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        }
    }
}

impl std::str::FromStr for Dtype {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f32" | "float32" => Ok(Dtype::F32),
            "f64" | "float64" => Ok(Dtype::F64),
            _ => Err(Error::Config(format!("unknown dtype '{s}', expected f32 or f64"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileLayout {
    Raw { rows: usize, cols: usize, dtype: Dtype },
    Spca1,
}

fn encode_header(rows: usize, cols: usize, dtype: Dtype) -> [u8; HEADER_LEN as usize] {
    let mut h = [0u8; HEADER_LEN as usize];
    h[..4].copy_from_slice(MAGIC);
    h[4] = VERSION;
    h[5..13].copy_from_slice(&(rows as u64).to_le_bytes());
    h[13..21].copy_from_slice(&(cols as u64).to_le_bytes());
    h[21] = dtype.code();
    h
}

fn decode_header(h: &[u8; HEADER_LEN as usize]) -> Result<(usize, usize, Dtype)> {
    if &h[..4] != MAGIC {
        return Err(Error::StreamFormat("missing SPCA header magic".into()));
    }
    if h[4] != VERSION {
        return Err(Error::StreamFormat(format!("unsupported header version {}", h[4])));
    }
    let rows = u64::from_le_bytes(h[5..13].try_into().unwrap());
    let cols = u64::from_le_bytes(h[13..21].try_into().unwrap());
    let dtype = Dtype::from_code(h[21])?;
    let to_usize = |v: u64| {
        usize::try_from(v).map_err(|_| Error::StreamFormat(format!("dimension {v} too large")))
    };
    Ok((to_usize(rows)?, to_usize(cols)?, dtype))
}

/// Resettable stream over a matrix file.
pub struct FileRowStream {
    reader: BufReader<File>,
    path: PathBuf,
    rows: usize,
    cols: usize,
    dtype: Dtype,
    data_offset: u64,
    block_rows: usize,
    next_row: usize,
    buf: Vec<u8>,
}

impl std::fmt::Debug for FileRowStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FileRowStream")
            .field("path", &self.path)
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("dtype", &self.dtype)
            .finish()
    }
}

/// Opens `path` for streaming in blocks of `block_rows` rows, checking that
/// the file size matches the declared shape exactly.
pub fn file_row_stream(path: impl AsRef<Path>, layout: FileLayout, block_rows: usize) -> Result<FileRowStream> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let (rows, cols, dtype, data_offset) = match layout {
        FileLayout::Raw { rows, cols, dtype } => (rows, cols, dtype, 0),
        FileLayout::Spca1 => {
            let mut h = [0u8; HEADER_LEN as usize];
            file.read_exact(&mut h).map_err(|_| {
                Error::StreamFormat(format!("{} is shorter than the SPCA header", path.display()))
            })?;
            let (r, c, d) = decode_header(&h)?;
            (r, c, d, HEADER_LEN)
        }
    };
    if cols == 0 {
        return Err(Error::StreamFormat("matrix has zero columns".into()));
    }
    let expected = (rows as u128) * (cols as u128) * (dtype.width() as u128) + data_offset as u128;
    if len as u128 != expected {
        return Err(Error::StreamFormat(format!(
            "{} has {len} bytes, but a {rows}x{cols} {dtype:?} matrix needs {expected}",
            path.display()
        )));
    }
    let mut reader = BufReader::with_capacity(1 << 20, file);
    reader
        .seek(SeekFrom::Start(data_offset))
        .map_err(|e| Error::io(path, e))?;
    Ok(FileRowStream {
        reader,
        path: path.to_path_buf(),
        rows,
        cols,
        dtype,
        data_offset,
        block_rows: block_rows.max(1),
        next_row: 0,
        buf: Vec::new(),
    })
}

impl FileRowStream {
    pub fn dtype(&self) -> Dtype {
        self.dtype
    }
}

impl RowStream for FileRowStream {
    fn n_cols(&self) -> usize {
        self.cols
    }

    fn n_rows(&self) -> Option<usize> {
        Some(self.rows)
    }

    fn next_block(&mut self) -> Result<Option<RowBlock>> {
        if self.next_row >= self.rows {
            return Ok(None);
        }
        let take = self.block_rows.min(self.rows - self.next_row);
        self.buf.resize(take * self.cols * self.dtype.width(), 0);
        self.reader
            .read_exact(&mut self.buf)
            .map_err(|e| Error::io(&self.path, e))?;
        let mut values = DenseMatrix::zeros(take, self.cols);
        self.dtype.decode(&self.buf, values.as_mut_slice());
        let block = RowBlock::new(self.next_row, values);
        self.next_row += take;
        Ok(Some(block))
    }

    fn is_resettable(&self) -> bool {
        true
    }

    fn reset(&mut self) -> Result<()> {
        self.reader
            .seek(SeekFrom::Start(self.data_offset))
            .map_err(|e| Error::io(&self.path, e))?;
        self.next_row = 0;
        Ok(())
    }
}

/// Single-pass stream over any reader (a pipe, stdin). The row count is
/// unknown until the end is reached.
pub struct ReaderStream<R> {
    reader: R,
    cols: usize,
    dtype: Dtype,
    block_rows: usize,
    next_row: usize,
    remaining: Option<usize>,
    buf: Vec<u8>,
}

impl<R: Read> ReaderStream<R> {
    pub fn raw(reader: R, cols: usize, dtype: Dtype, block_rows: usize) -> Result<Self> {
        if cols == 0 {
            return Err(Error::StreamFormat("matrix has zero columns".into()));
        }
        Ok(ReaderStream {
            reader,
            cols,
            dtype,
            block_rows: block_rows.max(1),
            next_row: 0,
            remaining: None,
            buf: Vec::new(),
        })
    }

    /// Reads an SPCA1 header from the reader first.
    pub fn with_header(mut reader: R, block_rows: usize) -> Result<Self> {
        let mut h = [0u8; HEADER_LEN as usize];
        reader
            .read_exact(&mut h)
            .map_err(|_| Error::StreamFormat("input is shorter than the SPCA header".into()))?;
        let (rows, cols, dtype) = decode_header(&h)?;
        let mut s = Self::raw(reader, cols, dtype, block_rows)?;
        s.remaining = Some(rows);
        Ok(s)
    }
}

impl<R: Read> RowStream for ReaderStream<R> {
    fn n_cols(&self) -> usize {
        self.cols
    }

    fn n_rows(&self) -> Option<usize> {
        self.remaining.map(|r| r + self.next_row)
    }

    fn next_block(&mut self) -> Result<Option<RowBlock>> {
        let row_bytes = self.cols * self.dtype.width();
        let want = match self.remaining {
            Some(0) => return Ok(None),
            Some(r) => r.min(self.block_rows),
            None => self.block_rows,
        };
        self.buf.resize(want * row_bytes, 0);
        let mut filled = 0;
        while filled < self.buf.len() {
            match self.reader.read(&mut self.buf[filled..]) {
                Ok(0) => break,
                Ok(k) => filled += k,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(Error::io("<stream>", e)),
            }
        }
        if filled % row_bytes != 0 {
            return Err(Error::StreamFormat(format!(
                "stream ends inside row {}",
                self.next_row + filled / row_bytes
            )));
        }
        let got = filled / row_bytes;
        if let Some(r) = self.remaining.as_mut() {
            if got < want {
                return Err(Error::StreamFormat(format!(
                    "stream ended after {} of {} declared rows",
                    self.next_row + got,
                    self.next_row + *r
                )));
            }
            *r -= got;
        }
        if got == 0 {
            return Ok(None);
        }
        let mut values = DenseMatrix::zeros(got, self.cols);
        self.dtype.decode(&self.buf[..filled], values.as_mut_slice());
        let block = RowBlock::new(self.next_row, values);
        self.next_row += got;
        Ok(Some(block))
    }
}

/// Writes a matrix file one row at a time.
pub struct MatrixFileWriter {
    out: BufWriter<File>,
    path: PathBuf,
    dtype: Dtype,
    cols: usize,
    rows_expected: usize,
    rows_written: usize,
    buf: Vec<u8>,
}

impl MatrixFileWriter {
    /// With `header` the file starts with an SPCA1 header declaring `rows`.
    pub fn create(path: impl AsRef<Path>, rows: usize, cols: usize, dtype: Dtype, header: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::with_capacity(1 << 20, file);
        if header {
            out.write_all(&encode_header(rows, cols, dtype))
                .map_err(|e| Error::io(path, e))?;
        }
        Ok(MatrixFileWriter {
            out,
            path: path.to_path_buf(),
            dtype,
            cols,
            rows_expected: rows,
            rows_written: 0,
            buf: Vec::new(),
        })
    }

    pub fn write_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::Dimension(format!(
                "row has {} values, file has {} columns",
                row.len(),
                self.cols
            )));
        }
        if self.rows_written == self.rows_expected {
            return Err(Error::Dimension(format!(
                "more than the declared {} rows written",
                self.rows_expected
            )));
        }
        self.dtype.encode(row, &mut self.buf);
        self.out.write_all(&self.buf).map_err(|e| Error::io(&self.path, e))?;
        self.rows_written += 1;
        Ok(())
    }

    pub fn write_rows(&mut self, m: &DenseMatrix) -> Result<()> {
        (0..m.rows()).try_for_each(|i| self.write_row(m.row(i)))
    }

    pub fn finish(mut self) -> Result<()> {
        if self.rows_written != self.rows_expected {
            return Err(Error::Dimension(format!(
                "{} rows written, {} declared",
                self.rows_written, self.rows_expected
            )));
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix, dtype: Dtype, header: bool) -> Result<()> {
    let mut w = MatrixFileWriter::create(path, m.rows(), m.cols(), dtype, header)?;
    w.write_rows(m)?;
    w.finish()
}

pub fn read_matrix(path: impl AsRef<Path>, layout: FileLayout) -> Result<DenseMatrix> {
    let mut s = file_row_stream(path, layout, 4096)?;
    let mut data = Vec::with_capacity(s.rows * s.cols);
    while let Some(b) = s.next_block()? {
        data.extend_from_slice(b.values.as_slice());
    }
    DenseMatrix::from_vec(s.rows, s.cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;
    use crate::sketch::{sketch_pass, MatrixStream};

    fn f32_fixture() -> Vec<u8> {
        (1..=12).flat_map(|v| (v as f32).to_le_bytes()).collect()
    }

    #[test]
    fn raw_f32_rows_decode_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        std::fs::write(&p, f32_fixture()).unwrap();
        let layout = FileLayout::Raw { rows: 4, cols: 3, dtype: Dtype::F32 };
        let mut s = file_row_stream(&p, layout, 2).unwrap();
        let b0 = s.next_block().unwrap().unwrap();
        assert_eq!(b0.first_row, 0);
        assert_eq!(b0.values.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b1 = s.next_block().unwrap().unwrap();
        assert_eq!(b1.first_row, 2);
        assert_eq!(b1.values.as_slice(), &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        assert!(s.next_block().unwrap().is_none());
        s.reset().unwrap();
        assert_eq!(s.next_block().unwrap().unwrap(), b0);
    }

    #[test]
    fn size_mismatch_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        std::fs::write(&p, &f32_fixture()[..44]).unwrap();
        let layout = FileLayout::Raw { rows: 4, cols: 3, dtype: Dtype::F32 };
        assert!(matches!(file_row_stream(&p, layout, 2), Err(Error::StreamFormat(_))));
    }

    #[test]
    fn header_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.spca");
        let m = gaussian_matrix(7, 5, 3).unwrap();
        write_matrix(&p, &m, Dtype::F64, true).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), HEADER_LEN + 7 * 5 * 8);
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..5], b"SPCA\x01");
        assert_eq!(bytes[21], 2);
        assert_eq!(read_matrix(&p, FileLayout::Spca1).unwrap(), m);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.spca");
        std::fs::write(&p, [0u8; 30]).unwrap();
        assert!(matches!(file_row_stream(&p, FileLayout::Spca1, 2), Err(Error::StreamFormat(_))));
    }

    #[test]
    fn file_sketch_is_bit_identical_to_memory_sketch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("big.f64");
        let a = gaussian_matrix(1000, 500, 21).unwrap();
        write_matrix(&p, &a, Dtype::F64, false).unwrap();
        let omega = gaussian_matrix(500, 10, 22).unwrap();
        let layout = FileLayout::Raw { rows: 1000, cols: 500, dtype: Dtype::F64 };
        let from_file = sketch_pass(&mut file_row_stream(&p, layout, 64).unwrap(), &omega).unwrap();
        let in_memory = sketch_pass(&mut MatrixStream::new(&a, 10), &omega).unwrap();
        assert_eq!(from_file.g, in_memory.g);
        assert_eq!(from_file.h, in_memory.h);
    }

    #[test]
    fn reader_stream_reads_until_eof() {
        let bytes = f32_fixture();
        let mut s = ReaderStream::raw(&bytes[..], 3, Dtype::F32, 3).unwrap();
        assert_eq!(s.n_rows(), None);
        assert!(!s.is_resettable());
        let mut rows = 0;
        while let Some(b) = s.next_block().unwrap() {
            rows += b.rows();
        }
        assert_eq!(rows, 4);
        assert!(matches!(s.reset(), Err(Error::Capability(_))));
    }

    #[test]
    fn reader_stream_rejects_partial_row() {
        let bytes = f32_fixture();
        let mut s = ReaderStream::raw(&bytes[..40], 3, Dtype::F32, 8).unwrap();
        assert!(matches!(s.next_block(), Err(Error::StreamFormat(_))));
    }

    #[test]
    fn reader_stream_with_header() {
        let mut bytes = encode_header(4, 3, Dtype::F32).to_vec();
        bytes.extend(f32_fixture());
        let mut s = ReaderStream::with_header(&bytes[..], 10).unwrap();
        assert_eq!(s.n_rows(), Some(4));
        assert_eq!(s.next_block().unwrap().unwrap().rows(), 4);
        assert!(s.next_block().unwrap().is_none());
    }

    #[test]
    fn writer_enforces_declared_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.bin");
        let mut w = MatrixFileWriter::create(&p, 2, 2, Dtype::F32, false).unwrap();
        w.write_row(&[1.0, 2.0]).unwrap();
        assert!(w.write_row(&[1.0]).is_err());
        assert!(w.finish().is_err());
    }
}
