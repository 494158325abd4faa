//! Matrix files: the binary TSMA format and delimited text.
//!
//! TSMA layout (all little-endian):
//!
//! | offset | size | field                 |
//! |--------|------|-----------------------|
//! | 0      | 4    | magic `b"TSMA"`       |
//! | 4      | 4    | version, u32 = 1      |
//! | 8      | 8    | rows, u64             |
//! | 16     | 8    | cols, u64             |
//! | 24     | 1    | dtype, u8 (0 = f64)   |
//! | 25     | 8·rows·cols | row-major f64  |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::runtime::{block_sizes, DistMatrix};

pub const MAGIC: [u8; 4] = *b"TSMA";
pub const VERSION: u32 = 1;
pub const DTYPE_F64: u8 = 0;
pub const HEADER_LEN: u64 = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixFileHeader {
    pub rows: u64,
    pub cols: u64,
}

impl MatrixFileHeader {
    pub fn payload_len(&self) -> Option<u64> {
        self.rows.checked_mul(self.cols)?.checked_mul(8)
    }

    fn encode(&self) -> [u8; HEADER_LEN as usize] {
        let mut h = [0u8; HEADER_LEN as usize];
        h[0..4].copy_from_slice(&MAGIC);
        h[4..8].copy_from_slice(&VERSION.to_le_bytes());
        h[8..16].copy_from_slice(&self.rows.to_le_bytes());
        h[16..24].copy_from_slice(&self.cols.to_le_bytes());
        h[24] = DTYPE_F64;
        h
    }
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = MatrixFileHeader {
        rows: m.rows() as u64,
        cols: m.cols() as u64,
    };
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(&header.encode())?;
        for x in m.as_slice() {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

struct TsmaReader {
    path: std::path::PathBuf,
    inner: BufReader<File>,
    header: MatrixFileHeader,
    /// Next value index (row-major) to be read.
    cursor: u64,
    file_len: u64,
}

impl TsmaReader {
    fn open(path: &Path) -> Result<TsmaReader> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let mut inner = BufReader::new(file);
        let format = |offset: u64, message: String| Error::Format {
            path: path.to_path_buf(),
            offset,
            message,
        };
        let mut h = [0u8; HEADER_LEN as usize];
        let got = read_up_to(&mut inner, &mut h).map_err(|e| Error::io(path, e))?;
        if got < 4 || h[0..4] != MAGIC {
            return Err(format(0, format!("bad magic {:?}, expected \"TSMA\"", &h[..got.min(4)])));
        }
        if got < h.len() {
            return Err(Error::Length {
                path: path.to_path_buf(),
                expected: HEADER_LEN,
                actual: got as u64,
            });
        }
        let version = u32::from_le_bytes(h[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(format(4, format!("unsupported version {version}")));
        }
        if h[24] != DTYPE_F64 {
            return Err(format(24, format!("unsupported dtype {}", h[24])));
        }
        let header = MatrixFileHeader {
            rows: u64::from_le_bytes(h[8..16].try_into().unwrap()),
            cols: u64::from_le_bytes(h[16..24].try_into().unwrap()),
        };
        let payload = header
            .payload_len()
            .ok_or_else(|| format(8, "declared shape overflows".into()))?;
        let expected = HEADER_LEN + payload;
        if file_len != expected {
            return Err(Error::Length {
                path: path.to_path_buf(),
                expected,
                actual: file_len,
            });
        }
        Ok(TsmaReader {
            path: path.to_path_buf(),
            inner,
            header,
            cursor: 0,
            file_len,
        })
    }

    /// Reads the next `rows` rows as a matrix, rejecting non-finite values.
    fn read_rows(&mut self, rows: usize) -> Result<DenseMatrix> {
        let cols = self.header.cols as usize;
        let count = rows * cols;
        let mut data = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            let got = read_up_to(&mut self.inner, &mut buf).map_err(|e| Error::io(&self.path, e))?;
            if got < 8 {
                // the file shrank after the length check
                return Err(Error::Length {
                    path: self.path.clone(),
                    expected: self.file_len,
                    actual: HEADER_LEN + self.cursor * 8 + got as u64,
                });
            }
            let x = f64::from_le_bytes(buf);
            if !x.is_finite() {
                let c = self.cursor;
                return Err(Error::NonFinite {
                    context: format!("{}", self.path.display()),
                    row: (c / self.header.cols) as usize,
                    col: (c % self.header.cols) as usize,
                });
            }
            data.push(x);
            self.cursor += 1;
        }
        DenseMatrix::new(rows, cols, data)
    }
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Header of a TSMA file, after validating magic, version, dtype and length.
pub fn read_header(path: impl AsRef<Path>) -> Result<MatrixFileHeader> {
    Ok(TsmaReader::open(path.as_ref())?.header)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let mut r = TsmaReader::open(path.as_ref())?;
    let rows = r.header.rows as usize;
    r.read_rows(rows)
}

/// Streams a TSMA file straight into `partitions` row blocks, sized as
/// [`DistMatrix::partition`] would size them.
pub fn read_matrix_partitioned(path: impl AsRef<Path>, partitions: usize) -> Result<DistMatrix> {
    let mut r = TsmaReader::open(path.as_ref())?;
    let rows = r.header.rows as usize;
    let sizes = block_sizes(rows, partitions)?;
    let mut blocks = Vec::with_capacity(sizes.len());
    for s in sizes {
        blocks.push(r.read_rows(s)?);
    }
    DistMatrix::from_blocks(blocks)
}

/// Parses delimited numeric text: one matrix row per record, no header.
/// Blank lines are skipped; fields may carry surrounding whitespace.
pub fn read_csv(path: impl AsRef<Path>, delimiter: u8) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(0, format!("{other:?}")),
        })?;
    let mut data = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(rows as u64 + 1);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(parse_err(line, format!("expected {c} fields, found {}", record.len())));
            }
            _ => {}
        }
        for (j, field) in record.iter().enumerate() {
            let x: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("field {} is not a number: {field:?}", j + 1)))?;
            if !x.is_finite() {
                return Err(parse_err(line, format!("field {} is not finite: {field:?}", j + 1)));
            }
            data.push(x);
        }
        rows += 1;
    }
    DenseMatrix::new(rows, cols.unwrap_or(0), data)
}

/// Writes one record per row with shortest round-trip formatting, so
/// `read_csv(write_csv(M)) == M` bitwise.
pub fn write_csv(path: impl AsRef<Path>, m: &DenseMatrix, delimiter: u8) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let sep = [delimiter];
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        for i in 0..m.rows() {
            for (j, x) in m.row(i).iter().enumerate() {
                if j > 0 {
                    w.write_all(&sep)?;
                }
                write!(w, "{x:?}")?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}
