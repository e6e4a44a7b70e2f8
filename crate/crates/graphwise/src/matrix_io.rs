//! Dense matrix serialization shared by datasets and estimates.
//!
//! CSV: one row per line, comma separated, no header.
//! Binary: the 8 magic bytes `GWMAT001`, then `rows` and `cols` as
//! little-endian `u64`, then the entries row-major as little-endian `f64`.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"GWMAT001";

#[derive(Debug, Error)]
pub enum MatrixIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("bad magic bytes")]
    BadMagic,
    #[error("truncated binary matrix")]
    Truncated,
    #[error("matrix is empty")]
    Empty,
    #[error(transparent)]
    Stream(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, MatrixIoError>;

pub fn write_csv<W: Write>(m: &DMatrix<f64>, mut out: W) -> io::Result<()> {
    for i in 0..m.nrows() {
        let line: Vec<String> = m.row(i).iter().map(|x| format!("{x:?}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()
}

pub fn read_csv<R: BufRead>(input: R) -> Result<DMatrix<f64>> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| MatrixIoError::Csv { line: idx + 1, reason: format!("{f:?}: {e}") })
            })
            .collect::<Result<Vec<_>>>()?;
        match cols {
            None => cols = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(MatrixIoError::Csv {
                    line: idx + 1,
                    reason: format!("expected {c} fields, found {}", fields.len()),
                })
            }
            _ => {}
        }
        values.extend(fields);
        rows += 1;
    }
    let cols = cols.ok_or(MatrixIoError::Empty)?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn write_binary<W: Write>(m: &DMatrix<f64>, mut out: W) -> io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(m.nrows() as u64).to_le_bytes())?;
    out.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for x in m.row(i).iter() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()
}

pub fn read_binary<R: Read>(mut input: R) -> Result<DMatrix<f64>> {
    let mut magic = [0u8; 8];
    read_exact(&mut input, &mut magic)?;
    if &magic != MAGIC {
        return Err(MatrixIoError::BadMagic);
    }
    let mut word = [0u8; 8];
    read_exact(&mut input, &mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    read_exact(&mut input, &mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let len = rows.checked_mul(cols).ok_or(MatrixIoError::Truncated)?;
    let mut values = Vec::with_capacity(len.min(1 << 24));
    for _ in 0..len {
        read_exact(&mut input, &mut word)?;
        values.push(f64::from_le_bytes(word));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => MatrixIoError::Truncated,
        _ => MatrixIoError::Stream(e),
    })
}

fn with_path<T>(path: &Path, r: io::Result<T>) -> Result<T> {
    r.map_err(|source| MatrixIoError::Io { path: path.to_path_buf(), source })
}

fn is_binary_path(path: &Path) -> bool {
    path.extension().is_some_and(|ext| ext == "bin")
}

/// Writes binary when the extension is `.bin`, CSV otherwise.
pub fn save(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let file = with_path(path, File::create(path))?;
    let out = BufWriter::new(file);
    let r = if is_binary_path(path) { write_binary(m, out) } else { write_csv(m, out) };
    with_path(path, r)
}

/// Reads binary when the file starts with the magic bytes, CSV otherwise.
pub fn load(path: &Path) -> Result<DMatrix<f64>> {
    let mut file = with_path(path, File::open(path))?;
    let mut head = [0u8; 8];
    let n = with_path(path, file.read(&mut head))?;
    drop(file);
    let file = with_path(path, File::open(path))?;
    let r = if n == 8 && &head == MAGIC { read_binary(BufReader::new(file)) } else { read_csv(BufReader::new(file)) };
    r.map_err(|e| match e {
        MatrixIoError::Stream(source) => MatrixIoError::Io { path: path.to_path_buf(), source },
        other => other,
    })
}
