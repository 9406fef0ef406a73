use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 8] = b"RPFM0001";
const VERSION: u32 = 1;
const DTYPE_F32_LE: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8;

/// CSV inputs larger than this must use the binary format.
pub const CSV_MAX_ELEMENTS: usize = 1_000_000;

/// Dense row-major matrix of representation vectors, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("empty matrix {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value at row {}, col {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend(r.iter().map(|&v| v as f32));
        }
        Self::new(rows.len(), cols, data)
    }

    /// Narrows to f32 storage.
    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            data.extend(m.row(r).iter().map(|&v| v as f32));
        }
        Self::new(m.nrows(), m.ncols(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Widened to f64 for metric computation.
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_iterator(self.rows, self.cols, self.data.iter().map(|&v| v as f64))
    }

    pub fn row_range(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.rows {
            return Err(Error::Shape(format!(
                "row range {start}..{end} outside 0..{}",
                self.rows
            )));
        }
        Ok(Self {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        })
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            if i >= self.rows {
                return Err(Error::Shape(format!("row {i} out of 0..{}", self.rows)));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(idx.len(), self.cols, data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(FEATURE_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&DTYPE_F32_LE.to_le_bytes());
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses the binary format, or a numeric CSV when the magic is absent.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() >= 8 && &bytes[..8] == FEATURE_MAGIC {
            parse_binary(bytes)
        } else {
            let text = std::str::from_utf8(bytes)
                .map_err(|_| Error::Format("missing RPFM0001 magic and not UTF-8 CSV".into()))?;
            parse_csv(text)
        }
    }
}

fn parse_binary(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "header needs {HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    let dtype = u32_at(12);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    if dtype != DTYPE_F32_LE {
        return Err(Error::Format(format!("unsupported dtype {dtype}")));
    }
    let rows = u64_at(16);
    let cols = u64_at(24);
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format(format!("shape {rows}x{cols} overflows")))?;
    if rows == 0 || cols == 0 || payload.len() as u64 != expected {
        return Err(Error::Truncation(format!(
            "declared {rows}x{cols} needs {expected} payload bytes, found {}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMatrix::new(rows as usize, cols as usize, data)
}

fn parse_csv(text: &str) -> Result<FeatureMatrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, l) in super::data_lines(text) {
        let before = data.len();
        for field in l.split(',') {
            let v = super::parse_f64(field, line, "csv value")?;
            data.push(v as f32);
        }
        let n = data.len() - before;
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(Error::Format(format!(
                    "csv line {line} has {n} fields, expected {c}"
                )))
            }
            _ => {}
        }
        rows += 1;
        if data.len() > CSV_MAX_ELEMENTS {
            return Err(Error::Format(format!(
                "csv input exceeds {CSV_MAX_ELEMENTS} elements; use the binary format"
            )));
        }
    }
    if rows == 0 {
        return Err(Error::Truncation("csv input has no rows".into()));
    }
    FeatureMatrix::new(rows, cols.unwrap_or(0), data)
}

pub fn read_feature_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    FeatureMatrix::from_bytes(&bytes)
}

pub fn write_feature_matrix(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&m.to_bytes()).map_err(|e| Error::io(path, e))
}
