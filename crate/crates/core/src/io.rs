//! On-disk formats.
//!
//! Features (`FMAT`), little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4 | magic `FMAT` |
//! | 4 | version, u32 = 1 |
//! | 8 | n, u64 |
//! | 8 | d, u64 |
//! | 4·n·d | f32 payload, row-major |
//!
//! Labels (`LPOS`), little-endian: magic `LPOS`, u32 version = 1, u64 n,
//! u64 m, u64 k, then n+1 u32 prefix offsets and the concatenated u32
//! positive class ids.
//!
//! CSV: comma separated, no header, `.` decimal point. Feature files hold
//! one example per row; label files hold one line per example listing its
//! positive class ids (an empty line means no positives).

use std::fs;
use std::path::Path;

use crate::data::FeatureDataset;
use crate::error::{DataError, Result};
use crate::linalg::Matrix;

pub const FEATURE_MAGIC: [u8; 4] = *b"FMAT";
pub const LABEL_MAGIC: [u8; 4] = *b"LPOS";
pub const FORMAT_VERSION: u32 = 1;

const FEATURE_HEADER_LEN: u64 = 24;
const LABEL_HEADER_LEN: u64 = 32;

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    fs::write(path, bytes).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Little-endian cursor over a byte buffer whose length was validated up front.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out: [u8; N] = self.buf[self.pos..self.pos + N].try_into().unwrap();
        self.pos += N;
        out
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }

    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take())
    }
}

fn check_header(bytes: &[u8], magic: [u8; 4], header_len: u64) -> Result<(), DataError> {
    if (bytes.len() as u64) < header_len {
        return Err(DataError::SizeMismatch {
            expected: header_len,
            found: bytes.len() as u64,
        });
    }
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if found != magic {
        return Err(DataError::BadMagic {
            expected: magic,
            found,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(DataError::BadVersion(version));
    }
    Ok(())
}

fn too_large() -> DataError {
    DataError::SizeMismatch {
        expected: u64::MAX,
        found: 0,
    }
}

pub fn encode_features(features: &Matrix) -> Vec<u8> {
    let (n, d) = features.shape();
    let mut out = Vec::with_capacity(FEATURE_HEADER_LEN as usize + 4 * n * d);
    out.extend_from_slice(&FEATURE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    for &v in features.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<Matrix, DataError> {
    check_header(bytes, FEATURE_MAGIC, FEATURE_HEADER_LEN)?;
    let mut r = Reader { buf: bytes, pos: 8 };
    let (n, d) = (r.u64(), r.u64());
    let expected = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_mul(4))
        .and_then(|b| b.checked_add(FEATURE_HEADER_LEN))
        .ok_or_else(too_large)?;
    if expected != bytes.len() as u64 {
        return Err(DataError::SizeMismatch {
            expected,
            found: bytes.len() as u64,
        });
    }
    let (n, d) = (n as usize, d as usize);
    let mut data = Vec::with_capacity(n * d);
    for idx in 0..n * d {
        let v = r.f32();
        if !v.is_finite() {
            return Err(DataError::NonFinite {
                row: idx / d,
                col: idx % d,
            });
        }
        data.push(f64::from(v));
    }
    Ok(Matrix::from_fn(n, d, |i, j| data[i * d + j]))
}

/// Decoded label file: CSR offsets, indices, `m` and `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelTable {
    pub offsets: Vec<usize>,
    pub indices: Vec<u32>,
    pub classes: usize,
    pub max_positives: usize,
}

impl LabelTable {
    pub fn rows(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }
}

pub fn encode_labels(ds: &FeatureDataset) -> Vec<u8> {
    let n = ds.len();
    let mut out = Vec::with_capacity(LABEL_HEADER_LEN as usize + 4 * (n + 1 + ds.indices().len()));
    out.extend_from_slice(&LABEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [n, ds.classes(), ds.max_positives()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for &o in ds.offsets() {
        out.extend_from_slice(&(o as u32).to_le_bytes());
    }
    for &j in ds.indices() {
        out.extend_from_slice(&j.to_le_bytes());
    }
    out
}

pub fn decode_labels(bytes: &[u8]) -> Result<LabelTable, DataError> {
    check_header(bytes, LABEL_MAGIC, LABEL_HEADER_LEN)?;
    let mut r = Reader { buf: bytes, pos: 8 };
    let (n, m, k) = (r.u64(), r.u64(), r.u64());
    let offsets_end = n
        .checked_add(1)
        .and_then(|c| c.checked_mul(4))
        .and_then(|b| b.checked_add(LABEL_HEADER_LEN))
        .ok_or_else(too_large)?;
    if (bytes.len() as u64) < offsets_end {
        return Err(DataError::SizeMismatch {
            expected: offsets_end,
            found: bytes.len() as u64,
        });
    }
    let offsets: Vec<usize> = (0..=n).map(|_| r.u32() as usize).collect();
    if offsets.windows(2).any(|w| w[1] < w[0]) {
        return Err(DataError::Invariant("label offsets must be nondecreasing".into()));
    }
    let total = *offsets.last().unwrap() as u64;
    let expected = offsets_end + 4 * total;
    if expected != bytes.len() as u64 {
        return Err(DataError::SizeMismatch {
            expected,
            found: bytes.len() as u64,
        });
    }
    let indices = (0..total).map(|_| r.u32()).collect();
    Ok(LabelTable {
        offsets,
        indices,
        classes: m as usize,
        max_positives: k as usize,
    })
}

fn assemble(features: Matrix, labels: LabelTable) -> Result<FeatureDataset> {
    if labels.rows() != features.rows() {
        return Err(DataError::Invariant(format!(
            "feature file has {} rows but label file has {}",
            features.rows(),
            labels.rows()
        ))
        .into());
    }
    FeatureDataset::from_csr(
        features,
        labels.offsets,
        labels.indices,
        labels.classes,
        labels.max_positives,
    )
}

pub fn load_dataset(feature_path: impl AsRef<Path>, label_path: impl AsRef<Path>) -> Result<FeatureDataset> {
    let features = decode_features(&read_file(feature_path.as_ref())?)?;
    let labels = decode_labels(&read_file(label_path.as_ref())?)?;
    assemble(features, labels)
}

pub fn save_dataset(ds: &FeatureDataset, feature_path: impl AsRef<Path>, label_path: impl AsRef<Path>) -> Result<()> {
    write_file(feature_path.as_ref(), &encode_features(ds.features()))?;
    write_file(label_path.as_ref(), &encode_labels(ds))?;
    Ok(())
}

pub fn parse_feature_csv(text: &str) -> Result<Matrix, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            col: 0,
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(DataError::Parse {
                    line,
                    col: record.len().min(w) + 1,
                    msg: format!("expected {w} columns, found {}", record.len()),
                })
            }
            _ => {}
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| DataError::Parse {
                line,
                col: c + 1,
                msg: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFinite { row: rows, col: c });
            }
            data.push(v);
        }
        rows += 1;
    }
    let d = width.unwrap_or(0);
    Ok(Matrix::from_fn(rows, d, |i, j| data[i * d + j]))
}

/// Parses one line of class ids per example. `classes` and `max_positives`
/// default to the largest id + 1 and the longest row.
pub fn parse_label_csv(text: &str, classes: Option<usize>, max_positives: Option<usize>) -> Result<LabelTable, DataError> {
    let mut offsets = vec![0];
    let mut indices = Vec::new();
    let mut longest = 0;
    let mut lines: Vec<&str> = text.split('\n').collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    for (l, line) in lines.iter().enumerate() {
        let line = line.trim_end_matches('\r');
        let mut row = Vec::new();
        if !line.trim().is_empty() {
            for (c, cell) in line.split(',').enumerate() {
                let j: u32 = cell.trim().parse().map_err(|_| DataError::Parse {
                    line: l + 1,
                    col: c + 1,
                    msg: format!("not a class index: {cell:?}"),
                })?;
                row.push(j);
            }
        }
        row.sort_unstable();
        longest = longest.max(row.len());
        indices.extend_from_slice(&row);
        offsets.push(indices.len());
    }
    let inferred_m = indices.iter().max().map_or(1, |&j| j as usize + 1);
    Ok(LabelTable {
        offsets,
        indices,
        classes: classes.unwrap_or(inferred_m),
        max_positives: max_positives.unwrap_or(longest),
    })
}

pub fn load_csv(feature_csv: impl AsRef<Path>, label_csv: impl AsRef<Path>) -> Result<FeatureDataset> {
    let read = |p: &Path| -> Result<String, DataError> {
        String::from_utf8(read_file(p)?).map_err(|e| DataError::Parse {
            line: 0,
            col: 0,
            msg: e.to_string(),
        })
    };
    let features = parse_feature_csv(&read(feature_csv.as_ref())?)?;
    let labels = parse_label_csv(&read(label_csv.as_ref())?, None, None)?;
    assemble(features, labels)
}

pub fn load_csv_str(features: &str, labels: &str) -> Result<FeatureDataset> {
    assemble(parse_feature_csv(features)?, parse_label_csv(labels, None, None)?)
}
