//! Embedding and label files.
//!
//! Binary embeddings: `"EMB1"`, `u32` n, `u32` D, then `n*D` `f32` values,
//! all little-endian and row-major. Labels: `"LBL1"`, `u32` n, then `n`
//! signed bytes in {-1, +1}. CSV: one row per sample, comma separated, with
//! an optional trailing integer label column.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::{default_ids, EmbeddingDataset, NORMAL};
use crate::error::{Result, SvddError};
use crate::fsutil::{read_file, read_text, write_atomic};

const EMB_MAGIC: &[u8; 4] = b"EMB1";
const LBL_MAGIC: &[u8; 4] = b"LBL1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Binary,
    Csv { labels_inline: bool },
}

fn header_err(path: &Path, reason: impl Into<String>) -> SvddError {
    SvddError::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Reads an embedding file. Labels default to +1 unless the CSV carries them inline.
pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingDataset> {
    match format {
        EmbeddingFormat::Binary => load_binary(path),
        EmbeddingFormat::Csv { labels_inline } => load_csv(path, labels_inline),
    }
}

fn load_binary(path: &Path) -> Result<EmbeddingDataset> {
    let bytes = read_file(path)?;
    if bytes.len() < 12 {
        return Err(header_err(path, format!("file is {} bytes, header needs 12", bytes.len())));
    }
    if &bytes[..4] != EMB_MAGIC {
        return Err(header_err(path, "missing EMB1 magic"));
    }
    let n = read_u32(&bytes, 4) as usize;
    let dim = read_u32(&bytes, 8) as usize;
    if n == 0 {
        return Err(SvddError::EmptyDataset);
    }
    if dim == 0 {
        return Err(header_err(path, "dimension is zero"));
    }
    let expected = n
        .checked_mul(dim)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| header_err(path, "n*D overflows"))?;
    let payload = &bytes[12..];
    if payload.len() != expected {
        return Err(header_err(
            path,
            format!("header declares {n}x{dim} ({expected} payload bytes), found {}", payload.len()),
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let vectors = Array2::from_shape_vec((n, dim), values).expect("length checked");
    EmbeddingDataset::unlabeled(vectors)
}

fn load_csv(path: &Path, labels_inline: bool) -> Result<EmbeddingDataset> {
    let text = read_text(path)?;
    let mut flat = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut row = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if labels_inline {
            let raw = fields.pop().filter(|_| !fields.is_empty()).ok_or(SvddError::Parse {
                what: "csv row",
                line: lineno + 1,
                reason: "label column without features".into(),
            })?;
            let value: i64 = raw.parse().map_err(|_| SvddError::Parse {
                what: "label",
                line: lineno + 1,
                reason: format!("{raw:?} is not an integer"),
            })?;
            if value != 1 && value != -1 {
                return Err(SvddError::InvalidLabel { row, value });
            }
            labels.push(value as i8);
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(SvddError::RowWidth {
                    row,
                    expected: w,
                    found: fields.len(),
                })
            }
            _ => {}
        }
        for f in fields {
            let v: f32 = f.parse().map_err(|_| SvddError::Parse {
                what: "csv value",
                line: lineno + 1,
                reason: format!("{f:?} is not a number"),
            })?;
            flat.push(v as f64);
        }
        row += 1;
    }
    let Some(dim) = width else {
        return Err(SvddError::EmptyDataset);
    };
    let vectors = Array2::from_shape_vec((row, dim), flat).expect("widths checked");
    if labels_inline {
        EmbeddingDataset::new(vectors, labels, default_ids(row))
    } else {
        EmbeddingDataset::unlabeled(vectors)
    }
}

pub fn load_labels(path: &Path) -> Result<Vec<i8>> {
    let bytes = read_file(path)?;
    if bytes.len() < 8 {
        return Err(header_err(path, format!("file is {} bytes, header needs 8", bytes.len())));
    }
    if &bytes[..4] != LBL_MAGIC {
        return Err(header_err(path, "missing LBL1 magic"));
    }
    let n = read_u32(&bytes, 4) as usize;
    if n == 0 {
        return Err(SvddError::EmptyDataset);
    }
    let payload = &bytes[8..];
    if payload.len() != n {
        return Err(header_err(
            path,
            format!("header declares {n} labels, found {}", payload.len()),
        ));
    }
    payload
        .iter()
        .enumerate()
        .map(|(row, &b)| match b as i8 {
            l @ (1 | -1) => Ok(l),
            other => Err(SvddError::InvalidLabel {
                row,
                value: other as i64,
            }),
        })
        .collect()
}

/// Embeddings plus an optional separate label file.
pub fn load_dataset(
    path: &Path,
    format: EmbeddingFormat,
    labels: Option<&Path>,
) -> Result<EmbeddingDataset> {
    let ds = load_embeddings(path, format)?;
    match labels {
        None => Ok(ds),
        Some(lp) => {
            let l = load_labels(lp)?;
            if l.len() != ds.len() {
                return Err(SvddError::DimensionMismatch(format!(
                    "{} embeddings but {} labels",
                    ds.len(),
                    l.len()
                )));
            }
            ds.replace_labels(l)
        }
    }
}

pub fn write_embeddings(ds: &EmbeddingDataset, path: &Path, format: EmbeddingFormat) -> Result<()> {
    let bytes = match format {
        EmbeddingFormat::Binary => {
            let mut out = Vec::with_capacity(12 + 4 * ds.len() * ds.dim());
            out.extend_from_slice(EMB_MAGIC);
            out.extend_from_slice(&(ds.len() as u32).to_le_bytes());
            out.extend_from_slice(&(ds.dim() as u32).to_le_bytes());
            for &v in ds.vectors().iter() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
            out
        }
        EmbeddingFormat::Csv { labels_inline } => {
            let mut out = String::new();
            for (i, row) in ds.vectors().rows().into_iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if j > 0 {
                        out.push(',');
                    }
                    write!(out, "{}", v as f32).expect("string write");
                }
                if labels_inline {
                    write!(out, ",{}", ds.labels()[i]).expect("string write");
                }
                out.push('\n');
            }
            out.into_bytes()
        }
    };
    write_atomic(path, &bytes)
}

pub fn write_labels(labels: &[i8], path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(LBL_MAGIC);
    out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
    out.extend(labels.iter().map(|&l| l as u8));
    write_atomic(path, &out)
}

/// Writes embeddings and, unless every label is +1 (or labels are inline),
/// the label file. Returns whether a label file was written.
pub fn save_dataset(
    ds: &EmbeddingDataset,
    path: &Path,
    format: EmbeddingFormat,
    labels_path: &Path,
) -> Result<bool> {
    write_embeddings(ds, path, format)?;
    let inline = matches!(format, EmbeddingFormat::Csv { labels_inline: true });
    if inline || ds.labels().iter().all(|&l| l == NORMAL) {
        return Ok(false);
    }
    write_labels(ds.labels(), labels_path)?;
    Ok(true)
}
