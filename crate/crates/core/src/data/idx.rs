//! Big-endian IDX files as used by the MNIST family.
//!
//! Images: magic `0x00000803` (2051), item count, rows, cols, then one
//! unsigned byte per pixel. Labels: magic `0x00000801` (2049), item count,
//! one unsigned byte per label.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

use super::Dataset;

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("{file}: bad magic {found} (expected {expected})")]
    BadMagic {
        file: String,
        expected: u32,
        found: u32,
    },
    #[error("{file}: truncated ({needed} bytes needed, {available} available)")]
    Truncated {
        file: String,
        needed: usize,
        available: usize,
    },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("{file}: declares zero items")]
    Empty { file: String },
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

fn read_u32(bytes: &[u8], offset: usize, file: &str) -> Result<u32, IdxError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| IdxError::Truncated {
            file: file.to_string(),
            needed: offset + 4,
            available: bytes.len(),
        })
}

fn expect_magic(bytes: &[u8], expected: u32, file: &str) -> Result<(), IdxError> {
    let found = read_u32(bytes, 0, file)?;
    if found != expected {
        return Err(IdxError::BadMagic {
            file: file.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

fn body<'a>(bytes: &'a [u8], header: usize, len: usize, file: &str) -> Result<&'a [u8], IdxError> {
    bytes
        .get(header..header + len)
        .ok_or_else(|| IdxError::Truncated {
            file: file.to_string(),
            needed: header + len,
            available: bytes.len(),
        })
}

/// Parse an image file into `(N x rows*cols)` pixels scaled by `1/255`.
pub fn parse_images(bytes: &[u8], file: &str) -> Result<Array2<f64>, IdxError> {
    expect_magic(bytes, IMAGE_MAGIC, file)?;
    let n = read_u32(bytes, 4, file)? as usize;
    let rows = read_u32(bytes, 8, file)? as usize;
    let cols = read_u32(bytes, 12, file)? as usize;
    if n == 0 {
        return Err(IdxError::Empty { file: file.into() });
    }
    let dim = rows * cols;
    let pixels = body(bytes, 16, n * dim, file)?;
    Ok(Array2::from_shape_fn((n, dim), |(i, j)| {
        pixels[i * dim + j] as f64 / 255.0
    }))
}

pub fn parse_labels(bytes: &[u8], file: &str) -> Result<Vec<usize>, IdxError> {
    expect_magic(bytes, LABEL_MAGIC, file)?;
    let n = read_u32(bytes, 4, file)? as usize;
    if n == 0 {
        return Err(IdxError::Empty { file: file.into() });
    }
    Ok(body(bytes, 8, n, file)?.iter().map(|&b| b as usize).collect())
}

fn read_file(path: &Path) -> Result<Vec<u8>, IdxError> {
    fs::read(path).map_err(|source| IdxError::Io {
        file: path.display().to_string(),
        source,
    })
}

pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset, IdxError> {
    let (images, labels) = (images.as_ref(), labels.as_ref());
    let x = parse_images(&read_file(images)?, &images.display().to_string())?;
    let y = parse_labels(&read_file(labels)?, &labels.display().to_string())?;
    if x.nrows() != y.len() {
        return Err(IdxError::CountMismatch {
            images: x.nrows(),
            labels: y.len(),
        });
    }
    Ok(Dataset {
        inputs: x,
        labels: y,
    })
}

/// Encode pixels (expected in `[0, 1]`) as an IDX image file with the given
/// image shape; values are rounded to the nearest byte.
pub fn encode_images(inputs: &Array2<f64>, rows: usize, cols: usize) -> Vec<u8> {
    assert_eq!(rows * cols, inputs.ncols(), "image shape does not match input width");
    let mut out = Vec::with_capacity(16 + inputs.len());
    for word in [IMAGE_MAGIC, inputs.nrows() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    out.extend(inputs.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn encode_labels(labels: &[usize]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend(labels.iter().map(|&l| u8::try_from(l).expect("IDX labels are single bytes")));
    out
}
