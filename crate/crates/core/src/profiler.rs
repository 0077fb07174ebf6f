//! OZTD tensor loading and weight bit-sparsity statistics.
//!
//! OZTD layout (little-endian):
//!
//! | offset | size      | field                                         |
//! |--------|-----------|-----------------------------------------------|
//! | 0      | 4         | magic `OZTD`                                  |
//! | 4      | 2         | version, u16 = 1                              |
//! | 6      | 1         | dtype bits, 4, 8 or 16                        |
//! | 7      | 1         | signedness, 0 unsigned / 1 two's complement   |
//! | 8      | 4         | ndim, u32                                     |
//! | 12     | 8 × ndim  | dims, u64 each                                |
//! | ...    | n × bytes | elements, `ceil(bits/8)` bytes each           |
//!
//! 4-bit elements sit in the low nibble of one byte; the high nibble must be
//! zero. Trailing bytes are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::types::{BitWidth, Signedness};

pub const MAGIC: [u8; 4] = *b"OZTD";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorFile {
    pub dtype_bits: BitWidth,
    pub signedness: Signedness,
    pub dims: Vec<u64>,
    pub values: Vec<i64>,
}

impl TensorFile {
    pub fn new(
        dtype_bits: BitWidth,
        signedness: Signedness,
        dims: Vec<u64>,
        values: Vec<i64>,
    ) -> Result<Self> {
        let expected = element_count(&dims)?;
        if expected != values.len() as u64 {
            return Err(Error::DimMismatch {
                expected,
                actual: values.len() as u64,
            });
        }
        let (lo, hi) = dtype_bits.range(signedness);
        if let Some((index, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| **v < lo || **v > hi)
        {
            return Err(Error::ValueOutOfRange {
                index,
                detail: format!("{v} outside [{lo}, {hi}]"),
            });
        }
        Ok(Self {
            dtype_bits,
            signedness,
            dims,
            values,
        })
    }

    /// A 1-D tensor.
    pub fn vector(dtype_bits: BitWidth, signedness: Signedness, values: Vec<i64>) -> Result<Self> {
        Self::new(dtype_bits, signedness, vec![values.len() as u64], values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let width = self.dtype_bits.storage_bytes();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.dims.len() + width * self.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.dtype_bits.bits() as u8);
        out.push(self.signedness.to_byte());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for &v in &self.values {
            match self.dtype_bits {
                BitWidth::W4 => out.push((v as u8) & 0x0f),
                BitWidth::W8 => out.push(v as u8),
                BitWidth::W16 => out.extend_from_slice(&(v as u16).to_le_bytes()),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = u16::from_le_bytes(r.take(2, "version")?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dtype_bits = BitWidth::try_from(r.take(1, "dtype")?[0] as u32)?;
        let sign_byte = r.take(1, "signedness")?[0];
        let signedness = Signedness::from_byte(sign_byte)
            .ok_or_else(|| Error::BadHeader(format!("signedness byte {sign_byte}")))?;
        let ndim = u32::from_le_bytes(r.take(4, "ndim")?.try_into().unwrap()) as usize;
        if ndim > (bytes.len() - HEADER_LEN) / 8 {
            return Err(Error::BadHeader(format!("ndim {ndim} exceeds file size")));
        }
        let dims = (0..ndim)
            .map(|_| Ok(u64::from_le_bytes(r.take(8, "dims")?.try_into().unwrap())))
            .collect::<Result<Vec<u64>>>()?;
        let expected = element_count(&dims)?;

        let width = dtype_bits.storage_bytes();
        let payload = &bytes[r.pos..];
        let held = (payload.len() / width) as u64;
        if held < expected {
            return Err(Error::DimMismatch {
                expected,
                actual: held,
            });
        }
        let used = expected as usize * width;
        if payload.len() > used {
            return Err(Error::TrailingBytes(payload.len() - used));
        }

        let values = payload
            .chunks_exact(width)
            .enumerate()
            .map(|(index, c)| decode_element(c, dtype_bits, signedness, index))
            .collect::<Result<Vec<i64>>>()?;
        Ok(Self {
            dtype_bits,
            signedness,
            dims,
            values,
        })
    }
}

fn element_count(dims: &[u64]) -> Result<u64> {
    if let Some(i) = dims.iter().position(|&d| d == 0) {
        return Err(Error::BadHeader(format!("dimension {i} is zero")));
    }
    dims.iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::BadHeader("element count overflows u64".into()))
}

fn decode_element(c: &[u8], bits: BitWidth, sg: Signedness, index: usize) -> Result<i64> {
    Ok(match (bits, sg) {
        (BitWidth::W4, _) => {
            if c[0] & 0xf0 != 0 {
                return Err(Error::ValueOutOfRange {
                    index,
                    detail: format!("4-bit element byte {:#04x} has a nonzero high nibble", c[0]),
                });
            }
            let nib = c[0] as i64;
            match sg {
                Signedness::Unsigned => nib,
                Signedness::TwosComplement if nib >= 8 => nib - 16,
                Signedness::TwosComplement => nib,
            }
        }
        (BitWidth::W8, Signedness::Unsigned) => c[0] as i64,
        (BitWidth::W8, Signedness::TwosComplement) => c[0] as i8 as i64,
        (BitWidth::W16, Signedness::Unsigned) => u16::from_le_bytes([c[0], c[1]]) as i64,
        (BitWidth::W16, Signedness::TwosComplement) => i16::from_le_bytes([c[0], c[1]]) as i64,
    })
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::BadHeader(format!("truncated before {what}")));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<TensorFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    TensorFile::from_bytes(&bytes)
}

pub fn save_tensor(path: impl AsRef<Path>, tensor: &TensorFile) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Counts of values by popcount of their magnitude, index 0..=bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopcountHistogram {
    pub dtype_bits: BitWidth,
    pub counts: Vec<u64>,
}

impl PopcountHistogram {
    pub fn empty(dtype_bits: BitWidth) -> Self {
        Self {
            dtype_bits,
            // the most negative value widens to bits ones at most
            counts: vec![0; dtype_bits.bits() as usize + 1],
        }
    }

    pub fn from_values(dtype_bits: BitWidth, values: &[i64]) -> Self {
        par::fold_chunks(
            values,
            1 << 14,
            Self::empty(dtype_bits),
            |mut h, &v| {
                h.counts[v.unsigned_abs().count_ones() as usize] += 1;
                h
            },
            Self::merge,
        )
    }

    pub fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self
    }

    pub fn count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total_ones(&self) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .map(|(k, c)| k as u64 * c)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub name: String,
    pub dtype_bits: BitWidth,
    pub count: u64,
    pub total_ones: u64,
    pub avg_ones: f64,
    pub bit_sparsity_pct: f64,
    pub histogram: Vec<u64>,
}

impl SparsityReport {
    pub fn from_histogram(name: impl Into<String>, hist: &PopcountHistogram) -> Result<Self> {
        let count = hist.count();
        if count == 0 {
            return Err(Error::EmptyInput);
        }
        let total_ones = hist.total_ones();
        let avg_ones = total_ones as f64 / count as f64;
        Ok(Self {
            name: name.into(),
            dtype_bits: hist.dtype_bits,
            count,
            total_ones,
            avg_ones,
            bit_sparsity_pct: sparsity_pct(avg_ones, hist.dtype_bits),
            histogram: hist.counts.clone(),
        })
    }

    pub fn histogram(&self) -> PopcountHistogram {
        PopcountHistogram {
            dtype_bits: self.dtype_bits,
            counts: self.histogram.clone(),
        }
    }
}

/// Percentage of zero bits given the mean number of ones per value.
pub fn sparsity_pct(avg_ones: f64, bits: BitWidth) -> f64 {
    100.0 * (1.0 - avg_ones / bits.bits() as f64)
}

fn common_dtype(tensors: &[&TensorFile]) -> Result<BitWidth> {
    let first = tensors.first().ok_or(Error::EmptyInput)?.dtype_bits;
    if let Some(t) = tensors.iter().find(|t| t.dtype_bits != first) {
        return Err(Error::MixedDtype(first.bits(), t.dtype_bits.bits()));
    }
    Ok(first)
}

/// Sparsity over the union of all values in `tensors`. Popcount is taken on
/// the magnitude, matching OzMAC cycle counts.
pub fn bit_sparsity(tensors: &[TensorFile], name: &str) -> Result<SparsityReport> {
    let refs: Vec<&TensorFile> = tensors.iter().collect();
    let bits = common_dtype(&refs)?;
    let hist = refs
        .iter()
        .map(|t| PopcountHistogram::from_values(bits, &t.values))
        .fold(PopcountHistogram::empty(bits), PopcountHistogram::merge);
    SparsityReport::from_histogram(name, &hist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub layers: Vec<SparsityReport>,
    pub aggregate: SparsityReport,
}

/// Count-weighted aggregate of per-layer reports.
pub fn aggregate(name: &str, layers: &[SparsityReport]) -> Result<SparsityReport> {
    let first = layers.first().ok_or(Error::EmptyInput)?.dtype_bits;
    if let Some(l) = layers.iter().find(|l| l.dtype_bits != first) {
        return Err(Error::MixedDtype(first.bits(), l.dtype_bits.bits()));
    }
    let hist = layers
        .iter()
        .map(SparsityReport::histogram)
        .fold(PopcountHistogram::empty(first), PopcountHistogram::merge);
    SparsityReport::from_histogram(name, &hist)
}

/// Loads every `(name, path)` layer and reports per-layer and aggregate
/// sparsity. Layers load concurrently; output order follows the input.
pub fn model_report(layer_files: &[(String, PathBuf)]) -> Result<ModelReport> {
    if layer_files.is_empty() {
        return Err(Error::EmptyInput);
    }
    let layers = par::map(layer_files, |(name, path)| {
        load_tensor(path)
            .and_then(|t| bit_sparsity(std::slice::from_ref(&t), name))
            .map_err(|e| Error::Layer {
                layer: name.clone(),
                source: Box::new(e),
            })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate("aggregate", &layers)?;
    Ok(ModelReport { layers, aggregate })
}

/// Lists the `.oztd` files of `dir`, sorted by file name, as named layers.
pub fn layers_in_dir(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file()
            && path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("oztd"))
        {
            out.push((layer_name(&path), path));
        }
    }
    out.sort_by(|a, b| a.1.cmp(&b.1));
    Ok(out)
}

pub fn layer_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
