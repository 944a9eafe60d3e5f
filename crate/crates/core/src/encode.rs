//! Offline hashing encoder and the `TESM` embedding file codec.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{FormatError, Result};
use crate::matrix::{l2_normalize, EmbeddingMatrix, Matrix};

/// Width of the sentence-encoder space.
pub const DEFAULT_SOURCE_DIM: usize = 384;

pub const EMBEDDING_MAGIC: [u8; 4] = *b"TESM";
pub const EMBEDDING_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over `bytes`, continuing from `state`.
pub fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(state, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Lowercased whitespace tokens with leading/trailing punctuation removed.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Signed feature hashing into `dim` buckets, then L2 normalization.
///
/// The bucket comes from FNV-1a of the token, the sign from FNV-1a of the
/// token behind a one-byte salt. Text without tokens maps to the first basis
/// vector; so does a bag whose signed counts cancel exactly.
pub fn fallback_encode(text: &str, dim: usize) -> Vec<f32> {
    assert!(dim > 0, "source_dim must be positive");
    let mut v = vec![0.0f32; dim];
    for tok in tokenize(text) {
        let bucket = (fnv1a(FNV_OFFSET, tok.as_bytes()) % dim as u64) as usize;
        let sign_hash = fnv1a(fnv1a(FNV_OFFSET, b"\x01"), tok.as_bytes());
        v[bucket] += if sign_hash >> 63 == 0 { 1.0 } else { -1.0 };
    }
    if !l2_normalize(&mut v) {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[0] = 1.0;
    }
    v
}

/// Encodes each text with [`fallback_encode`]; row `i` belongs to `texts[i]`.
pub fn fallback_encode_all<S: AsRef<str>>(texts: &[S], dim: usize) -> EmbeddingMatrix {
    let mut values = Vec::with_capacity(texts.len() * dim);
    for t in texts {
        values.extend(fallback_encode(t.as_ref(), dim));
    }
    Matrix::from_vec(texts.len(), dim, values).expect("row widths are fixed")
}

/// L2-normalizes every row; zero rows are left as they are.
pub fn normalize_rows(m: &mut EmbeddingMatrix) {
    for i in 0..m.rows() {
        l2_normalize(m.row_mut(i));
    }
}

/// Serializes `m` as `TESM` | version | rows | dim | row-major f32 payload, all little-endian.
pub fn encode_embedding_file(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.as_slice().len() * 4);
    out.extend_from_slice(&EMBEDDING_MAGIC);
    out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    write_f32s(&mut out, m.as_slice());
    out
}

pub fn decode_embedding_file(bytes: &[u8]) -> Result<EmbeddingMatrix, FormatError> {
    let mut r = ByteReader::new(bytes);
    r.magic(EMBEDDING_MAGIC)?;
    r.version(EMBEDDING_VERSION)?;
    let rows = r.u32("rows")? as usize;
    let dim = r.u32("dim")? as usize;
    let values = r.f32s("payload", rows, dim)?;
    r.finish("payload")?;
    Ok(Matrix::from_vec(rows, dim, values).expect("length checked"))
}

pub(crate) fn write_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Little-endian cursor that reports which field ran out.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, field: &'static str, n: usize) -> Result<&'a [u8], FormatError> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(FormatError::Truncated {
                field,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn magic(&mut self, expected: [u8; 4]) -> Result<(), FormatError> {
        let found: [u8; 4] = self.take("magic", 4)?.try_into().expect("4 bytes");
        if found != expected {
            return Err(FormatError::BadMagic { expected, found });
        }
        Ok(())
    }

    pub(crate) fn version(&mut self, expected: u32) -> Result<(), FormatError> {
        let found = self.u32("version")?;
        if found != expected {
            return Err(FormatError::UnsupportedVersion { expected, found });
        }
        Ok(())
    }

    pub(crate) fn u32(&mut self, field: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(
            self.take(field, 4)?.try_into().expect("4 bytes"),
        ))
    }

    pub(crate) fn u64(&mut self, field: &'static str) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(
            self.take(field, 8)?.try_into().expect("8 bytes"),
        ))
    }

    /// Reads `rows × dim` floats, rejecting non-finite entries.
    pub(crate) fn f32s(
        &mut self,
        field: &'static str,
        rows: usize,
        dim: usize,
    ) -> Result<Vec<f32>, FormatError> {
        let n = rows
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| FormatError::Invalid {
                field,
                detail: alloc::format!("{rows}x{dim} overflows"),
            })?;
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(FormatError::Length {
                field,
                expected: n,
                actual: available,
            });
        }
        let raw = self.take(field, n)?;
        let mut values = Vec::with_capacity(n / 4);
        for (index, chunk) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
            if !v.is_finite() {
                return Err(FormatError::NonFinite { field, index });
            }
            values.push(v);
        }
        Ok(values)
    }

    pub(crate) fn finish(&self, field: &'static str) -> Result<(), FormatError> {
        let extra = self.bytes.len() - self.pos;
        if extra != 0 {
            return Err(FormatError::Length {
                field,
                expected: self.pos,
                actual: self.bytes.len(),
            });
        }
        Ok(())
    }
}
