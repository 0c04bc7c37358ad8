use std::marker::PhantomData;

use crate::domain::normalize_keyword;
use crate::error::{ToolError, ToolErrorKind};
use crate::scalar::Scalar;
use crate::vector::normalize_in_place;

use super::Embedder;

pub const DEFAULT_HASH_DIM: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Signed feature hashing of character 2- and 3-grams.
///
/// The text is normalized first and padded with `<`/`>` boundary marks, so
/// single-character keywords still produce n-grams. Each n-gram's FNV-1a
/// hash picks a bucket (`h >> 1 mod d`) and a sign (lowest bit).
pub fn hash_embed<S: Scalar>(text: &str, dim: usize) -> Result<Vec<S>, ToolError> {
    if dim < 8 {
        return Err(ToolError::new(
            "hash-embedder",
            ToolErrorKind::Config,
            format!("dimension {dim} is below the minimum of 8"),
        ));
    }
    let normalized = normalize_keyword(text).map_err(|_| {
        ToolError::new("hash-embedder", ToolErrorKind::Schema, "cannot embed empty text")
    })?;
    let chars: Vec<char> = std::iter::once('<')
        .chain(normalized.chars())
        .chain(std::iter::once('>'))
        .collect();

    let mut v = vec![S::zero(); dim];
    let mut buf = String::new();
    for n in [2usize, 3] {
        for window in chars.windows(n) {
            buf.clear();
            buf.extend(window);
            let h = fnv1a(buf.as_bytes());
            let bucket = ((h >> 1) % dim as u64) as usize;
            if h & 1 == 0 {
                v[bucket] += S::one();
            } else {
                v[bucket] -= S::one();
            }
        }
    }
    if !normalize_in_place(&mut v) {
        return Err(ToolError::new(
            "hash-embedder",
            ToolErrorKind::Schema,
            format!("n-gram features of {text:?} cancel to the zero vector"),
        ));
    }
    Ok(v)
}

/// Offline [`Embedder`] backed by [`hash_embed`].
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder<S = f64> {
    dim: usize,
    _scalar: PhantomData<S>,
}

impl<S: Scalar> HashEmbedder<S> {
    pub fn new(dim: usize) -> Self {
        HashEmbedder {
            dim,
            _scalar: PhantomData,
        }
    }
}

impl<S: Scalar> Default for HashEmbedder<S> {
    fn default() -> Self {
        Self::new(DEFAULT_HASH_DIM)
    }
}

impl<S: Scalar> Embedder<S> for HashEmbedder<S> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<S>>, ToolError> {
        texts.iter().map(|t| hash_embed(t, self.dim)).collect()
    }
}
