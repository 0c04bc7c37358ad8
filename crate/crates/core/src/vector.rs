//! Dense vector helpers.

use crate::scalar::Scalar;

#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn l2_norm<S: Scalar>(v: &[S]) -> S {
    dot(v, v).sqrt()
}

/// Scales `v` to unit length in place. Returns `false` (leaving `v`
/// untouched) when the vector is all zeros.
pub fn normalize_in_place<S: Scalar>(v: &mut [S]) -> bool {
    let norm = l2_norm(v);
    if norm == S::zero() || !norm.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    true
}

/// Cosine similarity of two arbitrary vectors; 0 when either is all zeros.
///
/// Computed as `a·b / sqrt(|a|² |b|²)` so that `cosine(v, v)` is exactly 1
/// and `cosine(v, -v)` exactly -1.
pub fn cosine<S: Scalar>(a: &[S], b: &[S]) -> S {
    let aa = dot(a, a);
    let bb = dot(b, b);
    if aa == S::zero() || bb == S::zero() {
        return S::zero();
    }
    let c = dot(a, b) / (aa * bb).sqrt();
    c.max(-S::one()).min(S::one())
}

/// Component-wise mean of equally sized vectors. `None` for an empty slice.
pub fn mean<S: Scalar>(vectors: &[Vec<S>]) -> Option<Vec<S>> {
    let first = vectors.first()?;
    let mut acc = vec![S::zero(); first.len()];
    for v in vectors {
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let count = S::from_usize(vectors.len())?;
    for a in acc.iter_mut() {
        *a /= count;
    }
    Some(acc)
}

pub fn is_unit<S: Scalar>(v: &[S]) -> bool {
    (l2_norm(v).as_f64() - 1.0).abs() <= S::NORM_TOLERANCE
}
