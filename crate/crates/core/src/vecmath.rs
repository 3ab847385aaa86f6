//! Dimension-checked vector arithmetic.
//!
//! All sums accumulate in `f64` in index order so that results are
//! bit-reproducible. Callers that score against stored `f32` data (the
//! retrieval scan) reuse [`dot_f32`] and [`norm_sq_f32`], which perform the
//! same operations in the same order as [`cosine`] does on upcast values.

use thiserror::Error;

/// Norms below this are treated as zero.
pub const ZERO_NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VecError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero vector")]
    ZeroVector,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// A finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, VecError> {
        if values.is_empty() {
            return Err(VecError::InvalidInput("embedding must have dim >= 1".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(VecError::InvalidInput(format!(
                "non-finite value at index {pos}"
            )));
        }
        Ok(Self { values })
    }

    pub fn from_f32(values: &[f32]) -> Result<Self, VecError> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }

    pub fn norm(&self) -> f64 {
        norm_sq(&self.values).sqrt()
    }

    /// Multiplies every component by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Result<Self, VecError> {
        Self::new(self.values.iter().map(|v| v * alpha).collect())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    let mut acc = 0.0f64;
    for x in a {
        acc += x * x;
    }
    acc
}

/// Dot product of an `f64` query against an `f32` row, upcasting each
/// element. Bit-identical to [`dot`] on the upcast row.
#[inline]
pub(crate) fn dot_f32(query: &[f64], row: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (q, &r) in query.iter().zip(row) {
        acc += q * f64::from(r);
    }
    acc
}

#[inline]
pub(crate) fn norm_sq_f32(row: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for &r in row {
        let r = f64::from(r);
        acc += r * r;
    }
    acc
}

/// Final step shared by every cosine computation in the crate.
#[inline]
pub(crate) fn cosine_from_parts(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    (dot / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

fn check_dims(u: &Embedding, v: &Embedding) -> Result<(), VecError> {
    if u.dim() != v.dim() {
        return Err(VecError::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    Ok(())
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(u: &Embedding, v: &Embedding) -> Result<f64, VecError> {
    check_dims(u, v)?;
    let nu = u.norm();
    let nv = v.norm();
    if nu < ZERO_NORM_EPS || nv < ZERO_NORM_EPS {
        return Err(VecError::ZeroVector);
    }
    Ok(cosine_from_parts(dot(&u.values, &v.values), nu, nv))
}

pub fn l2_normalize(v: &Embedding) -> Result<Embedding, VecError> {
    let n = v.norm();
    if n < ZERO_NORM_EPS {
        return Err(VecError::ZeroVector);
    }
    Ok(Embedding {
        values: v.values.iter().map(|x| x / n).collect(),
    })
}

/// `u ⊕ v`: the values of `u` followed by the values of `v`.
pub fn concat(u: &Embedding, v: &Embedding) -> Embedding {
    let mut values = Vec::with_capacity(u.dim() + v.dim());
    values.extend_from_slice(&u.values);
    values.extend_from_slice(&v.values);
    Embedding { values }
}

/// `v ⊕ v`, the shape an image takes when scored against a composed query.
pub fn extend(v: &Embedding) -> Embedding {
    concat(v, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let v = e(&[0.3, -1.2, 4.0]);
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&e(&[1.0, 0.0]), &e(&[0.0, 1.0])).unwrap(), 0.0);
        // 32 / (sqrt(14) * sqrt(77))
        let c = cosine(&e(&[1.0, 2.0, 3.0]), &e(&[4.0, 5.0, 6.0])).unwrap();
        assert!((c - 0.974631846).abs() < 1e-6, "{c}");
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(
            cosine(&e(&[1.0, 0.0]), &e(&[1.0, 0.0, 0.0])),
            Err(VecError::DimensionMismatch { left: 2, right: 3 })
        );
        assert_eq!(cosine(&e(&[0.0, 0.0]), &e(&[1.0, 0.0])), Err(VecError::ZeroVector));
        assert_eq!(cosine(&e(&[1.0, 0.0]), &e(&[1e-13, 0.0])), Err(VecError::ZeroVector));
    }

    #[test]
    fn cosine_clamps() {
        // Parallel vectors whose rounded ratio can exceed 1.
        let u = e(&[0.1, 0.2, 0.3, 0.7]);
        let v = u.scaled(3.0).unwrap();
        let c = cosine(&u, &v).unwrap();
        assert!(c <= 1.0 && c > 1.0 - 1e-15);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(l2_normalize(&e(&[3.0, 4.0])).unwrap().values(), &[0.6, 0.8]);
        assert_eq!(
            l2_normalize(&e(&[2.0, 2.0, 2.0, 2.0])).unwrap().values(),
            &[0.5, 0.5, 0.5, 0.5]
        );
        let u = e(&[0.6, 0.8]);
        let n = l2_normalize(&u).unwrap();
        for (a, b) in n.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(l2_normalize(&e(&[0.0])), Err(VecError::ZeroVector));
    }

    #[test]
    fn concat_and_extend() {
        assert_eq!(concat(&e(&[1.0, 2.0]), &e(&[3.0, 4.0])).values(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(extend(&e(&[1.0, 0.0])).values(), &[1.0, 0.0, 1.0, 0.0]);
        let v = e(&[0.2, 0.5, -0.1]);
        assert!((cosine(&extend(&v), &extend(&v)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn embedding_rejects_degenerate_input() {
        assert!(matches!(Embedding::new(vec![]), Err(VecError::InvalidInput(_))));
        assert!(matches!(
            Embedding::new(vec![1.0, f64::NAN]),
            Err(VecError::InvalidInput(_))
        ));
        assert!(matches!(
            Embedding::new(vec![f64::INFINITY]),
            Err(VecError::InvalidInput(_))
        ));
    }

    #[test]
    fn f32_helpers_match_f64_path() {
        let row = [0.25f32, -0.125, 0.7, 0.1];
        let q = [0.3, 0.4, -0.5, 0.9];
        let up = Embedding::from_f32(&row).unwrap();
        assert_eq!(dot_f32(&q, &row).to_bits(), dot(&q, up.values()).to_bits());
        assert_eq!(norm_sq_f32(&row).to_bits(), norm_sq(up.values()).to_bits());
    }
}
