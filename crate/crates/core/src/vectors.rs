//! Dense embedding vectors and cosine similarity matrices.
//!
//! Everything here works in `f64`; the gradient checks elsewhere in the crate
//! rely on the extra precision.

use crate::error::{Error, Result};

/// Norms at or below this are treated as zero.
pub const ZERO_NORM_THRESHOLD: f64 = 1e-30;

/// A `d`-dimensional embedding of one sentence view.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyList);
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput(if bad.is_nan() {
                "NaN entry in embedding"
            } else {
                "infinite entry in embedding"
            }));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn checked_norm(a: &[f64]) -> Result<f64> {
    let n = norm(a);
    if n <= ZERO_NORM_THRESHOLD || !n.is_finite() {
        return Err(Error::ZeroVector { norm: n });
    }
    Ok(n)
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

/// Scales `v` to unit Euclidean norm.
pub fn normalize(v: &EmbeddingVector) -> Result<EmbeddingVector> {
    let n = checked_norm(&v.0)?;
    Ok(EmbeddingVector(v.0.iter().map(|x| x / n).collect()))
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    cosine(&u.0, &v.0)
}

pub(crate) fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dims(u, v)?;
    let nu = checked_norm(u)?;
    let nv = checked_norm(v)?;
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Partial derivatives of `cos(u, v)` with respect to both arguments.
///
/// `d/du = v / (|u||v|) - cos(u, v) * u / |u|^2`, and symmetrically for `v`.
/// Uses the unclamped cosine so the result is the true derivative even when
/// rounding pushes the value marginally past 1.
pub fn cosine_similarity_grad(
    u: &EmbeddingVector,
    v: &EmbeddingVector,
) -> Result<(EmbeddingVector, EmbeddingVector)> {
    let (gu, gv) = cosine_grad(&u.0, &v.0)?;
    Ok((EmbeddingVector(gu), EmbeddingVector(gv)))
}

pub(crate) fn cosine_grad(u: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dims(u, v)?;
    let nu = checked_norm(u)?;
    let nv = checked_norm(v)?;
    let inv = 1.0 / (nu * nv);
    let c = dot(u, v) * inv;
    let (su, sv) = (c / (nu * nu), c / (nv * nv));
    let gu = u.iter().zip(v).map(|(a, b)| b * inv - su * a).collect();
    let gv = u.iter().zip(v).map(|(a, b)| a * inv - sv * b).collect();
    Ok((gu, gv))
}

/// Identifies which batch view a matrix axis was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    A,
    B,
}

/// `N x N` cosine similarities, row `i` against column `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    entries: Vec<f64>,
    pub row_view: View,
    pub col_view: View,
}

impl SimilarityMatrix {
    /// Wraps raw row-major entries. Used for hand-built score matrices.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::BatchTooSmall { size: n });
        }
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::DegenerateInput("non-finite similarity"));
            }
            entries.extend_from_slice(row);
        }
        Ok(Self {
            n,
            entries,
            row_view: View::A,
            col_view: View::B,
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.n)
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.entries[i * n + j];
            }
        }
        Self {
            n,
            entries,
            row_view: self.col_view,
            col_view: self.row_view,
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

/// Cosine similarity of every `view_a[i]` against every `view_b[j]`.
///
/// Row `i` is the similarity list of sentence `i` seen through view A; the
/// matrix built from `(view_b, view_a)` is the transpose.
pub fn similarity_matrix(
    view_a: &[EmbeddingVector],
    view_b: &[EmbeddingVector],
) -> Result<SimilarityMatrix> {
    if view_a.len() != view_b.len() {
        return Err(Error::DimensionMismatch {
            expected: view_a.len(),
            actual: view_b.len(),
        });
    }
    let n = view_a.len();
    if n < 2 {
        return Err(Error::BatchTooSmall { size: n });
    }
    let mut entries = Vec::with_capacity(n * n);
    for a in view_a {
        for b in view_b {
            entries.push(cosine_similarity(a, b)?);
        }
    }
    Ok(SimilarityMatrix {
        n,
        entries,
        row_view: View::A,
        col_view: View::B,
    })
}
