//! Parallel sentence-embedding matrices.
//!
//! Row `i` of every matrix for a model holds the embedding of the same
//! parallel sentence, so matrices for two languages line up row by row.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::records::{check_model_id, LanguageId};

/// Allowed deviation of a row's L2 norm from 1 for a normalized matrix.
pub const NORM_TOLERANCE: f64 = 1e-4;

/// `n x dim` row-major float32 embeddings for one (model, language).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    model_id: String,
    language: LanguageId,
    n_sentences: usize,
    dim: usize,
    data: Vec<f32>,
    normalized: bool,
}

impl EmbeddingMatrix {
    /// Builds a matrix and checks every invariant: shape, finiteness, and
    /// unit row norms when `normalized` is set.
    pub fn new(
        model_id: impl Into<String>,
        language: LanguageId,
        n_sentences: usize,
        dim: usize,
        data: Vec<f32>,
        normalized: bool,
    ) -> Result<Self> {
        let model_id = model_id.into();
        check_model_id(&model_id)?;
        if n_sentences == 0 || dim == 0 {
            return Err(Error::ShapeMismatch(format!(
                "n_sentences and dim must be positive, got {n_sentences}x{dim}"
            )));
        }
        let expected = n_sentences
            .checked_mul(dim)
            .ok_or_else(|| Error::ShapeMismatch(format!("{n_sentences}x{dim} overflows")))?;
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{n_sentences}x{dim} needs {expected} values, got {}",
                data.len()
            )));
        }
        let m = Self {
            model_id,
            language,
            n_sentences,
            dim,
            data,
            normalized,
        };
        m.check_finite()?;
        if normalized {
            m.check_row_norms(NORM_TOLERANCE)?;
        }
        Ok(m)
    }

    /// Convenience constructor from a list of equal-length rows.
    pub fn from_rows(
        model_id: impl Into<String>,
        language: LanguageId,
        rows: &[Vec<f32>],
        normalized: bool,
    ) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::ShapeMismatch(format!(
                "row {i} has {} columns, expected {dim}",
                r.len()
            )));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(model_id, language, rows.len(), dim, data, normalized)
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn language(&self) -> LanguageId {
        self.language
    }

    pub fn n_sentences(&self) -> usize {
        self.n_sentences
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Row-major payload.
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// L2 norm of every row, accumulated in f64.
    pub fn row_norms(&self) -> Vec<f64> {
        self.rows().map(l2_norm).collect()
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(idx) => Err(Error::NonFiniteEntry {
                row: idx / self.dim,
                col: idx % self.dim,
            }),
            None => Ok(()),
        }
    }

    /// Fails on the first row whose norm is off by more than `tolerance`.
    pub fn check_row_norms(&self, tolerance: f64) -> Result<()> {
        for (row, r) in self.rows().enumerate() {
            let norm = l2_norm(r);
            if (norm - 1.0).abs() > tolerance {
                return Err(Error::NotNormalized {
                    row,
                    norm,
                    tolerance,
                });
            }
        }
        Ok(())
    }

    /// True when every row is unit-norm within [`NORM_TOLERANCE`].
    pub fn rows_are_unit(&self) -> bool {
        self.check_row_norms(NORM_TOLERANCE).is_ok()
    }

    /// Marks the matrix normalized after verifying the rows; used by loaders
    /// that re-derive the flag instead of trusting it.
    pub fn into_verified_normalized(mut self) -> Result<Self> {
        self.check_row_norms(NORM_TOLERANCE)?;
        self.normalized = true;
        Ok(self)
    }

    /// Divides each row by its L2 norm.
    pub fn normalize_rows(&self) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        for (i, r) in self.rows().enumerate() {
            let norm = l2_norm(r);
            if norm == 0.0 {
                return Err(Error::ZeroNormRow(i));
            }
            data.extend(r.iter().map(|&v| (f64::from(v) / norm) as f32));
        }
        Self::new(
            self.model_id.clone(),
            self.language,
            self.n_sentences,
            self.dim,
            data,
            true,
        )
    }

    /// Row-major f64 copy of the payload.
    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }
}

fn l2_norm(row: &[f32]) -> f64 {
    libm::sqrt(row.iter().map(|&v| f64::from(v) * f64::from(v)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn lang(code: &str) -> LanguageId {
        LanguageId::new(code).unwrap()
    }

    #[test]
    fn three_four_five_row_normalizes() {
        let m = EmbeddingMatrix::from_rows("m", lang("swa"), &[vec![3.0, 4.0]], false).unwrap();
        let n = m.normalize_rows().unwrap();
        assert!(n.is_normalized());
        assert!((f64::from(n.row(0)[0]) - 0.6).abs() < 1e-7);
        assert!((f64::from(n.row(0)[1]) - 0.8).abs() < 1e-7);
    }

    #[test]
    fn normalization_is_idempotent() {
        let h = core::f32::consts::FRAC_1_SQRT_2;
        let m = EmbeddingMatrix::from_rows("m", lang("swa"), &[vec![1.0, 0.0], vec![h, h]], true)
            .unwrap();
        let n = m.normalize_rows().unwrap();
        for (a, b) in m.as_slice().iter().zip(n.as_slice()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_row_is_named() {
        let m = EmbeddingMatrix::from_rows("m", lang("swa"), &[vec![0.0, 0.0]], false).unwrap();
        let err = m.normalize_rows().unwrap_err();
        assert_eq!(err, Error::ZeroNormRow(0));
        assert_eq!(alloc::string::ToString::to_string(&err), "zero-norm row 0");
    }

    #[test]
    fn rejects_non_finite_and_bad_shapes() {
        let err = EmbeddingMatrix::from_rows(
            "m",
            lang("swa"),
            &[vec![1.0, 0.0], vec![f32::NAN, 0.0]],
            false,
        )
        .unwrap_err();
        assert_eq!(err, Error::NonFiniteEntry { row: 1, col: 0 });
        assert!(alloc::string::ToString::to_string(&err).contains("non-finite entry"));

        assert!(matches!(
            EmbeddingMatrix::new("m", lang("swa"), 2, 2, vec![1.0; 3], false),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            EmbeddingMatrix::from_rows("m", lang("swa"), &[vec![1.0], vec![1.0, 0.0]], false),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn normalized_flag_is_enforced() {
        let err =
            EmbeddingMatrix::from_rows("m", lang("swa"), &[vec![1.0, 1.0]], true).unwrap_err();
        assert!(matches!(err, Error::NotNormalized { row: 0, .. }));
    }
}
