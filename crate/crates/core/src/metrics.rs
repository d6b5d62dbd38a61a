//! The five embedding-similarity metrics for a directed language pair.
//!
//! All inputs are row-aligned, L2-normalized float32 matrices; every
//! reduction runs in f64. Dense products go through `matrixmultiply`.
//!
//! | metric        | range        |
//! |---------------|--------------|
//! | `cosine_mean` | [-1, 1]      |
//! | `cosine_gap`  | [-2, 2]      |
//! | P@1           | [0, 1]       |
//! | CSLS          | unbounded    |
//! | CKA           | [0, 1]       |

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::records::{LanguageId, Metric, MetricRecord};

/// CSLS neighbourhood size used unless the caller overrides it.
pub const DEFAULT_CSLS_K: usize = 10;

/// Raw CKA values below this are reported as clamped-with-warning.
pub const CKA_NEGATIVE_WARN: f64 = -1e-6;

/// `C = A * B^T` for row-major `A (rows_a x dim)` and `B (rows_b x dim)`.
fn gemm_abt(a: &[f64], rows_a: usize, b: &[f64], rows_b: usize, dim: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), rows_a * dim);
    debug_assert_eq!(b.len(), rows_b * dim);
    let mut c = vec![0.0f64; rows_a * rows_b];
    if rows_a == 0 || rows_b == 0 || dim == 0 {
        return c;
    }
    // SAFETY: the slices hold rows_a*dim, rows_b*dim and rows_a*rows_b
    // elements, and the strides below address exactly those extents:
    // A[i][p] at i*dim + p, B^T[p][j] = B[j][p] at j*dim + p, C[i][j] at
    // i*rows_b + j.
    unsafe {
        matrixmultiply::dgemm(
            rows_a,
            dim,
            rows_b,
            1.0,
            a.as_ptr(),
            dim as isize,
            1,
            b.as_ptr(),
            1,
            dim as isize,
            0.0,
            c.as_mut_ptr(),
            rows_b as isize,
            1,
        );
    }
    c
}

fn transpose(values: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = values[i * n + j];
        }
    }
    out
}

/// `M[i][j] = s_i . t_j` for a directed language pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
    pub model_id: String,
    pub source: LanguageId,
    pub target: LanguageId,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// The matrix for the reversed direction (`T` as source).
    pub fn transposed(&self) -> SimilarityMatrix {
        SimilarityMatrix {
            n: self.n,
            values: transpose(&self.values, self.n),
            model_id: self.model_id.clone(),
            source: self.target,
            target: self.source,
        }
    }
}

fn check_pair(s: &EmbeddingMatrix, t: &EmbeddingMatrix) -> Result<()> {
    for m in [s, t] {
        if !m.is_normalized() {
            return Err(Error::UnnormalizedInput(format!(
                "{}/{} is not L2-normalized",
                m.model_id(),
                m.language()
            )));
        }
    }
    if s.n_sentences() != t.n_sentences() || s.dim() != t.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            s.n_sentences(),
            s.dim(),
            t.n_sentences(),
            t.dim()
        )));
    }
    Ok(())
}

/// Cross-lingual similarity matrix of two aligned, normalized matrices.
pub fn similarity_matrix(s: &EmbeddingMatrix, t: &EmbeddingMatrix) -> Result<SimilarityMatrix> {
    check_pair(s, t)?;
    let n = s.n_sentences();
    let values = gemm_abt(&s.to_f64(), n, &t.to_f64(), n, s.dim());
    Ok(SimilarityMatrix {
        n,
        values,
        model_id: String::from(s.model_id()),
        source: s.language(),
        target: t.language(),
    })
}

/// Mean similarity of aligned (translation) pairs.
pub fn cosine_mean(m: &SimilarityMatrix) -> f64 {
    diag_mean(&m.values, m.n)
}

/// Aligned mean minus the mean over all `N^2` entries, diagonal included.
pub fn cosine_gap(m: &SimilarityMatrix) -> f64 {
    diag_mean(&m.values, m.n) - full_mean(&m.values, m.n)
}

fn diag_mean(values: &[f64], n: usize) -> f64 {
    (0..n).map(|i| values[i * n + i]).sum::<f64>() / n as f64
}

fn full_mean(values: &[f64], n: usize) -> f64 {
    // Row sums first keeps the partial sums small for large N.
    values
        .chunks_exact(n)
        .map(|r| r.iter().sum::<f64>())
        .sum::<f64>()
        / (n * n) as f64
}

/// Retrieval direction for P@1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    SourceToTarget,
    TargetToSource,
}

/// Fraction of queries whose nearest neighbour is their own translation.
/// Ties go to the lowest index.
pub fn p_at_1(m: &SimilarityMatrix, direction: Direction) -> f64 {
    match direction {
        Direction::SourceToTarget => p_at_1_rows(&m.values, m.n),
        Direction::TargetToSource => p_at_1_rows(&transpose(&m.values, m.n), m.n),
    }
}

fn p_at_1_rows(values: &[f64], n: usize) -> f64 {
    let hits = values
        .chunks_exact(n)
        .enumerate()
        .filter(|(i, row)| argmax_lowest(row) == *i)
        .count();
    hits as f64 / n as f64
}

fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Mean of the `k` largest entries of every row.
fn top_k_row_means(values: &[f64], n: usize, k: usize) -> Vec<f64> {
    let mut scratch = vec![0.0; n];
    values
        .chunks_exact(n)
        .map(|row| {
            scratch.copy_from_slice(row);
            if k < n {
                scratch.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
            }
            scratch[..k].iter().sum::<f64>() / k as f64
        })
        .collect()
}

/// Mean CSLS score over aligned pairs, with neighbourhoods of
/// `min(k, N)` taken over the whole other-language set.
pub fn csls_mean(m: &SimilarityMatrix, k: usize) -> Result<f64> {
    csls_with_transpose(&m.values, &transpose(&m.values, m.n), m.n, k)
}

fn csls_with_transpose(values: &[f64], transposed: &[f64], n: usize, k: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::CslsUndefined(n));
    }
    if k == 0 {
        return Err(Error::InvalidArgument(String::from(
            "CSLS k must be positive",
        )));
    }
    let k_eff = k.min(n);
    let r_t = top_k_row_means(values, n, k_eff);
    let r_s = top_k_row_means(transposed, n, k_eff);
    let total: f64 = (0..n)
        .map(|i| 2.0 * values[i * n + i] - r_t[i] - r_s[i])
        .sum();
    Ok(total / n as f64)
}

/// Linear-kernel Gram matrix prepared for the unbiased HSIC estimator.
///
/// Holds `K` with its diagonal zeroed, its row sums and grand total, and
/// `HSIC_u(K, K)`, so a language's Gram work is done once per model.
#[derive(Debug, Clone)]
pub struct GramOperand {
    n: usize,
    zero_diag: Vec<f64>,
    row_sums: Vec<f64>,
    total: f64,
    self_hsic: f64,
}

impl GramOperand {
    pub fn from_embedding(m: &EmbeddingMatrix) -> Result<Self> {
        if !m.is_normalized() {
            return Err(Error::UnnormalizedInput(format!(
                "{}/{} is not L2-normalized",
                m.model_id(),
                m.language()
            )));
        }
        Self::from_rows(&m.to_f64(), m.n_sentences(), m.dim())
    }

    fn from_rows(rows: &[f64], n: usize, dim: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::CkaTooFewSentences(n));
        }
        let mut zero_diag = gemm_abt(rows, n, rows, n, dim);
        for i in 0..n {
            zero_diag[i * n + i] = 0.0;
        }
        let row_sums: Vec<f64> = zero_diag.chunks_exact(n).map(|r| r.iter().sum()).collect();
        let total = row_sums.iter().sum();
        let mut g = Self {
            n,
            zero_diag,
            row_sums,
            total,
            self_hsic: 0.0,
        };
        g.self_hsic = g.hsic(&g);
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `HSIC_u(K, L)`; both operands must have the same `N`.
    pub fn hsic(&self, other: &GramOperand) -> f64 {
        let n = self.n as f64;
        // K and L are symmetric, so tr(K~ L~) is the elementwise product sum
        // and 1' K~ L~ 1 is the dot product of the row sums.
        let trace: f64 = self
            .zero_diag
            .chunks_exact(self.n)
            .zip(other.zero_diag.chunks_exact(other.n))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        let sums_product = self.total * other.total / ((n - 1.0) * (n - 2.0));
        let cross: f64 = self
            .row_sums
            .iter()
            .zip(&other.row_sums)
            .map(|(a, b)| a * b)
            .sum();
        (trace + sums_product - 2.0 / (n - 2.0) * cross) / (n * (n - 3.0))
    }

    pub fn self_hsic(&self) -> f64 {
        self.self_hsic
    }
}

/// CKA value after clamping, with the raw ratio kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CkaOutcome {
    pub value: f64,
    pub raw: f64,
}

impl CkaOutcome {
    fn from_raw(raw: f64) -> Self {
        Self {
            value: raw.clamp(0.0, 1.0),
            raw,
        }
    }

    pub fn was_clamped(&self) -> bool {
        self.value != self.raw
    }

    /// Raw value was negative beyond round-off.
    pub fn needs_warning(&self) -> bool {
        self.raw < CKA_NEGATIVE_WARN
    }
}

pub fn cka_from_grams(a: &GramOperand, b: &GramOperand) -> Result<CkaOutcome> {
    if a.n != b.n {
        return Err(Error::ShapeMismatch(format!(
            "Gram sizes {} vs {}",
            a.n, b.n
        )));
    }
    let denom = a.self_hsic * b.self_hsic;
    if a.self_hsic <= 0.0 || b.self_hsic <= 0.0 || !denom.is_finite() {
        return Err(Error::DegenerateGram);
    }
    Ok(CkaOutcome::from_raw(a.hsic(b) / libm::sqrt(denom)))
}

/// Linear CKA with the unbiased HSIC estimator, clamped to [0, 1].
pub fn cka(s: &EmbeddingMatrix, t: &EmbeddingMatrix) -> Result<f64> {
    cka_outcome(s, t).map(|c| c.value)
}

pub fn cka_outcome(s: &EmbeddingMatrix, t: &EmbeddingMatrix) -> Result<CkaOutcome> {
    check_pair(s, t)?;
    cka_from_grams(
        &GramOperand::from_embedding(s)?,
        &GramOperand::from_embedding(t)?,
    )
}

/// An embedding matrix with its f64 copy and Gram operand precomputed, so
/// that a language can be paired with many others cheaply.
#[derive(Debug, Clone)]
pub struct PreparedEmbedding {
    model_id: String,
    language: LanguageId,
    n: usize,
    dim: usize,
    rows: Vec<f64>,
    gram: Option<GramOperand>,
}

impl PreparedEmbedding {
    /// Prepares a normalized matrix. The Gram operand is skipped for
    /// `N < 4`, in which case CKA reports an error later.
    pub fn new(m: &EmbeddingMatrix) -> Result<Self> {
        if !m.is_normalized() {
            return Err(Error::UnnormalizedInput(format!(
                "{}/{} is not L2-normalized",
                m.model_id(),
                m.language()
            )));
        }
        let rows = m.to_f64();
        let gram = if m.n_sentences() >= 4 {
            Some(GramOperand::from_rows(&rows, m.n_sentences(), m.dim())?)
        } else {
            None
        };
        Ok(Self {
            model_id: String::from(m.model_id()),
            language: m.language(),
            n: m.n_sentences(),
            dim: m.dim(),
            rows,
            gram,
        })
    }

    pub fn language(&self) -> LanguageId {
        self.language
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn n_sentences(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gram(&self) -> Option<&GramOperand> {
        self.gram.as_ref()
    }

    pub fn similarity(&self, target: &PreparedEmbedding) -> Result<SimilarityMatrix> {
        if self.n != target.n || self.dim != target.dim {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.n, self.dim, target.n, target.dim
            )));
        }
        Ok(SimilarityMatrix {
            n: self.n,
            values: gemm_abt(&self.rows, self.n, &target.rows, target.n, self.dim),
            model_id: self.model_id.clone(),
            source: self.language,
            target: target.language,
        })
    }
}

/// All six metric values for a directed pair, plus the raw CKA outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMetrics {
    pub cosine_mean: f64,
    pub cosine_gap: f64,
    pub p_at_1_st: f64,
    pub p_at_1_ts: f64,
    pub csls: f64,
    pub csls_k: usize,
    /// Absent when the caller skipped CKA.
    pub cka: Option<CkaOutcome>,
}

impl PairMetrics {
    pub fn value(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::CosineMean => Some(self.cosine_mean),
            Metric::CosineGap => Some(self.cosine_gap),
            Metric::PAt1St => Some(self.p_at_1_st),
            Metric::PAt1Ts => Some(self.p_at_1_ts),
            Metric::Csls => Some(self.csls),
            Metric::Cka => self.cka.map(|c| c.value),
        }
    }
}

/// Computes every metric for a prepared pair, sharing one similarity
/// matrix and its transpose across cosine, P@1 and CSLS. CKA is computed
/// only when `include_cka` is set, and then fails for `N < 4`.
pub fn pair_metrics(
    source: &PreparedEmbedding,
    target: &PreparedEmbedding,
    k: usize,
    include_cka: bool,
) -> Result<PairMetrics> {
    let sim = source.similarity(target)?;
    let n = sim.n;
    let transposed = transpose(&sim.values, n);
    let csls = csls_with_transpose(&sim.values, &transposed, n, k)?;
    let cka = if include_cka {
        match (source.gram(), target.gram()) {
            (Some(a), Some(b)) => Some(cka_from_grams(a, b)?),
            _ => return Err(Error::CkaTooFewSentences(n)),
        }
    } else {
        None
    };
    Ok(PairMetrics {
        cosine_mean: cosine_mean(&sim),
        cosine_gap: cosine_gap(&sim),
        p_at_1_st: p_at_1_rows(&sim.values, n),
        p_at_1_ts: p_at_1_rows(&transposed, n),
        csls,
        csls_k: k.min(n),
        cka,
    })
}

impl PairMetrics {
    /// One record per computed metric, in [`Metric::ALL`] order.
    pub fn to_records(
        &self,
        model_id: &str,
        source: LanguageId,
        target: LanguageId,
    ) -> Vec<MetricRecord> {
        Metric::ALL
            .into_iter()
            .filter_map(|metric| {
                Some(MetricRecord {
                    model_id: String::from(model_id),
                    source,
                    target,
                    metric,
                    value: self.value(metric)?,
                    k: (metric == Metric::Csls).then_some(self.csls_k),
                })
            })
            .collect()
    }
}

/// Six metric records for `(s -> t)`: both P@1 directions, CSLS with
/// neighbourhood `k`, and the rest.
pub fn all_metrics(
    s: &EmbeddingMatrix,
    t: &EmbeddingMatrix,
    k: usize,
) -> Result<Vec<MetricRecord>> {
    check_pair(s, t)?;
    let ps = PreparedEmbedding::new(s)?;
    let pt = PreparedEmbedding::new(t)?;
    Ok(pair_metrics(&ps, &pt, k, true)?.to_records(s.model_id(), s.language(), t.language()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const H: f32 = core::f32::consts::FRAC_1_SQRT_2;

    fn emb(code: &str, rows: &[[f32; 2]]) -> EmbeddingMatrix {
        let rows: Vec<Vec<f32>> = rows.iter().map(|r| r.to_vec()).collect();
        EmbeddingMatrix::from_rows("m", LanguageId::new(code).unwrap(), &rows, true).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identity_rows() {
        let s = emb("aaa", &[[1.0, 0.0], [0.0, 1.0]]);
        let m = similarity_matrix(&s, &s).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(cosine_mean(&m), 1.0);
        assert_eq!(cosine_gap(&m), 0.5);
        assert_eq!(p_at_1(&m, Direction::SourceToTarget), 1.0);
        assert_eq!(p_at_1(&m, Direction::TargetToSource), 1.0);
        assert_eq!(csls_mean(&m, 10).unwrap(), 1.0);
    }

    #[test]
    fn half_rotated_target() {
        let s = emb("aaa", &[[1.0, 0.0], [0.0, 1.0]]);
        let t = emb("bbb", &[[1.0, 0.0], [H, H]]);
        let m = similarity_matrix(&s, &t).unwrap();
        let h = f64::from(H);
        assert!(close(m.get(0, 1), h, 1e-12) && close(m.get(1, 1), h, 1e-12));
        assert_eq!(m.get(1, 0), 0.0);
        assert!(close(cosine_mean(&m), 0.853_553, 1e-5));
        assert!(close(cosine_gap(&m), 0.25, 1e-7));
        assert_eq!(p_at_1(&m, Direction::SourceToTarget), 1.0);
        // Column 1 ties between rows 0 and 1; the lower index wins.
        assert_eq!(p_at_1(&m, Direction::TargetToSource), 0.5);
    }

    #[test]
    fn swapped_translations_never_retrieve() {
        let s = emb("aaa", &[[1.0, 0.0], [0.0, 1.0]]);
        let t = emb("bbb", &[[0.0, 1.0], [1.0, 0.0]]);
        let m = similarity_matrix(&s, &t).unwrap();
        assert_eq!(p_at_1(&m, Direction::SourceToTarget), 0.0);
        assert_eq!(p_at_1(&m, Direction::TargetToSource), 0.0);
    }

    #[test]
    fn degenerate_cone() {
        let s = emb("aaa", &[[1.0, 0.0]; 3]);
        let m = similarity_matrix(&s, &s).unwrap();
        assert_eq!(cosine_gap(&m), 0.0);
        assert_eq!(csls_mean(&m, 10).unwrap(), 0.0);
        assert_eq!(cosine_mean(&m), 1.0);
    }

    #[test]
    fn orthogonal_aligned_pairs() {
        let s = emb("aaa", &[[1.0, 0.0], [1.0, 0.0]]);
        let t = emb("bbb", &[[0.0, 1.0], [0.0, 1.0]]);
        assert_eq!(cosine_mean(&similarity_matrix(&s, &t).unwrap()), 0.0);
    }

    #[test]
    fn shape_and_normalization_errors() {
        let s = emb("aaa", &[[1.0, 0.0], [0.0, 1.0]]);
        let t = emb("bbb", &[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        assert!(matches!(
            similarity_matrix(&s, &t),
            Err(Error::ShapeMismatch(_))
        ));
        let raw = EmbeddingMatrix::from_rows(
            "m",
            LanguageId::new("ccc").unwrap(),
            &[vec![2.0, 0.0], vec![0.0, 2.0]],
            false,
        )
        .unwrap();
        assert!(matches!(
            similarity_matrix(&s, &raw),
            Err(Error::UnnormalizedInput(_))
        ));
    }

    #[test]
    fn csls_needs_two_sentences() {
        let s = emb("aaa", &[[1.0, 0.0]]);
        let m = similarity_matrix(&s, &s).unwrap();
        assert_eq!(csls_mean(&m, 10), Err(Error::CslsUndefined(1)));
    }

    #[test]
    fn cka_needs_four_sentences_and_structure() {
        let s = emb("aaa", &[[1.0, 0.0], [0.0, 1.0], [H, H]]);
        assert_eq!(cka(&s, &s), Err(Error::CkaTooFewSentences(3)));
        // Orthonormal rows give a Gram matrix with an all-zero off-diagonal.
        let rows: Vec<Vec<f32>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let id =
            EmbeddingMatrix::from_rows("m", LanguageId::new("aaa").unwrap(), &rows, true).unwrap();
        assert_eq!(cka(&id, &id), Err(Error::DegenerateGram));
    }

    #[test]
    fn cka_self_similarity() {
        let s = emb(
            "aaa",
            &[[1.0, 0.0], [0.0, 1.0], [H, H], [H, -H], [-1.0, 0.0]],
        );
        assert!(close(cka(&s, &s).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn record_set_shape() {
        let s = emb("aaa", &[[1.0, 0.0], [0.0, 1.0], [H, H], [H, -H]]);
        let t = emb("bbb", &[[H, H], [0.0, 1.0], [1.0, 0.0], [-H, H]]);
        let records = all_metrics(&s, &t, 10).unwrap();
        assert_eq!(records.len(), 6);
        assert!(records.iter().all(MetricRecord::in_range));
        let csls = records.iter().find(|r| r.metric == Metric::Csls).unwrap();
        assert_eq!(csls.k, Some(4));
    }
}
