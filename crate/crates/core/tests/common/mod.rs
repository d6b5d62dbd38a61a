//! Test helpers: random embeddings and naive reference implementations that
//! share no code with the library's metric path.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xling_core::{EmbeddingMatrix, LanguageId};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn lang(code: &str) -> LanguageId {
    LanguageId::new(code).unwrap()
}

/// Random row-normalized matrix with entries drawn from [-1, 1).
pub fn random_embedding(rng: &mut ChaCha8Rng, code: &str, n: usize, d: usize) -> EmbeddingMatrix {
    let rows: Vec<Vec<f32>> = (0..n)
        .map(|_| loop {
            let r: Vec<f32> = (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            if r.iter().map(|v| v * v).sum::<f32>() > 1e-3 {
                break r;
            }
        })
        .collect();
    EmbeddingMatrix::from_rows("m", lang(code), &rows, false)
        .unwrap()
        .normalize_rows()
        .unwrap()
}

/// A target that is a noisy copy of the source, so retrieval is non-trivial.
pub fn noisy_copy(
    rng: &mut ChaCha8Rng,
    s: &EmbeddingMatrix,
    code: &str,
    noise: f32,
) -> EmbeddingMatrix {
    let rows: Vec<Vec<f32>> = s
        .rows()
        .map(|r| {
            r.iter()
                .map(|v| v + noise * rng.random_range(-1.0f32..1.0))
                .collect()
        })
        .collect();
    EmbeddingMatrix::from_rows("m", lang(code), &rows, false)
        .unwrap()
        .normalize_rows()
        .unwrap()
}

pub fn rows_f64(m: &EmbeddingMatrix) -> Vec<Vec<f64>> {
    m.rows()
        .map(|r| r.iter().map(|&v| f64::from(v)).collect())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn naive_similarity(s: &EmbeddingMatrix, t: &EmbeddingMatrix) -> Vec<Vec<f64>> {
    let s = rows_f64(s);
    let t = rows_f64(t);
    let mut m = vec![vec![0.0; t.len()]; s.len()];
    for i in 0..s.len() {
        for j in 0..t.len() {
            m[i][j] = dot(&s[i], &t[j]);
        }
    }
    m
}

pub fn naive_cosine_mean(m: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.len() {
        acc += m[i][i];
    }
    acc / m.len() as f64
}

pub fn naive_cosine_gap(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut all = 0.0;
    for i in 0..n {
        for j in 0..n {
            all += m[i][j];
        }
    }
    naive_cosine_mean(m) - all / (n * n) as f64
}

/// Rows: source-to-target; columns: target-to-source. Lowest index wins
/// ties.
pub fn naive_p_at_1(m: &[Vec<f64>], by_columns: bool) -> f64 {
    let n = m.len();
    let mut hits = 0;
    for q in 0..n {
        let mut best = 0;
        for c in 1..n {
            let (v, b) = if by_columns {
                (m[c][q], m[best][q])
            } else {
                (m[q][c], m[q][best])
            };
            if v > b {
                best = c;
            }
        }
        if best == q {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}

/// CSLS via a full descending sort of every row and column.
pub fn naive_csls(m: &[Vec<f64>], k: usize) -> f64 {
    let n = m.len();
    let k = k.min(n);
    let top_mean = |mut v: Vec<f64>| {
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v[..k].iter().sum::<f64>() / k as f64
    };
    let mut acc = 0.0;
    for i in 0..n {
        let r_t = top_mean(m[i].clone());
        let r_s = top_mean((0..n).map(|r| m[r][i]).collect());
        acc += 2.0 * m[i][i] - r_t - r_s;
    }
    acc / n as f64
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// Unbiased HSIC evaluated term by term with explicit matrices.
pub fn naive_hsic(k: &[Vec<f64>], l: &[Vec<f64>]) -> f64 {
    let n = k.len();
    let mut kt = k.to_vec();
    let mut lt = l.to_vec();
    for i in 0..n {
        kt[i][i] = 0.0;
        lt[i][i] = 0.0;
    }
    let kl = matmul(&kt, &lt);
    let trace: f64 = (0..n).map(|i| kl[i][i]).sum();
    let sum_k: f64 = kt.iter().flatten().sum();
    let sum_l: f64 = lt.iter().flatten().sum();
    let one_kl_one: f64 = kl.iter().flatten().sum();
    let nf = n as f64;
    (trace + sum_k * sum_l / ((nf - 1.0) * (nf - 2.0)) - 2.0 / (nf - 2.0) * one_kl_one)
        / (nf * (nf - 3.0))
}

pub fn naive_cka(s: &EmbeddingMatrix, t: &EmbeddingMatrix) -> f64 {
    let k = naive_similarity(s, s);
    let l = naive_similarity(t, t);
    let raw = naive_hsic(&k, &l) / (naive_hsic(&k, &k) * naive_hsic(&l, &l)).sqrt();
    raw.clamp(0.0, 1.0)
}

/// Random orthogonal matrix via Gram-Schmidt on a random square matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for u in &q {
            let p = dot(&v, u);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= p * ui;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-3 {
            q.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    q
}

/// Applies `x -> x Q` to each row and stores the result as float32.
pub fn rotate(m: &EmbeddingMatrix, q: &[Vec<f64>]) -> EmbeddingMatrix {
    let d = m.dim();
    let rows: Vec<Vec<f32>> = m
        .rows()
        .map(|r| {
            (0..d)
                .map(|j| (0..d).map(|i| f64::from(r[i]) * q[i][j]).sum::<f64>() as f32)
                .collect()
        })
        .collect();
    EmbeddingMatrix::from_rows(m.model_id(), m.language(), &rows, true).unwrap()
}
