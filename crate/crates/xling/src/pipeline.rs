//! Embedding discovery and batch metric computation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use xling_core::metrics::{pair_metrics, PreparedEmbedding};
use xling_core::{LanguageId, Metric, MetricRecord};

use crate::error::{Error, Result};
use crate::format::{self, EXTENSION};

/// Every `*.xemb` file under a directory, keyed by the (model, language)
/// stored in its header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingIndex {
    files: BTreeMap<(String, LanguageId), PathBuf>,
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e == EXTENSION) {
            out.push(path);
        }
    }
    Ok(())
}

impl EmbeddingIndex {
    pub fn scan(dir: &Path) -> Result<Self> {
        let mut paths = Vec::new();
        collect_files(dir, &mut paths)?;
        paths.sort();
        let mut files = BTreeMap::new();
        for path in paths {
            let header = format::read_header(&path)?;
            let language = LanguageId::new(&header.language).map_err(|source| Error::Invalid {
                path: path.clone(),
                source,
            })?;
            if let Some(prev) = files.insert((header.model_id.clone(), language), path.clone()) {
                return Err(Error::Header {
                    path,
                    message: format!(
                        "duplicate embeddings for ({}, {language}); also in {}",
                        header.model_id,
                        prev.display()
                    ),
                });
            }
        }
        Ok(Self { files })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn models(&self) -> Vec<String> {
        let mut m: Vec<String> = self.files.keys().map(|(m, _)| m.clone()).collect();
        m.dedup();
        m
    }

    pub fn languages(&self, model_id: &str) -> Vec<LanguageId> {
        self.files
            .keys()
            .filter(|(m, _)| m == model_id)
            .map(|(_, l)| *l)
            .collect()
    }

    pub fn path(&self, model_id: &str, language: LanguageId) -> Option<&Path> {
        self.files
            .get(&(model_id.to_string(), language))
            .map(PathBuf::as_path)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, LanguageId, &Path)> {
        self.files
            .iter()
            .map(|((m, l), p)| (m.as_str(), *l, p.as_path()))
    }

    /// Paths for `languages` under `model_id`, failing on the first gap.
    pub fn resolve(
        &self,
        model_id: &str,
        languages: &[LanguageId],
    ) -> Result<Vec<(LanguageId, PathBuf)>> {
        languages
            .iter()
            .map(|&l| {
                self.path(model_id, l)
                    .map(|p| (l, p.to_path_buf()))
                    .ok_or_else(|| {
                        Error::Data(format!("missing embedding file for ({model_id}, {l})"))
                    })
            })
            .collect()
    }
}

/// Metric rows for one model plus any CKA clamping warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMetrics {
    pub records: Vec<MetricRecord>,
    pub warnings: Vec<String>,
}

/// Loads and prepares one language; the f32 matrix is dropped afterwards.
fn prepare(model_id: &str, language: LanguageId, path: &Path) -> Result<PreparedEmbedding> {
    let m = format::load_embeddings(path)?;
    if m.model_id() != model_id || m.language() != language {
        return Err(Error::Header {
            path: path.to_path_buf(),
            message: format!(
                "expected ({model_id}, {language}), header says ({}, {})",
                m.model_id(),
                m.language()
            ),
        });
    }
    if !m.is_normalized() {
        return Err(Error::Invalid {
            path: path.to_path_buf(),
            source: xling_core::Error::UnnormalizedInput(format!(
                "rows of ({model_id}, {language}) are not unit length"
            )),
        });
    }
    PreparedEmbedding::new(&m).map_err(|source| Error::Invalid {
        path: path.to_path_buf(),
        source,
    })
}

/// Computes `metrics` for every ordered pair of distinct languages. Pairs
/// are evaluated in parallel; rows come back in (source, target, metric)
/// order regardless of scheduling.
pub fn compute_model_metrics(
    model_id: &str,
    files: &[(LanguageId, PathBuf)],
    metrics: &[Metric],
    k: usize,
) -> Result<ModelMetrics> {
    if files.len() < 2 {
        return Err(Error::Data(format!(
            "{model_id}: need at least 2 languages, got {}",
            files.len()
        )));
    }
    let prepared: Vec<PreparedEmbedding> = files
        .par_iter()
        .map(|(l, p)| prepare(model_id, *l, p))
        .collect::<Result<_>>()?;
    let first = &prepared[0];
    if let Some((p, (l, path))) = prepared
        .iter()
        .zip(files)
        .find(|(p, _)| p.n_sentences() != first.n_sentences() || p.dim() != first.dim())
    {
        return Err(Error::Header {
            path: path.clone(),
            message: format!(
                "({model_id}, {l}) is {}x{}, ({model_id}, {}) is {}x{}; parallel matrices must share N and d",
                p.n_sentences(),
                p.dim(),
                first.language(),
                first.n_sentences(),
                first.dim()
            ),
        });
    }

    let pairs: Vec<(usize, usize)> = (0..prepared.len())
        .flat_map(|i| {
            (0..prepared.len())
                .filter(move |&j| j != i)
                .map(move |j| (i, j))
        })
        .collect();
    let include_cka = metrics.contains(&Metric::Cka);
    let computed: Vec<_> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (s, t) = (&prepared[i], &prepared[j]);
            pair_metrics(s, t, k, include_cka).map_err(|e| {
                Error::Data(format!(
                    "{model_id} {}->{}: {e}",
                    s.language(),
                    t.language()
                ))
            })
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(pairs.len() * metrics.len());
    let mut warnings = Vec::new();
    for (&(i, j), pm) in pairs.iter().zip(&computed) {
        let (s, t) = (prepared[i].language(), prepared[j].language());
        if let Some(c) = pm.cka.filter(|c| c.needs_warning()) {
            warnings.push(format!(
                "CKA for {model_id} {s}->{t} was {:.3e} before clamping to 0",
                c.raw
            ));
        }
        records.extend(
            pm.to_records(model_id, s, t)
                .into_iter()
                .filter(|r| metrics.contains(&r.metric)),
        );
    }
    Ok(ModelMetrics { records, warnings })
}
