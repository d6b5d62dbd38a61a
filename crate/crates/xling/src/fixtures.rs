//! Reference per-condition results bundled with the crate, so every
//! table-level aggregation can run without raw transfer data.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use xling_core::analysis::{
    ComparisonRow, Feature, GroupMeans, PretrainingSplit, SimpsonFinding, StatusStratum,
    StratifiedCorrelation, UrielComparison,
};
use xling_core::rank_stats::{self, CorrelationResult, PValueMethod};
use xling_core::{CoverageTable, Metric, Task, UrielKind};

use crate::error::{Error, Result};
use crate::tables;

pub const CORRELATIONS_CSV: &str = include_str!("../fixtures/reference_correlations.csv");
pub const SIMPSON_CSV: &str = include_str!("../fixtures/reference_simpson.csv");
pub const COVERAGE_CSV: &str = include_str!("../fixtures/reference_coverage.csv");
pub const PRETRAINING_CSV: &str = include_str!("../fixtures/reference_pretraining.csv");
pub const SELECTION_CSV: &str = include_str!("../fixtures/reference_selection.csv");
pub const URIEL_CSV: &str = include_str!("../fixtures/reference_uriel.csv");
pub const INTER_METRIC_CSV: &str = include_str!("../fixtures/reference_inter_metric.csv");

pub const MODELS: [&str; 3] = ["afriberta", "afroxlmr", "serengeti"];

/// Directed pairs per model in each task's evaluation grid.
pub fn pairs_per_task(task: Task) -> usize {
    match task {
        Task::Ner => 132,
        Task::Pos => 110,
        Task::Sent => 30,
    }
}

/// Languages per task: 12 for NER, 11 for POS (no Amharic), 6 for sentiment.
pub fn languages_per_task(task: Task) -> usize {
    match task {
        Task::Ner => 12,
        Task::Pos => 11,
        Task::Sent => 6,
    }
}

fn bundled(name: &str) -> &Path {
    Path::new(name)
}

fn rows<T: for<'de> Deserialize<'de>>(name: &str, text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Table {
                path: bundled(name).to_path_buf(),
                line: i as u64 + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

fn t_approx(rho: f64, n: usize) -> Result<CorrelationResult> {
    let p = rank_stats::p_value(rho, n, PValueMethod::TApprox, 0)?.p;
    Ok(CorrelationResult::new(rho, p, n, PValueMethod::TApprox))
}

fn parse<T: std::str::FromStr<Err = xling_core::Error>>(s: &str) -> Result<T> {
    Ok(s.parse()?)
}

/// The 45 per-condition correlations (3 tasks x 3 models x 5 metrics).
pub fn correlations() -> Result<Vec<StratifiedCorrelation>> {
    tables::parse_fixture_correlations(
        bundled("reference_correlations.csv"),
        CORRELATIONS_CSV,
        pairs_per_task,
    )
}

#[derive(Deserialize)]
struct SimpsonRow {
    group: String,
    rho: f64,
    n: usize,
    mean_cosine_gap: Option<f64>,
    mean_score: Option<f64>,
}

/// Pooled and per-model NER cosine_gap correlations with group means.
pub fn simpson() -> Result<SimpsonFinding> {
    let mut pooled = None;
    let mut per_group = BTreeMap::new();
    let mut means = BTreeMap::new();
    for r in rows::<SimpsonRow>("reference_simpson.csv", SIMPSON_CSV)? {
        let result = t_approx(r.rho, r.n)?;
        if r.group == "pooled" {
            pooled = Some(result);
            continue;
        }
        per_group.insert(r.group.clone(), result);
        if let (Some(metric), Some(score)) = (r.mean_cosine_gap, r.mean_score) {
            means.insert(
                r.group,
                GroupMeans {
                    n: r.n,
                    metric,
                    score,
                },
            );
        }
    }
    let pooled =
        pooled.ok_or_else(|| Error::Config("simpson fixture lacks a pooled row".into()))?;
    Ok(SimpsonFinding::from_results(pooled, per_group, means))
}

pub fn coverage() -> Result<CoverageTable> {
    tables::parse_coverage_csv(bundled("reference_coverage.csv"), COVERAGE_CSV)
}

#[derive(Deserialize)]
struct PretrainingRow {
    model: String,
    status: String,
    n: usize,
    mean_score: f64,
    rho: f64,
    stars: String,
}

/// Seen/unseen target splits; a model without a row for a status gets an
/// empty stratum.
pub fn pretraining() -> Result<Vec<PretrainingSplit>> {
    let empty = StatusStratum {
        n: 0,
        mean_score: None,
        correlation: None,
    };
    let mut splits: BTreeMap<String, PretrainingSplit> = BTreeMap::new();
    for r in rows::<PretrainingRow>("reference_pretraining.csv", PRETRAINING_CSV)? {
        let result = t_approx(r.rho, r.n)?;
        if result.stars() != r.stars {
            return Err(Error::Config(format!(
                "pretraining fixture: stars {:?} disagree with rho {} at n = {}",
                r.stars, r.rho, r.n
            )));
        }
        let stratum = StatusStratum {
            n: r.n,
            mean_score: Some(r.mean_score),
            correlation: Some(result),
        };
        let split = splits
            .entry(r.model.clone())
            .or_insert_with(|| PretrainingSplit {
                model_id: r.model.clone(),
                seen: empty.clone(),
                unseen: empty.clone(),
            });
        match r.status.as_str() {
            "seen" => split.seen = stratum,
            "unseen" => split.unseen = stratum,
            other => return Err(Error::Config(format!("unknown status {other:?}"))),
        }
    }
    Ok(splits.into_values().collect())
}

/// Reference top-K source selection accuracy for one (task, model).
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReferenceSelection {
    pub task: String,
    pub model: String,
    pub n_languages: usize,
    pub top1: f64,
    pub top3: f64,
}

pub fn selection() -> Result<Vec<ReferenceSelection>> {
    rows("reference_selection.csv", SELECTION_CSV)
}

#[derive(Deserialize)]
struct UrielRow {
    task: String,
    model: String,
    feature: String,
    abs_rho: f64,
}

fn feature(name: &str) -> Result<Feature> {
    match name.strip_prefix("uriel_") {
        Some(kind) => Ok(Feature::Uriel(parse::<UrielKind>(kind)?)),
        None => Ok(Feature::Embedding(parse::<Metric>(name)?)),
    }
}

/// |rho| of cosine_gap and URIEL genetic distance per (task, model).
/// URIEL correlations are negative in sign; the signed column restores it.
pub fn uriel() -> Result<UrielComparison> {
    let mut rows_by: BTreeMap<(Task, Feature), ComparisonRow> = BTreeMap::new();
    for r in rows::<UrielRow>("reference_uriel.csv", URIEL_CSV)? {
        let task: Task = parse(&r.task)?;
        let feature = feature(&r.feature)?;
        let row = rows_by
            .entry((task, feature))
            .or_insert_with(|| ComparisonRow {
                task,
                feature,
                abs_rho: BTreeMap::new(),
                rho: BTreeMap::new(),
            });
        let signed = match feature {
            Feature::Uriel(_) => -r.abs_rho,
            Feature::Embedding(_) => r.abs_rho,
        };
        row.abs_rho.insert(r.model.clone(), r.abs_rho);
        row.rho.insert(r.model, signed);
    }
    let rows: Vec<ComparisonRow> = rows_by.into_values().collect();
    let mut best: BTreeMap<(Task, String), (Feature, f64)> = BTreeMap::new();
    for row in &rows {
        for (model, &v) in &row.abs_rho {
            let entry = best
                .entry((row.task, model.clone()))
                .or_insert((row.feature, f64::NEG_INFINITY));
            if v > entry.1 {
                *entry = (row.feature, v);
            }
        }
    }
    Ok(UrielComparison {
        rows,
        winners: best.into_iter().map(|(k, (f, _))| (k, f)).collect(),
        excluded: BTreeMap::new(),
    })
}

#[derive(Deserialize)]
struct InterMetricRow {
    metric_a: String,
    metric_b: String,
    rho: f64,
}

pub fn inter_metric() -> Result<Vec<(Metric, Metric, f64)>> {
    rows::<InterMetricRow>("reference_inter_metric.csv", INTER_METRIC_CSV)?
        .into_iter()
        .map(|r| Ok((parse(&r.metric_a)?, parse(&r.metric_b)?, r.rho)))
        .collect()
}
