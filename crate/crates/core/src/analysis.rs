//! Joins metric values with transfer scores and computes the stratified
//! correlation views: per model and task, pooled within a task, Simpson's
//! paradox checks, inter-metric structure, condition summaries, domain and
//! model aggregates, pretraining status splits and the URIEL comparison.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::rank_stats::{self, CorrelationResult, PValuePolicy, SIGNIFICANCE_LEVEL};
use crate::records::{
    CoverageTable, LanguageId, Metric, MetricRecord, PairKey, Task, TransferRecord, UrielDistance,
    UrielKind,
};

/// One transfer run matched with the metric value of its language pair.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedPair {
    pub model_id: String,
    pub task: Task,
    pub source: LanguageId,
    pub target: LanguageId,
    pub metric_value: f64,
    pub score: f64,
}

/// Result of [`join`], with the row accounting for both inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Joined {
    pub metric: Metric,
    pub pairs: Vec<JoinedPair>,
    /// Metric rows (for this metric) with no transfer run in any task.
    pub unmatched_metric_rows: usize,
    /// Transfer rows with no metric value.
    pub unmatched_transfer_rows: usize,
}

impl Joined {
    pub fn unmatched(&self) -> usize {
        self.unmatched_metric_rows + self.unmatched_transfer_rows
    }

    pub fn note(&self) -> String {
        format!(
            "{}: {} pairs joined, {} unmatched ({} metric rows, {} transfer rows)",
            self.metric,
            self.pairs.len(),
            self.unmatched(),
            self.unmatched_metric_rows,
            self.unmatched_transfer_rows
        )
    }

    pub fn for_task(&self, task: Task) -> Vec<JoinedPair> {
        self.pairs
            .iter()
            .filter(|p| p.task == task)
            .cloned()
            .collect()
    }
}

/// Inner join on (model, source, target) for one metric. Output is sorted by
/// (model, task, source, target) so downstream results do not depend on
/// input order.
pub fn join(
    metrics: &[MetricRecord],
    transfers: &[TransferRecord],
    metric: Metric,
) -> Result<Joined> {
    let mut values: BTreeMap<PairKey, f64> = BTreeMap::new();
    for r in metrics.iter().filter(|r| r.metric == metric) {
        if values.insert(r.key(), r.value).is_some() {
            return Err(Error::DuplicateKey(format!("{} {}", r.key(), metric)));
        }
    }
    if values.is_empty() {
        return Err(Error::Missing(format!("metric {metric} in metric records")));
    }
    let mut matched_keys = BTreeSet::new();
    let mut pairs = Vec::new();
    let mut unmatched_transfer_rows = 0;
    for t in transfers {
        let key = t.pair_key();
        match values.get(&key) {
            Some(&v) => {
                pairs.push(JoinedPair {
                    model_id: t.model_id.clone(),
                    task: t.task,
                    source: t.source,
                    target: t.target,
                    metric_value: v,
                    score: t.score,
                });
                matched_keys.insert(key);
            }
            None => unmatched_transfer_rows += 1,
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoOverlap);
    }
    pairs.sort_by(|a, b| {
        (&a.model_id, a.task, a.source, a.target).cmp(&(&b.model_id, b.task, b.source, b.target))
    });
    Ok(Joined {
        metric,
        unmatched_metric_rows: values.len() - matched_keys.len(),
        unmatched_transfer_rows,
        pairs,
    })
}

/// Fixed keys of a stratum; `None` means pooled over that dimension.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StratumKey {
    pub model_id: Option<String>,
    pub task: Option<Task>,
    pub extra: Option<String>,
}

impl StratumKey {
    pub fn model_task(model_id: &str, task: Task) -> Self {
        Self {
            model_id: Some(model_id.to_string()),
            task: Some(task),
            extra: None,
        }
    }
}

impl fmt::Display for StratumKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let model = self.model_id.as_deref().unwrap_or("*");
        let task = self.task.map_or("*", Task::as_str);
        write!(f, "{model}/{task}")?;
        if let Some(extra) = &self.extra {
            write!(f, "[{extra}]")?;
        }
        Ok(())
    }
}

/// A stratum's (metric value, transfer score) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub key: StratumKey,
    pub metric: Metric,
    pub pairs: Vec<(f64, f64)>,
}

impl Stratum {
    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn correlate(&self, policy: &PValuePolicy) -> Result<CorrelationResult> {
        let (x, y): (Vec<f64>, Vec<f64>) = self.pairs.iter().copied().unzip();
        rank_stats::spearman_with(&x, &y, policy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StratumLevel {
    /// One stratum per (model, task).
    PerModelTask,
    /// One stratum per task, pooled across models.
    PerTaskPooled,
    /// A single stratum over every model and task. Refused unless
    /// [`CorrelateOptions::allow_pooled`] is set.
    FullyPooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CorrelateOptions {
    pub allow_pooled: bool,
    pub policy: PValuePolicy,
}

/// One correlation cell: which stratum, which metric, and the statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedCorrelation {
    pub stratum: StratumKey,
    pub metric: Metric,
    pub result: CorrelationResult,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StratifiedOutcome {
    pub results: Vec<StratifiedCorrelation>,
    /// Strata left out, with the reason (too small, zero variance).
    pub skipped: Vec<(StratumKey, String)>,
}

fn build_strata<F>(joined: &Joined, key_of: F) -> BTreeMap<StratumKey, Vec<(f64, f64)>>
where
    F: Fn(&JoinedPair) -> Option<StratumKey>,
{
    let mut strata: BTreeMap<StratumKey, Vec<(f64, f64)>> = BTreeMap::new();
    for p in &joined.pairs {
        if let Some(key) = key_of(p) {
            strata
                .entry(key)
                .or_default()
                .push((p.metric_value, p.score));
        }
    }
    strata
}

fn correlate_strata(
    metric: Metric,
    strata: BTreeMap<StratumKey, Vec<(f64, f64)>>,
    policy: &PValuePolicy,
) -> StratifiedOutcome {
    let mut out = StratifiedOutcome::default();
    for (key, pairs) in strata {
        let stratum = Stratum { key, metric, pairs };
        let n = stratum.n();
        if n < 3 {
            out.skipped.push((stratum.key, format!("n = {n} below 3")));
            continue;
        }
        match stratum.correlate(policy) {
            Ok(result) => out.results.push(StratifiedCorrelation {
                stratum: stratum.key,
                metric,
                result,
            }),
            Err(e) => out.skipped.push((stratum.key, e.to_string())),
        }
    }
    out
}

/// Spearman correlation per stratum at the requested level.
pub fn correlate_stratified(
    joined: &Joined,
    level: StratumLevel,
    options: &CorrelateOptions,
) -> Result<StratifiedOutcome> {
    let strata = match level {
        StratumLevel::PerModelTask => build_strata(joined, |p| {
            Some(StratumKey::model_task(&p.model_id, p.task))
        }),
        StratumLevel::PerTaskPooled => build_strata(joined, |p| {
            Some(StratumKey {
                model_id: None,
                task: Some(p.task),
                extra: None,
            })
        }),
        StratumLevel::FullyPooled => {
            if !options.allow_pooled {
                return Err(Error::PooledRefused);
            }
            build_strata(joined, |_| {
                Some(StratumKey {
                    model_id: None,
                    task: None,
                    extra: None,
                })
            })
        }
    };
    Ok(correlate_strata(joined.metric, strata, &options.policy))
}

/// Correlation over caller-defined strata; pairs mapped to `None` are left
/// out.
pub fn correlate_custom<F>(joined: &Joined, key_of: F, policy: &PValuePolicy) -> StratifiedOutcome
where
    F: Fn(&JoinedPair) -> Option<StratumKey>,
{
    correlate_strata(joined.metric, build_strata(joined, key_of), policy)
}

/// Mean metric value and mean transfer score of one group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupMeans {
    pub n: usize,
    pub metric: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpsonFinding {
    pub pooled: CorrelationResult,
    pub per_group: BTreeMap<String, CorrelationResult>,
    pub group_means: BTreeMap<String, GroupMeans>,
    pub reversed: bool,
}

impl SimpsonFinding {
    /// Assembles a finding from precomputed results. `reversed` holds iff
    /// the pooled rho and every group rho have strictly opposite signs and
    /// all of them are significant.
    pub fn from_results(
        pooled: CorrelationResult,
        per_group: BTreeMap<String, CorrelationResult>,
        group_means: BTreeMap<String, GroupMeans>,
    ) -> Self {
        let all_significant = pooled.significant && per_group.values().all(|r| r.significant);
        let opposite = !per_group.is_empty()
            && per_group
                .values()
                .all(|r| (pooled.rho < 0.0 && r.rho > 0.0) || (pooled.rho > 0.0 && r.rho < 0.0));
        Self {
            reversed: all_significant && opposite,
            pooled,
            per_group,
            group_means,
        }
    }
}

/// Pooled-versus-per-model correlation for one task's pairs.
pub fn detect_simpson(pairs: &[JoinedPair], policy: &PValuePolicy) -> Result<SimpsonFinding> {
    let mut groups: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for p in pairs {
        groups
            .entry(p.model_id.as_str())
            .or_default()
            .push((p.metric_value, p.score));
    }
    if groups.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "Simpson check needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some((g, v)) = groups.iter().find(|(_, v)| v.len() < 3) {
        return Err(Error::InvalidArgument(format!(
            "group {g} has {} pairs, need at least 3",
            v.len()
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().map(|p| (p.metric_value, p.score)).unzip();
    let pooled = rank_stats::spearman_with(&x, &y, policy)?;
    let mut per_group = BTreeMap::new();
    let mut group_means = BTreeMap::new();
    for (g, v) in groups {
        let (gx, gy): (Vec<f64>, Vec<f64>) = v.iter().copied().unzip();
        per_group.insert(g.to_string(), rank_stats::spearman_with(&gx, &gy, policy)?);
        let n = v.len() as f64;
        group_means.insert(
            g.to_string(),
            GroupMeans {
                n: v.len(),
                metric: gx.iter().sum::<f64>() / n,
                score: gy.iter().sum::<f64>() / n,
            },
        );
    }
    Ok(SimpsonFinding::from_results(pooled, per_group, group_means))
}

/// Symmetric matrix of Spearman rho between metric values.
#[derive(Debug, Clone, PartialEq)]
pub struct InterMetricMatrix {
    pub metrics: Vec<Metric>,
    /// Row-major `metrics.len()^2`.
    pub rho: Vec<f64>,
    /// Number of shared keys per cell.
    pub n: Vec<usize>,
}

impl InterMetricMatrix {
    pub fn get(&self, a: Metric, b: Metric) -> Option<f64> {
        let i = self.metrics.iter().position(|&m| m == a)?;
        let j = self.metrics.iter().position(|&m| m == b)?;
        Some(self.rho[i * self.metrics.len() + j])
    }
}

/// Spearman rho between every pair of metrics over their shared
/// (model, source, target) keys.
pub fn inter_metric_correlation(metrics: &[MetricRecord]) -> Result<InterMetricMatrix> {
    let mut by_metric: BTreeMap<Metric, BTreeMap<PairKey, f64>> = BTreeMap::new();
    for r in metrics {
        if by_metric
            .entry(r.metric)
            .or_default()
            .insert(r.key(), r.value)
            .is_some()
        {
            return Err(Error::DuplicateKey(format!("{} {}", r.key(), r.metric)));
        }
    }
    if by_metric.len() < 2 {
        return Err(Error::InvalidArgument(String::from(
            "inter-metric correlation needs at least 2 metrics",
        )));
    }
    let names: Vec<Metric> = by_metric.keys().copied().collect();
    let k = names.len();
    let mut rho = alloc::vec![1.0; k * k];
    let mut n = alloc::vec![0; k * k];
    for i in 0..k {
        n[i * k + i] = by_metric[&names[i]].len();
        for j in i + 1..k {
            let a = &by_metric[&names[i]];
            let b = &by_metric[&names[j]];
            let (x, y): (Vec<f64>, Vec<f64>) = a
                .iter()
                .filter_map(|(key, va)| b.get(key).map(|vb| (*va, *vb)))
                .unzip();
            if x.is_empty() {
                return Err(Error::NoOverlap);
            }
            let r = rank_stats::spearman_rho(&x, &y)?;
            rho[i * k + j] = r;
            rho[j * k + i] = r;
            n[i * k + j] = x.len();
            n[j * k + i] = x.len();
        }
    }
    Ok(InterMetricMatrix {
        metrics: names,
        rho,
        n,
    })
}

/// Per-metric summary over conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSummary {
    pub metric: Metric,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1); `None` for a single condition.
    pub std: Option<f64>,
    pub min: f64,
    pub max: f64,
    /// Conditions with p < 0.05.
    pub significant: usize,
}

/// Mean, sample std, min, max and significance count of rho per metric.
pub fn aggregate_conditions(results: &[StratifiedCorrelation]) -> Vec<ConditionSummary> {
    let mut by_metric: BTreeMap<Metric, Vec<&CorrelationResult>> = BTreeMap::new();
    for r in results {
        by_metric.entry(r.metric).or_default().push(&r.result);
    }
    by_metric
        .into_iter()
        .map(|(metric, rs)| {
            let count = rs.len();
            let mean = rs.iter().map(|r| r.rho).sum::<f64>() / count as f64;
            let std = (count > 1).then(|| {
                let ss: f64 = rs.iter().map(|r| (r.rho - mean) * (r.rho - mean)).sum();
                libm::sqrt(ss / (count - 1) as f64)
            });
            ConditionSummary {
                metric,
                count,
                mean,
                std,
                min: rs.iter().map(|r| r.rho).fold(f64::INFINITY, f64::min),
                max: rs.iter().map(|r| r.rho).fold(f64::NEG_INFINITY, f64::max),
                significant: rs.iter().filter(|r| r.p_value < SIGNIFICANCE_LEVEL).count(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainEffect {
    pub metric: Metric,
    pub formal_mean: f64,
    pub twitter_mean: f64,
    /// `twitter_mean - formal_mean`.
    pub delta: f64,
}

/// Mean rho over the news-domain tasks (NER, POS) versus the Twitter task
/// (SENT), per metric.
pub fn domain_effect(results: &[StratifiedCorrelation]) -> Result<Vec<DomainEffect>> {
    let mut cells: BTreeMap<Metric, BTreeMap<Task, Vec<f64>>> = BTreeMap::new();
    for r in results {
        if let Some(task) = r.stratum.task {
            cells
                .entry(r.metric)
                .or_default()
                .entry(task)
                .or_default()
                .push(r.result.rho);
        }
    }
    if cells.is_empty() {
        return Err(Error::Missing(String::from("task-stratified results")));
    }
    let mut out = Vec::new();
    for (metric, by_task) in cells {
        if let Some(missing) = Task::ALL.iter().find(|t| !by_task.contains_key(t)) {
            return Err(Error::Missing(format!(
                "task {missing} for metric {metric}"
            )));
        }
        let mean = |tasks: &[Task]| {
            let v: Vec<f64> = tasks
                .iter()
                .flat_map(|t| by_task[t].iter().copied())
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let formal_mean = mean(&[Task::Ner, Task::Pos]);
        let twitter_mean = mean(&[Task::Sent]);
        out.push(DomainEffect {
            metric,
            formal_mean,
            twitter_mean,
            delta: twitter_mean - formal_mean,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSummary {
    pub model_id: String,
    pub mean: f64,
    pub best: f64,
    pub worst: f64,
    pub count: usize,
}

/// Mean, best and worst rho per model over the full grid of the five
/// headline metrics times the three tasks.
pub fn model_summary(results: &[StratifiedCorrelation]) -> Result<Vec<ModelSummary>> {
    let mut grid: BTreeMap<&str, BTreeMap<(Task, Metric), f64>> = BTreeMap::new();
    for r in results {
        if let (Some(model), Some(task)) = (&r.stratum.model_id, r.stratum.task) {
            if Metric::HEADLINE.contains(&r.metric) && r.stratum.extra.is_none() {
                grid.entry(model.as_str())
                    .or_default()
                    .insert((task, r.metric), r.result.rho);
            }
        }
    }
    if grid.is_empty() {
        return Err(Error::Missing(String::from("per-model, per-task results")));
    }
    let mut missing = Vec::new();
    for (model, cells) in &grid {
        for task in Task::ALL {
            for metric in Metric::HEADLINE {
                if !cells.contains_key(&(task, metric)) {
                    missing.push(format!("{model}/{task}/{metric}"));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteGrid(missing.join(", ")));
    }
    Ok(grid
        .into_iter()
        .map(|(model, cells)| {
            let v: Vec<f64> = cells.values().copied().collect();
            ModelSummary {
                model_id: model.to_string(),
                mean: v.iter().sum::<f64>() / v.len() as f64,
                best: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                worst: v.iter().copied().fold(f64::INFINITY, f64::min),
                count: v.len(),
            }
        })
        .collect())
}

/// Pairs whose target shares one pretraining status.
#[derive(Debug, Clone, PartialEq)]
pub struct StatusStratum {
    pub n: usize,
    pub mean_score: Option<f64>,
    /// `None` when the stratum is empty or too small to correlate.
    pub correlation: Option<CorrelationResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainingSplit {
    pub model_id: String,
    pub seen: StatusStratum,
    pub unseen: StatusStratum,
}

/// Splits each model's pairs on whether the target language was in the
/// model's pretraining data, then reports rho and mean score per side.
pub fn pretraining_stratified(
    pairs: &[JoinedPair],
    coverage: &CoverageTable,
    policy: &PValuePolicy,
) -> Result<Vec<PretrainingSplit>> {
    // model -> (seen, unseen) pairs
    type Sides = (Vec<(f64, f64)>, Vec<(f64, f64)>);
    let mut split: BTreeMap<&str, Sides> = BTreeMap::new();
    for p in pairs {
        let seen = coverage.seen(&p.model_id, p.target).ok_or_else(|| {
            Error::Missing(format!("coverage entry for ({}, {})", p.model_id, p.target))
        })?;
        let entry = split.entry(p.model_id.as_str()).or_default();
        if seen {
            entry.0.push((p.metric_value, p.score));
        } else {
            entry.1.push((p.metric_value, p.score));
        }
    }
    let side = |v: &[(f64, f64)]| -> StatusStratum {
        let n = v.len();
        let mean_score = (n > 0).then(|| v.iter().map(|p| p.1).sum::<f64>() / n as f64);
        let correlation = (n >= 3)
            .then(|| {
                let (x, y): (Vec<f64>, Vec<f64>) = v.iter().copied().unzip();
                rank_stats::spearman_with(&x, &y, policy).ok()
            })
            .flatten();
        StatusStratum {
            n,
            mean_score,
            correlation,
        }
    };
    Ok(split
        .into_iter()
        .map(|(model, (seen, unseen))| PretrainingSplit {
            model_id: model.to_string(),
            seen: side(&seen),
            unseen: side(&unseen),
        })
        .collect())
}

/// A predictor of transfer: an embedding metric or a URIEL distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    Embedding(Metric),
    Uriel(UrielKind),
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::Embedding(m) => write!(f, "{m}"),
            Feature::Uriel(k) => write!(f, "uriel_{k}"),
        }
    }
}

/// |rho| of one feature against transfer, per model, for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub task: Task,
    pub feature: Feature,
    pub abs_rho: BTreeMap<String, f64>,
    /// Signed rho, kept for reference (URIEL distances are expected < 0).
    pub rho: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrielComparison {
    pub rows: Vec<ComparisonRow>,
    /// Feature with the largest |rho| per (task, model).
    pub winners: BTreeMap<(Task, String), Feature>,
    /// Transfer rows excluded per URIEL kind because the distance is absent.
    pub excluded: BTreeMap<UrielKind, usize>,
}

/// Compares |rho| of embedding metrics with |rho| of URIEL distances.
/// Directed pairs look up the unordered URIEL pair.
pub fn uriel_comparison(
    metrics: &[MetricRecord],
    transfers: &[TransferRecord],
    uriel: &[UrielDistance],
    kinds: &[UrielKind],
    embedding_metrics: &[Metric],
    policy: &PValuePolicy,
) -> Result<UrielComparison> {
    let mut table: BTreeMap<(LanguageId, LanguageId, UrielKind), f64> = BTreeMap::new();
    for d in uriel {
        let (a, b) = d.unordered();
        if let Some(prev) = table.insert((a, b, d.kind), d.value) {
            if prev != d.value {
                return Err(Error::DuplicateKey(format!(
                    "URIEL {} {a}-{b} has conflicting values {prev} and {}",
                    d.kind, d.value
                )));
            }
        }
    }

    // (task, model) -> feature -> (x, y)
    type Columns = BTreeMap<Feature, (Vec<f64>, Vec<f64>)>;
    let mut cells: BTreeMap<(Task, String), Columns> = BTreeMap::new();
    let mut row_order: BTreeSet<(Task, Feature)> = BTreeSet::new();

    for &metric in embedding_metrics {
        let joined = join(metrics, transfers, metric)?;
        for p in &joined.pairs {
            let cell = cells
                .entry((p.task, p.model_id.clone()))
                .or_default()
                .entry(Feature::Embedding(metric))
                .or_default();
            cell.0.push(p.metric_value);
            cell.1.push(p.score);
            row_order.insert((p.task, Feature::Embedding(metric)));
        }
    }

    let mut excluded = BTreeMap::new();
    for &kind in kinds {
        let mut found = 0usize;
        let mut missing = 0usize;
        let mut sorted: Vec<&TransferRecord> = transfers.iter().collect();
        sorted.sort_by(|a, b| {
            (&a.model_id, a.task, a.source, a.target).cmp(&(
                &b.model_id,
                b.task,
                b.source,
                b.target,
            ))
        });
        for t in sorted {
            let key = if t.source <= t.target {
                (t.source, t.target, kind)
            } else {
                (t.target, t.source, kind)
            };
            match table.get(&key) {
                Some(&v) => {
                    found += 1;
                    let cell = cells
                        .entry((t.task, t.model_id.clone()))
                        .or_default()
                        .entry(Feature::Uriel(kind))
                        .or_default();
                    cell.0.push(v);
                    cell.1.push(t.score);
                    row_order.insert((t.task, Feature::Uriel(kind)));
                }
                None => missing += 1,
            }
        }
        if found == 0 {
            return Err(Error::Missing(format!(
                "URIEL {kind} distances for every evaluated pair"
            )));
        }
        excluded.insert(kind, missing);
    }

    let mut rows: BTreeMap<(Task, Feature), ComparisonRow> = BTreeMap::new();
    let mut winners: BTreeMap<(Task, String), (Feature, f64)> = BTreeMap::new();
    for ((task, model), features) in &cells {
        for (feature, (x, y)) in features {
            let Ok(r) = rank_stats::spearman_with(x, y, policy) else {
                continue;
            };
            let row = rows
                .entry((*task, *feature))
                .or_insert_with(|| ComparisonRow {
                    task: *task,
                    feature: *feature,
                    abs_rho: BTreeMap::new(),
                    rho: BTreeMap::new(),
                });
            row.abs_rho.insert(model.clone(), r.rho.abs());
            row.rho.insert(model.clone(), r.rho);
            let best = winners
                .entry((*task, model.clone()))
                .or_insert((*feature, r.rho.abs()));
            if r.rho.abs() > best.1 {
                *best = (*feature, r.rho.abs());
            }
        }
    }
    Ok(UrielComparison {
        rows: row_order
            .into_iter()
            .filter_map(|k| rows.remove(&k))
            .collect(),
        winners: winners.into_iter().map(|(k, (f, _))| (k, f)).collect(),
        excluded,
    })
}
