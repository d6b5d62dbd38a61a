//! Source-language ranking per target and top-K accuracy against the
//! empirically best source.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::records::{LanguageId, Metric, MetricRecord, Task, TransferRecord};

/// Metric used for selection unless configured otherwise.
pub const DEFAULT_SELECTION_METRIC: Metric = Metric::CosineGap;

#[derive(Debug, Clone, PartialEq)]
pub struct RankedSource {
    pub source: LanguageId,
    pub value: f64,
    /// Shares its metric value with a neighbour; the order between them is
    /// alphabetical.
    pub tied: bool,
}

fn rank(mut candidates: Vec<(LanguageId, f64)>) -> Vec<RankedSource> {
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let values: Vec<f64> = candidates.iter().map(|c| c.1).collect();
    candidates
        .into_iter()
        .enumerate()
        .map(|(i, (source, value))| RankedSource {
            source,
            value,
            tied: (i > 0 && values[i - 1] == value) || values.get(i + 1) == Some(&value),
        })
        .collect()
}

/// Candidate sources for `target` under one model, ordered by metric value
/// (highest first), ties alphabetical.
pub fn rank_sources(
    metrics: &[MetricRecord],
    model_id: &str,
    target: LanguageId,
    metric: Metric,
) -> Result<Vec<RankedSource>> {
    let mut seen = BTreeSet::new();
    let mut candidates = Vec::new();
    for r in metrics
        .iter()
        .filter(|r| r.model_id == model_id && r.target == target && r.metric == metric)
    {
        if !seen.insert(r.source) {
            return Err(Error::DuplicateKey(format!("{} {}", r.key(), metric)));
        }
        candidates.push((r.source, r.value));
    }
    if candidates.is_empty() {
        return Err(Error::Missing(format!(
            "candidate sources for target {target} under {model_id} ({metric})"
        )));
    }
    Ok(rank(candidates))
}

/// `K / (N - 1)`: chance that a uniformly random ranking puts a given
/// source in the top K of `N - 1` candidates.
pub fn random_baseline(n_languages: usize, k: usize) -> Result<f64> {
    if n_languages < 2 || k == 0 || k > n_languages - 1 {
        return Err(Error::InvalidArgument(format!(
            "K = {k} outside 1..={} for {n_languages} languages",
            n_languages.saturating_sub(1)
        )));
    }
    Ok(k as f64 / (n_languages - 1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSelection {
    pub target: LanguageId,
    pub ranked: Vec<RankedSource>,
    /// All sources sharing the best observed transfer score.
    pub oracle_best: Vec<LanguageId>,
    /// 1-based rank of the best-placed oracle source.
    pub rank_of_oracle: usize,
}

impl TargetSelection {
    pub fn oracle_tied(&self) -> bool {
        self.oracle_best.len() > 1
    }

    pub fn hit_at(&self, k: usize) -> bool {
        self.rank_of_oracle <= k
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopK {
    pub k: usize,
    pub accuracy: f64,
    pub random_baseline: f64,
}

impl TopK {
    pub fn below_baseline(&self) -> bool {
        self.accuracy < self.random_baseline
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub model_id: String,
    pub task: Task,
    pub metric: Metric,
    /// Distinct languages in the (model, task) transfer data.
    pub n_languages: usize,
    pub targets: Vec<TargetSelection>,
    pub top_k: Vec<TopK>,
    /// Targets left out, with the reason.
    pub excluded: Vec<(LanguageId, String)>,
}

impl SelectionReport {
    pub fn accuracy_at(&self, k: usize) -> Option<f64> {
        self.top_k.iter().find(|t| t.k == k).map(|t| t.accuracy)
    }
}

/// Ranks the candidate sources of every target in the (model, task) transfer
/// data and scores the rankings against the oracle (best observed source).
/// Candidates are the sources with both a metric value and a transfer
/// score; when several sources tie for best, retrieving any of them counts.
pub fn select_sources(
    metrics: &[MetricRecord],
    transfers: &[TransferRecord],
    model_id: &str,
    task: Task,
    metric: Metric,
    ks: &[usize],
) -> Result<SelectionReport> {
    let mut scores: BTreeMap<LanguageId, BTreeMap<LanguageId, f64>> = BTreeMap::new();
    let mut languages = BTreeSet::new();
    for t in transfers
        .iter()
        .filter(|t| t.model_id == model_id && t.task == task)
    {
        languages.insert(t.source);
        languages.insert(t.target);
        if scores
            .entry(t.target)
            .or_default()
            .insert(t.source, t.score)
            .is_some()
        {
            return Err(Error::DuplicateKey(format!(
                "({model_id}, {task}, {}, {})",
                t.source, t.target
            )));
        }
    }
    if scores.is_empty() {
        return Err(Error::Missing(format!(
            "transfer scores for {model_id}/{task}"
        )));
    }
    let mut values: BTreeMap<(LanguageId, LanguageId), f64> = BTreeMap::new();
    for r in metrics
        .iter()
        .filter(|r| r.model_id == model_id && r.metric == metric)
    {
        if values.insert((r.source, r.target), r.value).is_some() {
            return Err(Error::DuplicateKey(format!("{} {}", r.key(), metric)));
        }
    }

    let mut targets = Vec::new();
    let mut excluded = Vec::new();
    for (target, by_source) in &scores {
        let candidates: Vec<(LanguageId, f64)> = by_source
            .keys()
            .filter_map(|s| values.get(&(*s, *target)).map(|v| (*s, *v)))
            .collect();
        if candidates.is_empty() {
            excluded.push((*target, "no metric values for any candidate".to_string()));
            continue;
        }
        let ranked = rank(candidates);
        let in_ranking: BTreeSet<LanguageId> = ranked.iter().map(|r| r.source).collect();
        let best = by_source
            .iter()
            .filter(|(s, _)| in_ranking.contains(s))
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        let oracle_best: Vec<LanguageId> = by_source
            .iter()
            .filter(|(s, v)| in_ranking.contains(s) && **v == best)
            .map(|(s, _)| *s)
            .collect();
        let rank_of_oracle = ranked
            .iter()
            .position(|r| oracle_best.contains(&r.source))
            .map(|p| p + 1)
            .unwrap_or(usize::MAX);
        targets.push(TargetSelection {
            target: *target,
            ranked,
            oracle_best,
            rank_of_oracle,
        });
    }
    if targets.is_empty() {
        return Err(Error::Missing(format!(
            "{metric} values for any target of {model_id}/{task}"
        )));
    }

    let n_languages = languages.len();
    let mut top_k = Vec::new();
    for &k in ks {
        let hits = targets.iter().filter(|t| t.hit_at(k)).count();
        top_k.push(TopK {
            k,
            accuracy: hits as f64 / targets.len() as f64,
            random_baseline: random_baseline(n_languages, k)?,
        });
    }
    Ok(SelectionReport {
        model_id: model_id.to_string(),
        task,
        metric,
        n_languages,
        targets,
        top_k,
        excluded,
    })
}

/// Fraction of targets whose oracle-best source is in the top `k`.
pub fn top_k_accuracy(
    metrics: &[MetricRecord],
    transfers: &[TransferRecord],
    model_id: &str,
    task: Task,
    metric: Metric,
    k: usize,
) -> Result<f64> {
    let report = select_sources(metrics, transfers, model_id, task, metric, &[k])?;
    Ok(report.top_k[0].accuracy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn lang(code: &str) -> LanguageId {
        LanguageId::new(code).unwrap()
    }

    fn rec(source: &str, target: &str, value: f64) -> MetricRecord {
        MetricRecord {
            model_id: "m".to_string(),
            source: lang(source),
            target: lang(target),
            metric: Metric::CosineGap,
            value,
            k: None,
        }
    }

    fn run(source: &str, target: &str, score: f64) -> TransferRecord {
        TransferRecord::new("m", Task::Ner, lang(source), lang(target), score).unwrap()
    }

    #[test]
    fn ranks_descending() {
        let m = vec![
            rec("aaa", "zzz", 0.2),
            rec("bbb", "zzz", 0.3),
            rec("ccc", "zzz", 0.1),
        ];
        let r = rank_sources(&m, "m", lang("zzz"), Metric::CosineGap).unwrap();
        let order: Vec<&str> = r.iter().map(|r| r.source.as_str()).collect();
        assert_eq!(order, ["bbb", "aaa", "ccc"]);
        assert!(r.iter().all(|r| !r.tied));
    }

    #[test]
    fn ties_break_alphabetically_and_are_flagged() {
        let m = vec![
            rec("ccc", "zzz", 0.2),
            rec("aaa", "zzz", 0.2),
            rec("bbb", "zzz", 0.1),
        ];
        let r = rank_sources(&m, "m", lang("zzz"), Metric::CosineGap).unwrap();
        assert_eq!(r[0].source.as_str(), "aaa");
        assert_eq!(r[1].source.as_str(), "ccc");
        assert!(r[0].tied && r[1].tied && !r[2].tied);
    }

    #[test]
    fn no_candidates_is_an_error() {
        assert!(rank_sources(&[], "m", lang("zzz"), Metric::CosineGap).is_err());
    }

    #[test]
    fn baselines() {
        assert_eq!(random_baseline(12, 1).unwrap(), 1.0 / 11.0);
        assert_eq!(random_baseline(12, 3).unwrap(), 3.0 / 11.0);
        assert_eq!(random_baseline(6, 3).unwrap(), 0.6);
        assert!(random_baseline(6, 6).is_err());
        assert!(random_baseline(6, 0).is_err());
    }

    #[test]
    fn oracle_ranks_one_two_four() {
        // Five candidates per target; metric order is alphabetical, the
        // oracle sits at metric rank 1, 2 and 4 respectively.
        let sources = ["aaa", "bbb", "ccc", "ddd", "eee"];
        let targets = [("xxa", 0), ("xxb", 1), ("xxc", 3)];
        let mut m = Vec::new();
        let mut t = Vec::new();
        for (target, oracle) in targets {
            for (i, s) in sources.iter().enumerate() {
                m.push(rec(s, target, 1.0 - i as f64 * 0.1));
                t.push(run(s, target, if i == oracle { 0.9 } else { 0.1 }));
            }
        }
        let report = select_sources(&m, &t, "m", Task::Ner, Metric::CosineGap, &[1, 3]).unwrap();
        let ranks: Vec<usize> = report.targets.iter().map(|t| t.rank_of_oracle).collect();
        assert_eq!(ranks, [1, 2, 4]);
        assert_eq!(report.accuracy_at(1), Some(1.0 / 3.0));
        assert_eq!(report.accuracy_at(3), Some(2.0 / 3.0));
    }

    #[test]
    fn tied_oracle_counts_if_any_is_retrieved() {
        let m = vec![
            rec("aaa", "zzz", 0.9),
            rec("bbb", "zzz", 0.5),
            rec("ccc", "zzz", 0.1),
        ];
        let t = vec![
            run("aaa", "zzz", 0.2),
            run("bbb", "zzz", 0.7),
            run("ccc", "zzz", 0.7),
        ];
        let report = select_sources(&m, &t, "m", Task::Ner, Metric::CosineGap, &[1, 2]).unwrap();
        assert!(report.targets[0].oracle_tied());
        assert_eq!(report.targets[0].rank_of_oracle, 2);
        assert_eq!(report.accuracy_at(1), Some(0.0));
        assert_eq!(report.accuracy_at(2), Some(1.0));
    }

    #[test]
    fn single_candidate_target() {
        let m = vec![rec("aaa", "zzz", 0.3)];
        let t = vec![run("aaa", "zzz", 0.4)];
        let report = select_sources(&m, &t, "m", Task::Ner, Metric::CosineGap, &[1]).unwrap();
        assert_eq!(report.targets[0].ranked.len(), 1);
        assert_eq!(report.accuracy_at(1), Some(1.0));
    }

    #[test]
    fn target_without_metrics_is_excluded() {
        let m = vec![rec("aaa", "zzz", 0.3), rec("bbb", "zzz", 0.1)];
        let t = vec![
            run("aaa", "zzz", 0.4),
            run("bbb", "zzz", 0.2),
            run("aaa", "yyy", 0.4),
        ];
        let report = select_sources(&m, &t, "m", Task::Ner, Metric::CosineGap, &[1]).unwrap();
        assert_eq!(report.targets.len(), 1);
        assert_eq!(report.excluded.len(), 1);
        assert_eq!(report.excluded[0].0.as_str(), "yyy");
    }
}
