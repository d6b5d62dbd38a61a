mod common;

use common::{lang, rng};
use proptest::prelude::*;
use rand::Rng;
use std::collections::BTreeSet;
use xling_core::selection::{random_baseline, rank_sources, select_sources, top_k_accuracy};
use xling_core::{LanguageId, Metric, MetricRecord, Task, TransferRecord};

const LANGS: [&str; 8] = ["amh", "bam", "ewe", "hau", "ibo", "kin", "swa", "yor"];

fn data(seed: u64, n: usize) -> (Vec<MetricRecord>, Vec<TransferRecord>) {
    let mut r = rng(seed);
    let mut metrics = Vec::new();
    let mut transfers = Vec::new();
    for s in &LANGS[..n] {
        for t in &LANGS[..n] {
            if s == t {
                continue;
            }
            // Coarse grids make ties likely.
            let v = f64::from(r.random_range(0..6u8)) / 5.0;
            let score = f64::from(r.random_range(0..6u8)) / 5.0;
            metrics.push(MetricRecord {
                model_id: "m".into(),
                source: lang(s),
                target: lang(t),
                metric: Metric::CosineGap,
                value: v,
                k: None,
            });
            transfers.push(TransferRecord::new("m", Task::Pos, lang(s), lang(t), score).unwrap());
        }
    }
    (metrics, transfers)
}

/// Position of the first oracle-best source under a stable descending sort
/// with alphabetical tie-breaking.
fn oracle_rank(
    metrics: &[MetricRecord],
    transfers: &[TransferRecord],
    target: LanguageId,
) -> usize {
    let mut cands: Vec<(LanguageId, f64, f64)> = transfers
        .iter()
        .filter(|t| t.target == target)
        .map(|t| {
            let v = metrics
                .iter()
                .find(|m| m.source == t.source && m.target == target)
                .unwrap()
                .value;
            (t.source, v, t.score)
        })
        .collect();
    cands.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let best = cands.iter().map(|c| c.2).fold(f64::MIN, f64::max);
    cands.iter().position(|c| c.2 == best).unwrap() + 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranking_is_a_permutation_of_candidates(seed in any::<u64>(), n in 3usize..=8) {
        let (metrics, _) = data(seed, n);
        for t in &LANGS[..n] {
            let ranked = rank_sources(&metrics, "m", lang(t), Metric::CosineGap).unwrap();
            let got: BTreeSet<_> = ranked.iter().map(|r| r.source).collect();
            let want: BTreeSet<_> = LANGS[..n].iter().filter(|l| *l != t).map(|l| lang(l)).collect();
            prop_assert_eq!(ranked.len(), n - 1);
            prop_assert_eq!(got, want);
            for w in ranked.windows(2) {
                prop_assert!(w[0].value > w[1].value || (w[0].value == w[1].value && w[0].source < w[1].source));
            }
        }
    }

    #[test]
    fn accuracy_grows_with_k_and_saturates(seed in any::<u64>(), n in 3usize..=8) {
        let (metrics, transfers) = data(seed, n);
        let ks: Vec<usize> = (1..n).collect();
        let report = select_sources(&metrics, &transfers, "m", Task::Pos, Metric::CosineGap, &ks).unwrap();
        prop_assert_eq!(report.n_languages, n);
        for w in report.top_k.windows(2) {
            prop_assert!(w[0].accuracy <= w[1].accuracy);
        }
        prop_assert_eq!(report.accuracy_at(n - 1), Some(1.0));
        for tk in &report.top_k {
            prop_assert!((tk.random_baseline - tk.k as f64 / (n - 1) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_independent_rank_oracle(seed in any::<u64>(), n in 3usize..=8) {
        let (metrics, transfers) = data(seed, n);
        let report = select_sources(&metrics, &transfers, "m", Task::Pos, Metric::CosineGap, &[1, 2]).unwrap();
        for sel in &report.targets {
            prop_assert_eq!(sel.rank_of_oracle, oracle_rank(&metrics, &transfers, sel.target));
        }
        let hits = report.targets.iter().filter(|s| oracle_rank(&metrics, &transfers, s.target) <= 2).count();
        prop_assert_eq!(report.accuracy_at(2).unwrap(), hits as f64 / n as f64);
    }

    #[test]
    fn monotone_rescaling_keeps_selections(seed in any::<u64>(), n in 3usize..=8, scale in 0.1f64..5.0) {
        let (metrics, transfers) = data(seed, n);
        let rescaled: Vec<MetricRecord> = metrics
            .iter()
            .map(|m| MetricRecord { value: (scale * m.value).exp(), ..m.clone() })
            .collect();
        for k in 1..n {
            prop_assert_eq!(
                top_k_accuracy(&metrics, &transfers, "m", Task::Pos, Metric::CosineGap, k).unwrap(),
                top_k_accuracy(&rescaled, &transfers, "m", Task::Pos, Metric::CosineGap, k).unwrap()
            );
        }
    }
}

#[test]
fn baseline_edges() {
    assert!((random_baseline(12, 1).unwrap() - 1.0 / 11.0).abs() < 1e-15);
    assert!((random_baseline(12, 3).unwrap() - 3.0 / 11.0).abs() < 1e-15);
    assert!((random_baseline(11, 3).unwrap() - 0.3).abs() < 1e-15);
    assert!((random_baseline(6, 3).unwrap() - 0.6).abs() < 1e-15);
    assert!(random_baseline(6, 6).is_err());
    assert!(random_baseline(6, 0).is_err());
    assert!(random_baseline(1, 1).is_err());
}
