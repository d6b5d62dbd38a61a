mod common;

use std::path::Path;

use common::{lang, rng, unit_rows};
use proptest::prelude::*;
use xling::format::{decode, encode, load_embeddings, read_header, write_embeddings};
use xling::tables;
use xling::Error;
use xling_core::analysis::{StratifiedCorrelation, StratumKey};
use xling_core::rank_stats::{CorrelationResult, PValueMethod};
use xling_core::{EmbeddingMatrix, Metric, MetricRecord, Task, TransferRecord};

const CODES: [&str; 6] = ["amh", "hau", "kin", "swa", "wol", "yor"];

fn arb_matrix() -> impl Strategy<Value = EmbeddingMatrix> {
    (
        1usize..12,
        1usize..10,
        any::<u64>(),
        any::<bool>(),
        "[a-z][a-z0-9_-]{0,20}",
        0usize..6,
    )
        .prop_map(|(n, d, seed, unit, model, li)| {
            let rows = if unit {
                unit_rows(&mut rng(seed), n, d)
            } else {
                (0..n)
                    .map(|i| {
                        (0..d)
                            .map(|j| ((seed as f32) * 1e-12 + (i * d + j) as f32) - 7.5)
                            .collect()
                    })
                    .collect()
            };
            let m = EmbeddingMatrix::from_rows(model, lang(CODES[li]), &rows, false).unwrap();
            if unit {
                m.into_verified_normalized().unwrap()
            } else {
                m
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_decode_is_lossless(m in arb_matrix()) {
        let bytes = encode(&m).unwrap();
        let back = decode(&bytes, Path::new("mem.xemb")).unwrap();
        prop_assert_eq!(back.model_id(), m.model_id());
        prop_assert_eq!(back.language(), m.language());
        prop_assert_eq!(back.n_sentences(), m.n_sentences());
        prop_assert_eq!(back.dim(), m.dim());
        prop_assert_eq!(back.is_normalized(), m.is_normalized());
        let same_bits = back.as_slice().iter().zip(m.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same_bits);
        prop_assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn any_payload_or_checksum_bit_flip_is_rejected(m in arb_matrix(), pos in any::<prop::sample::Index>(), bit in 0u8..8) {
        let mut bytes = encode(&m).unwrap();
        let payload_start = 16 + 2 + m.model_id().len() + 2 + 3;
        let i = payload_start + pos.index(bytes.len() - payload_start);
        bytes[i] ^= 1 << bit;
        prop_assert!(decode(&bytes, Path::new("mem.xemb")).is_err());
    }

    #[test]
    fn every_proper_prefix_is_rejected(m in arb_matrix(), cut in any::<prop::sample::Index>()) {
        let bytes = encode(&m).unwrap();
        let len = cut.index(bytes.len());
        prop_assert!(decode(&bytes[..len], Path::new("mem.xemb")).is_err());
    }
}

#[test]
fn disk_round_trip_and_header_agree() {
    let dir = tempfile::tempdir().unwrap();
    let m = EmbeddingMatrix::from_rows("enc", lang("swa"), &unit_rows(&mut rng(3), 7, 5), true)
        .unwrap();
    let path = dir.path().join("nested").join("enc").join("swa.xemb");
    write_embeddings(&m, &path).unwrap();
    assert_eq!(load_embeddings(&path).unwrap(), m);
    let h = read_header(&path).unwrap();
    assert_eq!((h.n_sentences, h.dim), (7, 5));
    assert_eq!((h.model_id.as_str(), h.language.as_str()), ("enc", "swa"));
}

#[test]
fn load_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.xemb");
    std::fs::write(&path, b"NOPE....").unwrap();
    let err = load_embeddings(&path).unwrap_err();
    assert!(matches!(err, Error::UnrecognizedFormat { .. }));
    assert!(err.to_string().contains("junk.xemb"), "{err}");
}

fn arb_metric_record() -> impl Strategy<Value = MetricRecord> {
    (0usize..6, 1usize..6, 0usize..6, -1.0f64..1.0, 1usize..12).prop_map(|(s, off, mi, v, k)| {
        let metric = Metric::ALL[mi];
        let value = match metric {
            Metric::PAt1St | Metric::PAt1Ts | Metric::Cka => v.abs(),
            _ => v,
        };
        MetricRecord {
            model_id: "enc".into(),
            source: lang(CODES[s]),
            target: lang(CODES[(s + off) % 6]),
            metric,
            value,
            k: (metric == Metric::Csls).then_some(k),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_csv_round_trips_to_six_decimals(rows in prop::collection::vec(arb_metric_record(), 1..20)) {
        let mut seen = std::collections::BTreeSet::new();
        let rows: Vec<MetricRecord> = rows.into_iter().filter(|r| seen.insert((r.source, r.target, r.metric))).collect();
        let text = tables::metrics_csv(&rows);
        let back = tables::parse_metrics_csv(Path::new("m.csv"), &text).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in back.iter().zip(&rows) {
            prop_assert_eq!((a.source, a.target, a.metric, a.k), (b.source, b.target, b.metric, b.k));
            prop_assert!((a.value - b.value).abs() <= 5e-7);
        }
        prop_assert_eq!(tables::metrics_csv(&back), text);
    }

    #[test]
    fn transfer_csv_round_trips(scores in prop::collection::vec(0.0f64..=1.0, 1..30)) {
        let rows: Vec<TransferRecord> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let src = i % 6;
                let tgt = (src + 1 + i / 6 % 5) % 6;
                TransferRecord::new("enc", Task::ALL[i / 30 % 3], lang(CODES[src]), lang(CODES[tgt]), s).unwrap()
            })
            .collect();
        let text = tables::transfer_csv(&rows);
        let back = tables::parse_transfer_csv(Path::new("t.csv"), &text).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in back.iter().zip(&rows) {
            prop_assert_eq!((a.source, a.target, a.task), (b.source, b.target, b.task));
            prop_assert!((a.score - b.score).abs() <= 5e-7);
        }
    }
}

#[test]
fn results_csv_round_trips_strata_and_stars() {
    let results: Vec<StratifiedCorrelation> = [(0.6, 1e-9, 132), (0.2, 0.03, 110), (-0.1, 0.6, 30)]
        .into_iter()
        .zip(Task::ALL)
        .map(|((rho, p, n), task)| StratifiedCorrelation {
            stratum: StratumKey::model_task("enc", task),
            metric: Metric::CosineGap,
            result: CorrelationResult {
                rho,
                p_value: p,
                n,
                method: PValueMethod::TApprox,
                significant: p < 0.05,
            },
        })
        .collect();
    let text = tables::results_csv(&results);
    let back = tables::parse_results_csv(Path::new("r.csv"), &text).unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in back.iter().zip(&results) {
        assert_eq!(a.stratum, b.stratum);
        assert_eq!(a.result.n, b.result.n);
        assert_eq!(a.result.stars(), b.result.stars());
        assert!((a.result.p_value - b.result.p_value).abs() <= 1e-6 * b.result.p_value);
    }
    assert_eq!(tables::results_csv(&back), text);
}

#[test]
fn duplicate_and_malformed_rows_are_located() {
    let text = "model,task,source,target,score\nenc,NER,swa,hau,0.5\nenc,NER,swa,hau,0.6\n";
    let err = tables::parse_transfer_csv(Path::new("t.csv"), text)
        .unwrap_err()
        .to_string();
    assert!(
        err.contains("line 3") && err.contains("first at line 2"),
        "{err}"
    );

    let err = tables::parse_transfer_csv(Path::new("t.csv"), "model,task,src,target,score\n")
        .unwrap_err()
        .to_string();
    assert!(err.contains("source"), "{err}");

    let err = tables::parse_uriel_csv(
        Path::new("u.csv"),
        "lang_a,lang_b,kind,value\nswa,hau,genetic,0.4\nhau,swa,genetic,0.5\n",
    )
    .unwrap_err()
    .to_string();
    assert!(err.contains("asymmetric"), "{err}");

    let err = tables::parse_coverage_csv(Path::new("c.csv"), "model,language,seen\nenc,swa,yes\n")
        .unwrap_err()
        .to_string();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn golden_file_from_the_python_writer_loads() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/toy-enc_swa.xemb");
    let m = load_embeddings(&path).unwrap();
    assert_eq!((m.model_id(), m.language().as_str()), ("toy-enc", "swa"));
    assert_eq!((m.n_sentences(), m.dim()), (3, 4));
    assert!(m.is_normalized());
    assert_eq!(
        m.as_slice(),
        &[0.6, 0.8, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.5, -0.5, 0.5, -0.5]
    );
    assert_eq!(encode(&m).unwrap(), std::fs::read(&path).unwrap());
}
