//! The five CLI commands, as library functions returning what they wrote.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use xling_core::analysis::{
    aggregate_conditions, correlate_stratified, detect_simpson, domain_effect,
    inter_metric_correlation, join, model_summary, pretraining_stratified, uriel_comparison,
    CorrelateOptions, Joined, StratifiedCorrelation, StratumLevel,
};
use xling_core::rank_stats::PValuePolicy;
use xling_core::selection::{select_sources, SelectionReport, DEFAULT_SELECTION_METRIC};
use xling_core::{LanguageId, Metric, MetricRecord, Task, TransferRecord, UrielKind};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fixtures;
use crate::format;
use crate::pipeline::{compute_model_metrics, EmbeddingIndex};
use crate::report::{self, write_file, Report, Table};
use crate::tables;

pub const METRICS_FILE: &str = "metrics.csv";
pub const RESULTS_FILE: &str = "results.csv";
pub const POOLED_RESULTS_FILE: &str = "pooled_results.csv";
pub const SELECTION_FILE: &str = "selection.csv";

pub const POOLED_WARNING: &str = "pooled correlations mix models (and tasks); between-model differences can reverse the sign, see the Simpson report";

/// Lines for the console plus the files a command wrote.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub warnings: Vec<String>,
    pub written: Vec<PathBuf>,
}

impl Outcome {
    fn write(&mut self, path: PathBuf, contents: &str) -> Result<()> {
        write_file(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    fn write_report(&mut self, cfg: &RunConfig, report: &Report, stem: &str) -> Result<()> {
        report.write(&cfg.output_dir, stem)?;
        self.written
            .push(cfg.output_dir.join(format!("{stem}.txt")));
        self.written.push(cfg.output_dir.join(format!("{stem}.md")));
        for t in &report.tables {
            self.written
                .push(cfg.output_dir.join(format!("{}.csv", t.slug)));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- validate

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Validation {
    pub lines: Vec<String>,
    pub failures: usize,
}

impl Validation {
    fn ok(&mut self, line: String) {
        self.lines.push(line);
    }

    fn fail(&mut self, what: &str, e: impl std::fmt::Display) {
        self.failures += 1;
        self.lines.push(format!("FAIL {what}: {e}"));
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Loads every configured input and checks that the joins between them are
/// non-empty. Problems are collected rather than stopping at the first.
pub fn validate(cfg: &RunConfig) -> Result<Validation> {
    let mut v = Validation::default();
    let mut any = false;
    let mut embedded: BTreeSet<(String, LanguageId)> = BTreeSet::new();

    if let Some(dir) = &cfg.embeddings_dir {
        any = true;
        match EmbeddingIndex::scan(dir) {
            Err(e) => v.fail("embeddings", e),
            Ok(index) => {
                let mut loaded = 0;
                for (model, lang, path) in index.iter().filter(|(m, _, _)| cfg.wants_model(m)) {
                    match format::load_embeddings(path) {
                        Ok(m) if !m.is_normalized() => v.fail(
                            &format!("embeddings {}", path.display()),
                            "rows are not unit length",
                        ),
                        Ok(m) => {
                            loaded += 1;
                            embedded.insert((model.to_string(), lang));
                            v.ok(format!(
                                "embeddings {model}/{lang}: {}x{} OK",
                                m.n_sentences(),
                                m.dim()
                            ));
                        }
                        Err(e) => v.fail("embeddings", e),
                    }
                }
                if loaded == 0 && index.iter().all(|(m, _, _)| !cfg.wants_model(m)) {
                    v.fail(
                        "embeddings",
                        format!(
                            "no .xemb files for the selected models in {}",
                            dir.display()
                        ),
                    );
                }
            }
        }
    }

    let mut transfers: Option<Vec<TransferRecord>> = None;
    if let Some(p) = &cfg.transfer_csv {
        any = true;
        match tables::load_transfer_csv(p) {
            Ok(t) => {
                v.ok(format!("transfer {}: {} rows OK", p.display(), t.len()));
                transfers = Some(t);
            }
            Err(e) => v.fail("transfer", e),
        }
    }
    if let Some(p) = &cfg.uriel_csv {
        any = true;
        match tables::load_uriel_csv(p) {
            Ok(u) => v.ok(format!("uriel {}: {} rows OK", p.display(), u.len())),
            Err(e) => v.fail("uriel", e),
        }
    }
    let mut coverage = None;
    if let Some(p) = &cfg.coverage_csv {
        any = true;
        match tables::load_coverage_csv(p) {
            Ok(c) => {
                v.ok(format!("coverage {}: {} rows OK", p.display(), c.len()));
                coverage = Some(c);
            }
            Err(e) => v.fail("coverage", e),
        }
    }
    let mut metric_rows = None;
    if let Some(p) = &cfg.metrics_csv {
        any = true;
        match tables::load_metrics_csv(p) {
            Ok(m) => {
                v.ok(format!("metrics {}: {} rows OK", p.display(), m.len()));
                metric_rows = Some(m);
            }
            Err(e) => v.fail("metrics", e),
        }
    }
    if !any {
        return Err(Error::Config(
            "nothing to validate: pass --embeddings-dir, --transfer, --uriel, --coverage or --metrics-csv".into(),
        ));
    }

    if let Some(transfers) = &transfers {
        let selected: Vec<&TransferRecord> = transfers
            .iter()
            .filter(|t| cfg.wants_model(&t.model_id) && cfg.tasks.contains(&t.task))
            .collect();
        if cfg.embeddings_dir.is_some() {
            let covered = selected
                .iter()
                .filter(|t| {
                    embedded.contains(&(t.model_id.clone(), t.source))
                        && embedded.contains(&(t.model_id.clone(), t.target))
                })
                .count();
            if covered == 0 {
                v.fail(
                    "join transfer x embeddings",
                    "no transfer row has embeddings for both languages",
                );
            } else {
                v.ok(format!(
                    "join transfer x embeddings: {covered} of {} rows covered",
                    selected.len()
                ));
            }
        }
        if let Some(metrics) = &metric_rows {
            for metric in metrics.iter().map(|m| m.metric).collect::<BTreeSet<_>>() {
                match join(metrics, transfers, metric) {
                    Ok(j) => v.ok(format!("join transfer x metrics: {}", j.note())),
                    Err(e) => v.fail(&format!("join transfer x metrics ({metric})"), e),
                }
            }
        }
        if let Some(coverage) = &coverage {
            let missing: BTreeSet<String> = selected
                .iter()
                .filter(|t| coverage.seen(&t.model_id, t.target).is_none())
                .map(|t| format!("({}, {})", t.model_id, t.target))
                .collect();
            if missing.is_empty() {
                v.ok("coverage: every (model, target) in transfer is covered".into());
            } else {
                v.fail(
                    "coverage",
                    format!(
                        "no entry for {}",
                        missing.into_iter().collect::<Vec<_>>().join(", ")
                    ),
                );
            }
        }
    }
    v.lines.push(if v.passed() {
        "OK".to_string()
    } else {
        format!("FAILED ({} problem(s))", v.failures)
    });
    Ok(v)
}

// --------------------------------------------------------- compute-metrics

/// Metric rows for every selected model, plus CKA clamping warnings.
pub fn compute_records(
    cfg: &RunConfig,
    metrics: &[Metric],
) -> Result<(Vec<MetricRecord>, Vec<String>)> {
    let dir = cfg.require(&cfg.embeddings_dir, "--embeddings-dir")?;
    let index = EmbeddingIndex::scan(dir)?;
    let models = match &cfg.models {
        Some(m) => m.clone(),
        None => index.models(),
    };
    if models.is_empty() {
        return Err(Error::Data(format!(
            "no embedding files found in {}",
            dir.display()
        )));
    }
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for model in &models {
        let languages = match &cfg.languages {
            Some(l) => l.clone(),
            None => index.languages(model),
        };
        if languages.is_empty() {
            return Err(Error::Data(format!(
                "no languages with embeddings for model {model}"
            )));
        }
        let files = index.resolve(model, &languages)?;
        let out = compute_model_metrics(model, &files, metrics, cfg.k)?;
        records.extend(out.records);
        warnings.extend(out.warnings);
    }
    Ok((records, warnings))
}

pub fn compute_metrics(cfg: &RunConfig) -> Result<(Outcome, Vec<MetricRecord>)> {
    let metrics = cfg.metrics_or(&Metric::ALL);
    let (records, warnings) = compute_records(cfg, &metrics)?;
    let mut out = Outcome {
        warnings,
        ..Outcome::default()
    };
    out.lines.push(format!("{} metric rows", records.len()));
    out.write(
        cfg.output_dir.join(METRICS_FILE),
        &tables::metrics_csv(&records),
    )?;
    Ok((out, records))
}

/// Metric rows from `--metrics-csv`, or computed from embeddings.
fn metric_records(
    cfg: &RunConfig,
    metrics: &[Metric],
    out: &mut Outcome,
) -> Result<Vec<MetricRecord>> {
    let records = match &cfg.metrics_csv {
        Some(_) => tables::load_metrics_csv(cfg.require(&cfg.metrics_csv, "--metrics-csv")?)?,
        None => {
            let (records, warnings) = compute_records(cfg, metrics)?;
            out.warnings.extend(warnings);
            out.write(
                cfg.output_dir.join(METRICS_FILE),
                &tables::metrics_csv(&records),
            )?;
            records
        }
    };
    Ok(records
        .into_iter()
        .filter(|r| cfg.wants_model(&r.model_id) && metrics.contains(&r.metric))
        .collect())
}

fn selected_transfers(cfg: &RunConfig) -> Result<Vec<TransferRecord>> {
    let all = tables::load_transfer_csv(cfg.require(&cfg.transfer_csv, "--transfer")?)?;
    let selected: Vec<TransferRecord> = all
        .into_iter()
        .filter(|t| cfg.wants_model(&t.model_id) && cfg.tasks.contains(&t.task))
        .collect();
    if selected.is_empty() {
        return Err(Error::Data(
            "no transfer rows for the selected models and tasks".into(),
        ));
    }
    Ok(selected)
}

// ---------------------------------------------------------------- correlate

/// Tables derived from per-(model, task) results alone.
pub fn results_report(
    results: &[StratifiedCorrelation],
    tasks: &[Task],
    metrics: &[Metric],
) -> Report {
    let mut report = Report::default();
    let present: BTreeSet<Task> = results.iter().filter_map(|r| r.stratum.task).collect();
    for &task in tasks.iter().filter(|t| present.contains(t)) {
        report.push(report::task_table(results, task, metrics));
    }
    report.push(report::summary_table(&aggregate_conditions(results)));
    match domain_effect(results) {
        Ok(effects) => report.push(report::domain_table(&effects)),
        Err(e) => report.notes.push(format!("domain table skipped: {e}")),
    }
    if metrics.contains(&Metric::Cka) {
        report.push(report::cka_table(results, tasks));
    }
    match model_summary(results) {
        Ok(summaries) => report.push(report::model_table(&summaries)),
        Err(e) => report.notes.push(format!("model summary skipped: {e}")),
    }
    report
        .notes
        .push("P@1 is the source-to-target direction; CSLS is the mean over aligned pairs".into());
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub outcome: Outcome,
    pub results: Vec<StratifiedCorrelation>,
    pub pooled: Vec<StratifiedCorrelation>,
    pub report: Report,
}

fn simpson_points_csv(joined: &Joined, task: Task) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["model", "source", "target", "metric_value", "score"])
        .expect("in-memory writer");
    for p in joined.pairs.iter().filter(|p| p.task == task) {
        w.write_record([
            p.model_id.as_str(),
            p.source.as_str(),
            p.target.as_str(),
            &format!("{:.6}", p.metric_value),
            &format!("{:.6}", p.score),
        ])
        .expect("in-memory writer");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
}

pub fn correlate(cfg: &RunConfig) -> Result<Correlation> {
    if cfg.fixture {
        return correlate_fixture(cfg);
    }
    let metrics = cfg.metrics_or(&Metric::HEADLINE);
    let mut out = Outcome::default();
    let transfers = selected_transfers(cfg)?;
    let records = metric_records(cfg, &metrics, &mut out)?;
    let policy = PValuePolicy::with_seed(cfg.seed);
    let options = CorrelateOptions {
        allow_pooled: cfg.allow_pooled,
        policy,
    };

    let mut results = Vec::new();
    let mut pooled = Vec::new();
    let mut joins = BTreeMap::new();
    for &metric in &metrics {
        let joined = join(&records, &transfers, metric)?;
        out.lines.push(joined.note());
        let outcome = correlate_stratified(&joined, StratumLevel::PerModelTask, &options)?;
        for (key, why) in outcome.skipped {
            out.warnings
                .push(format!("stratum {key} ({metric}) skipped: {why}"));
        }
        results.extend(outcome.results);
        if cfg.allow_pooled {
            for level in [StratumLevel::PerTaskPooled, StratumLevel::FullyPooled] {
                pooled.extend(correlate_stratified(&joined, level, &options)?.results);
            }
        }
        joins.insert(metric, joined);
    }
    results.sort_by(|a, b| (&a.stratum, a.metric).cmp(&(&b.stratum, b.metric)));
    pooled.sort_by(|a, b| (&a.stratum, a.metric).cmp(&(&b.stratum, b.metric)));
    if cfg.allow_pooled {
        out.warnings
            .push(format!("--allow-pooled: {POOLED_WARNING}"));
    } else {
        out.warnings.push(
            "pooled correlations omitted; pass --allow-pooled to include them (pooling across models can reverse the sign)".into(),
        );
    }

    let mut report = results_report(&results, &cfg.tasks, &metrics);
    if let Some(gap) = joins.get(&Metric::CosineGap) {
        for &task in &cfg.tasks {
            let pairs = gap.for_task(task);
            if pairs.is_empty() {
                continue;
            }
            match detect_simpson(&pairs, &policy) {
                Ok(finding) => {
                    report.push(report::simpson_table(&finding, task, Metric::CosineGap));
                    out.write(
                        cfg.output_dir.join(format!(
                            "simpson_points_{}.csv",
                            task.as_str().to_lowercase()
                        )),
                        &simpson_points_csv(gap, task),
                    )?;
                }
                Err(e) => report
                    .notes
                    .push(format!("Simpson check for {} skipped: {e}", task.as_str())),
            }
        }
        if let Some(p) = &cfg.coverage_csv {
            let coverage = tables::load_coverage_csv(p)?;
            for &task in &cfg.tasks {
                let pairs = gap.for_task(task);
                if pairs.is_empty() {
                    continue;
                }
                let splits = pretraining_stratified(&pairs, &coverage, &policy)?;
                report.push(report::pretraining_effect_table(&splits, task));
                report.push(report::pretraining_rho_table(
                    &splits,
                    task,
                    Metric::CosineGap,
                ));
            }
        }
    } else {
        report
            .notes
            .push("Simpson and pretraining tables need cosine_gap, which was not selected".into());
    }
    if metrics.len() >= 2 {
        let matrix = inter_metric_correlation(&records)?;
        report.push(report::inter_metric_table(&report::inter_metric_pairs(
            &matrix,
        )));
    }
    if let Some(p) = &cfg.uriel_csv {
        let uriel = tables::load_uriel_csv(p)?;
        let kinds: Vec<UrielKind> = uriel
            .iter()
            .map(|u| u.kind)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let cmp = uriel_comparison(&records, &transfers, &uriel, &kinds, &metrics, &policy)?;
        report.push(report::uriel_table(&cmp));
    }

    out.write(
        cfg.output_dir.join(RESULTS_FILE),
        &tables::results_csv(&results),
    )?;
    if cfg.allow_pooled {
        out.write(
            cfg.output_dir.join(POOLED_RESULTS_FILE),
            &tables::results_csv(&pooled),
        )?;
        let mut t = Table::new(
            "pooled",
            "Pooled correlations (across models)",
            &["Stratum", "Metric", "ρ", "n"],
        );
        for r in &pooled {
            t.push(vec![
                r.stratum.to_string().into(),
                r.metric.label().into(),
                report::Cell::Rho(r.result.rho, r.result.stars()),
                report::Cell::Int(r.result.n),
            ]);
        }
        t.note(POOLED_WARNING);
        report.push(t);
    }
    out.write_report(cfg, &report, "correlate")?;
    Ok(Correlation {
        outcome: out,
        results,
        pooled,
        report,
    })
}

/// Correlation tables from the bundled reference results.
fn correlate_fixture(cfg: &RunConfig) -> Result<Correlation> {
    let metrics = cfg.metrics_or(&Metric::HEADLINE);
    let results: Vec<StratifiedCorrelation> = fixtures::correlations()?
        .into_iter()
        .filter(|r| {
            metrics.contains(&r.metric)
                && r.stratum.task.is_some_and(|t| cfg.tasks.contains(&t))
                && r.stratum
                    .model_id
                    .as_deref()
                    .is_some_and(|m| cfg.wants_model(m))
        })
        .collect();
    let mut out = Outcome::default();
    out.lines
        .push(format!("{} reference conditions", results.len()));
    let mut report = results_report(&results, &cfg.tasks, &metrics);
    report.push(report::simpson_table(
        &fixtures::simpson()?,
        Task::Ner,
        Metric::CosineGap,
    ));
    let splits = fixtures::pretraining()?;
    report.push(report::pretraining_effect_table(&splits, Task::Ner));
    report.push(report::pretraining_rho_table(
        &splits,
        Task::Ner,
        Metric::CosineGap,
    ));
    let inter: Vec<_> = fixtures::inter_metric()?
        .into_iter()
        .map(|(a, b, rho)| (a, b, rho, None))
        .collect();
    report.push(report::inter_metric_table(&inter));
    report.push(report::uriel_table(&fixtures::uriel()?));
    report.notes.push(
        "source: bundled reference per-condition correlations; p recomputed from rho and n".into(),
    );
    out.write(
        cfg.output_dir.join(RESULTS_FILE),
        &tables::results_csv(&results),
    )?;
    out.write_report(cfg, &report, "correlate")?;
    Ok(Correlation {
        outcome: out,
        results,
        pooled: Vec::new(),
        report,
    })
}

// ------------------------------------------------------------------- select

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub outcome: Outcome,
    pub reports: Vec<SelectionReport>,
}

pub fn select(cfg: &RunConfig) -> Result<Selection> {
    let metrics = cfg.metrics_or(&[DEFAULT_SELECTION_METRIC]);
    let mut out = Outcome::default();
    let transfers = selected_transfers(cfg)?;
    let records = metric_records(cfg, &metrics, &mut out)?;

    if let Some(target) = cfg.target {
        if !transfers.iter().any(|t| t.target == target) {
            return Err(Error::Usage(format!(
                "unknown target {target}: no transfer rows lead to it"
            )));
        }
    }
    let slices: BTreeSet<(String, Task)> = transfers
        .iter()
        .map(|t| (t.model_id.clone(), t.task))
        .collect();
    let mut reports = Vec::new();
    for (model, task) in &slices {
        let n_languages = transfers
            .iter()
            .filter(|t| &t.model_id == model && t.task == *task)
            .flat_map(|t| [t.source, t.target])
            .collect::<BTreeSet<_>>()
            .len();
        let ks: Vec<usize> = cfg
            .ks
            .iter()
            .copied()
            .filter(|&k| k < n_languages)
            .collect();
        for &metric in &metrics {
            let mut r = select_sources(&records, &transfers, model, *task, metric, &ks)?;
            if let Some(target) = cfg.target {
                r.targets.retain(|s| s.target == target);
            }
            reports.push(r);
        }
    }
    let summary = report::selection_summary_table(&reports, &cfg.ks);
    let mut report = Report::default();
    report.push(summary);
    if let Some(target) = cfg.target {
        report.notes.push(format!(
            "rankings restricted to target {target}; top-K accuracy is over all targets"
        ));
    }
    out.lines
        .push(format!("{} selection report(s)", reports.len()));
    out.write(
        cfg.output_dir.join(SELECTION_FILE),
        &report::selection_csv(&reports),
    )?;
    out.write_report(cfg, &report, "select")?;
    Ok(Selection {
        outcome: out,
        reports,
    })
}

// ------------------------------------------------------------------- report

/// Re-renders the correlation tables from a results CSV (or the bundled
/// reference results).
pub fn render(cfg: &RunConfig) -> Result<(Outcome, Report)> {
    let metrics = cfg.metrics_or(&Metric::HEADLINE);
    let results = if cfg.fixture {
        fixtures::correlations()?
    } else {
        let default = cfg.output_dir.join(RESULTS_FILE);
        let path = cfg.results_csv.clone().unwrap_or(default);
        if !path.exists() {
            return Err(Error::Config(format!(
                "results CSV {} does not exist; run `correlate` first or pass --results",
                path.display()
            )));
        }
        tables::load_results_csv(&path)?
    };
    let results: Vec<StratifiedCorrelation> = results
        .into_iter()
        .filter(|r| {
            metrics.contains(&r.metric)
                && r.stratum.model_id.is_some()
                && r.stratum.task.is_some_and(|t| cfg.tasks.contains(&t))
                && r.stratum
                    .model_id
                    .as_deref()
                    .is_some_and(|m| cfg.wants_model(m))
        })
        .collect();
    if results.is_empty() {
        return Err(Error::Data("no per-model results to report".into()));
    }
    let report = results_report(&results, &cfg.tasks, &metrics);
    let mut out = Outcome::default();
    out.write_report(cfg, &report, "report")?;
    Ok((out, report))
}
