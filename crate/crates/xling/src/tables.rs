//! CSV inputs and outputs.
//!
//! Loaders are strict: the header must match exactly, every row is
//! validated, and duplicate keys are rejected with both line numbers.
//! Writers emit rows in the order given, so callers own determinism.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use xling_core::analysis::{StratifiedCorrelation, StratumKey};
use xling_core::rank_stats::{CorrelationResult, PValueMethod};
use xling_core::{
    CoverageTable, LanguageId, Metric, MetricRecord, Task, TransferRecord, UrielDistance, UrielKind,
};

use crate::error::{Error, Result};

pub const TRANSFER_HEADER: &[&str] = &["model", "task", "source", "target", "score"];
pub const URIEL_HEADER: &[&str] = &["lang_a", "lang_b", "kind", "value"];
pub const COVERAGE_HEADER: &[&str] = &["model", "language", "seen"];
pub const METRICS_HEADER: &[&str] = &["model", "source", "target", "metric", "value", "k"];
pub const RESULTS_HEADER: &[&str] = &[
    "stratum_model",
    "stratum_task",
    "metric",
    "rho",
    "p",
    "n",
    "stars",
];
pub const FIXTURE_HEADER: &[&str] = &["task", "model", "metric", "rho", "stars"];

/// Placeholder in results rows for a dimension that was pooled over.
pub const POOLED: &str = "all";

/// One parsed data row with its 1-based line number.
struct Row {
    line: u64,
    fields: csv::StringRecord,
}

struct Table<'a> {
    path: &'a Path,
    header: &'static [&'static str],
    rows: Vec<Row>,
}

impl<'a> Table<'a> {
    fn read(path: &'a Path, text: &str, header: &'static [&'static str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let found = reader
            .headers()
            .map_err(|e| Error::Table {
                path: path.to_path_buf(),
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        if found.iter().ne(header.iter().copied()) {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                expected: header.join(","),
                found: found.iter().collect::<Vec<_>>().join(","),
            });
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let fields = record.map_err(|e| Error::Table {
                path: path.to_path_buf(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = fields.position().map_or(0, |p| p.line());
            rows.push(Row { line, fields });
        }
        Ok(Self { path, header, rows })
    }

    fn err(&self, line: u64, message: impl Into<String>) -> Error {
        Error::Table {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn field<T>(&self, row: &Row, i: usize) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let raw = &row.fields[i];
        raw.parse::<T>()
            .map_err(|e| self.err(row.line, format!("column `{}`: {e}", self.header_name(i))))
    }

    fn number(&self, row: &Row, i: usize) -> Result<f64> {
        let v: f64 = self.field(row, i)?;
        if !v.is_finite() {
            return Err(self.err(
                row.line,
                format!("column `{}` is not finite", self.header_name(i)),
            ));
        }
        Ok(v)
    }

    fn header_name(&self, i: usize) -> &'static str {
        self.header[i]
    }

    fn wrap(&self, line: u64, e: xling_core::Error) -> Error {
        self.err(line, e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Remembers where each key was first seen.
struct KeyIndex<K: Ord> {
    first: BTreeMap<K, u64>,
}

impl<K: Ord + std::fmt::Debug> KeyIndex<K> {
    fn new() -> Self {
        Self {
            first: BTreeMap::new(),
        }
    }

    fn insert(
        &mut self,
        table: &Table,
        key: K,
        line: u64,
        shown: impl FnOnce() -> String,
    ) -> Result<()> {
        if let Some(&prev) = self.first.get(&key) {
            return Err(table.err(
                line,
                format!("duplicate key {} (first at line {prev})", shown()),
            ));
        }
        self.first.insert(key, line);
        Ok(())
    }
}

pub fn parse_transfer_csv(path: &Path, text: &str) -> Result<Vec<TransferRecord>> {
    let table = Table::read(path, text, TRANSFER_HEADER)?;
    let mut keys = KeyIndex::new();
    let mut out = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let model = row.fields[0].to_string();
        let task: Task = table.field(row, 1)?;
        let source: LanguageId = table.field(row, 2)?;
        let target: LanguageId = table.field(row, 3)?;
        let score = table.number(row, 4)?;
        let record = TransferRecord::new(model, task, source, target, score)
            .map_err(|e| table.wrap(row.line, e))?;
        keys.insert(
            &table,
            (record.model_id.clone(), task, source, target),
            row.line,
            || format!("({}, {task}, {source}, {target})", record.model_id),
        )?;
        out.push(record);
    }
    Ok(out)
}

pub fn load_transfer_csv(path: &Path) -> Result<Vec<TransferRecord>> {
    parse_transfer_csv(path, &read_text(path)?)
}

/// URIEL rows. A pair may appear in both orders only with the same value.
pub fn parse_uriel_csv(path: &Path, text: &str) -> Result<Vec<UrielDistance>> {
    let table = Table::read(path, text, URIEL_HEADER)?;
    let mut exact = KeyIndex::new();
    let mut unordered: BTreeMap<(LanguageId, LanguageId, UrielKind), (f64, u64)> = BTreeMap::new();
    let mut out = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let a: LanguageId = table.field(row, 0)?;
        let b: LanguageId = table.field(row, 1)?;
        let kind: UrielKind = table.field(row, 2)?;
        let value = table.number(row, 3)?;
        let d = UrielDistance::new(a, b, kind, value).map_err(|e| table.wrap(row.line, e))?;
        exact.insert(&table, (a, b, kind), row.line, || {
            format!("({a}, {b}, {kind})")
        })?;
        let (lo, hi) = d.unordered();
        if let Some(&(prev, prev_line)) = unordered.get(&(lo, hi, kind)) {
            if prev != value {
                return Err(table.err(
                    row.line,
                    format!(
                        "asymmetric {kind} distance for {lo}-{hi}: {value} here, {prev} at line {prev_line}"
                    ),
                ));
            }
        } else {
            unordered.insert((lo, hi, kind), (value, row.line));
        }
        out.push(d);
    }
    Ok(out)
}

pub fn load_uriel_csv(path: &Path) -> Result<Vec<UrielDistance>> {
    parse_uriel_csv(path, &read_text(path)?)
}

pub fn parse_coverage_csv(path: &Path, text: &str) -> Result<CoverageTable> {
    let table = Table::read(path, text, COVERAGE_HEADER)?;
    let mut coverage = CoverageTable::new();
    for row in &table.rows {
        let model = &row.fields[0];
        let language: LanguageId = table.field(row, 1)?;
        let seen = match &row.fields[2] {
            "true" => true,
            "false" => false,
            other => {
                return Err(table.err(
                    row.line,
                    format!("column `seen` must be true or false, got {other:?}"),
                ))
            }
        };
        coverage
            .insert(model, language, seen)
            .map_err(|e| table.wrap(row.line, e))?;
    }
    Ok(coverage)
}

pub fn load_coverage_csv(path: &Path) -> Result<CoverageTable> {
    parse_coverage_csv(path, &read_text(path)?)
}

pub fn parse_metrics_csv(path: &Path, text: &str) -> Result<Vec<MetricRecord>> {
    let table = Table::read(path, text, METRICS_HEADER)?;
    let mut keys = KeyIndex::new();
    let mut out = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let model = row.fields[0].to_string();
        if model.is_empty() || model.contains(char::is_whitespace) {
            return Err(table.err(row.line, format!("invalid model id {model:?}")));
        }
        let source: LanguageId = table.field(row, 1)?;
        let target: LanguageId = table.field(row, 2)?;
        let metric: Metric = table.field(row, 3)?;
        let value = table.number(row, 4)?;
        let k = match &row.fields[5] {
            "" => None,
            _ => Some(table.field::<usize>(row, 5)?),
        };
        if source == target {
            return Err(table.err(row.line, format!("same-language pair {source}")));
        }
        let record = MetricRecord {
            model_id: model,
            source,
            target,
            metric,
            value,
            k,
        };
        if !record.in_range() {
            return Err(table.err(
                row.line,
                format!("{metric} value {value} outside its range"),
            ));
        }
        keys.insert(
            &table,
            (record.model_id.clone(), source, target, metric),
            row.line,
            || format!("({}, {source}, {target}, {metric})", record.model_id),
        )?;
        out.push(record);
    }
    Ok(out)
}

pub fn load_metrics_csv(path: &Path) -> Result<Vec<MetricRecord>> {
    parse_metrics_csv(path, &read_text(path)?)
}

fn finish(writer: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("utf-8 output")
}

fn writer_with(header: &[&str]) -> csv::Writer<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory writer");
    w
}

/// Metric rows with six-decimal values; `k` is blank except for CSLS.
pub fn metrics_csv(records: &[MetricRecord]) -> String {
    let mut w = writer_with(METRICS_HEADER);
    for r in records {
        w.write_record([
            r.model_id.as_str(),
            r.source.as_str(),
            r.target.as_str(),
            r.metric.as_str(),
            &format!("{:.6}", r.value),
            &r.k.map(|k| k.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory writer");
    }
    finish(w)
}

pub fn transfer_csv(records: &[TransferRecord]) -> String {
    let mut w = writer_with(TRANSFER_HEADER);
    for r in records {
        w.write_record([
            r.model_id.as_str(),
            r.task.as_str(),
            r.source.as_str(),
            r.target.as_str(),
            &format!("{:.6}", r.score),
        ])
        .expect("in-memory writer");
    }
    finish(w)
}

/// Formats a p-value so that small values keep their precision.
pub fn format_p(p: f64) -> String {
    format!("{p:.6e}")
}

pub fn results_csv(results: &[StratifiedCorrelation]) -> String {
    let mut w = writer_with(RESULTS_HEADER);
    for r in results {
        let model = r.stratum.model_id.as_deref().unwrap_or(POOLED);
        let task = r.stratum.task.map_or(POOLED, Task::as_str);
        w.write_record([
            model,
            task,
            r.metric.as_str(),
            &format!("{:.6}", r.result.rho),
            &format_p(r.result.p_value),
            &r.result.n.to_string(),
            r.result.stars(),
        ])
        .expect("in-memory writer");
    }
    finish(w)
}

/// Reads a results CSV back. Significance is taken from the stored p; the
/// method is inferred from `n` under the default policy.
pub fn parse_results_csv(path: &Path, text: &str) -> Result<Vec<StratifiedCorrelation>> {
    let table = Table::read(path, text, RESULTS_HEADER)?;
    let policy = xling_core::rank_stats::PValuePolicy::default();
    let mut keys = KeyIndex::new();
    let mut out = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let model = match &row.fields[0] {
            POOLED => None,
            m => Some(m.to_string()),
        };
        let task = match &row.fields[1] {
            POOLED => None,
            _ => Some(table.field::<Task>(row, 1)?),
        };
        let metric: Metric = table.field(row, 2)?;
        let rho = table.number(row, 3)?;
        let p = table.number(row, 4)?;
        let n: usize = table.field(row, 5)?;
        if !(-1.0..=1.0).contains(&rho) || !(0.0..=1.0).contains(&p) {
            return Err(table.err(row.line, "rho or p outside its range"));
        }
        let result = CorrelationResult::new(rho, p, n, policy.method_for(n));
        if result.stars() != &row.fields[6] {
            return Err(table.err(
                row.line,
                format!("stars {:?} disagree with p = {p}", &row.fields[6]),
            ));
        }
        keys.insert(&table, (model.clone(), task, metric), row.line, || {
            format!("({}, {}, {metric})", &row.fields[0], &row.fields[1])
        })?;
        out.push(StratifiedCorrelation {
            stratum: StratumKey {
                model_id: model,
                task,
                extra: None,
            },
            metric,
            result,
        });
    }
    Ok(out)
}

pub fn load_results_csv(path: &Path) -> Result<Vec<StratifiedCorrelation>> {
    parse_results_csv(path, &read_text(path)?)
}

/// Reference per-condition correlations (`task,model,metric,rho,stars`).
/// Sample sizes come from `n_for_task`; p is recomputed with the t
/// approximation and must reproduce the reference stars.
pub fn parse_fixture_correlations(
    path: &Path,
    text: &str,
    n_for_task: impl Fn(Task) -> usize,
) -> Result<Vec<StratifiedCorrelation>> {
    let table = Table::read(path, text, FIXTURE_HEADER)?;
    let mut keys = KeyIndex::new();
    let mut out = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let task: Task = table.field(row, 0)?;
        let model = row.fields[1].to_string();
        let metric: Metric = table.field(row, 2)?;
        let rho = table.number(row, 3)?;
        let n = n_for_task(task);
        let p = xling_core::rank_stats::p_value(rho, n, PValueMethod::TApprox, 0)
            .map_err(|e| table.wrap(row.line, e))?
            .p;
        let result = CorrelationResult::new(rho, p, n, PValueMethod::TApprox);
        if result.stars() != &row.fields[4] {
            return Err(table.err(
                row.line,
                format!(
                    "reference stars {:?} disagree with rho = {rho}, n = {n} (p = {p:.4})",
                    &row.fields[4]
                ),
            ));
        }
        keys.insert(&table, (model.clone(), task, metric), row.line, || {
            format!("({model}, {task}, {metric})")
        })?;
        out.push(StratifiedCorrelation {
            stratum: StratumKey::model_task(&model, task),
            metric,
            result,
        });
    }
    out.sort_by(|a, b| (&a.stratum, a.metric).cmp(&(&b.stratum, b.metric)));
    Ok(out)
}
