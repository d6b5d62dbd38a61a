//! Table rendering: plain text, markdown, and CSV from one cell model.
//!
//! Text and markdown round to two decimals; CSV keeps six so that every
//! displayed number can be traced to its source.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use xling_core::analysis::{
    ConditionSummary, DomainEffect, Feature, InterMetricMatrix, ModelSummary, PretrainingSplit,
    SimpsonFinding, StratifiedCorrelation, UrielComparison,
};
use xling_core::rank_stats::CorrelationResult;
use xling_core::selection::SelectionReport;
use xling_core::{Metric, Task};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    /// Two decimals in text.
    Num(f64),
    /// A number with an explicit display precision.
    Fixed(f64, usize),
    /// A correlation with its significance stars.
    Rho(f64, &'static str),
    /// A number highlighted as the best in its group.
    Best(f64),
    Int(usize),
    Ratio(usize, usize),
    Percent(f64),
    Blank,
}

fn fixed(v: f64, digits: usize) -> String {
    let s = format!("{v:.digits$}");
    // Avoid "-0.00" for values that round to zero.
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

impl Cell {
    fn display(&self, markdown: bool) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(v) => fixed(*v, 2),
            Cell::Fixed(v, d) => fixed(*v, *d),
            Cell::Rho(v, stars) => format!("{}{stars}", fixed(*v, 2)),
            Cell::Best(v) if markdown => format!("**{}**", fixed(*v, 2)),
            Cell::Best(v) => format!("{} <", fixed(*v, 2)),
            Cell::Int(n) => n.to_string(),
            Cell::Ratio(a, b) => format!("{a}/{b}"),
            Cell::Percent(v) => format!("{}%", fixed(v * 100.0, 0)),
            Cell::Blank => "--".to_string(),
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(v)
            | Cell::Fixed(v, _)
            | Cell::Rho(v, _)
            | Cell::Best(v)
            | Cell::Percent(v) => fixed(*v, 6),
            Cell::Int(n) => n.to_string(),
            Cell::Ratio(a, b) => format!("{a}/{b}"),
            Cell::Blank => String::new(),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem for the CSV rendering.
    pub slug: String,
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(slug: impl Into<String>, title: impl Into<String>, header: &[&str]) -> Self {
        Self {
            slug: slug.into(),
            title: title.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn cell(&self, row_label: &str, column: &str) -> Option<&Cell> {
        let col = self.header.iter().position(|h| h == column)?;
        self.rows
            .iter()
            .find(|r| matches!(&r[0], Cell::Text(s) if s == row_label))
            .map(|r| &r[col])
    }

    pub fn render_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|c| c.display(false)).collect())
            .collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|i| {
                cells
                    .iter()
                    .map(|r| r[i].chars().count())
                    .chain([self.header[i].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |fields: &[String]| {
            let mut s = String::new();
            for (i, f) in fields.iter().enumerate() {
                let pad = widths[i] - f.chars().count();
                if i == 0 {
                    s.push_str(f);
                    s.push_str(&" ".repeat(pad));
                } else {
                    s.push_str("  ");
                    s.push_str(&" ".repeat(pad));
                    s.push_str(f);
                }
            }
            s.trim_end().to_string()
        };
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        let _ = writeln!(out, "{}", "=".repeat(self.title.chars().count()));
        let _ = writeln!(out, "{}", line(&self.header));
        let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len().saturating_sub(1));
        let _ = writeln!(out, "{}", "-".repeat(total));
        for r in &cells {
            let _ = writeln!(out, "{}", line(r));
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }

    pub fn render_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "### {}\n", self.title);
        let _ = writeln!(out, "| {} |", self.header.join(" | "));
        let sep: Vec<&str> = (0..self.header.len())
            .map(|i| if i == 0 { ":---" } else { "---:" })
            .collect();
        let _ = writeln!(out, "| {} |", sep.join(" | "));
        for r in &self.rows {
            let cells: Vec<String> = r
                .iter()
                .map(|c| c.display(true).replace('|', "\\|"))
                .collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        if !self.notes.is_empty() {
            out.push('\n');
            for n in &self.notes {
                let _ = writeln!(out, "- {n}");
            }
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let header: Vec<String> = self.header.iter().map(|h| csv_name(h)).collect();
        w.write_record(&header).expect("in-memory writer");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::csv))
                .expect("in-memory writer");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
    }
}

/// Lower-case, underscore-separated column names for CSV headers.
fn csv_name(h: &str) -> String {
    let mut s = String::new();
    for c in h.chars() {
        match c {
            'a'..='z' | '0'..='9' => s.push(c),
            'A'..='Z' => s.push(c.to_ascii_lowercase()),
            'ρ' => s.push_str("rho"),
            'Δ' => s.push_str("delta"),
            '@' => s.push_str("_at_"),
            '%' => s.push_str("pct"),
            _ => {
                if !s.ends_with('_') && !s.is_empty() {
                    s.push('_');
                }
            }
        }
    }
    s.trim_end_matches('_').to_string()
}

/// An ordered set of tables written together.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn push(&mut self, table: Table) {
        self.tables.push(table);
    }

    pub fn table(&self, slug: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.slug == slug)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        if !self.notes.is_empty() {
            out.push('\n');
        }
        let parts: Vec<String> = self.tables.iter().map(Table::render_text).collect();
        out.push_str(&parts.join("\n"));
        out
    }

    pub fn render_markdown(&self) -> String {
        let mut out = String::new();
        for n in &self.notes {
            let _ = writeln!(out, "- {n}");
        }
        if !self.notes.is_empty() {
            out.push('\n');
        }
        let parts: Vec<String> = self.tables.iter().map(Table::render_markdown).collect();
        out.push_str(&parts.join("\n"));
        out
    }

    /// `<stem>.txt`, `<stem>.md`, and one `<slug>.csv` per table.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write_file(&dir.join(format!("{stem}.txt")), &self.render_text())?;
        write_file(&dir.join(format!("{stem}.md")), &self.render_markdown())?;
        for t in &self.tables {
            write_file(&dir.join(format!("{}.csv", t.slug)), &t.render_csv())?;
        }
        Ok(())
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn rho_cell(r: &CorrelationResult) -> Cell {
    Cell::Rho(r.rho, r.stars())
}

fn models_of(results: &[StratifiedCorrelation]) -> Vec<String> {
    results
        .iter()
        .filter_map(|r| r.stratum.model_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn lookup<'a>(
    results: &'a [StratifiedCorrelation],
    model: &str,
    task: Task,
    metric: Metric,
) -> Option<&'a StratifiedCorrelation> {
    results.iter().find(|r| {
        r.metric == metric
            && r.stratum.task == Some(task)
            && r.stratum.model_id.as_deref() == Some(model)
    })
}

/// Metric-by-model correlations for one task.
pub fn task_table(results: &[StratifiedCorrelation], task: Task, metrics: &[Metric]) -> Table {
    let models = models_of(results);
    let mut header = vec!["Metric"];
    header.extend(models.iter().map(String::as_str));
    let ns: BTreeSet<usize> = results
        .iter()
        .filter(|r| r.stratum.task == Some(task) && r.stratum.model_id.is_some())
        .map(|r| r.result.n)
        .collect();
    let n_text = match ns.len() {
        1 => format!("n = {} pairs per model", ns.iter().next().unwrap()),
        _ => "n varies by model".to_string(),
    };
    let mut t = Table::new(
        format!("correlations_{}", task.as_str().to_lowercase()),
        format!(
            "Spearman correlations with {} transfer ({n_text})",
            task.as_str()
        ),
        &header,
    );
    for &metric in metrics {
        let mut row = vec![Cell::from(metric.label())];
        for m in &models {
            row.push(lookup(results, m, task, metric).map_or(Cell::Blank, |r| rho_cell(&r.result)));
        }
        t.push(row);
    }
    t.note("*** p < 0.001, ** p < 0.01, * p < 0.05");
    t
}

pub fn summary_table(summaries: &[ConditionSummary]) -> Table {
    let mut t = Table::new(
        "summary",
        "Metric-transfer correlations across conditions",
        &["Metric", "Mean ρ", "Std", "Min", "Max", "Sig."],
    );
    for s in summaries {
        t.push(vec![
            Cell::from(s.metric.label()),
            Cell::Num(s.mean),
            s.std.map_or(Cell::Blank, Cell::Num),
            Cell::Num(s.min),
            Cell::Num(s.max),
            Cell::Ratio(s.significant, s.count),
        ]);
    }
    t.note("Std is the sample standard deviation; Sig. counts conditions with p < 0.05");
    t
}

pub fn domain_table(effects: &[DomainEffect]) -> Table {
    let mut t = Table::new(
        "domain",
        "Formal-text tasks (NER, POS) versus Twitter-domain task (SENT)",
        &["Metric", "Formal", "Twitter", "Δ"],
    );
    for e in effects {
        t.push(vec![
            Cell::from(e.metric.label()),
            Cell::Num(e.formal_mean),
            Cell::Num(e.twitter_mean),
            Cell::Num(e.delta),
        ]);
    }
    t
}

/// CKA correlations only, task by model.
pub fn cka_table(results: &[StratifiedCorrelation], tasks: &[Task]) -> Table {
    let models = models_of(results);
    let mut header = vec!["Task"];
    header.extend(models.iter().map(String::as_str));
    let mut t = Table::new("cka", "CKA correlations with transfer performance", &header);
    let mut significant = Vec::new();
    for &task in tasks {
        let mut row = vec![Cell::from(task.as_str())];
        for m in &models {
            let r = lookup(results, m, task, Metric::Cka);
            if r.is_some_and(|r| r.result.significant) {
                significant.push(format!("{m}/{}", task.as_str()));
            }
            row.push(r.map_or(Cell::Blank, |r| rho_cell(&r.result)));
        }
        t.push(row);
    }
    t.note(if significant.is_empty() {
        "no CKA condition reaches p < 0.05".to_string()
    } else {
        format!("significant: {}", significant.join(", "))
    });
    t
}

pub fn model_table(summaries: &[ModelSummary]) -> Table {
    let mut t = Table::new(
        "models",
        "Model-level summary of metric-transfer correlations",
        &["Model", "Mean ρ", "Best", "Worst", "Conditions"],
    );
    let mut sorted: Vec<&ModelSummary> = summaries.iter().collect();
    sorted.sort_by(|a, b| b.mean.total_cmp(&a.mean).then(a.model_id.cmp(&b.model_id)));
    for s in sorted {
        t.push(vec![
            Cell::from(s.model_id.as_str()),
            Cell::Num(s.mean),
            Cell::Num(s.best),
            Cell::Num(s.worst),
            Cell::Int(s.count),
        ]);
    }
    t
}

pub fn simpson_table(finding: &SimpsonFinding, task: Task, metric: Metric) -> Table {
    let mut t = Table::new(
        format!("simpson_{}", task.as_str().to_lowercase()),
        format!(
            "Pooled versus per-model correlation, {} / {}",
            task.as_str(),
            metric.as_str()
        ),
        &[
            "Analysis",
            "ρ",
            "n",
            &format!("Avg {}", metric.as_str()),
            "Avg score",
        ],
    );
    t.push(vec![
        Cell::from("Pooled (all)"),
        rho_cell(&finding.pooled),
        Cell::Int(finding.pooled.n),
        Cell::Blank,
        Cell::Blank,
    ]);
    for (group, r) in &finding.per_group {
        let means = finding.group_means.get(group);
        t.push(vec![
            Cell::from(group.as_str()),
            rho_cell(r),
            Cell::Int(r.n),
            means.map_or(Cell::Blank, |m| Cell::Fixed(m.metric, 3)),
            means.map_or(Cell::Blank, |m| Cell::Num(m.score)),
        ]);
    }
    t.note(if finding.reversed {
        "sign reversal: the pooled correlation opposes every per-model correlation (Simpson's paradox)"
    } else {
        "no sign reversal between pooled and per-model correlations"
    });
    t
}

pub fn pretraining_effect_table(splits: &[PretrainingSplit], task: Task) -> Table {
    let mut t = Table::new(
        format!("pretraining_scores_{}", task.as_str().to_lowercase()),
        format!(
            "{} transfer score by target pretraining status",
            task.as_str()
        ),
        &["Model", "Seen", "Seen n", "Unseen", "Unseen n", "Δ", "Δ %"],
    );
    for s in splits {
        let delta = match (s.seen.mean_score, s.unseen.mean_score) {
            (Some(a), Some(b)) => Some((a - b, (a - b) / b)),
            _ => None,
        };
        t.push(vec![
            Cell::from(s.model_id.as_str()),
            s.seen.mean_score.map_or(Cell::Blank, Cell::Num),
            Cell::Int(s.seen.n),
            s.unseen.mean_score.map_or(Cell::Blank, Cell::Num),
            Cell::Int(s.unseen.n),
            delta.map_or(Cell::Blank, |d| Cell::Num(d.0)),
            delta.map_or(Cell::Blank, |d| Cell::Percent(d.1)),
        ]);
        if s.unseen.n == 0 {
            t.note(format!("{} has no unseen targets", s.model_id));
        }
        if s.seen.n == 0 {
            t.note(format!("{} has no seen targets", s.model_id));
        }
    }
    t
}

pub fn pretraining_rho_table(splits: &[PretrainingSplit], task: Task, metric: Metric) -> Table {
    let mut t = Table::new(
        format!("pretraining_correlations_{}", task.as_str().to_lowercase()),
        format!(
            "{} correlation with {} transfer by target pretraining status",
            metric.as_str(),
            task.as_str()
        ),
        &[
            "Model",
            "Target seen ρ",
            "Seen n",
            "Target unseen ρ",
            "Unseen n",
        ],
    );
    for s in splits {
        t.push(vec![
            Cell::from(s.model_id.as_str()),
            s.seen.correlation.as_ref().map_or(Cell::Blank, rho_cell),
            Cell::Int(s.seen.n),
            s.unseen.correlation.as_ref().map_or(Cell::Blank, rho_cell),
            Cell::Int(s.unseen.n),
        ]);
    }
    t
}

/// Metric-pair correlations; `n` is blank when unknown.
pub fn inter_metric_table(pairs: &[(Metric, Metric, f64, Option<usize>)]) -> Table {
    let mut t = Table::new(
        "inter_metric",
        "Correlations between metric values",
        &["Metric pair", "ρ", "n"],
    );
    for &(a, b, rho, n) in pairs {
        t.push(vec![
            Cell::from(format!("{} vs {}", a.label(), b.label())),
            Cell::Num(rho),
            n.map_or(Cell::Blank, Cell::Int),
        ]);
    }
    t
}

/// Upper-triangle pairs of a computed inter-metric matrix.
pub fn inter_metric_pairs(m: &InterMetricMatrix) -> Vec<(Metric, Metric, f64, Option<usize>)> {
    let k = m.metrics.len();
    let mut out = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            out.push((
                m.metrics[i],
                m.metrics[j],
                m.rho[i * k + j],
                Some(m.n[i * k + j]),
            ));
        }
    }
    out
}

fn feature_label(f: Feature) -> String {
    match f {
        Feature::Embedding(m) => m.as_str().to_string(),
        Feature::Uriel(k) => format!("URIEL {}", k.as_str()),
    }
}

pub fn uriel_table(cmp: &UrielComparison) -> Table {
    let models: Vec<String> = cmp
        .rows
        .iter()
        .flat_map(|r| r.abs_rho.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut header = vec!["Task", "Feature"];
    header.extend(models.iter().map(String::as_str));
    let mut t = Table::new(
        "uriel",
        "Embedding metrics versus URIEL distances (|ρ|)",
        &header,
    );
    for row in &cmp.rows {
        let mut cells = vec![
            Cell::from(row.task.as_str()),
            Cell::from(feature_label(row.feature)),
        ];
        for m in &models {
            let winner = cmp.winners.get(&(row.task, m.clone())) == Some(&row.feature);
            cells.push(match row.abs_rho.get(m) {
                Some(&v) if winner => Cell::Best(v),
                Some(&v) => Cell::Num(v),
                None => Cell::Blank,
            });
        }
        t.push(cells);
    }
    t.note("URIEL distances correlate negatively with transfer; absolute values shown. Marked cells have the larger |ρ| per model");
    for (kind, n) in &cmp.excluded {
        if *n > 0 {
            t.note(format!(
                "{n} transfer rows had no URIEL {} distance and were excluded",
                kind.as_str()
            ));
        }
    }
    t
}

/// Top-K accuracy rows, one per (task, model), with random baselines.
pub fn selection_summary_table(reports: &[SelectionReport], ks: &[usize]) -> Table {
    let mut header: Vec<String> = vec!["Task".into(), "Model".into(), "Metric".into(), "N".into()];
    header.extend(ks.iter().map(|k| format!("Top-{k}")));
    header.extend(ks.iter().map(|k| format!("Rand-{k}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(
        "selection_summary",
        "Source selection accuracy",
        &header_refs,
    );
    for r in reports {
        let mut row = vec![
            Cell::from(r.task.as_str()),
            Cell::from(r.model_id.as_str()),
            Cell::from(r.metric.as_str()),
            Cell::Int(r.n_languages),
        ];
        let by_k: BTreeMap<usize, _> = r.top_k.iter().map(|tk| (tk.k, tk)).collect();
        for k in ks {
            row.push(
                by_k.get(k)
                    .map_or(Cell::Blank, |tk| Cell::Percent(tk.accuracy)),
            );
        }
        for k in ks {
            row.push(
                by_k.get(k)
                    .map_or(Cell::Blank, |tk| Cell::Percent(tk.random_baseline)),
            );
        }
        for tk in &r.top_k {
            if tk.below_baseline() {
                t.note(format!(
                    "{}/{} top-{} accuracy is below the random baseline",
                    r.task.as_str(),
                    r.model_id,
                    tk.k
                ));
            }
        }
        for k in ks {
            if !by_k.contains_key(k) {
                t.note(format!(
                    "{}/{}: K = {k} exceeds the {} candidates",
                    r.task.as_str(),
                    r.model_id,
                    r.n_languages.saturating_sub(1)
                ));
            }
        }
        let tied = r.targets.iter().filter(|s| s.oracle_tied()).count();
        if tied > 0 {
            t.note(format!(
                "{}/{}: {tied} target(s) have tied oracle-best sources; retrieving any of them counts as a hit",
                r.task.as_str(),
                r.model_id
            ));
        }
        for (target, why) in &r.excluded {
            t.note(format!(
                "{}/{}: target {target} excluded ({why})",
                r.task.as_str(),
                r.model_id
            ));
        }
    }
    t
}

pub const SELECTION_HEADER: &[&str] = &[
    "model",
    "task",
    "target",
    "rank",
    "source",
    "metric_value",
    "is_oracle_best",
];

/// Per-target rankings in long form.
pub fn selection_csv(reports: &[SelectionReport]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(SELECTION_HEADER).expect("in-memory writer");
    for r in reports {
        for sel in &r.targets {
            for (i, src) in sel.ranked.iter().enumerate() {
                w.write_record([
                    r.model_id.as_str(),
                    r.task.as_str(),
                    sel.target.as_str(),
                    &(i + 1).to_string(),
                    src.source.as_str(),
                    &format!("{:.6}", src.value),
                    if sel.oracle_best.contains(&src.source) {
                        "true"
                    } else {
                        "false"
                    },
                ])
                .expect("in-memory writer");
            }
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_render_per_format() {
        assert_eq!(Cell::Rho(0.6, "***").display(false), "0.60***");
        assert_eq!(Cell::Num(-0.001).display(false), "0.00");
        assert_eq!(Cell::Num(-0.13).display(false), "-0.13");
        assert_eq!(Cell::Percent(1.0 / 11.0).display(false), "9%");
        assert_eq!(Cell::Best(0.6).display(true), "**0.60**");
        assert_eq!(Cell::Rho(0.6, "***").csv(), "0.600000");
        assert_eq!(Cell::Blank.csv(), "");
    }

    #[test]
    fn text_columns_align() {
        let mut t = Table::new("x", "Title", &["Metric", "A"]);
        t.push(vec![Cell::from("cosine_gap"), Cell::Num(0.5)]);
        t.push(vec![Cell::from("CKA"), Cell::Num(-0.13)]);
        let text = t.render_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[2], "Metric          A");
        assert_eq!(lines[4], "cosine_gap   0.50");
        assert_eq!(lines[5], "CKA         -0.13");
        assert_eq!(
            t.render_csv(),
            "metric,a\ncosine_gap,0.500000\nCKA,-0.130000\n"
        );
    }

    #[test]
    fn csv_names() {
        assert_eq!(csv_name("Mean ρ"), "mean_rho");
        assert_eq!(csv_name("Top-1"), "top_1");
        assert_eq!(csv_name("Δ %"), "delta_pct");
        assert_eq!(csv_name("Sig."), "sig");
    }
}
