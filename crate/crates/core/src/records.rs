//! Record types shared by the metric, analysis and selection modules.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Three-letter lowercase ASCII language code (ISO-639-3 shaped; the registry
/// itself is not consulted).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LanguageId([u8; 3]);

impl LanguageId {
    pub fn new(code: &str) -> Result<Self> {
        let bytes = code.as_bytes();
        if bytes.len() != 3 || !bytes.iter().all(u8::is_ascii_lowercase) {
            return Err(Error::InvalidLanguage(code.to_string()));
        }
        Ok(Self([bytes[0], bytes[1], bytes[2]]))
    }

    pub fn as_str(&self) -> &str {
        // Only lowercase ASCII is ever stored.
        core::str::from_utf8(&self.0).unwrap_or("???")
    }
}

impl FromStr for LanguageId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(s)
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LanguageId({})", self.as_str())
    }
}

/// Downstream task of a transfer run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Task {
    Ner,
    Pos,
    Sent,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Ner, Task::Pos, Task::Sent];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Ner => "NER",
            Task::Pos => "POS",
            Task::Sent => "SENT",
        }
    }

    /// NER and POS are news-domain; sentiment is Twitter.
    pub fn is_formal_domain(self) -> bool {
        matches!(self, Task::Ner | Task::Pos)
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NER" => Ok(Task::Ner),
            "POS" => Ok(Task::Pos),
            "SENT" => Ok(Task::Sent),
            other => Err(Error::InvalidArgument(format!("unknown task {other:?}"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the six emitted metric values (P@1 is emitted in both directions).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    CosineMean,
    CosineGap,
    PAt1St,
    PAt1Ts,
    Csls,
    Cka,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::CosineMean,
        Metric::CosineGap,
        Metric::PAt1St,
        Metric::PAt1Ts,
        Metric::Csls,
        Metric::Cka,
    ];

    /// The five metrics reported against transfer; P@1 is the
    /// source-to-target direction.
    pub const HEADLINE: [Metric; 5] = [
        Metric::CosineMean,
        Metric::CosineGap,
        Metric::PAt1St,
        Metric::Csls,
        Metric::Cka,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::CosineMean => "cosine_mean",
            Metric::CosineGap => "cosine_gap",
            Metric::PAt1St => "p_at_1_st",
            Metric::PAt1Ts => "p_at_1_ts",
            Metric::Csls => "csls",
            Metric::Cka => "cka",
        }
    }

    /// Short label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            Metric::CosineMean => "cosine_mean",
            Metric::CosineGap => "cosine_gap",
            Metric::PAt1St => "P@1",
            Metric::PAt1Ts => "P@1 (T->S)",
            Metric::Csls => "CSLS",
            Metric::Cka => "CKA",
        }
    }

    /// Closed value range for the metric, `None` for CSLS which is unbounded.
    pub fn range(self) -> Option<(f64, f64)> {
        match self {
            Metric::CosineMean => Some((-1.0, 1.0)),
            Metric::CosineGap => Some((-2.0, 2.0)),
            Metric::PAt1St | Metric::PAt1Ts | Metric::Cka => Some((0.0, 1.0)),
            Metric::Csls => None,
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {s:?}")))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// URIEL distance family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UrielKind {
    Genetic,
    Syntactic,
    Phonological,
    Inventory,
    Geographic,
}

impl UrielKind {
    pub const ALL: [UrielKind; 5] = [
        UrielKind::Genetic,
        UrielKind::Syntactic,
        UrielKind::Phonological,
        UrielKind::Inventory,
        UrielKind::Geographic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UrielKind::Genetic => "genetic",
            UrielKind::Syntactic => "syntactic",
            UrielKind::Phonological => "phonological",
            UrielKind::Inventory => "inventory",
            UrielKind::Geographic => "geographic",
        }
    }
}

impl FromStr for UrielKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        UrielKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown URIEL kind {s:?}")))
    }
}

impl fmt::Display for UrielKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub(crate) fn check_model_id(model_id: &str) -> Result<()> {
    if model_id.is_empty() || model_id.chars().any(|c| c.is_whitespace() || c == ',') {
        return Err(Error::InvalidIdentifier(model_id.to_string()));
    }
    Ok(())
}

/// Directed (model, source, target) key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey {
    pub model_id: String,
    pub source: LanguageId,
    pub target: LanguageId,
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.model_id, self.source, self.target)
    }
}

/// One metric value for a directed language pair under one model.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub model_id: String,
    pub source: LanguageId,
    pub target: LanguageId,
    pub metric: Metric,
    pub value: f64,
    /// CSLS neighbourhood size; `None` for the other metrics.
    pub k: Option<usize>,
}

impl MetricRecord {
    pub fn key(&self) -> PairKey {
        PairKey {
            model_id: self.model_id.clone(),
            source: self.source,
            target: self.target,
        }
    }

    /// True when the value lies in the metric's declared range (with a
    /// small slack for floating-point round-off).
    pub fn in_range(&self) -> bool {
        const SLACK: f64 = 1e-9;
        match self.metric.range() {
            Some((lo, hi)) => self.value >= lo - SLACK && self.value <= hi + SLACK,
            None => self.value.is_finite(),
        }
    }
}

/// Observed transfer score for one (model, task, source, target) run.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferRecord {
    pub model_id: String,
    pub task: Task,
    pub source: LanguageId,
    pub target: LanguageId,
    pub score: f64,
}

impl TransferRecord {
    pub fn new(
        model_id: impl Into<String>,
        task: Task,
        source: LanguageId,
        target: LanguageId,
        score: f64,
    ) -> Result<Self> {
        let model_id = model_id.into();
        check_model_id(&model_id)?;
        if source == target {
            return Err(Error::SameLanguage(source.to_string()));
        }
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(Error::ScoreOutOfRange(score));
        }
        Ok(Self {
            model_id,
            task,
            source,
            target,
            score,
        })
    }

    pub fn pair_key(&self) -> PairKey {
        PairKey {
            model_id: self.model_id.clone(),
            source: self.source,
            target: self.target,
        }
    }
}

/// Typological distance between two languages; symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct UrielDistance {
    pub lang_a: LanguageId,
    pub lang_b: LanguageId,
    pub kind: UrielKind,
    pub value: f64,
}

impl UrielDistance {
    pub fn new(
        lang_a: LanguageId,
        lang_b: LanguageId,
        kind: UrielKind,
        value: f64,
    ) -> Result<Self> {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(Error::ValueOutOfRange(format!(
                "URIEL {kind} distance {value} for {lang_a}-{lang_b}"
            )));
        }
        Ok(Self {
            lang_a,
            lang_b,
            kind,
            value,
        })
    }

    /// Unordered pair key, smaller code first.
    pub fn unordered(&self) -> (LanguageId, LanguageId) {
        if self.lang_a <= self.lang_b {
            (self.lang_a, self.lang_b)
        } else {
            (self.lang_b, self.lang_a)
        }
    }
}

/// Which languages each model saw during pretraining.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageTable {
    entries: BTreeMap<(String, LanguageId), bool>,
}

impl CoverageTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry; a second entry for the same (model, language) is an
    /// error even when it agrees.
    pub fn insert(&mut self, model_id: &str, language: LanguageId, seen: bool) -> Result<()> {
        check_model_id(model_id)?;
        let key = (model_id.to_string(), language);
        if self.entries.contains_key(&key) {
            return Err(Error::DuplicateKey(format!("({model_id}, {language})")));
        }
        self.entries.insert(key, seen);
        Ok(())
    }

    pub fn seen(&self, model_id: &str, language: LanguageId) -> Option<bool> {
        self.entries.get(&(model_id.to_string(), language)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, LanguageId, bool)> {
        self.entries
            .iter()
            .map(|((m, l), seen)| (m.as_str(), *l, *seen))
    }

    /// Number of languages marked seen for a model.
    pub fn seen_count(&self, model_id: &str) -> usize {
        self.iter()
            .filter(|(m, _, seen)| *m == model_id && *seen)
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn language_codes_are_three_lowercase_letters() {
        assert_eq!(LanguageId::new("swa").unwrap().as_str(), "swa");
        for bad in ["sw", "swah", "SWA", "sw1", "", "éé"] {
            assert!(LanguageId::new(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn transfer_record_validation() {
        let swa = LanguageId::new("swa").unwrap();
        let kin = LanguageId::new("kin").unwrap();
        assert!(TransferRecord::new("afriberta", Task::Ner, swa, kin, 0.41).is_ok());
        assert_eq!(
            TransferRecord::new("afriberta", Task::Ner, swa, kin, 1.2),
            Err(Error::ScoreOutOfRange(1.2))
        );
        assert!(TransferRecord::new("afriberta", Task::Ner, swa, swa, 0.4).is_err());
        assert!(TransferRecord::new("afriberta", Task::Ner, swa, kin, f64::NAN).is_err());
    }

    #[test]
    fn coverage_rejects_duplicates() {
        let amh = LanguageId::new("amh").unwrap();
        let mut table = CoverageTable::new();
        table.insert("serengeti", amh, true).unwrap();
        assert!(matches!(
            table.insert("serengeti", amh, true),
            Err(Error::DuplicateKey(_))
        ));
        assert_eq!(table.seen("serengeti", amh), Some(true));
        assert_eq!(table.seen("afriberta", amh), None);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
        }
        assert!("csls_k10".parse::<Metric>().is_err());
    }
}
