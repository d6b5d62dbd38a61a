//! Run configuration: a flat TOML file overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use xling_core::metrics::DEFAULT_CSLS_K;
use xling_core::rank_stats::DEFAULT_SEED;
use xling_core::{LanguageId, Metric, Task};

use crate::error::{Error, Result};

/// Keys accepted in a config file. Every key is optional; unknown keys are
/// rejected so that typos do not silently fall back to defaults.
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub embeddings_dir: Option<PathBuf>,
    pub transfer: Option<PathBuf>,
    pub uriel: Option<PathBuf>,
    pub coverage: Option<PathBuf>,
    pub metrics_csv: Option<PathBuf>,
    pub results: Option<PathBuf>,
    pub models: Option<Vec<String>>,
    pub languages: Option<Vec<String>>,
    pub tasks: Option<Vec<String>>,
    pub metrics: Option<Vec<String>>,
    pub k: Option<i64>,
    pub out: Option<PathBuf>,
    pub seed: Option<i64>,
    pub allow_pooled: Option<bool>,
    pub ks: Option<Vec<i64>>,
    pub target: Option<String>,
    pub fixture: Option<bool>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Values from `other` replace ours wherever `other` sets them.
    pub fn overlay(self, other: FileConfig) -> FileConfig {
        FileConfig {
            embeddings_dir: other.embeddings_dir.or(self.embeddings_dir),
            transfer: other.transfer.or(self.transfer),
            uriel: other.uriel.or(self.uriel),
            coverage: other.coverage.or(self.coverage),
            metrics_csv: other.metrics_csv.or(self.metrics_csv),
            results: other.results.or(self.results),
            models: other.models.or(self.models),
            languages: other.languages.or(self.languages),
            tasks: other.tasks.or(self.tasks),
            metrics: other.metrics.or(self.metrics),
            k: other.k.or(self.k),
            out: other.out.or(self.out),
            seed: other.seed.or(self.seed),
            allow_pooled: other.allow_pooled.or(self.allow_pooled),
            ks: other.ks.or(self.ks),
            target: other.target.or(self.target),
            fixture: other.fixture.or(self.fixture),
        }
    }
}

/// Validated settings shared by every command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub embeddings_dir: Option<PathBuf>,
    pub transfer_csv: Option<PathBuf>,
    pub uriel_csv: Option<PathBuf>,
    pub coverage_csv: Option<PathBuf>,
    pub metrics_csv: Option<PathBuf>,
    pub results_csv: Option<PathBuf>,
    /// `None` means every model found in the inputs.
    pub models: Option<Vec<String>>,
    pub languages: Option<Vec<LanguageId>>,
    pub tasks: Vec<Task>,
    /// `None` leaves the choice to the command.
    pub metrics: Option<Vec<Metric>>,
    pub k: usize,
    pub output_dir: PathBuf,
    pub allow_pooled: bool,
    pub seed: u64,
    pub ks: Vec<usize>,
    pub target: Option<LanguageId>,
    /// Use the bundled reference results instead of computed ones.
    pub fixture: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            embeddings_dir: None,
            transfer_csv: None,
            uriel_csv: None,
            coverage_csv: None,
            metrics_csv: None,
            results_csv: None,
            models: None,
            languages: None,
            tasks: Task::ALL.to_vec(),
            metrics: None,
            k: DEFAULT_CSLS_K,
            output_dir: PathBuf::from("out"),
            allow_pooled: false,
            seed: DEFAULT_SEED,
            ks: vec![1, 3],
            target: None,
            fixture: false,
        }
    }
}

fn parse_list<T>(key: &str, items: Vec<String>) -> Result<Vec<T>>
where
    T: std::str::FromStr<Err = xling_core::Error> + Ord,
{
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let v = item
            .parse::<T>()
            .map_err(|e| Error::Config(format!("{key}: {e}")))?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("{key} is empty")));
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_file_config(file: FileConfig) -> Result<Self> {
        let d = RunConfig::default();
        let k = match file.k {
            None => d.k,
            Some(k) if k >= 1 => k as usize,
            Some(k) => return Err(Error::Config(format!("k must be at least 1, got {k}"))),
        };
        let seed = match file.seed {
            None => d.seed,
            Some(s) if s >= 0 => s as u64,
            Some(s) => return Err(Error::Config(format!("seed must be non-negative, got {s}"))),
        };
        let ks = match file.ks {
            None => d.ks,
            Some(ks) => {
                if ks.is_empty() || ks.iter().any(|&k| k < 1) {
                    return Err(Error::Config(format!(
                        "ks must be positive integers, got {ks:?}"
                    )));
                }
                let mut ks: Vec<usize> = ks.into_iter().map(|k| k as usize).collect();
                ks.sort_unstable();
                ks.dedup();
                ks
            }
        };
        let models = match file.models {
            None => None,
            Some(m) if m.is_empty() => return Err(Error::Config("models is empty".into())),
            Some(m) => {
                let mut m: Vec<String> = m.into_iter().map(|s| s.trim().to_string()).collect();
                m.sort();
                m.dedup();
                Some(m)
            }
        };
        let languages = file
            .languages
            .map(|l| parse_list::<LanguageId>("languages", l))
            .transpose()?
            .map(|mut l| {
                l.sort();
                l
            });
        let tasks = match file.tasks {
            None => d.tasks,
            Some(t) => {
                let mut t = parse_list::<Task>("tasks", t)?;
                t.sort();
                t
            }
        };
        let metrics = file
            .metrics
            .map(|m| parse_list::<Metric>("metrics", m))
            .transpose()?;
        let target = file
            .target
            .map(|t| t.parse::<LanguageId>())
            .transpose()
            .map_err(|e| Error::Config(format!("target: {e}")))?;
        Ok(Self {
            embeddings_dir: file.embeddings_dir,
            transfer_csv: file.transfer,
            uriel_csv: file.uriel,
            coverage_csv: file.coverage,
            metrics_csv: file.metrics_csv,
            results_csv: file.results,
            models,
            languages,
            tasks,
            metrics,
            k,
            output_dir: file.out.unwrap_or(d.output_dir),
            allow_pooled: file.allow_pooled.unwrap_or(d.allow_pooled),
            seed,
            ks,
            target,
            fixture: file.fixture.unwrap_or(false),
        })
    }

    pub fn wants_model(&self, model_id: &str) -> bool {
        self.models
            .as_ref()
            .is_none_or(|m| m.iter().any(|x| x == model_id))
    }

    /// The configured metrics, or `default` when none were given.
    pub fn metrics_or(&self, default: &[Metric]) -> Vec<Metric> {
        self.metrics.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
        let p = path
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{what} is required for this command")))?;
        if !p.exists() {
            return Err(Error::Config(format!(
                "{what} {} does not exist",
                p.display()
            )));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::from_file_config(FileConfig::default()).unwrap();
        assert_eq!(c.k, 10);
        assert_eq!(c.seed, 0x5EED);
        assert!(!c.allow_pooled);
        assert_eq!(c.tasks, Task::ALL.to_vec());
        assert_eq!(c.ks, vec![1, 3]);
    }

    #[test]
    fn file_parses_and_flags_win() {
        let file = FileConfig::parse(
            "k = 5\nseed = 0x1234\nmodels = [\"afriberta\", \"serengeti\"]\nmetrics = [\"cosine_gap\"]\nout = \"results\"\n",
        )
        .unwrap();
        let flags = FileConfig {
            k: Some(3),
            out: Some(PathBuf::from("elsewhere")),
            ..FileConfig::default()
        };
        let c = RunConfig::from_file_config(file.overlay(flags)).unwrap();
        assert_eq!(c.k, 3);
        assert_eq!(c.seed, 0x1234);
        assert_eq!(c.output_dir, PathBuf::from("elsewhere"));
        assert_eq!(c.models.as_deref().unwrap(), ["afriberta", "serengeti"]);
        assert_eq!(c.metrics, Some(vec![Metric::CosineGap]));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(FileConfig::parse("bogus = 1\n").is_err());
        for bad in [
            FileConfig {
                k: Some(0),
                ..Default::default()
            },
            FileConfig {
                metrics: Some(vec!["cosine".into()]),
                ..Default::default()
            },
            FileConfig {
                tasks: Some(vec![]),
                ..Default::default()
            },
            FileConfig {
                ks: Some(vec![0]),
                ..Default::default()
            },
            FileConfig {
                languages: Some(vec!["Swahili".into()]),
                ..Default::default()
            },
        ] {
            assert!(RunConfig::from_file_config(bad).unwrap_err().is_usage());
        }
    }
}
