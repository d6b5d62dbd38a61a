use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use xling::commands::{self, Outcome};
use xling::config::{FileConfig, RunConfig};
use xling::{Error, Result};

/// Cross-lingual transfer analysis: embedding similarity metrics, stratified
/// Spearman correlations, Simpson's paradox checks and source selection.
#[derive(Debug, Parser)]
#[command(name = "xling", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that every configured input loads and that the inputs join.
    Validate(Flags),
    /// Compute similarity metrics for every ordered language pair.
    ComputeMetrics(Flags),
    /// Correlate metrics with transfer scores per model and task.
    Correlate(Flags),
    /// Rank candidate source languages for each target.
    Select(Flags),
    /// Re-render correlation tables from a results CSV.
    Report(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// TOML file with defaults for any of the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding <model>/<lang>.xemb files.
    #[arg(long)]
    embeddings_dir: Option<PathBuf>,
    /// Transfer CSV: model,task,source,target,score.
    #[arg(long)]
    transfer: Option<PathBuf>,
    /// URIEL CSV: lang_a,lang_b,kind,value.
    #[arg(long)]
    uriel: Option<PathBuf>,
    /// Coverage CSV: model,language,seen.
    #[arg(long)]
    coverage: Option<PathBuf>,
    /// Precomputed metrics CSV (skips embedding loading).
    #[arg(long)]
    metrics_csv: Option<PathBuf>,
    /// Results CSV for `report` (default: <out>/results.csv).
    #[arg(long)]
    results: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    languages: Option<Vec<String>>,
    /// Any of NER, POS, SENT.
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<String>>,
    /// Any of cosine_mean, cosine_gap, p_at_1_st, p_at_1_ts, csls, cka.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    /// CSLS neighbourhood size.
    #[arg(long)]
    k: Option<i64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for Monte Carlo permutation p-values.
    #[arg(long)]
    seed: Option<i64>,
    /// Also report correlations pooled across models.
    #[arg(long)]
    allow_pooled: bool,
    /// Use the bundled reference results.
    #[arg(long)]
    fixture: bool,
    /// Restrict source rankings to one target language.
    #[arg(long)]
    target: Option<String>,
    /// K values for top-K oracle accuracy.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<i64>>,
}

impl Flags {
    fn run_config(self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let flags = FileConfig {
            embeddings_dir: self.embeddings_dir,
            transfer: self.transfer,
            uriel: self.uriel,
            coverage: self.coverage,
            metrics_csv: self.metrics_csv,
            results: self.results,
            models: self.models,
            languages: self.languages,
            tasks: self.tasks,
            metrics: self.metrics,
            k: self.k,
            out: self.out,
            seed: self.seed,
            allow_pooled: self.allow_pooled.then_some(true),
            ks: self.ks,
            target: self.target,
            fixture: self.fixture.then_some(true),
        };
        RunConfig::from_file_config(base.overlay(flags))
    }
}

fn print(out: &Outcome) {
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    for l in &out.lines {
        println!("{l}");
    }
    for p in &out.written {
        println!("wrote {}", p.display());
    }
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Validate(f) => {
            let v = commands::validate(&f.run_config()?)?;
            for l in &v.lines {
                println!("{l}");
            }
            Ok(v.passed())
        }
        Command::ComputeMetrics(f) => {
            let (out, _) = commands::compute_metrics(&f.run_config()?)?;
            print(&out);
            Ok(true)
        }
        Command::Correlate(f) => {
            let c = commands::correlate(&f.run_config()?)?;
            print(&c.outcome);
            println!();
            print!("{}", c.report.render_text());
            Ok(true)
        }
        Command::Select(f) => {
            let s = commands::select(&f.run_config()?)?;
            print(&s.outcome);
            Ok(true)
        }
        Command::Report(f) => {
            let (out, report) = commands::render(&f.run_config()?)?;
            print!("{}", report.render_text());
            print(&out);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if Error::is_usage(&e) { 2 } else { 1 })
        }
    }
}
