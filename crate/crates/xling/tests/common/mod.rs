//! Synthetic inputs for the integration tests: parallel embedding files on
//! disk plus transfer, coverage and URIEL tables that reference them.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;
use xling::format::{default_path, write_embeddings};
use xling_core::{EmbeddingMatrix, LanguageId, Task, UrielKind};

pub const LANGS: [&str; 5] = ["hau", "ibo", "swa", "yor", "zul"];
pub const MODELS: [&str; 2] = ["enc-a", "enc-b"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn lang(code: &str) -> LanguageId {
    LanguageId::new(code).unwrap()
}

pub fn unit_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f32>> {
    (0..n)
        .map(|_| {
            let r: Vec<f32> = (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            let norm = r.iter().map(|v| v * v).sum::<f32>().sqrt();
            r.into_iter().map(|v| v / norm).collect()
        })
        .collect()
}

/// Normalized copy of `base` with uniform noise of amplitude `noise`.
pub fn perturbed(
    rng: &mut ChaCha8Rng,
    model: &str,
    code: &str,
    base: &[Vec<f32>],
    noise: f32,
) -> EmbeddingMatrix {
    let rows: Vec<Vec<f32>> = base
        .iter()
        .map(|r| {
            r.iter()
                .map(|v| v + noise * rng.random_range(-1.0f32..1.0))
                .collect()
        })
        .collect();
    EmbeddingMatrix::from_rows(model, lang(code), &rows, false)
        .unwrap()
        .normalize_rows()
        .unwrap()
}

pub struct Workspace {
    pub dir: TempDir,
    pub embeddings: PathBuf,
    pub transfer: PathBuf,
    pub coverage: PathBuf,
    pub uriel: PathBuf,
}

impl Workspace {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn out(&self) -> PathBuf {
        self.path("out")
    }
}

/// Two models over five languages. Each language is the shared sentence
/// cloud plus language-specific noise; transfer scores fall with the noise
/// of both languages, so similarity and transfer are positively related.
pub fn workspace(seed: u64, n: usize, d: usize) -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let embeddings = dir.path().join("emb");
    let mut rng = rng(seed);
    let mut transfer = String::from("model,task,source,target,score\n");
    let mut coverage = String::from("model,language,seen\n");
    for model in MODELS {
        let base = unit_rows(&mut rng, n, d);
        let noise: Vec<f32> = LANGS
            .iter()
            .map(|_| rng.random_range(0.1f32..1.2))
            .collect();
        for (code, &a) in LANGS.iter().zip(&noise) {
            let m = perturbed(&mut rng, model, code, &base, a);
            write_embeddings(&m, &default_path(&embeddings, model, lang(code))).unwrap();
            let seen = rng.random_bool(0.6);
            writeln!(coverage, "{model},{code},{seen}").unwrap();
        }
        for task in Task::ALL {
            for (i, s) in LANGS.iter().enumerate() {
                for (j, t) in LANGS.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let jitter = rng.random_range(-0.08f32..0.08);
                    let score = (0.95 - 0.3 * (noise[i] + noise[j]) + jitter).clamp(0.0, 1.0);
                    writeln!(transfer, "{model},{},{s},{t},{score:.4}", task.as_str()).unwrap();
                }
            }
        }
    }
    let mut uriel = String::from("lang_a,lang_b,kind,value\n");
    for (i, a) in LANGS.iter().enumerate() {
        for b in &LANGS[i + 1..] {
            for kind in [
                UrielKind::Genetic,
                UrielKind::Syntactic,
                UrielKind::Geographic,
            ] {
                let v: f64 = rng.random_range(0.0..1.0);
                writeln!(uriel, "{a},{b},{},{v:.4}", kind.as_str()).unwrap();
            }
        }
    }
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    };
    Workspace {
        transfer: write("transfer.csv", &transfer),
        coverage: write("coverage.csv", &coverage),
        uriel: write("uriel.csv", &uriel),
        embeddings,
        dir,
    }
}

pub fn xling(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xling"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
