//! Declarative run configuration with CLI-flag overrides.
//!
//! Defaults follow the study settings where one exists (70/30 split,
//! C = 1.0, tree depth 6, learning rate 0.3, 50 keywords) and the
//! documented design defaults otherwise. Relative `manifest` and
//! `stopword_file` paths are resolved against the config file's
//! directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use pathclass::classifiers::{ClassifierKind, ClassifierSpec};
use pathclass::corpus::SplitConfig;
use pathclass::preprocess::{self, LowDfMode, PreprocessConfig};
use pathclass::seed::stage_seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub split: SplitParams,
    pub preprocess: PreprocessParams,
    /// Classifier kinds to train, by name.
    pub classifiers: Vec<String>,
    pub classifier: ClassifierParams,
    pub keywords: KeywordParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: PathBuf::from("manifest.csv"),
            out_dir: PathBuf::from("out"),
            seed: 0,
            split: SplitParams::default(),
            preprocess: PreprocessParams::default(),
            classifiers: ClassifierKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            classifier: ClassifierParams::default(),
            keywords: KeywordParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitParams {
    pub train_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams {
            train_fraction: 0.70,
            stratified: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessParams {
    /// One word per line; `None` uses the bundled English list.
    pub stopword_file: Option<PathBuf>,
    pub bigram_min_count: usize,
    pub bigram_min_score: f64,
    pub low_df_threshold: f64,
    pub high_df_threshold: f64,
    pub low_df_mode: LowDfMode,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        let d = PreprocessConfig::default();
        PreprocessParams {
            stopword_file: None,
            bigram_min_count: d.bigram_min_count,
            bigram_min_score: d.bigram_min_score,
            low_df_threshold: d.low_df_threshold,
            high_df_threshold: d.high_df_threshold,
            low_df_mode: d.low_df_mode,
        }
    }
}

impl PreprocessParams {
    pub fn to_config(&self) -> Result<PreprocessConfig> {
        let stopwords = match &self.stopword_file {
            Some(path) => preprocess::load_stopwords(path)
                .with_context(|| format!("loading stopwords from {}", path.display()))?,
            None => preprocess::default_stopwords(),
        };
        Ok(PreprocessConfig {
            stopwords,
            bigram_min_count: self.bigram_min_count,
            bigram_min_score: self.bigram_min_score,
            low_df_threshold: self.low_df_threshold,
            high_df_threshold: self.high_df_threshold,
            low_df_mode: self.low_df_mode,
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    pub c: f64,
    pub gamma: Option<f64>,
    pub shrinking: bool,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub n_rounds: usize,
    /// `None` keeps each kind's own default iteration cap.
    pub max_iter: Option<usize>,
    pub tol: f64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        let d = ClassifierSpec::default();
        ClassifierParams {
            c: d.c,
            gamma: d.gamma,
            shrinking: d.shrinking,
            max_depth: d.max_depth,
            learning_rate: d.learning_rate,
            n_rounds: d.n_rounds,
            max_iter: None,
            tol: d.tol,
        }
    }
}

impl ClassifierParams {
    pub fn spec_for(&self, kind: ClassifierKind) -> ClassifierSpec {
        let mut spec = ClassifierSpec::for_kind(kind);
        spec.c = self.c;
        spec.gamma = self.gamma;
        spec.shrinking = self.shrinking;
        spec.max_depth = self.max_depth;
        spec.learning_rate = self.learning_rate;
        spec.n_rounds = self.n_rounds;
        if let Some(cap) = self.max_iter {
            spec.max_iter = cap;
        }
        spec.tol = self.tol;
        spec
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct KeywordParams {
    pub top_n: usize,
    pub topics: usize,
    /// `None` means 50 / topics.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
}

impl Default for KeywordParams {
    fn default() -> Self {
        KeywordParams {
            top_n: pathclass::keywords::DEFAULT_TOP_N,
            topics: 3,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
        }
    }
}

impl KeywordParams {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if cfg.manifest.is_relative() {
            cfg.manifest = base.join(&cfg.manifest);
        }
        if let Some(sw) = &cfg.preprocess.stopword_file {
            if sw.is_relative() {
                cfg.preprocess.stopword_file = Some(base.join(sw));
            }
        }
        Ok(cfg)
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            train_fraction: self.split.train_fraction,
            seed: stage_seed(self.seed, "split"),
            stratified: self.split.stratified,
        }
    }

    pub fn classifier_kinds(&self) -> Result<Vec<ClassifierKind>> {
        let mut kinds = Vec::new();
        let mut seen = HashSet::new();
        for name in &self.classifiers {
            let kind: ClassifierKind = name
                .parse()
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            if seen.insert(kind.name()) {
                kinds.push(kind);
            }
        }
        if kinds.is_empty() {
            anyhow::bail!("no classifiers configured");
        }
        Ok(kinds)
    }
}
