//! Corpus loading, label bookkeeping, and train/test splitting.
//!
//! A corpus is described by a CSV manifest with header
//! `id,path,diagnosis,site`; each `path` points to a plain-text UTF-8
//! report file, resolved relative to the manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};

/// One pathology report with its labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    /// Unique identifier within a corpus.
    pub id: String,
    /// Raw report text.
    pub text: String,
    /// Primary-diagnosis label (the classification target).
    pub diagnosis: String,
    /// Primary site the biopsy came from.
    pub site: String,
}

/// An ordered collection of reports plus the sorted set of distinct
/// diagnosis labels occurring in it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    reports: Vec<Report>,
    label_set: Vec<String>,
}

/// Which label field a distribution is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKey {
    Diagnosis,
    Site,
}

/// Configuration for [`split_train_test`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, Deserialize)]
pub struct SplitConfig {
    /// Fraction of reports assigned to the training side, in (0, 1).
    pub train_fraction: f64,
    pub seed: u64,
    /// When set, per-label proportions follow `train_fraction` up to
    /// rounding; singleton labels go to train.
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.70,
            seed: 0,
            stratified: false,
        }
    }
}

impl Corpus {
    /// Builds a corpus from reports, checking the id/text/diagnosis
    /// invariants and deriving the sorted label set.
    pub fn new(reports: Vec<Report>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &reports {
            if r.id.is_empty() {
                return Err(Error::Validation("report with empty id".into()));
            }
            if !seen.insert(r.id.clone()) {
                return Err(Error::Validation(format!("duplicate report id `{}`", r.id)));
            }
            if r.text.is_empty() {
                return Err(Error::Validation(format!(
                    "report `{}` has empty text",
                    r.id
                )));
            }
            if r.diagnosis.is_empty() {
                return Err(Error::Validation(format!(
                    "report `{}` has empty diagnosis",
                    r.id
                )));
            }
        }
        let mut label_set: Vec<String> = reports
            .iter()
            .map(|r| r.diagnosis.clone())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        label_set.sort();
        Ok(Corpus { reports, label_set })
    }

    pub fn reports(&self) -> &[Report] {
        &self.reports
    }

    /// Sorted distinct diagnosis labels.
    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Report> {
        self.reports.iter().find(|r| r.id == id)
    }
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    id: String,
    path: String,
    diagnosis: String,
    site: String,
}

/// Loads a corpus from a CSV manifest with header `id,path,diagnosis,site`.
///
/// Report paths are resolved relative to the manifest's directory. Files
/// must be non-empty UTF-8; a missing or unreadable file is an ingestion
/// error naming the path, a duplicate id or empty payload is a validation
/// error.
pub fn load_corpus(manifest_path: &Path) -> Result<Corpus> {
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut rdr = csv::Reader::from_path(manifest_path).map_err(|e| Error::Ingestion {
        path: manifest_path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut reports = Vec::new();
    for row in rdr.deserialize() {
        let row: ManifestRow = row?;
        let path = base.join(&row.path);
        let bytes = std::fs::read(&path).map_err(|e| Error::Ingestion {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Ingestion {
            path: path.clone(),
            reason: format!("not valid UTF-8: {e}"),
        })?;
        reports.push(Report {
            id: row.id,
            text,
            diagnosis: row.diagnosis,
            site: row.site,
        });
    }
    Corpus::new(reports)
}

/// Counts reports per diagnosis or per site.
pub fn class_distribution(corpus: &Corpus, key: LabelKey) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for r in corpus.reports() {
        let label = match key {
            LabelKey::Diagnosis => &r.diagnosis,
            LabelKey::Site => &r.site,
        };
        *counts.entry(label.clone()).or_insert(0) += 1;
    }
    counts
}

/// Splits a corpus into train and test sides.
///
/// Train size is `floor(n * train_fraction)` and both sides preserve the
/// corpus order of their members. The shuffle is seeded, so a fixed
/// `(corpus, config)` pair always produces the same split. Under
/// stratification the train quota is distributed over labels by largest
/// remainder; labels with a single report go entirely to train (logged as
/// a warning, not an error).
pub fn split_train_test(corpus: &Corpus, cfg: &SplitConfig) -> Result<(Corpus, Corpus)> {
    if corpus.len() < 2 {
        return Err(Error::Validation(format!(
            "cannot split a corpus of {} report(s)",
            corpus.len()
        )));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "train_fraction must be in (0,1), got {}",
            cfg.train_fraction
        )));
    }
    let n = corpus.len();
    let target_train = (n as f64 * cfg.train_fraction).floor() as usize;
    let train_idx: Vec<usize> = if cfg.stratified {
        stratified_train_indices(corpus, cfg, target_train)
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        idx.shuffle(&mut rng);
        idx.truncate(target_train);
        idx
    };
    let in_train: HashSet<usize> = train_idx.iter().copied().collect();
    let mut train = Vec::with_capacity(in_train.len());
    let mut test = Vec::with_capacity(n - in_train.len());
    for (i, r) in corpus.reports().iter().enumerate() {
        if in_train.contains(&i) {
            train.push(r.clone());
        } else {
            test.push(r.clone());
        }
    }
    Ok((Corpus::new(train)?, Corpus::new(test)?))
}

fn stratified_train_indices(corpus: &Corpus, cfg: &SplitConfig, target_train: usize) -> Vec<usize> {
    // Group report indices by label, in label order.
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in corpus.reports().iter().enumerate() {
        groups.entry(r.diagnosis.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut quotas: BTreeMap<&str, usize> = BTreeMap::new();
    let mut forced = 0usize;
    for (label, members) in &groups {
        if members.len() == 1 {
            log::warn!("label `{label}` has a single report; routing it to train");
            quotas.insert(label, 1);
            forced += 1;
        }
    }
    // Largest-remainder allocation of the remaining budget over
    // multi-member labels, so the global floor(n * fraction) is hit exactly
    // whenever the singleton quota allows it.
    let budget = target_train.saturating_sub(forced);
    let mut base_total = 0usize;
    let mut remainders: Vec<(f64, &str)> = Vec::new();
    for (label, members) in &groups {
        if members.len() == 1 {
            continue;
        }
        let ideal = members.len() as f64 * cfg.train_fraction;
        let base = (ideal.floor() as usize).min(members.len());
        quotas.insert(label, base);
        base_total += base;
        remainders.push((ideal - base as f64, label));
    }
    // Highest remainder first; ties resolved by label order.
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
    let mut extra = budget.saturating_sub(base_total);
    for (_, label) in &remainders {
        if extra == 0 {
            break;
        }
        let cap = groups[label].len();
        let q = quotas.get_mut(label).unwrap();
        if *q < cap {
            *q += 1;
            extra -= 1;
        }
    }
    let mut train_idx = Vec::with_capacity(target_train);
    for (label, members) in &groups {
        let q = quotas[label];
        if q == 0 || q == members.len() {
            log::warn!("label `{label}` has no reports on one side of the split");
        }
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        train_idx.extend(shuffled.into_iter().take(q));
    }
    train_idx
}
