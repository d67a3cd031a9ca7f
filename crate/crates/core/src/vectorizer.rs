//! TF-IDF vectorization.
//!
//! TF(t, d) = count(t in d) / len(d); IDF(t) = ln(n_docs / doc_freq(t));
//! the stored weight is their product. The vocabulary is built from the
//! training documents only, with terms ordered lexicographically so the
//! term-to-column mapping is deterministic.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Ordered term <-> column mapping with per-term document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Column id for a term, if it occurred in the training documents.
    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, column: usize) -> &str {
        &self.terms[column]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.index_of(term).map(|i| self.doc_freq[i])
    }
}

/// One document's features: sorted (column, weight) pairs with no explicit
/// zeros.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Builds a vector from entries, enforcing strictly increasing ids and
    /// positive weights.
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        for w in entries.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::Validation(
                    "sparse vector ids must be strictly increasing".into(),
                ));
            }
        }
        if let Some((id, w)) = entries.iter().find(|(_, w)| *w <= 0.0) {
            return Err(Error::Validation(format!(
                "sparse vector entry ({id}, {w}) is not positive"
            )));
        }
        Ok(SparseVector { entries })
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, column: usize) -> f64 {
        self.get_stored(column).unwrap_or(0.0)
    }

    /// Stored value for a column, `None` when absent. Boosted trees treat
    /// absent columns as missing and route them to a learned direction.
    pub fn get_stored(&self, column: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&column, |e| e.0)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Dense representation with the given dimension.
    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for &(i, w) in &self.entries {
            if i < dim {
                v[i] = w;
            }
        }
        v
    }

    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &(i, x) in &self.entries {
            if i < w.len() {
                acc += x * w[i];
            }
        }
        acc
    }

    /// Squared Euclidean norm.
    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum()
    }
}

/// A fitted TF-IDF model. The log base is fixed to the natural log.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocabulary: Vocabulary,
}

impl TfidfModel {
    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn n_features(&self) -> usize {
        self.vocabulary.len()
    }

    /// ln(n_docs / doc_freq(term)); `None` for out-of-vocabulary terms,
    /// which callers skip.
    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.index_of(term).map(|i| self.idf_by_column(i))
    }

    pub fn idf_by_column(&self, column: usize) -> f64 {
        (self.vocabulary.n_docs as f64 / self.vocabulary.doc_freq[column] as f64).ln()
    }
}

/// Builds the vocabulary and document frequencies from training documents.
///
/// Terms are sorted lexicographically; `n_docs` counts every training
/// document, including empty ones. Fails if every document is empty.
pub fn fit(train_docs: &[Vec<String>]) -> Result<TfidfModel> {
    if train_docs.is_empty() {
        return Err(Error::Fit("no training documents".into()));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in train_docs {
        let mut distinct: Vec<&str> = doc.iter().map(String::as_str).collect();
        distinct.sort_unstable();
        distinct.dedup();
        for t in distinct {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::Fit("all training documents are empty".into()));
    }
    let terms: Vec<String> = df.keys().map(|t| t.to_string()).collect();
    let doc_freq: Vec<usize> = df.values().copied().collect();
    let index = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(TfidfModel {
        vocabulary: Vocabulary {
            terms,
            index,
            doc_freq,
            n_docs: train_docs.len(),
        },
    })
}

/// count(term in doc) / len(doc). Errors on an empty document, where the
/// ratio is undefined.
pub fn term_frequency(term: &str, doc: &[String]) -> Result<f64> {
    if doc.is_empty() {
        return Err(Error::UndefinedInput(
            "term_frequency of an empty document".into(),
        ));
    }
    let count = doc.iter().filter(|t| t.as_str() == term).count();
    Ok(count as f64 / doc.len() as f64)
}

/// Maps a document to its sparse TF-IDF vector.
///
/// Out-of-vocabulary tokens produce no entry but still count toward the
/// TF denominator. Entries whose IDF is exactly zero (terms present in
/// every training document) are omitted. An empty document maps to the
/// empty vector.
pub fn transform(doc: &[String], model: &TfidfModel) -> SparseVector {
    if doc.is_empty() {
        return SparseVector::default();
    }
    let len = doc.len() as f64;
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in doc {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for (t, c) in counts {
        if let Some(col) = model.vocabulary.index_of(t) {
            let idf = model.idf_by_column(col);
            if idf > 0.0 {
                let tf = c as f64 / len;
                entries.push((col, tf * idf));
            }
        }
    }
    entries.sort_unstable_by_key(|e| e.0);
    SparseVector { entries }
}

/// Transforms a batch of documents, in order.
pub fn transform_all(docs: &[Vec<String>], model: &TfidfModel) -> Vec<SparseVector> {
    use rayon::prelude::*;
    docs.par_iter().map(|d| transform(d, model)).collect()
}

const MODEL_HEADER_TAG: &str = "tfidf.v1";

impl TfidfModel {
    /// Writes the model as a versioned flat file: a header line with
    /// `n_docs`, term count, and the log-base tag, then one tab-separated
    /// line per term: term, column id, document frequency.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            out,
            "{MODEL_HEADER_TAG}\tn_docs={}\tterms={}\tlog=natural",
            self.vocabulary.n_docs,
            self.vocabulary.len()
        )?;
        for (i, term) in self.vocabulary.terms.iter().enumerate() {
            writeln!(out, "{term}\t{i}\t{}", self.vocabulary.doc_freq[i])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::ModelIo("empty model file".into()))??;
        let fields: Vec<&str> = header.split('\t').collect();
        if fields.len() != 4 || fields[0] != MODEL_HEADER_TAG {
            return Err(Error::ModelIo(format!("bad header `{header}`")));
        }
        let parse_kv = |field: &str, key: &str| -> Result<usize> {
            field
                .strip_prefix(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::ModelIo(format!("bad header field `{field}`")))
        };
        let n_docs = parse_kv(fields[1], "n_docs=")?;
        let n_terms = parse_kv(fields[2], "terms=")?;
        if fields[3] != "log=natural" {
            return Err(Error::ModelIo(format!("unsupported log base `{}`", fields[3])));
        }
        let mut terms = Vec::with_capacity(n_terms);
        let mut doc_freq = Vec::with_capacity(n_terms);
        for line in lines {
            let line = line?;
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 {
                return Err(Error::ModelIo(format!("bad term line `{line}`")));
            }
            let col: usize = parts[1]
                .parse()
                .map_err(|_| Error::ModelIo(format!("bad column id in `{line}`")))?;
            if col != terms.len() {
                return Err(Error::ModelIo(format!(
                    "column ids out of order at `{line}`"
                )));
            }
            let df: usize = parts[2]
                .parse()
                .map_err(|_| Error::ModelIo(format!("bad doc_freq in `{line}`")))?;
            if df == 0 || df > n_docs {
                return Err(Error::ModelIo(format!(
                    "doc_freq {df} out of range 1..={n_docs}"
                )));
            }
            terms.push(parts[0].to_string());
            doc_freq.push(df);
        }
        if terms.len() != n_terms {
            return Err(Error::ModelIo(format!(
                "expected {n_terms} terms, found {}",
                terms.len()
            )));
        }
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(TfidfModel {
            vocabulary: Vocabulary {
                terms,
                index,
                doc_freq,
                n_docs,
            },
        })
    }
}
