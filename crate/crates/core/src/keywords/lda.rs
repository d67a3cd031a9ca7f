//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling.
//!
//! Topic assignments are resampled token by token with the Dirichlet
//! parameters integrated out; after the requested sweeps the model is
//! summarized by the smoothed distributions
//!
//!   phi_k(w)   = (count(k, w) + beta) / (count(k) + V * beta)
//!   theta_d(k) = (count(d, k) + alpha) / (len(d) + K * alpha)
//!
//! The chain is seeded, so a fixed (docs, K, alpha, beta, iters, seed)
//! tuple reproduces phi and theta bit for bit.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fitted topic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    vocab: Vec<String>,
    /// Ids of the documents the model was fitted on, aligned with theta
    /// rows; empty when the caller did not provide them.
    doc_ids: Vec<String>,
    phi: Vec<Vec<f64>>,
    theta: Vec<Vec<f64>>,
}

impl TopicModel {
    /// Per-topic word distributions, one row per topic.
    pub fn phi(&self) -> &[Vec<f64>] {
        &self.phi
    }

    /// Per-document topic distributions, one row per fitted document.
    pub fn theta(&self) -> &[Vec<f64>] {
        &self.theta
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.vocab.binary_search_by(|v| v.as_str().cmp(word)).ok()
    }

    /// argmax_k phi_k(word); ties break toward the lowest topic id.
    /// `None` for words outside the model vocabulary.
    pub fn topic_of_word(&self, word: &str) -> Option<usize> {
        let w = self.word_index(word)?;
        let column: Vec<f64> = self.phi.iter().map(|row| row[w]).collect();
        Some(crate::classifiers::argmax(&column))
    }

    /// argmax of a fitted document's theta row.
    pub fn dominant_topic(&self, doc_index: usize) -> usize {
        crate::classifiers::argmax(&self.theta[doc_index])
    }

    pub fn set_doc_ids(&mut self, ids: Vec<String>) -> Result<()> {
        if ids.len() != self.theta.len() {
            return Err(Error::Dimension(format!(
                "{} ids for {} fitted documents",
                ids.len(),
                self.theta.len()
            )));
        }
        self.doc_ids = ids;
        Ok(())
    }

    pub fn doc_index_of(&self, id: &str) -> Option<usize> {
        self.doc_ids.iter().position(|d| d == id)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(file)?)
    }
}

/// The Gibbs chain state, stepped one sweep at a time so callers can
/// checkpoint mid-run.
pub struct LdaSampler {
    k: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    vocab: Vec<String>,
    docs: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<Vec<usize>>,
    topic_word: Vec<Vec<usize>>,
    topic_total: Vec<usize>,
    sweeps_done: usize,
    rng: ChaCha8Rng,
}

impl LdaSampler {
    pub fn new(docs: &[Vec<String>], k: usize, alpha: f64, beta: f64, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Validation(format!("LDA needs K >= 2, got {k}")));
        }
        if docs.is_empty() {
            return Err(Error::Validation("LDA over an empty corpus".into()));
        }
        if alpha <= 0.0 || beta <= 0.0 {
            return Err(Error::Validation(format!(
                "alpha and beta must be positive, got {alpha}, {beta}"
            )));
        }
        let mut vocab: Vec<String> = docs
            .iter()
            .flatten()
            .cloned()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        vocab.sort();
        if vocab.is_empty() {
            return Err(Error::Validation("LDA vocabulary is empty".into()));
        }
        let index: HashMap<&str, usize> = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i))
            .collect();
        let word_docs: Vec<Vec<usize>> = docs
            .iter()
            .map(|d| d.iter().map(|w| index[w.as_str()]).collect())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut doc_topic = vec![vec![0usize; k]; docs.len()];
        let mut topic_word = vec![vec![0usize; vocab.len()]; k];
        let mut topic_total = vec![0usize; k];
        let mut assignments = Vec::with_capacity(docs.len());
        for (d, words) in word_docs.iter().enumerate() {
            let mut z_doc = Vec::with_capacity(words.len());
            for &w in words {
                let z = rng.gen_range(0..k);
                doc_topic[d][z] += 1;
                topic_word[z][w] += 1;
                topic_total[z] += 1;
                z_doc.push(z);
            }
            assignments.push(z_doc);
        }
        Ok(LdaSampler {
            k,
            alpha,
            beta,
            seed,
            vocab,
            docs: word_docs,
            assignments,
            doc_topic,
            topic_word,
            topic_total,
            sweeps_done: 0,
            rng,
        })
    }

    /// One full Gibbs sweep over every token.
    pub fn sweep(&mut self) {
        let v_beta = self.vocab.len() as f64 * self.beta;
        let mut weights = vec![0.0; self.k];
        for d in 0..self.docs.len() {
            for t in 0..self.docs[d].len() {
                let w = self.docs[d][t];
                let old = self.assignments[d][t];
                self.doc_topic[d][old] -= 1;
                self.topic_word[old][w] -= 1;
                self.topic_total[old] -= 1;
                let mut total = 0.0;
                for z in 0..self.k {
                    let p = (self.doc_topic[d][z] as f64 + self.alpha)
                        * (self.topic_word[z][w] as f64 + self.beta)
                        / (self.topic_total[z] as f64 + v_beta);
                    total += p;
                    weights[z] = total;
                }
                let u = self.rng.gen::<f64>() * total;
                let new = weights.iter().position(|&cum| u < cum).unwrap_or(self.k - 1);
                self.doc_topic[d][new] += 1;
                self.topic_word[new][w] += 1;
                self.topic_total[new] += 1;
                self.assignments[d][t] = new;
            }
        }
        self.sweeps_done += 1;
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps_done
    }

    /// Smoothed phi and theta for the current state.
    pub fn snapshot(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let v = self.vocab.len() as f64;
        let phi = self
            .topic_word
            .iter()
            .zip(&self.topic_total)
            .map(|(row, &total)| {
                row.iter()
                    .map(|&c| (c as f64 + self.beta) / (total as f64 + v * self.beta))
                    .collect()
            })
            .collect();
        let theta = self
            .doc_topic
            .iter()
            .zip(&self.docs)
            .map(|(row, words)| {
                let len = words.len() as f64;
                row.iter()
                    .map(|&c| (c as f64 + self.alpha) / (len + self.k as f64 * self.alpha))
                    .collect()
            })
            .collect();
        (phi, theta)
    }

    pub fn into_model(self) -> TopicModel {
        let (phi, theta) = self.snapshot();
        TopicModel {
            k: self.k,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.sweeps_done,
            seed: self.seed,
            vocab: self.vocab,
            doc_ids: Vec::new(),
            phi,
            theta,
        }
    }

    #[cfg(test)]
    fn doc_topic_counts(&self) -> &[Vec<usize>] {
        &self.doc_topic
    }
}

/// Fits a topic model with `iters` Gibbs sweeps.
pub fn fit_lda(
    docs: &[Vec<String>],
    k: usize,
    alpha: f64,
    beta: f64,
    iters: usize,
    seed: u64,
) -> Result<TopicModel> {
    if iters < 1 {
        return Err(Error::Validation("LDA needs at least one sweep".into()));
    }
    let mut sampler = LdaSampler::new(docs, k, alpha, beta, seed)?;
    for _ in 0..iters {
        sampler.sweep();
    }
    Ok(sampler.into_model())
}
