//! Pathology report classification pipeline.
//!
//! The crate turns labeled free-text reports into predictions of their
//! primary diagnosis and into keyword summaries:
//!
//! 1. [`corpus`] loads reports from a CSV manifest and produces seeded
//!    train/test splits.
//! 2. [`preprocess`] lowercases, tokenizes, removes stopwords, joins
//!    frequent bigrams, and filters words by per-category document
//!    frequency.
//! 3. [`vectorizer`] builds a vocabulary from the training documents and
//!    maps every document to a sparse TF-IDF vector.
//! 4. [`classifiers`] trains linear SVM, RBF SVM, logistic regression, and
//!    gradient-boosted trees on those vectors, all implemented in this
//!    crate.
//! 5. [`eval`] computes per-class tallies and micro/macro F-scores.
//! 6. [`keywords`] extracts per-report TF-IDF keywords, groups them into
//!    topics with LDA, and renders a color-highlighted report.
//!
//! Every stochastic stage takes an explicit seed; identical inputs and
//! seeds give identical outputs, down to serialized bytes.

pub mod classifiers;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod keywords;
pub mod preprocess;
pub mod seed;
pub mod vectorizer;

pub use error::{Error, Result};
