//! Report text preprocessing.
//!
//! The pipeline applies five rules in a fixed order:
//!
//! 1. lowercase and keep only maximal alphanumeric runs,
//! 2. remove stopwords,
//! 3. join frequent adjacent word pairs into one hyphenated token,
//! 4. drop words whose document frequency is below `low_df_threshold`
//!    in every diagnostic category,
//! 5. drop words whose overall document frequency is above
//!    `high_df_threshold`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};

/// A report reduced to an ordered lowercase token sequence, with its
/// diagnosis label carried through for the per-category frequency rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedReport {
    pub id: String,
    pub tokens: Vec<String>,
    pub diagnosis: String,
}

/// How the low-document-frequency rule combines per-category frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowDfMode {
    /// Remove a word only when its frequency is below the threshold in
    /// every category (keeps category-discriminative words).
    EveryCategory,
    /// Remove a word when its frequency is below the threshold in any
    /// category.
    AnyCategory,
}

/// Settings for the preprocessing pipeline.
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub stopwords: HashSet<String>,
    /// Minimum corpus count for an adjacent pair to become a bigram.
    pub bigram_min_count: usize,
    /// Minimum pointwise mutual information (nats) for a bigram.
    pub bigram_min_score: f64,
    /// Per-category document-frequency floor, as a fraction.
    pub low_df_threshold: f64,
    /// Overall document-frequency ceiling, as a fraction.
    pub high_df_threshold: f64,
    pub low_df_mode: LowDfMode,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: default_stopwords(),
            bigram_min_count: 5,
            bigram_min_score: 3.0,
            low_df_threshold: 0.02,
            high_df_threshold: 0.90,
            low_df_mode: LowDfMode::EveryCategory,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.low_df_threshold
            && self.low_df_threshold < self.high_df_threshold
            && self.high_df_threshold <= 1.0)
        {
            return Err(Error::Validation(format!(
                "require 0 <= low_df ({}) < high_df ({}) <= 1",
                self.low_df_threshold, self.high_df_threshold
            )));
        }
        if self.bigram_min_count < 1 {
            return Err(Error::Validation("bigram_min_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// The bundled English stopword list.
pub fn default_stopwords() -> HashSet<String> {
    include_str!("../data/stopwords_en.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// Parses a stopword file: one word per line, blank lines ignored.
pub fn load_stopwords(path: &std::path::Path) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.to_lowercase())
        .collect())
}

/// Lowercases the text and splits it into maximal alphanumeric runs.
pub fn normalize_and_tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in lower.chars() {
        if c.is_ascii_alphanumeric() {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Removes stopwords, preserving the order of the surviving tokens.
pub fn remove_stopwords(tokens: &[String], cfg: &PreprocessConfig) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| !cfg.stopwords.contains(t.as_str()))
        .cloned()
        .collect()
}

/// An adjacent word pair accepted as a collocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Bigram {
    pub first: String,
    pub second: String,
    pub count: usize,
    /// Pointwise mutual information in nats.
    pub score: f64,
}

/// The set of adjacent pairs that passed the count and PMI thresholds.
#[derive(Debug, Clone, Default)]
pub struct BigramTable {
    bigrams: Vec<Bigram>,
    index: HashSet<(String, String)>,
}

impl BigramTable {
    pub fn contains(&self, first: &str, second: &str) -> bool {
        self.index
            .contains(&(first.to_string(), second.to_string()))
    }

    pub fn bigrams(&self) -> &[Bigram] {
        &self.bigrams
    }

    pub fn len(&self) -> usize {
        self.bigrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bigrams.is_empty()
    }

    /// Builds a table directly from pairs, for tests and tooling.
    pub fn from_pairs<I: IntoIterator<Item = (String, String)>>(pairs: I) -> Self {
        let mut table = BigramTable::default();
        for (first, second) in pairs {
            table.index.insert((first.clone(), second.clone()));
            table.bigrams.push(Bigram {
                first,
                second,
                count: 0,
                score: 0.0,
            });
        }
        table
    }
}

/// Finds adjacent pairs whose corpus count and pointwise mutual
/// information clear the configured thresholds.
///
/// PMI = ln( (c_ab / pairs) / ((c_a / tokens) * (c_b / tokens)) ), with
/// `pairs` the total number of adjacent positions and `tokens` the total
/// token count.
pub fn detect_bigrams(docs: &[Vec<String>], cfg: &PreprocessConfig) -> Result<BigramTable> {
    if docs.is_empty() {
        return Err(Error::Validation("detect_bigrams on empty corpus".into()));
    }
    let mut unigram: HashMap<&str, usize> = HashMap::new();
    let mut pair: HashMap<(&str, &str), usize> = HashMap::new();
    let mut total_tokens = 0usize;
    let mut total_pairs = 0usize;
    for doc in docs {
        total_tokens += doc.len();
        for t in doc {
            *unigram.entry(t.as_str()).or_insert(0) += 1;
        }
        for w in doc.windows(2) {
            *pair.entry((w[0].as_str(), w[1].as_str())).or_insert(0) += 1;
            total_pairs += 1;
        }
    }
    let mut accepted: Vec<Bigram> = Vec::new();
    for ((a, b), &c_ab) in &pair {
        if c_ab < cfg.bigram_min_count {
            continue;
        }
        let p_ab = c_ab as f64 / total_pairs as f64;
        let p_a = unigram[a] as f64 / total_tokens as f64;
        let p_b = unigram[b] as f64 / total_tokens as f64;
        let score = (p_ab / (p_a * p_b)).ln();
        if score >= cfg.bigram_min_score {
            accepted.push(Bigram {
                first: (*a).to_string(),
                second: (*b).to_string(),
                count: c_ab,
                score,
            });
        }
    }
    accepted.sort_by(|x, y| (&x.first, &x.second).cmp(&(&y.first, &y.second)));
    let index = accepted
        .iter()
        .map(|b| (b.first.clone(), b.second.clone()))
        .collect();
    Ok(BigramTable {
        bigrams: accepted,
        index,
    })
}

/// Greedy left-to-right bigram joining; a token consumed by one join
/// cannot participate in another.
pub fn join_bigrams(tokens: &[String], table: &BigramTable) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() && table.contains(&tokens[i], &tokens[i + 1]) {
            out.push(format!("{}-{}", tokens[i], tokens[i + 1]));
            i += 2;
        } else {
            out.push(tokens[i].clone());
            i += 1;
        }
    }
    out
}

/// Words removed by each frequency rule.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct FilterStats {
    pub removed_low_df: usize,
    pub removed_high_df: usize,
    pub kept: usize,
    pub docs_emptied: usize,
}

/// Applies the per-category low-frequency rule and the overall
/// high-frequency rule, returning the surviving vocabulary and the
/// filtered documents.
///
/// A word is removed iff its per-category document frequency is below
/// `low_df_threshold` in every category (or any category, per
/// `low_df_mode`), or its overall document frequency exceeds
/// `high_df_threshold`. A document emptied by filtering is retained as an
/// empty token list.
pub fn frequency_filter(
    docs: &[TokenizedReport],
    cfg: &PreprocessConfig,
) -> Result<(BTreeSet<String>, Vec<TokenizedReport>, FilterStats)> {
    cfg.validate()?;
    if docs.is_empty() {
        return Err(Error::Validation("frequency_filter on empty corpus".into()));
    }
    // Per-category and overall document frequencies.
    let mut cat_sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for d in docs {
        if d.diagnosis.is_empty() {
            return Err(Error::Validation(format!(
                "document `{}` has no diagnosis label",
                d.id
            )));
        }
        *cat_sizes.entry(d.diagnosis.as_str()).or_insert(0) += 1;
    }
    let mut df_cat: HashMap<&str, HashMap<&str, usize>> = HashMap::new();
    let mut df_all: HashMap<&str, usize> = HashMap::new();
    for d in docs {
        let distinct: HashSet<&str> = d.tokens.iter().map(String::as_str).collect();
        for t in distinct {
            *df_all.entry(t).or_insert(0) += 1;
            *df_cat
                .entry(t)
                .or_default()
                .entry(d.diagnosis.as_str())
                .or_insert(0) += 1;
        }
    }
    let n_docs = docs.len() as f64;
    let mut kept = BTreeSet::new();
    let mut stats = FilterStats::default();
    for (&word, &overall) in &df_all {
        if overall as f64 / n_docs > cfg.high_df_threshold {
            stats.removed_high_df += 1;
            continue;
        }
        let per_cat = &df_cat[word];
        let below = |cat: &str, size: usize| {
            let df = per_cat.get(cat).copied().unwrap_or(0) as f64 / size as f64;
            df < cfg.low_df_threshold
        };
        let removed_low = match cfg.low_df_mode {
            LowDfMode::EveryCategory => cat_sizes.iter().all(|(c, &s)| below(c, s)),
            LowDfMode::AnyCategory => cat_sizes.iter().any(|(c, &s)| below(c, s)),
        };
        if removed_low {
            stats.removed_low_df += 1;
        } else {
            kept.insert(word.to_string());
            stats.kept += 1;
        }
    }
    let mut filtered = Vec::with_capacity(docs.len());
    for d in docs {
        let tokens: Vec<String> = d
            .tokens
            .iter()
            .filter(|t| kept.contains(t.as_str()))
            .cloned()
            .collect();
        if tokens.is_empty() && !d.tokens.is_empty() {
            log::warn!("document `{}` emptied by frequency filtering", d.id);
            stats.docs_emptied += 1;
        }
        filtered.push(TokenizedReport {
            id: d.id.clone(),
            tokens,
            diagnosis: d.diagnosis.clone(),
        });
    }
    Ok((kept, filtered, stats))
}

/// Counts gathered while running the full pipeline.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct PreprocessStats {
    pub stopword_tokens_removed: usize,
    pub bigrams_in_table: usize,
    pub bigram_joins_applied: usize,
    pub filter: FilterStats,
}

/// Runs the whole pipeline over a corpus: normalize, remove stopwords,
/// detect and join bigrams, then frequency-filter.
pub fn preprocess_corpus(
    corpus: &crate::corpus::Corpus,
    cfg: &PreprocessConfig,
) -> Result<(Vec<TokenizedReport>, BigramTable, BTreeSet<String>, PreprocessStats)> {
    cfg.validate()?;
    if cfg.stopwords.is_empty() {
        return Err(Error::Validation("stopword list is empty".into()));
    }
    let mut stats = PreprocessStats::default();
    let mut docs: Vec<(String, Vec<String>, String)> = Vec::with_capacity(corpus.len());
    for r in corpus.reports() {
        let raw = normalize_and_tokenize(&r.text);
        let no_stop = remove_stopwords(&raw, cfg);
        stats.stopword_tokens_removed += raw.len() - no_stop.len();
        docs.push((r.id.clone(), no_stop, r.diagnosis.clone()));
    }
    let token_lists: Vec<Vec<String>> = docs.iter().map(|(_, t, _)| t.clone()).collect();
    let table = detect_bigrams(&token_lists, cfg)?;
    stats.bigrams_in_table = table.len();
    let joined: Vec<TokenizedReport> = docs
        .into_iter()
        .map(|(id, tokens, diagnosis)| {
            let joined = join_bigrams(&tokens, &table);
            stats.bigram_joins_applied += tokens.len() - joined.len();
            TokenizedReport {
                id,
                tokens: joined,
                diagnosis,
            }
        })
        .collect();
    let (kept, filtered, fstats) = frequency_filter(&joined, cfg)?;
    stats.filter = fstats;
    Ok((filtered, table, kept, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PreprocessConfig {
        PreprocessConfig::default()
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn doc(id: &str, words: &[&str], label: &str) -> TokenizedReport {
        TokenizedReport {
            id: id.into(),
            tokens: toks(words),
            diagnosis: label.into(),
        }
    }

    #[test]
    fn normalize_strips_punctuation() {
        assert_eq!(
            normalize_and_tokenize("Lung, Parenchyma!"),
            toks(&["lung", "parenchyma"])
        );
    }

    #[test]
    fn normalize_keeps_alphanumerics() {
        assert_eq!(normalize_and_tokenize("CD20+ CD5"), toks(&["cd20", "cd5"]));
    }

    #[test]
    fn normalize_empty() {
        assert!(normalize_and_tokenize("").is_empty());
    }

    #[test]
    fn normalize_idempotent() {
        let texts = ["Right Kidney: 4.5 cm mass!", "CD20+ CD5 scattered", "a-b c"];
        for t in texts {
            let once = normalize_and_tokenize(t);
            let again = normalize_and_tokenize(&once.join(" "));
            assert_eq!(once, again);
        }
    }

    #[test]
    fn stopword_removal_paper_examples() {
        let input = toks(&["the", "tumor", "was", "necrotic"]);
        assert_eq!(remove_stopwords(&input, &cfg()), toks(&["tumor", "necrotic"]));
    }

    #[test]
    fn stopword_removal_identity_when_disjoint() {
        let input = toks(&["tumor", "necrotic"]);
        assert_eq!(remove_stopwords(&input, &cfg()), input);
    }

    #[test]
    fn stopword_removal_all_stopwords() {
        let input = toks(&["the", "an", "was", "if"]);
        assert!(remove_stopwords(&input, &cfg()).is_empty());
    }

    #[test]
    fn bigram_detection_finds_collocation() {
        // "lymph node" always adjacent and rare relative to a large
        // corpus of one-off filler words.
        let mut docs = Vec::new();
        for i in 0..50 {
            let mut words: Vec<String> = (0..14).map(|j| format!("w{i}x{j}")).collect();
            words.push("lymph".into());
            words.push("node".into());
            words.extend((0..14).map(|j| format!("v{i}x{j}")));
            docs.push(words);
        }
        let table = detect_bigrams(&docs, &cfg()).unwrap();
        assert!(table.contains("lymph", "node"));
    }

    #[test]
    fn bigram_detection_no_adjacency() {
        let docs = vec![toks(&["alpha"]), toks(&["beta"]), toks(&["gamma"])];
        let table = detect_bigrams(&docs, &cfg()).unwrap();
        assert!(table.is_empty());
    }

    #[test]
    fn bigram_detection_count_threshold() {
        let mut c = cfg();
        c.bigram_min_count = 2;
        c.bigram_min_score = f64::NEG_INFINITY;
        let docs = vec![toks(&["rare", "pair"]), toks(&["other", "words"])];
        let table = detect_bigrams(&docs, &c).unwrap();
        assert!(!table.contains("rare", "pair"));
    }

    #[test]
    fn bigram_pmi_matches_hand_computation() {
        let mut c = cfg();
        c.bigram_min_count = 1;
        c.bigram_min_score = f64::NEG_INFINITY;
        // 2 docs, 4 tokens, 2 adjacent pairs; ("a","b") occurs once.
        let docs = vec![toks(&["a", "b"]), toks(&["a", "c"])];
        let table = detect_bigrams(&docs, &c).unwrap();
        let ab = table
            .bigrams()
            .iter()
            .find(|b| b.first == "a" && b.second == "b")
            .unwrap();
        // p_ab = 1/2, p_a = 2/4, p_b = 1/4 -> pmi = ln(0.5 / 0.125) = ln 4.
        let expected = (0.5f64 / (0.5 * 0.25)).ln();
        assert!((ab.score - expected).abs() < 1e-12);
        assert_eq!(ab.count, 1);
    }

    #[test]
    fn join_bigrams_basic() {
        let table = BigramTable::from_pairs([("lymph".to_string(), "node".to_string())]);
        assert_eq!(
            join_bigrams(&toks(&["lymph", "node", "biopsy"]), &table),
            toks(&["lymph-node", "biopsy"])
        );
    }

    #[test]
    fn join_bigrams_empty_table_identity() {
        let table = BigramTable::default();
        let input = toks(&["a", "b", "c"]);
        assert_eq!(join_bigrams(&input, &table), input);
    }

    #[test]
    fn join_bigrams_greedy_no_overlap() {
        // Both (a,b) and (b,c) in the table: left-to-right greedy takes
        // (a,b) and the consumed "b" cannot join again.
        let table = BigramTable::from_pairs([
            ("a".to_string(), "b".to_string()),
            ("b".to_string(), "c".to_string()),
        ]);
        assert_eq!(join_bigrams(&toks(&["a", "b", "c"]), &table), toks(&["a-b", "c"]));
    }

    #[test]
    fn join_output_has_no_joinable_adjacent_survivors() {
        let table = BigramTable::from_pairs([
            ("a".to_string(), "b".to_string()),
            ("b".to_string(), "c".to_string()),
            ("c".to_string(), "d".to_string()),
        ]);
        let input = toks(&["a", "b", "c", "d", "a", "c", "d", "b", "c"]);
        let out = join_bigrams(&input, &table);
        for w in out.windows(2) {
            if !w[0].contains('-') && !w[1].contains('-') {
                assert!(!table.contains(&w[0], &w[1]), "joinable pair {w:?} survived");
            }
        }
    }

    #[test]
    fn frequency_filter_high_df_removed() {
        // "common" in 19 of 20 docs (95%) -> removed by the 90% rule.
        let mut docs: Vec<TokenizedReport> = (0..19)
            .map(|i| doc(&format!("d{i}"), &["common", &format!("x{i}")], "A"))
            .collect();
        docs.push(doc("d19", &["x19"], "A"));
        let mut c = cfg();
        c.low_df_threshold = 0.0;
        let (kept, _, stats) = frequency_filter(&docs, &c).unwrap();
        assert!(!kept.contains("common"));
        assert_eq!(stats.removed_high_df, 1);
    }

    #[test]
    fn frequency_filter_kept_when_frequent_in_one_category() {
        // 2 categories x 10 docs. "marker" in 5 of A's docs (50%), none of
        // B's: kept, because clause (a) requires failure in every category.
        let mut docs = Vec::new();
        for i in 0..10 {
            let words: &[&str] = if i < 5 { &["marker", "pad"] } else { &["pad"] };
            docs.push(doc(&format!("a{i}"), words, "A"));
        }
        for i in 0..10 {
            docs.push(doc(&format!("b{i}"), &["filler"], "B"));
        }
        let (kept, _, _) = frequency_filter(&docs, &cfg()).unwrap();
        assert!(kept.contains("marker"));
    }

    #[test]
    fn frequency_filter_every_category_semantics() {
        // "rare" in 1 of 10 docs of B (10%) and 0 of A: kept under the
        // every-category rule with threshold 2%, removed under any-category.
        let mut docs = Vec::new();
        for i in 0..10 {
            docs.push(doc(&format!("a{i}"), &["alpha"], "A"));
        }
        for i in 0..10 {
            let words: &[&str] = if i == 0 { &["rare", "beta"] } else { &["beta"] };
            docs.push(doc(&format!("b{i}"), words, "B"));
        }
        let (kept, _, _) = frequency_filter(&docs, &cfg()).unwrap();
        assert!(kept.contains("rare"));

        let mut any = cfg();
        any.low_df_mode = LowDfMode::AnyCategory;
        let (kept_any, _, _) = frequency_filter(&docs, &any).unwrap();
        assert!(!kept_any.contains("rare"));
    }

    #[test]
    fn frequency_filter_emptied_doc_retained() {
        // "common" is in every doc (100% > 90%) and is doc a's only token.
        let docs = vec![
            doc("a", &["common"], "A"),
            doc("b", &["common", "x"], "A"),
            doc("c", &["common", "y"], "A"),
        ];
        let (_, filtered, stats) = frequency_filter(&docs, &cfg()).unwrap();
        let a = filtered.iter().find(|d| d.id == "a").unwrap();
        assert!(a.tokens.is_empty());
        assert_eq!(a.diagnosis, "A");
        assert_eq!(stats.docs_emptied, 1);
    }

    #[test]
    fn filter_monotone_in_thresholds() {
        let docs = vec![
            doc("1", &["a", "b", "c"], "X"),
            doc("2", &["a", "b"], "X"),
            doc("3", &["a", "d"], "Y"),
            doc("4", &["a", "b", "d"], "Y"),
        ];
        let kept_set = |low: f64, high: f64| {
            let mut c = cfg();
            c.low_df_threshold = low;
            c.high_df_threshold = high;
            let (kept, _, _) = frequency_filter(&docs, &c).unwrap();
            kept
        };
        // Raising high_df keeps at least as much; lowering low_df too.
        let base = kept_set(0.3, 0.7);
        let higher_ceiling = kept_set(0.3, 0.95);
        let lower_floor = kept_set(0.1, 0.7);
        assert!(base.is_subset(&higher_ceiling));
        assert!(base.is_subset(&lower_floor));
    }

    #[test]
    fn default_stopwords_contain_paper_examples() {
        let sw = default_stopwords();
        for w in ["the", "an", "was", "if"] {
            assert!(sw.contains(w), "missing stopword {w}");
        }
    }
}
