//! Acceptance suite: one test per criterion, each printing a PASS line
//! and enforcing its runtime budget. Run with `--nocapture` to see the
//! per-criterion lines.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pathclass::classifiers::{
    self, softmax_objective_and_grad, ClassifierKind, ClassifierSpec, LabelEncoding,
};
use pathclass::corpus::{self, Corpus, Report, SplitConfig};
use pathclass::eval;
use pathclass::keywords::{self, Keyword, KeywordSet, LdaSampler};
use pathclass::preprocess::{self, LowDfMode, PreprocessConfig, TokenizedReport};
use pathclass::vectorizer::{self, SparseVector};

fn report_pass(name: &str, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    assert!(
        elapsed < budget,
        "{name}: took {elapsed:?}, budget {budget:?}"
    );
    println!("ACCEPT {name}: PASS ({elapsed:?})");
}

// ---------------------------------------------------------------------
// TF-IDF oracle: literal term-frequency / inverse-document-frequency
// computation with dense vectors and nested loops, kept independent of
// the sparse implementation it checks.
// ---------------------------------------------------------------------

fn brute_force_tfidf(train: &[Vec<String>], doc: &[String]) -> Vec<f64> {
    let mut vocab: Vec<String> = train.iter().flatten().cloned().collect();
    vocab.sort();
    vocab.dedup();
    let n_docs = train.len() as f64;
    let mut dense = vec![0.0; vocab.len()];
    if doc.is_empty() {
        return dense;
    }
    for (col, term) in vocab.iter().enumerate() {
        let count = doc.iter().filter(|t| *t == term).count() as f64;
        let tf = count / doc.len() as f64;
        let df = train
            .iter()
            .filter(|d| d.iter().any(|t| t == term))
            .count() as f64;
        let idf = (n_docs / df).ln();
        dense[col] = tf * idf;
    }
    dense
}

#[test]
fn accept_tfidf_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7f1df);
    for case in 0..100 {
        let n_docs = rng.gen_range(1..=20);
        let alphabet: Vec<String> = (0..rng.gen_range(3..=15)).map(|i| format!("t{i}")).collect();
        let mut docs: Vec<Vec<String>> = (0..n_docs)
            .map(|_| {
                let len = rng.gen_range(0..=10);
                (0..len)
                    .map(|_| alphabet[rng.gen_range(0..alphabet.len())].clone())
                    .collect()
            })
            .collect();
        if docs.iter().all(|d| d.is_empty()) {
            docs[0].push(alphabet[0].clone());
        }
        let model = vectorizer::fit(&docs).unwrap();
        let vocab_len = model.n_features();
        for doc in &docs {
            let sparse = vectorizer::transform(doc, &model).to_dense(vocab_len);
            let dense = brute_force_tfidf(&docs, doc);
            assert_eq!(dense.len(), sparse.len(), "case {case}");
            for (i, (a, b)) in sparse.iter().zip(&dense).enumerate() {
                assert!(
                    (a - b).abs() <= 1e-12,
                    "case {case}, term {i}: sparse {a} vs oracle {b}"
                );
            }
        }
    }
    report_pass("tfidf-oracle-equivalence", started, Duration::from_secs(5));
}

// ---------------------------------------------------------------------
// Metric oracle: per-class tallies recounted with independent loops and
// the micro/macro formulas applied literally.
// ---------------------------------------------------------------------

fn harmonic(p: f64, r: f64) -> f64 {
    if p == r {
        p
    } else if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn brute_force_scores(gold: &[usize], pred: &[usize], k: usize) -> (f64, f64) {
    let mut tp_sum = 0usize;
    let mut fp_sum = 0usize;
    let mut fn_sum = 0usize;
    let mut per_class_f = Vec::with_capacity(k);
    for j in 0..k {
        let tp = gold
            .iter()
            .zip(pred)
            .filter(|(&g, &p)| g == j && p == j)
            .count();
        let fp = gold
            .iter()
            .zip(pred)
            .filter(|(&g, &p)| p == j && g != j)
            .count();
        let fn_ = gold
            .iter()
            .zip(pred)
            .filter(|(&g, &p)| g == j && p != j)
            .count();
        tp_sum += tp;
        fp_sum += fp;
        fn_sum += fn_;
        let prec = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
        let rec = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
        per_class_f.push(harmonic(prec, rec));
    }
    let micro_p = if tp_sum + fp_sum > 0 {
        tp_sum as f64 / (tp_sum + fp_sum) as f64
    } else {
        0.0
    };
    let micro_r = if tp_sum + fn_sum > 0 {
        tp_sum as f64 / (tp_sum + fn_sum) as f64
    } else {
        0.0
    };
    let micro = harmonic(micro_p, micro_r);
    let macro_ = per_class_f.iter().sum::<f64>() / k as f64;
    (micro, macro_)
}

#[test]
fn accept_metric_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xf5c0);
    for case in 0..1000 {
        let n = rng.gen_range(1..=50);
        let k = rng.gen_range(1..=10);
        let gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let tally = eval::tally(&gold, &pred, k).unwrap();
        let (micro_oracle, macro_oracle) = brute_force_scores(&gold, &pred, k);
        let micro = eval::micro_f(&tally);
        let macro_ = eval::macro_f(&tally);
        assert_eq!(micro, micro_oracle, "case {case}: micro mismatch");
        assert_eq!(macro_, macro_oracle, "case {case}: macro mismatch");
        let correct = gold.iter().zip(&pred).filter(|(g, p)| g == p).count();
        let accuracy = correct as f64 / n as f64;
        assert_eq!(micro, accuracy, "case {case}: micro-F is not accuracy");
    }
    report_pass("metric-oracle-equivalence", started, Duration::from_secs(5));
}

// ---------------------------------------------------------------------
// Split arithmetic at the study's corpus size.
// ---------------------------------------------------------------------

#[test]
fn accept_split_arithmetic() {
    let started = Instant::now();
    let reports: Vec<Report> = (0..1949)
        .map(|i| Report {
            id: format!("r{i:04}"),
            text: "report text".into(),
            diagnosis: format!("d{}", i % 37),
            site: "site".into(),
        })
        .collect();
    let corpus = Corpus::new(reports).unwrap();
    let cfg = SplitConfig {
        train_fraction: 0.70,
        seed: 20260809,
        stratified: false,
    };
    let (train, test) = corpus::split_train_test(&corpus, &cfg).unwrap();
    assert_eq!(train.len(), 1364);
    assert_eq!(test.len(), 585);
    report_pass("split-arithmetic", started, Duration::from_secs(5));
}

// ---------------------------------------------------------------------
// Separable fixture: 4 classes, 200 reports, class-disjoint keyword
// vocabularies plus shared filler words.
// ---------------------------------------------------------------------

struct Fixture {
    x_train: Vec<SparseVector>,
    y_train: Vec<usize>,
    x_test: Vec<SparseVector>,
    y_test: Vec<usize>,
    encoding: LabelEncoding,
    n_features: usize,
}

fn separable_fixture() -> Fixture {
    let labels = ["adenocarcinoma", "chromophobe", "seminoma", "thymoma"];
    let mut rng = ChaCha8Rng::seed_from_u64(0xf1c5);
    let mut reports = Vec::new();
    for (c, label) in labels.iter().enumerate() {
        for i in 0..50 {
            let mut words = Vec::with_capacity(20);
            for _ in 0..15 {
                words.push(format!("kw{c}x{}", rng.gen_range(0..12)));
            }
            for _ in 0..5 {
                words.push(format!("fill{}", rng.gen_range(0..8)));
            }
            reports.push(Report {
                id: format!("r{c}{i:02}"),
                text: words.join(" "),
                diagnosis: label.to_string(),
                site: "site".into(),
            });
        }
    }
    let corpus = Corpus::new(reports).unwrap();
    let cfg = SplitConfig {
        train_fraction: 0.70,
        seed: 41,
        stratified: false,
    };
    let (train, test) = corpus::split_train_test(&corpus, &cfg).unwrap();
    let tokenize = |c: &Corpus| -> (Vec<Vec<String>>, Vec<String>) {
        let tokens = c
            .reports()
            .iter()
            .map(|r| preprocess::normalize_and_tokenize(&r.text))
            .collect();
        let labels = c.reports().iter().map(|r| r.diagnosis.clone()).collect();
        (tokens, labels)
    };
    let (train_tokens, train_labels) = tokenize(&train);
    let (test_tokens, test_labels) = tokenize(&test);
    let model = vectorizer::fit(&train_tokens).unwrap();
    let encoding = LabelEncoding::from_labels(corpus.label_set().iter().map(String::as_str));
    let encode = |labels: &[String]| -> Vec<usize> {
        labels.iter().map(|l| encoding.encode(l).unwrap()).collect()
    };
    Fixture {
        x_train: vectorizer::transform_all(&train_tokens, &model),
        y_train: encode(&train_labels),
        x_test: vectorizer::transform_all(&test_tokens, &model),
        y_test: encode(&test_labels),
        n_features: model.n_features(),
        encoding,
    }
}

fn micro_f_of(model: &classifiers::TrainedModel, x: &[SparseVector], y: &[usize]) -> f64 {
    let pred: Vec<usize> = x.iter().map(|xi| classifiers::predict(model, xi)).collect();
    let tally = eval::tally(y, &pred, model.encoding.len()).unwrap();
    eval::micro_f(&tally)
}

#[test]
fn accept_classifier_separable_fixture() {
    let started = Instant::now();
    let f = separable_fixture();
    let mut train_scores = std::collections::BTreeMap::new();
    let mut test_scores = std::collections::BTreeMap::new();
    for kind in ClassifierKind::ALL {
        let spec = ClassifierSpec::for_kind(kind);
        let model = classifiers::train(
            &f.x_train,
            &f.y_train,
            f.n_features,
            &f.encoding,
            &spec,
            77,
        )
        .unwrap();
        let train_f = micro_f_of(&model, &f.x_train, &f.y_train);
        let test_f = micro_f_of(&model, &f.x_test, &f.y_test);
        train_scores.insert(kind.name(), train_f);
        test_scores.insert(kind.name(), test_f);
    }
    for kind in ["svm_linear", "logreg", "gbt"] {
        assert!(
            test_scores[kind] >= 0.95,
            "{kind} test micro-F {} < 0.95",
            test_scores[kind]
        );
    }
    assert!(
        train_scores["gbt"] >= train_scores["svm_linear"],
        "gbt train {} < svm_linear train {}",
        train_scores["gbt"],
        train_scores["svm_linear"]
    );
    for (kind, &train_f) in &train_scores {
        assert!(
            train_f >= test_scores[kind],
            "{kind}: train micro-F {train_f} < test micro-F {}",
            test_scores[kind]
        );
    }
    report_pass(
        "classifier-separable-fixture",
        started,
        Duration::from_secs(60),
    );
}

// ---------------------------------------------------------------------
// Gradient checks against central finite differences.
// ---------------------------------------------------------------------

fn random_sparse(rng: &mut ChaCha8Rng, dim: usize) -> SparseVector {
    let nnz = rng.gen_range(1..=dim.min(5));
    let mut cols: Vec<usize> = (0..dim).collect();
    for i in (1..cols.len()).rev() {
        cols.swap(i, rng.gen_range(0..=i));
    }
    let mut entries: Vec<(usize, f64)> = cols[..nnz]
        .iter()
        .map(|&c| (c, rng.gen_range(0.05..1.5)))
        .collect();
    entries.sort_by_key(|e| e.0);
    SparseVector::new(entries).unwrap()
}

#[test]
fn accept_gradient_checks() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9ead);
    let rel_err = |analytic: &[f64], fd: &[f64]| -> f64 {
        let diff: f64 = analytic
            .iter()
            .zip(fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        diff / norm.max(1.0)
    };
    // Logistic-regression objective over [w, b].
    for problem in 0..20 {
        let dim = rng.gen_range(3..=8);
        let x: Vec<SparseVector> = (0..10).map(|_| random_sparse(&mut rng, dim)).collect();
        let y: Vec<f64> = (0..10)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let c = rng.gen_range(0.3..3.0);
        let theta: Vec<f64> = (0..=dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, analytic) = classifiers::logreg_objective_and_grad(&x, &y, c, true, &theta);
        let h = 1e-6;
        let mut fd = vec![0.0; theta.len()];
        for i in 0..theta.len() {
            let mut plus = theta.clone();
            plus[i] += h;
            let mut minus = theta.clone();
            minus[i] -= h;
            let (fp, _) = classifiers::logreg_objective_and_grad(&x, &y, c, true, &plus);
            let (fm, _) = classifiers::logreg_objective_and_grad(&x, &y, c, true, &minus);
            fd[i] = (fp - fm) / (2.0 * h);
        }
        let err = rel_err(&analytic, &fd);
        assert!(err < 1e-5, "logreg problem {problem}: relative error {err}");
    }
    // Boosting objective over the raw per-class scores.
    for problem in 0..20 {
        let k = rng.gen_range(2..=5);
        let scores: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..10).map(|_| rng.gen_range(0..k)).collect();
        let (_, analytic) = softmax_objective_and_grad(&scores, &labels);
        let h = 1e-6;
        let mut fd = Vec::new();
        let mut flat_analytic = Vec::new();
        for i in 0..10 {
            for c in 0..k {
                let mut plus = scores.clone();
                plus[i][c] += h;
                let mut minus = scores.clone();
                minus[i][c] -= h;
                let (fp, _) = softmax_objective_and_grad(&plus, &labels);
                let (fm, _) = softmax_objective_and_grad(&minus, &labels);
                fd.push((fp - fm) / (2.0 * h));
                flat_analytic.push(analytic[i][c]);
            }
        }
        let err = rel_err(&flat_analytic, &fd);
        assert!(err < 1e-5, "gbt problem {problem}: relative error {err}");
    }
    report_pass("gradient-checks", started, Duration::from_secs(10));
}

// ---------------------------------------------------------------------
// Boosting monotonicity on the separable fixture, early stop disabled.
// ---------------------------------------------------------------------

#[test]
fn accept_boosting_monotonicity() {
    let started = Instant::now();
    let f = separable_fixture();
    let mut spec = ClassifierSpec::for_kind(ClassifierKind::Gbt);
    spec.tol = 0.0;
    spec.n_rounds = 100;
    let model = classifiers::train(
        &f.x_train,
        &f.y_train,
        f.n_features,
        &f.encoding,
        &spec,
        0,
    )
    .unwrap();
    let curve = &model.meta.train_loss_per_round;
    assert_eq!(curve.len(), 100);
    for (round, w) in curve.windows(2).enumerate() {
        assert!(
            w[1] <= w[0] + 1e-9,
            "round {}: loss rose from {} to {}",
            round + 1,
            w[0],
            w[1]
        );
    }
    report_pass("boosting-monotonicity", started, Duration::from_secs(60));
}

// ---------------------------------------------------------------------
// LDA recovery on a two-group corpus with disjoint vocabularies.
// ---------------------------------------------------------------------

#[test]
fn accept_lda_recovery() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1da);
    let mut docs: Vec<Vec<String>> = Vec::new();
    for group in 0..2 {
        for _ in 0..20 {
            let doc: Vec<String> = (0..50)
                .map(|_| format!("g{group}w{}", rng.gen_range(0..25)))
                .collect();
            docs.push(doc);
        }
    }
    let mut sampler = LdaSampler::new(&docs, 2, 1.0, 0.01, 0x5eed).unwrap();
    let checkpoints = [1usize, 10, 100, 250, 500];
    let mut done = 0;
    for &target in &checkpoints {
        while done < target {
            sampler.sweep();
            done += 1;
        }
        let (phi, theta) = sampler.snapshot();
        for row in phi.iter().chain(theta.iter()) {
            let sum: f64 = row.iter().sum();
            assert!(
                (sum - 1.0).abs() < 1e-9,
                "sweep {target}: row sums to {sum}"
            );
        }
    }
    let model = sampler.into_model();
    let mut purity_sum = 0.0;
    for d in 0..docs.len() {
        let topic = model.dominant_topic(d);
        let prefix = if d < 20 { "g0" } else { "g1" };
        let own_mass: f64 = model
            .vocab()
            .iter()
            .enumerate()
            .filter(|(_, w)| w.starts_with(prefix))
            .map(|(i, _)| model.phi()[topic][i])
            .sum();
        purity_sum += own_mass;
    }
    let purity = purity_sum / docs.len() as f64;
    assert!(purity >= 0.9, "topic purity {purity} < 0.9");
    report_pass("lda-recovery", started, Duration::from_secs(30));
}

// ---------------------------------------------------------------------
// The five preprocessing rules on hand-built fixtures.
// ---------------------------------------------------------------------

#[test]
fn accept_preprocessing_rules() {
    let started = Instant::now();
    let cfg = PreprocessConfig::default();
    // Rule 1: lowercase + strip non-alphanumerics.
    assert_eq!(
        preprocess::normalize_and_tokenize("Lung, Parenchyma! CD20+"),
        vec!["lung", "parenchyma", "cd20"]
    );
    // Rule 2: stopword removal.
    let tokens: Vec<String> = ["the", "tumor", "was", "necrotic", "if", "an"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    assert_eq!(
        preprocess::remove_stopwords(&tokens, &cfg),
        vec!["tumor", "necrotic"]
    );
    // Rule 3: bigram detection + hyphen joining.
    let mut docs = Vec::new();
    for i in 0..40 {
        let mut words: Vec<String> = (0..12).map(|j| format!("pre{i}x{j}")).collect();
        words.push("lymph".into());
        words.push("node".into());
        words.extend((0..12).map(|j| format!("post{i}x{j}")));
        docs.push(words);
    }
    let table = preprocess::detect_bigrams(&docs, &cfg).unwrap();
    assert!(table.contains("lymph", "node"));
    let joined = preprocess::join_bigrams(
        &["left", "lymph", "node", "biopsy"]
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>(),
        &table,
    );
    assert_eq!(joined, vec!["left", "lymph-node", "biopsy"]);
    // Rules 4 and 5: the 2% per-category rule (every-category semantics)
    // and the 90% overall rule.
    let mut fdocs = Vec::new();
    for i in 0..10 {
        let mut words = vec!["ubiquitous".to_string(), format!("afiller{i}")];
        if i == 0 {
            words.push("rare".into()); // 10% of category A only
        }
        fdocs.push(TokenizedReport {
            id: format!("a{i}"),
            tokens: words,
            diagnosis: "A".into(),
        });
    }
    for i in 0..10 {
        fdocs.push(TokenizedReport {
            id: format!("b{i}"),
            tokens: vec!["ubiquitous".to_string(), format!("bfiller{i}")],
            diagnosis: "B".into(),
        });
    }
    let (kept, _, stats) = preprocess::frequency_filter(&fdocs, &cfg).unwrap();
    // 100% > 90%: removed by the high rule.
    assert!(!kept.contains("ubiquitous"));
    assert_eq!(stats.removed_high_df, 1);
    // 10% in A >= 2%: kept under every-category semantics even though it
    // is 0% in B.
    assert!(kept.contains("rare"));
    // One-off fillers are 10% within their own category: kept.
    assert!(kept.contains("afiller0"));
    // Under any-category semantics "rare" is below threshold in B and is
    // removed.
    let mut any_cfg = PreprocessConfig::default();
    any_cfg.low_df_mode = LowDfMode::AnyCategory;
    let (kept_any, _, _) = preprocess::frequency_filter(&fdocs, &any_cfg).unwrap();
    assert!(!kept_any.contains("rare"));
    // A word below the floor in every category is removed by the 2% rule.
    let mut low_cfg = PreprocessConfig::default();
    low_cfg.low_df_threshold = 0.15;
    let (kept_low, _, low_stats) = preprocess::frequency_filter(&fdocs, &low_cfg).unwrap();
    assert!(!kept_low.contains("rare")); // 10% < 15% in A, 0% in B
    assert!(low_stats.removed_low_df > 0);
    report_pass("preprocessing-rules", started, Duration::from_secs(5));
}

// ---------------------------------------------------------------------
// Keyword rendering: legend format and markup round-trip.
// ---------------------------------------------------------------------

#[test]
fn accept_keyword_rendering() {
    let started = Instant::now();
    let report = TokenizedReport {
        id: "fig1".into(),
        tokens: [
            "epithelial",
            "cells",
            "appear",
            "small",
            "lobulated",
            "thymectomy",
            "presence",
            "epithelial",
            "range",
            "tumor",
            "necrosis",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        diagnosis: "thymoma".into(),
    };
    let weights = [
        ("epithelial", 0.377),
        ("presence", 0.269),
        ("thymectomy", 0.232),
        ("cells", 0.180),
        ("small", 0.161),
        ("lobulated", 0.161),
        ("appear", 0.150),
        ("range", 0.120),
        ("tumor", 0.110),
        ("necrosis", 0.105),
    ];
    let ks = KeywordSet {
        report_id: "fig1".into(),
        keywords: weights
            .iter()
            .map(|(t, w)| Keyword {
                term: t.to_string(),
                weight: *w,
            })
            .collect(),
    };
    let topics = vec![1, 2, 0, 2, 2, 2, 2, 2, 2, 2];
    let (_, html) = keywords::render_highlighted(&report, &ks, &topics).unwrap();
    // Figure-format legend: "N. Term (0.xxx)" with 3-decimal weights.
    assert!(html.contains("1. Epithelial (0.377)"), "{html}");
    assert!(html.contains("2. Presence (0.269)"));
    assert!(html.contains("3. Thymectomy (0.232)"));
    // Markup-stripped body reproduces the token text exactly.
    let stripped = keywords::strip_markup(&html).unwrap();
    assert_eq!(stripped, report.tokens.join(" "));
    report_pass("keyword-rendering", started, Duration::from_secs(5));
}
