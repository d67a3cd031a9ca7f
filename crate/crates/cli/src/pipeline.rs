//! Command implementations: each stage reads upstream artifacts from the
//! output directory and writes its own atomically (temp file + rename),
//! so reruns of downstream stages reuse cached upstream outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::Rng;
use rand::SeedableRng;
use serde::Serialize;

use pathclass::classifiers::{self, LabelEncoding, TrainedModel};
use pathclass::corpus::{self, Corpus};
use pathclass::eval::{self, EvalReport};
use pathclass::keywords::{self, TopicModel};
use pathclass::preprocess::{self, TokenizedReport};
use pathclass::seed::stage_seed;
use pathclass::vectorizer::{self, SparseVector, TfidfModel};

use crate::config::RunConfig;

/// Replaces filesystem-hostile characters in a report id.
fn sanitize_id(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .with_context(|| format!("{} has no parent directory", path.display()))?;
    std::fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn preprocessed_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("preprocessed")
}

fn models_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("models")
}

fn token_file(cfg: &RunConfig, id: &str) -> PathBuf {
    preprocessed_dir(cfg).join(format!("{}.tokens.txt", sanitize_id(id)))
}

/// Preprocess every report and persist one token line per report plus the
/// per-rule filter statistics.
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<()> {
    let corpus = corpus::load_corpus(&cfg.manifest)
        .with_context(|| format!("loading manifest {}", cfg.manifest.display()))?;
    let mut names = std::collections::HashSet::new();
    for r in corpus.reports() {
        if !names.insert(sanitize_id(&r.id)) {
            bail!("report ids `{}` collide after filename sanitization", r.id);
        }
    }
    let pre_cfg = cfg.preprocess.to_config()?;
    let (docs, _table, kept, stats) = preprocess::preprocess_corpus(&corpus, &pre_cfg)?;
    for doc in &docs {
        let line = doc.tokens.join(" ") + "\n";
        write_atomic(&token_file(cfg, &doc.id), line.as_bytes())?;
    }
    #[derive(Serialize)]
    struct StatsFile<'a> {
        reports: usize,
        vocabulary_kept: usize,
        #[serde(flatten)]
        stats: &'a preprocess::PreprocessStats,
    }
    write_json_atomic(
        &cfg.out_dir.join("preprocess_stats.json"),
        &StatsFile {
            reports: docs.len(),
            vocabulary_kept: kept.len(),
            stats: &stats,
        },
    )?;
    println!(
        "preprocessed {} reports; vocabulary kept {}, removed {} (low-df) + {} (high-df)",
        docs.len(),
        stats.filter.kept,
        stats.filter.removed_low_df,
        stats.filter.removed_high_df
    );
    Ok(())
}

/// Loads the corpus and its persisted token files.
fn load_preprocessed(cfg: &RunConfig) -> Result<(Corpus, Vec<TokenizedReport>)> {
    let corpus = corpus::load_corpus(&cfg.manifest)
        .with_context(|| format!("loading manifest {}", cfg.manifest.display()))?;
    let mut docs = Vec::with_capacity(corpus.len());
    for r in corpus.reports() {
        let path = token_file(cfg, &r.id);
        let line = std::fs::read_to_string(&path).with_context(|| {
            format!(
                "reading {} (run `pathclass preprocess` first)",
                path.display()
            )
        })?;
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        docs.push(TokenizedReport {
            id: r.id.clone(),
            tokens,
            diagnosis: r.diagnosis.clone(),
        });
    }
    Ok((corpus, docs))
}

struct SplitDocs {
    train_ids: Vec<String>,
    train_tokens: Vec<Vec<String>>,
    train_labels: Vec<String>,
    test_tokens: Vec<Vec<String>>,
    test_labels: Vec<String>,
}

fn split_docs(cfg: &RunConfig, corpus: &Corpus, docs: &[TokenizedReport]) -> Result<SplitDocs> {
    let by_id: BTreeMap<&str, &TokenizedReport> =
        docs.iter().map(|d| (d.id.as_str(), d)).collect();
    let (train, test) = corpus::split_train_test(corpus, &cfg.split_config())?;
    let collect = |side: &Corpus| -> (Vec<String>, Vec<Vec<String>>, Vec<String>) {
        let mut ids = Vec::with_capacity(side.len());
        let mut tokens = Vec::with_capacity(side.len());
        let mut labels = Vec::with_capacity(side.len());
        for r in side.reports() {
            let d = by_id[r.id.as_str()];
            ids.push(d.id.clone());
            tokens.push(d.tokens.clone());
            labels.push(d.diagnosis.clone());
        }
        (ids, tokens, labels)
    };
    let (train_ids, train_tokens, train_labels) = collect(&train);
    let (_, test_tokens, test_labels) = collect(&test);
    Ok(SplitDocs {
        train_ids,
        train_tokens,
        train_labels,
        test_tokens,
        test_labels,
    })
}

fn load_or_fit_tfidf(cfg: &RunConfig, train_tokens: &[Vec<String>]) -> Result<TfidfModel> {
    let path = models_dir(cfg).join("tfidf.vocab");
    if path.exists() {
        return Ok(TfidfModel::load(&path)?);
    }
    let model = vectorizer::fit(train_tokens)?;
    std::fs::create_dir_all(models_dir(cfg))?;
    model.save(&path)?;
    Ok(model)
}

#[derive(Serialize)]
struct MetricsFile {
    classifier: String,
    train_micro_f: f64,
    test_micro_f: f64,
    train_macro_f: f64,
    test_macro_f: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

fn metrics_table(rows: &[&MetricsFile]) -> String {
    let mut s = String::new();
    let width = rows
        .iter()
        .map(|r| r.classifier.len())
        .max()
        .unwrap_or(10)
        .max("classifier".len());
    let _ = writeln!(
        s,
        "{:width$}  {:>12}  {:>12}  {:>12}  {:>12}",
        "classifier", "train-microF", "test-microF", "train-macroF", "test-macroF"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:width$}  {:>12.4}  {:>12.4}  {:>12.4}  {:>12.4}",
            r.classifier, r.train_micro_f, r.test_micro_f, r.train_macro_f, r.test_macro_f
        );
    }
    s
}

fn evaluate(
    model: &TrainedModel,
    x: &[SparseVector],
    gold: &[usize],
    labels: &[String],
) -> Result<EvalReport> {
    let pred: Vec<usize> = x.iter().map(|xi| classifiers::predict(model, xi)).collect();
    let tally = eval::tally(gold, &pred, labels.len())?;
    Ok(EvalReport::from_tally(&tally, labels)?)
}

/// Split, vectorize, train every configured classifier, and write one
/// metrics file (JSON + text) per classifier. A failed training is
/// reported and skipped without aborting the others.
pub fn cmd_train_eval(cfg: &RunConfig) -> Result<()> {
    let (corpus, docs) = load_preprocessed(cfg)?;
    let split = split_docs(cfg, &corpus, &docs)?;
    let encoding = LabelEncoding::from_labels(corpus.label_set().iter().map(String::as_str));
    let tfidf = load_or_fit_tfidf(cfg, &split.train_tokens)?;
    let x_train = vectorizer::transform_all(&split.train_tokens, &tfidf);
    let x_test = vectorizer::transform_all(&split.test_tokens, &tfidf);
    let encode = |labels: &[String]| -> Vec<usize> {
        labels
            .iter()
            .map(|l| encoding.encode(l).expect("label outside corpus label set"))
            .collect()
    };
    let y_train = encode(&split.train_labels);
    let y_test = encode(&split.test_labels);
    let metrics_dir = cfg.out_dir.join("metrics");
    std::fs::create_dir_all(&metrics_dir)?;
    let train_seed = stage_seed(cfg.seed, "train");
    let mut summary_rows: Vec<MetricsFile> = Vec::new();
    for kind in cfg.classifier_kinds()? {
        let spec = cfg.classifier.spec_for(kind);
        let trained = match classifiers::train(
            &x_train,
            &y_train,
            tfidf.n_features(),
            &encoding,
            &spec,
            train_seed,
        ) {
            Ok(m) => m,
            Err(e) => {
                log::error!("training {} failed: {e}", kind.name());
                #[derive(Serialize)]
                struct ErrorFile<'a> {
                    classifier: &'a str,
                    error: String,
                }
                write_json_atomic(
                    &metrics_dir.join(format!("{}.metrics.json", kind.name())),
                    &ErrorFile {
                        classifier: kind.name(),
                        error: e.to_string(),
                    },
                )?;
                continue;
            }
        };
        trained.save(&models_dir(cfg).join(format!("{}.model.json", kind.name())))?;
        let train_report = evaluate(&trained, &x_train, &y_train, encoding.classes())?;
        let test_report = evaluate(&trained, &x_test, &y_test, encoding.classes())?;
        let metrics = MetricsFile {
            classifier: kind.name().to_string(),
            train_micro_f: train_report.micro_f,
            test_micro_f: test_report.micro_f,
            train_macro_f: train_report.macro_f,
            test_macro_f: test_report.macro_f,
            warnings: trained.meta.warnings.clone(),
        };
        write_json_atomic(
            &metrics_dir.join(format!("{}.metrics.json", kind.name())),
            &metrics,
        )?;
        write_atomic(
            &metrics_dir.join(format!("{}.metrics.txt", kind.name())),
            metrics_table(&[&metrics]).as_bytes(),
        )?;
        let mut detail = String::new();
        let _ = writeln!(detail, "== {} / train ==", kind.name());
        detail.push_str(&train_report.to_text());
        let _ = writeln!(detail, "\n== {} / test ==", kind.name());
        detail.push_str(&test_report.to_text());
        write_atomic(
            &metrics_dir.join(format!("{}.report.txt", kind.name())),
            detail.as_bytes(),
        )?;
        println!(
            "{}: train micro-F {:.4} macro-F {:.4} | test micro-F {:.4} macro-F {:.4}",
            kind.name(),
            metrics.train_micro_f,
            metrics.train_macro_f,
            metrics.test_micro_f,
            metrics.test_macro_f
        );
        summary_rows.push(metrics);
    }
    if !summary_rows.is_empty() {
        let refs: Vec<&MetricsFile> = summary_rows.iter().collect();
        write_atomic(
            &metrics_dir.join("summary.txt"),
            metrics_table(&refs).as_bytes(),
        )?;
    }
    Ok(())
}

fn load_or_fit_lda(cfg: &RunConfig, split: &SplitDocs) -> Result<TopicModel> {
    let path = models_dir(cfg).join("lda.model.json");
    if path.exists() {
        let model = TopicModel::load(&path)?;
        if model.k == cfg.keywords.topics {
            return Ok(model);
        }
        log::warn!(
            "cached topic model has K={}, config wants K={}; refitting",
            model.k,
            cfg.keywords.topics
        );
    }
    let kw = &cfg.keywords;
    let mut model = keywords::fit_lda(
        &split.train_tokens,
        kw.topics,
        kw.alpha(),
        kw.beta,
        kw.iterations,
        stage_seed(cfg.seed, "lda"),
    )?;
    model.set_doc_ids(split.train_ids.clone())?;
    std::fs::create_dir_all(models_dir(cfg))?;
    model.save(&path)?;
    Ok(model)
}

/// Extract, topic-group, and render one report's keywords; models are
/// loaded from cache or fitted on demand.
pub fn cmd_keywords(cfg: &RunConfig, report_id: &str) -> Result<()> {
    let (corpus, docs) = load_preprocessed(cfg)?;
    let split = split_docs(cfg, &corpus, &docs)?;
    let tfidf = load_or_fit_tfidf(cfg, &split.train_tokens)?;
    let lda = load_or_fit_lda(cfg, &split)?;
    let id = if report_id == "random" {
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(stage_seed(cfg.seed, "report_select"));
        let pick = rng.gen_range(0..corpus.len());
        corpus.reports()[pick].id.clone()
    } else {
        report_id.to_string()
    };
    let Some(doc) = docs.iter().find(|d| d.id == id) else {
        let available: Vec<&str> = docs.iter().map(|d| d.id.as_str()).collect();
        bail!(
            "unknown report id `{id}`; available ids: {}",
            available.join(", ")
        );
    };
    let vec = vectorizer::transform(&doc.tokens, &tfidf);
    let ks = keywords::top_keywords(&doc.id, &vec, &tfidf, cfg.keywords.top_n);
    let topics = keywords::assign_topics(&ks, &lda, lda.doc_index_of(&doc.id));
    let (_, html) = keywords::render_highlighted(doc, &ks, &topics)?;
    let sidecar = keywords::keyword_file(&ks, &topics);
    let dir = cfg.out_dir.join("keywords");
    let stem = sanitize_id(&doc.id);
    write_atomic(&dir.join(format!("{stem}.keywords.html")), html.as_bytes())?;
    write_json_atomic(&dir.join(format!("{stem}.keywords.json")), &sidecar)?;
    println!(
        "report {}: {} keywords across {} topics -> {}",
        doc.id,
        ks.keywords.len(),
        cfg.keywords.topics,
        dir.join(format!("{stem}.keywords.html")).display()
    );
    Ok(())
}
