//! Per-report keyword extraction, topic grouping, and highlighted
//! rendering.
//!
//! Keywords are the report's top-n TF-IDF entries (n defaults to 50).
//! Each keyword is assigned the topic whose word distribution gives it
//! the most mass; keywords outside the topic model's vocabulary fall back
//! to the report's dominant topic when known. The rendering wraps every
//! occurrence of a keyword in its topic color and appends a legend with
//! the top-10 keyword weights and the per-topic keyword lists.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::preprocess::TokenizedReport;
use crate::vectorizer::{SparseVector, TfidfModel};

pub mod lda;

pub use lda::{fit_lda, LdaSampler, TopicModel};

/// Default keyword count per report.
pub const DEFAULT_TOP_N: usize = 50;

/// Colorblind-safe palette; cycled when a model has more than 8 topics.
pub const PALETTE: [&str; 8] = [
    "#E69F00", "#56B4E9", "#009E73", "#F0E442", "#0072B2", "#D55E00", "#CC79A7", "#999999",
];

pub fn topic_color(topic: usize) -> &'static str {
    PALETTE[topic % PALETTE.len()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub term: String,
    pub weight: f64,
}

/// A report's ranked keywords, weights non-increasing; ties are ordered
/// lexicographically by term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordSet {
    pub report_id: String,
    pub keywords: Vec<Keyword>,
}

/// The n highest-weight entries of a report's TF-IDF vector.
///
/// Weights are taken from the vector untouched; fewer than n keywords
/// come back when the vector has fewer entries, and an empty vector
/// yields an empty set.
pub fn top_keywords(
    report_id: &str,
    vec: &SparseVector,
    model: &TfidfModel,
    n: usize,
) -> KeywordSet {
    let mut keywords: Vec<Keyword> = vec
        .entries()
        .iter()
        .map(|&(col, weight)| Keyword {
            term: model.vocabulary().term(col).to_string(),
            weight,
        })
        .collect();
    keywords.sort_by(|a, b| {
        b.weight
            .partial_cmp(&a.weight)
            .unwrap()
            .then_with(|| a.term.cmp(&b.term))
    });
    keywords.truncate(n);
    KeywordSet {
        report_id: report_id.to_string(),
        keywords,
    }
}

/// Maps each keyword to argmax_k phi_k(word). Keywords outside the topic
/// model's vocabulary take the document's dominant theta topic when
/// `doc_index` is known, topic 0 otherwise.
pub fn assign_topics(ks: &KeywordSet, tm: &TopicModel, doc_index: Option<usize>) -> Vec<usize> {
    let fallback = doc_index.map(|d| tm.dominant_topic(d)).unwrap_or(0);
    ks.keywords
        .iter()
        .map(|kw| tm.topic_of_word(&kw.term).unwrap_or(fallback))
        .collect()
}

/// A report with its keywords resolved to topics and colors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightedReport {
    pub report_id: String,
    pub tokens: Vec<String>,
    /// term -> topic id, for every keyword of the report.
    pub keyword_topics: BTreeMap<String, usize>,
    /// topic id -> color, for every topic that appears.
    pub topic_colors: BTreeMap<usize, String>,
}

/// Machine-readable sidecar mirroring the rendered file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordFile {
    pub report_id: String,
    pub keywords: Vec<KeywordFileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordFileEntry {
    pub term: String,
    pub weight: f64,
    pub topic: usize,
}

pub fn keyword_file(ks: &KeywordSet, topics: &[usize]) -> KeywordFile {
    KeywordFile {
        report_id: ks.report_id.clone(),
        keywords: ks
            .keywords
            .iter()
            .zip(topics)
            .map(|(kw, &topic)| KeywordFileEntry {
                term: kw.term.clone(),
                weight: kw.weight,
                topic,
            })
            .collect(),
    }
}

fn escape_html(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn unescape_html(s: &str) -> String {
    s.replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&")
}

fn capitalize(term: &str) -> String {
    let mut chars = term.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Renders the report with keyword occurrences wrapped in their topic
/// colors, plus a legend. Returns the structured highlight data and the
/// self-contained markup document.
pub fn render_highlighted(
    report: &TokenizedReport,
    ks: &KeywordSet,
    topics: &[usize],
) -> crate::Result<(HighlightedReport, String)> {
    if report.id != ks.report_id {
        return Err(crate::Error::Validation(format!(
            "keyword set for `{}` rendered against report `{}`",
            ks.report_id, report.id
        )));
    }
    if topics.len() != ks.keywords.len() {
        return Err(crate::Error::Dimension(format!(
            "{} topics for {} keywords",
            topics.len(),
            ks.keywords.len()
        )));
    }
    let keyword_topics: BTreeMap<String, usize> = ks
        .keywords
        .iter()
        .zip(topics)
        .map(|(kw, &t)| (kw.term.clone(), t))
        .collect();
    let mut topic_colors: BTreeMap<usize, String> = BTreeMap::new();
    for &t in topics {
        topic_colors
            .entry(t)
            .or_insert_with(|| topic_color(t).to_string());
    }

    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(html, "<title>Keywords: {}</title>", escape_html(&report.id));
    html.push_str("<style>body{font-family:sans-serif;max-width:60em;margin:2em auto;}\n");
    html.push_str(".kw{padding:0 2px;border-radius:2px;}\n");
    html.push_str("td{padding:2px 8px;vertical-align:top;}</style>\n</head>\n<body>\n");
    let _ = writeln!(html, "<h1>Report {}</h1>", escape_html(&report.id));

    // Report body: every keyword occurrence wrapped in its topic color.
    html.push_str("<div id=\"report-body\">");
    for (i, token) in report.tokens.iter().enumerate() {
        if i > 0 {
            html.push(' ');
        }
        match keyword_topics.get(token) {
            Some(&topic) => {
                let _ = write!(
                    html,
                    "<span class=\"kw\" style=\"background:{}\">{}</span>",
                    topic_colors[&topic],
                    escape_html(token)
                );
            }
            None => html.push_str(&escape_html(token)),
        }
    }
    html.push_str("</div>\n");

    // Legend: top-10 keywords with weights, then per-topic members.
    html.push_str("<div id=\"legend\">\n<h2>Top 10 Keywords</h2>\n<p>");
    let top10: Vec<String> = ks
        .keywords
        .iter()
        .take(10)
        .enumerate()
        .map(|(i, kw)| format!("{}. {} ({:.3})", i + 1, capitalize(&kw.term), kw.weight))
        .collect();
    html.push_str(&escape_html(&top10.join(", ")));
    html.push_str("</p>\n<h2>Topics</h2>\n<table>\n");
    for (&topic, color) in &topic_colors {
        let members: Vec<String> = ks
            .keywords
            .iter()
            .zip(topics)
            .filter(|(_, &t)| t == topic)
            .map(|(kw, _)| kw.term.clone())
            .collect();
        let _ = writeln!(
            html,
            "<tr><td style=\"background:{}\">Topic {}</td><td>{}</td></tr>",
            color,
            topic + 1,
            escape_html(&members.join(", "))
        );
    }
    html.push_str("</table>\n</div>\n</body>\n</html>\n");

    Ok((
        HighlightedReport {
            report_id: report.id.clone(),
            tokens: report.tokens.clone(),
            keyword_topics,
            topic_colors,
        },
        html,
    ))
}

/// Recovers the plain token text from a rendered document: the inner text
/// of the `report-body` element with tags removed and entities unescaped.
pub fn strip_markup(html: &str) -> Option<String> {
    let start_marker = "<div id=\"report-body\">";
    let start = html.find(start_marker)? + start_marker.len();
    let end = html[start..].find("</div>")? + start;
    let body = &html[start..end];
    let mut text = String::with_capacity(body.len());
    let mut in_tag = false;
    for c in body.chars() {
        match c {
            '<' => in_tag = true,
            '>' => in_tag = false,
            _ if !in_tag => text.push(c),
            _ => {}
        }
    }
    Some(unescape_html(&text))
}
