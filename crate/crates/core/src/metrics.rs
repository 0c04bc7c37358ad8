//! Keyword-list evaluation: n-gram overlap against reference text,
//! embedding-based greedy matching, and set overlap against an offline list.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::domain::normalize_keyword;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tools::Embedder;
use crate::vector::{cosine, mean};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenizedText {
    tokens: Vec<String>,
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF      // hiragana, katakana
        | 0x31F0..=0x31FF    // katakana phonetic extensions
        | 0x3400..=0x4DBF    // CJK extension A
        | 0x4E00..=0x9FFF    // CJK unified
        | 0xAC00..=0xD7AF    // hangul syllables
        | 0xF900..=0xFAFF    // CJK compatibility
        | 0xFF66..=0xFF9F    // halfwidth katakana
        | 0x20000..=0x2FFFF)
}

impl TokenizedText {
    /// NFKC + lowercase, then split on whitespace and punctuation. Runs of
    /// CJK characters become one token per character.
    pub fn new(text: &str) -> Self {
        let folded: String = text.nfkc().collect::<String>().to_lowercase();
        let mut tokens = Vec::new();
        let mut current = String::new();
        for c in folded.chars() {
            if is_cjk(c) {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            } else if c.is_alphanumeric() || (is_mark(c) && !current.is_empty()) {
                current.push(c);
            } else if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
        TokenizedText { tokens }
    }

    /// A keyword list linearized as one token sequence, in list order.
    pub fn from_keywords<T: AsRef<str>>(keywords: &[T]) -> Self {
        TokenizedText {
            tokens: keywords.iter().flat_map(|k| TokenizedText::new(k.as_ref()).tokens).collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

// Combining marks stay attached to the preceding letter.
fn is_mark(c: char) -> bool {
    matches!(c as u32, 0x0300..=0x036F | 0x1AB0..=0x1AFF | 0x20D0..=0x20FF | 0xFE20..=0xFE2F)
}

pub fn tokenize(text: &str) -> TokenizedText {
    TokenizedText::new(text)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Matches of candidate n-grams against the reference, clipped by
/// reference counts.
fn clipped_matches(candidate: &[String], reference: &[String], n: usize) -> usize {
    let refs = ngram_counts(reference, n);
    ngram_counts(candidate, n)
        .into_iter()
        .map(|(gram, c)| c.min(refs.get(gram).copied().unwrap_or(0)))
        .sum()
}

/// BLEU with unigram and bigram precision, uniform weights and the usual
/// brevity penalty. A zero bigram match count is smoothed to
/// `1 / (bigrams + 1)`; one-token candidates are scored on unigrams only.
pub fn bleu2(candidate: &TokenizedText, reference: &TokenizedText) -> Result<f64> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::InvalidInput("BLEU needs non-empty candidate and reference".into()));
    }
    let (c, r) = (candidate.len(), reference.len());
    let brevity = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    let p1 = clipped_matches(&candidate.tokens, &reference.tokens, 1) as f64 / c as f64;
    if p1 == 0.0 {
        return Ok(0.0);
    }
    if c == 1 {
        return Ok(brevity * p1);
    }
    let bigram_hits = clipped_matches(&candidate.tokens, &reference.tokens, 2);
    let p2 = if bigram_hits == 0 {
        1.0 / c as f64
    } else {
        bigram_hits as f64 / (c - 1) as f64
    };
    Ok(brevity * (p1 * p2).sqrt())
}

/// Share of reference unigrams covered by the candidate, with clipping.
pub fn rouge1_recall(candidate: &TokenizedText, reference: &TokenizedText) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::InvalidInput("ROUGE needs a non-empty reference".into()));
    }
    Ok(clipped_matches(&candidate.tokens, &reference.tokens, 1) as f64 / reference.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Greedy matching over precomputed embeddings: each side's mean of its
/// best cosine against the other side. No baseline rescaling.
pub fn greedy_match<S: Scalar>(candidates: &[Vec<S>], references: &[Vec<S>]) -> Result<GreedyScore> {
    if candidates.is_empty() || references.is_empty() {
        return Err(Error::InvalidInput("greedy matching needs two non-empty lists".into()));
    }
    let sims: Vec<Vec<f64>> = candidates
        .iter()
        .map(|c| references.iter().map(|r| cosine(c, r).as_f64()).collect())
        .collect();
    let precision = sims
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / candidates.len() as f64;
    let recall = (0..references.len())
        .map(|j| sims.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / references.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(GreedyScore { precision, recall, f1 })
}

fn embed_all<S: Scalar, T: AsRef<str>>(items: &[T], embedder: &dyn Embedder<S>) -> Result<Vec<Vec<S>>> {
    let texts: Vec<&str> = items.iter().map(AsRef::as_ref).collect();
    Ok(embedder.embed(&texts)?)
}

pub fn greedy_embed_f1<S: Scalar, T: AsRef<str>>(
    candidates: &[T],
    references: &[T],
    embedder: &dyn Embedder<S>,
) -> Result<GreedyScore> {
    if candidates.is_empty() || references.is_empty() {
        return Err(Error::InvalidInput("greedy matching needs two non-empty lists".into()));
    }
    greedy_match(&embed_all(candidates, embedder)?, &embed_all(references, embedder)?)
}

fn normalized_set<T: AsRef<str>>(items: &[T]) -> HashSet<String> {
    items.iter().filter_map(|k| normalize_keyword(k.as_ref()).ok()).collect()
}

/// Overlap of normalized keyword forms; two empty sets count as identical.
pub fn jaccard<T: AsRef<str>>(a: &[T], b: &[T]) -> f64 {
    let (a, b) = (normalized_set(a), normalized_set(b));
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Cosine between the mean embeddings of two sets; 0 if a mean vanishes.
pub fn set_cosine_vectors<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>]) -> Result<f64> {
    let (Some(ma), Some(mb)) = (mean(a), mean(b)) else {
        return Err(Error::InvalidInput("set cosine needs two non-empty sets".into()));
    };
    Ok(cosine(&ma, &mb).as_f64())
}

pub fn set_cosine<S: Scalar, T: AsRef<str>>(a: &[T], b: &[T], embedder: &dyn Embedder<S>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("set cosine needs two non-empty sets".into()));
    }
    set_cosine_vectors(&embed_all(a, embedder)?, &embed_all(b, embedder)?)
}

/// Relevance against search text and similarity against an offline list.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MethodScores {
    pub relevance_bertscore: Option<f64>,
    pub bleu2: Option<f64>,
    pub rouge1: Option<f64>,
    pub similarity_bertscore: Option<f64>,
    pub jaccard: Option<f64>,
    pub cosine: Option<f64>,
}

pub const METRIC_COLUMNS: [&str; 6] = [
    "relevance_bertscore",
    "bleu2",
    "rouge1",
    "similarity_bertscore",
    "jaccard",
    "cosine",
];

impl MethodScores {
    fn values(&self) -> [Option<f64>; 6] {
        [
            self.relevance_bertscore,
            self.bleu2,
            self.rouge1,
            self.similarity_bertscore,
            self.jaccard,
            self.cosine,
        ]
    }
}

/// Scores a generated keyword list. Relevance is computed when
/// `reference_text` has tokens, similarity when `offline` is non-empty.
pub fn score_method<S: Scalar, T: AsRef<str>>(
    generated: &[T],
    reference_text: Option<&str>,
    offline: &[T],
    embedder: &dyn Embedder<S>,
) -> Result<MethodScores> {
    if generated.is_empty() {
        return Err(Error::InvalidInput("generated keyword list is empty".into()));
    }
    let mut scores = MethodScores::default();
    if let Some(text) = reference_text {
        let candidate = TokenizedText::from_keywords(generated);
        let reference = TokenizedText::new(text);
        if !reference.is_empty() && !candidate.is_empty() {
            scores.relevance_bertscore =
                Some(greedy_embed_f1(candidate.tokens(), reference.tokens(), embedder)?.f1);
            scores.bleu2 = Some(bleu2(&candidate, &reference)?);
            scores.rouge1 = Some(rouge1_recall(&candidate, &reference)?);
        }
    }
    if !offline.is_empty() {
        scores.similarity_bertscore = Some(greedy_embed_f1(generated, offline, embedder)?.f1);
        scores.jaccard = Some(jaccard(generated, offline));
        scores.cosine = Some(set_cosine(generated, offline, embedder)?);
    }
    Ok(scores)
}

/// Column-oriented metric table: `{methods: [...], metrics: {name: [values]}}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvaluationTable {
    pub methods: Vec<String>,
    pub metrics: IndexMap<String, Vec<Option<f64>>>,
}

impl EvaluationTable {
    pub fn new<I: IntoIterator<Item = &'static str>>(columns: I) -> Self {
        EvaluationTable {
            methods: Vec::new(),
            metrics: columns.into_iter().map(|c| (c.to_string(), Vec::new())).collect(),
        }
    }

    /// Appends a row; `values` follow column order.
    pub fn push_row(&mut self, method: impl Into<String>, values: &[Option<f64>]) {
        assert_eq!(values.len(), self.metrics.len(), "row width must match the columns");
        self.methods.push(method.into());
        for (column, v) in self.metrics.values_mut().zip(values) {
            column.push(*v);
        }
    }

    pub fn value(&self, method: &str, metric: &str) -> Option<f64> {
        let row = self.methods.iter().position(|m| m == method)?;
        *self.metrics.get(metric)?.get(row)?
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    /// Aligned text table, values rounded half-even to two decimals.
    pub fn render_text(&self) -> String {
        let mut header = vec!["method".to_string()];
        header.extend(self.metrics.keys().cloned());
        let mut rows = vec![header];
        for (i, method) in self.methods.iter().enumerate() {
            let mut row = vec![method.clone()];
            row.extend(self.metrics.values().map(|col| match col[i] {
                Some(v) => format_2dp(v),
                None => "-".to_string(),
            }));
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c == 0 {
                    let _ = write!(line, "{cell:<w$}", w = widths[c]);
                } else {
                    let _ = write!(line, "  {cell:>w$}", w = widths[c]);
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

/// Two-decimal display with ties going to the even neighbour.
pub fn format_2dp(v: f64) -> String {
    let r = (v * 100.0).round_ties_even() / 100.0;
    format!("{:.2}", if r == 0.0 { 0.0 } else { r })
}

/// Relevance and similarity table, one row per method in input order.
pub fn render_comparison<N: AsRef<str>>(reports: &[(N, MethodScores)]) -> EvaluationTable {
    let mut table = EvaluationTable::new(METRIC_COLUMNS);
    for (name, scores) in reports {
        table.push_row(name.as_ref(), &scores.values());
    }
    table
}
