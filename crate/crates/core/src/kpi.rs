//! Dataset-replay KPI source.
//!
//! A generated keyword receives the KPIs of its most similar dataset
//! keyword when their embedding cosine exceeds the match threshold (0.6),
//! and the zero record otherwise. The same rule scores keyword lists
//! offline, so the feedback loop and the evaluation agree.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{normalize_keyword, Keyword, KpiRecord};
use crate::error::{Error, LineError, Result, ToolError, ToolErrorKind};
use crate::scalar::Scalar;
use crate::tools::Embedder;
use crate::vector::cosine;

pub const CANONICAL_HEADER: [&str; 6] = [
    "product",
    "keyword",
    "search_volume",
    "clicks",
    "cpc",
    "competitor_score",
];

pub const MATCH_THRESHOLD: f64 = 0.6;

/// Supplies KPIs for a batch of keywords. Every input keyword gets a record.
pub trait KpiSource: Send + Sync {
    fn observe(&self, keywords: &[Keyword]) -> Result<IndexMap<String, KpiRecord>, ToolError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub product: String,
    pub keyword: String,
    pub search_volume: u64,
    pub clicks: u64,
    pub cpc: f64,
    pub competitor_score: f64,
    #[serde(default)]
    pub conversions: u64,
}

impl DatasetRow {
    pub fn kpis(&self) -> KpiRecord {
        KpiRecord {
            clicks: self.clicks,
            search_volume: self.search_volume,
            cpc: self.cpc,
            competitor_score: self.competitor_score,
            conversions: self.conversions,
        }
    }
}

/// Maps dataset columns onto [`DatasetRow`] fields, for files that do not
/// use the canonical header (e.g. one file per product without a product
/// column).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub product: Option<String>,
    /// Product name used when the file has no product column.
    pub fixed_product: Option<String>,
    pub keyword: String,
    pub search_volume: String,
    pub clicks: String,
    pub cpc: String,
    pub competitor_score: String,
    pub conversions: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            product: Some("product".into()),
            fixed_product: None,
            keyword: "keyword".into(),
            search_volume: "search_volume".into(),
            clicks: "clicks".into(),
            cpc: "cpc".into(),
            competitor_score: "competitor_score".into(),
            conversions: None,
        }
    }
}

impl ColumnMapping {
    pub fn is_canonical(&self) -> bool {
        *self == ColumnMapping::default()
    }
}

struct Columns {
    product: Option<usize>,
    keyword: usize,
    search_volume: usize,
    clicks: usize,
    cpc: usize,
    competitor_score: usize,
    conversions: Option<usize>,
}

fn resolve_columns(header: &csv::StringRecord, mapping: &ColumnMapping) -> Result<Columns, LineError> {
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if mapping.is_canonical() && names != CANONICAL_HEADER {
        return Err(LineError {
            line: 1,
            message: format!(
                "header must be exactly `{}`, found `{}`",
                CANONICAL_HEADER.join(","),
                names.join(",")
            ),
        });
    }
    let find = |name: &str| {
        names.iter().position(|n| *n == name).ok_or_else(|| LineError {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let product = match (&mapping.product, &mapping.fixed_product) {
        (Some(col), _) => Some(find(col)?),
        (None, Some(_)) => None,
        (None, None) => {
            return Err(LineError {
                line: 1,
                message: "mapping needs a product column or a fixed product".into(),
            })
        }
    };
    Ok(Columns {
        product,
        keyword: find(&mapping.keyword)?,
        search_volume: find(&mapping.search_volume)?,
        clicks: find(&mapping.clicks)?,
        cpc: find(&mapping.cpc)?,
        competitor_score: find(&mapping.competitor_score)?,
        conversions: mapping.conversions.as_deref().map(find).transpose()?,
    })
}

fn parse_real(field: &str, name: &str) -> std::result::Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("{name} = {field:?} is not a number"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("{name} = {field} must be non-negative"));
    }
    Ok(v)
}

fn parse_count(field: &str, name: &str) -> std::result::Result<u64, String> {
    let v = parse_real(field, name)?;
    if v.fract() != 0.0 {
        return Err(format!("{name} = {field} must be a whole number"));
    }
    Ok(v as u64)
}

fn parse_row(record: &csv::StringRecord, cols: &Columns, mapping: &ColumnMapping) -> std::result::Result<DatasetRow, String> {
    let get = |i: usize| record.get(i).unwrap_or("");
    let product = match cols.product {
        Some(i) => get(i).trim().to_string(),
        None => mapping.fixed_product.clone().unwrap_or_default(),
    };
    let keyword = get(cols.keyword).trim().to_string();
    if keyword.is_empty() {
        return Err("keyword is empty".into());
    }
    let competitor_score = parse_real(get(cols.competitor_score), "competitor_score")?;
    if competitor_score > 100.0 {
        return Err(format!("competitor_score = {competitor_score} exceeds 100"));
    }
    Ok(DatasetRow {
        product,
        keyword,
        search_volume: parse_count(get(cols.search_volume), "search_volume")?,
        clicks: parse_count(get(cols.clicks), "clicks")?,
        cpc: parse_real(get(cols.cpc), "cpc")?,
        competitor_score,
        conversions: match cols.conversions {
            Some(i) => parse_count(get(i), "conversions")?,
            None => 0,
        },
    })
}

/// Parses and validates every row, returning all problems found.
pub fn read_dataset_str(text: &str, mapping: &ColumnMapping) -> std::result::Result<Vec<DatasetRow>, Vec<LineError>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| {
        vec![LineError {
            line: 1,
            message: format!("unreadable header: {e}"),
        }]
    })?;
    let cols = resolve_columns(header, mapping).map_err(|e| vec![e])?;

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for result in reader.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                errors.push(LineError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line() as usize);
        match parse_row(&record, &cols, mapping) {
            Ok(row) => {
                let key = (
                    normalize_keyword(&row.product).unwrap_or_default(),
                    normalize_keyword(&row.keyword).unwrap_or_default(),
                );
                if let Some(first) = seen.get(&key) {
                    errors.push(LineError {
                        line,
                        message: format!(
                            "duplicate (product, keyword) ({:?}, {:?}); first seen on line {first}",
                            row.product, row.keyword
                        ),
                    });
                } else {
                    seen.insert(key, line);
                    rows.push(row);
                }
            }
            Err(message) => errors.push(LineError { line, message }),
        }
    }
    if errors.is_empty() {
        Ok(rows)
    } else {
        Err(errors)
    }
}

/// Loads a dataset file, optionally keeping only rows of one product
/// (compared in normalized form).
pub fn load_dataset(path: &Path, product_filter: Option<&str>, mapping: &ColumnMapping) -> Result<Vec<DatasetRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows = read_dataset_str(&text, mapping).map_err(Error::Validation)?;
    filter_product(rows, product_filter)
}

pub fn filter_product(rows: Vec<DatasetRow>, product_filter: Option<&str>) -> Result<Vec<DatasetRow>> {
    let Some(filter) = product_filter else {
        return Ok(rows);
    };
    let wanted = normalize_keyword(filter)?;
    Ok(rows
        .into_iter()
        .filter(|r| normalize_keyword(&r.product).is_ok_and(|p| p == wanted))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeywordMatch<'a, S> {
    pub index: usize,
    pub row: &'a DatasetRow,
    pub cosine: S,
}

/// Best row by cosine, kept only when the cosine strictly exceeds
/// `threshold`. Ties go to the lower row index.
pub fn best_match<'a, S: Scalar>(
    query: &[S],
    rows: &'a [DatasetRow],
    row_embeddings: &[Vec<S>],
    threshold: f64,
) -> Option<KeywordMatch<'a, S>> {
    let mut best: Option<(usize, S)> = None;
    for (i, emb) in row_embeddings.iter().enumerate() {
        let c = cosine(query, emb);
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((i, c));
        }
    }
    let (index, cosine) = best?;
    (cosine.as_f64() > threshold).then(|| KeywordMatch {
        index,
        row: &rows[index],
        cosine,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Noise {
    sigma: f64,
    seed: u64,
}

/// Replays a keyword dataset as a KPI source.
pub struct ReplayOracle<S: Scalar = f64> {
    rows: Vec<DatasetRow>,
    embeddings: Vec<Vec<S>>,
    embedder: Arc<dyn Embedder<S>>,
    threshold: f64,
    noise: Option<Noise>,
}

impl<S: Scalar> std::fmt::Debug for ReplayOracle<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReplayOracle")
            .field("rows", &self.rows.len())
            .field("threshold", &self.threshold)
            .field("noise", &self.noise)
            .finish()
    }
}

impl<S: Scalar> ReplayOracle<S> {
    /// Precomputes row embeddings. An empty dataset is allowed: it matches
    /// nothing.
    pub fn new(rows: Vec<DatasetRow>, embedder: Arc<dyn Embedder<S>>) -> Result<Self, ToolError> {
        let texts: Vec<&str> = rows.iter().map(|r| r.keyword.as_str()).collect();
        let embeddings = if texts.is_empty() {
            Vec::new()
        } else {
            embedder.embed(&texts)?
        };
        Ok(ReplayOracle {
            rows,
            embeddings,
            embedder,
            threshold: MATCH_THRESHOLD,
            noise: None,
        })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    /// Multiplies clicks and search volume by seeded log-normal noise
    /// (median 1). Each keyword's draw depends only on the seed and the
    /// keyword, so results do not depend on call order.
    pub fn with_noise(mut self, sigma: f64, seed: u64) -> Self {
        self.noise = (sigma > 0.0).then_some(Noise { sigma, seed });
        self
    }

    pub fn rows(&self) -> &[DatasetRow] {
        &self.rows
    }

    pub fn row_embeddings(&self) -> &[Vec<S>] {
        &self.embeddings
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn match_text(&self, text: &str) -> Result<Option<KeywordMatch<'_, S>>, ToolError> {
        let query = self.embedder.embed_one(text)?;
        Ok(best_match(&query, &self.rows, &self.embeddings, self.threshold))
    }

    pub fn match_keyword(&self, kw: &Keyword) -> Result<Option<KeywordMatch<'_, S>>, ToolError> {
        self.match_text(kw.surface())
    }

    fn perturb(&self, record: KpiRecord, normalized: &str) -> KpiRecord {
        let Some(noise) = self.noise else {
            return record;
        };
        let key = normalized
            .bytes()
            .fold(noise.seed ^ 0x9e37_79b9_7f4a_7c15, |h, b| {
                (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
            });
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(key);
        let dist = LogNormal::new(0.0, noise.sigma).expect("sigma > 0");
        let mut scale = |v: u64| (v as f64 * dist.sample(&mut rng)).round() as u64;
        KpiRecord {
            clicks: scale(record.clicks),
            search_volume: scale(record.search_volume),
            ..record
        }
    }
}

impl<S: Scalar> KpiSource for ReplayOracle<S> {
    fn observe(&self, keywords: &[Keyword]) -> Result<IndexMap<String, KpiRecord>, ToolError> {
        if keywords.is_empty() {
            return Ok(IndexMap::new());
        }
        let texts: Vec<&str> = keywords.iter().map(Keyword::surface).collect();
        let vectors = self.embedder.embed(&texts)?;
        let mut out = IndexMap::with_capacity(keywords.len());
        for (kw, v) in keywords.iter().zip(&vectors) {
            let record = best_match(v, &self.rows, &self.embeddings, self.threshold)
                .map_or(KpiRecord::ZERO, |m| self.perturb(m.row.kpis(), kw.normalized()));
            out.insert(kw.normalized().to_string(), record);
        }
        Ok(out)
    }
}

/// Integration point for a live advertising platform.
///
/// A live adapter must, for each observation batch: (1) upsert the keywords
/// into the campaign's ad group, (2) wait for the reporting window, and
/// (3) read per-keyword clicks, impressions/search volume, average CPC and
/// competition index, mapping competition to the 0-100 scale. This stub
/// carries no credentials and always reports a configuration error.
#[derive(Debug, Default, Clone)]
pub struct LiveAdsKpiSource {
    pub customer_id: Option<String>,
}

impl KpiSource for LiveAdsKpiSource {
    fn observe(&self, _keywords: &[Keyword]) -> Result<IndexMap<String, KpiRecord>, ToolError> {
        Err(ToolError::new(
            "ads-platform",
            ToolErrorKind::Config,
            "live ads adapter is not configured in this build",
        ))
    }
}

/// Mean KPIs of one method's keywords (unmatched keywords excluded).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KpiAggregate {
    pub clicks: f64,
    pub search_volume: f64,
    pub cpc: f64,
    pub competitor_score: f64,
}

impl KpiAggregate {
    pub fn mean_of(records: &[KpiRecord]) -> Self {
        if records.is_empty() {
            return KpiAggregate::default();
        }
        let n = records.len() as f64;
        let sum = |f: fn(&KpiRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        KpiAggregate {
            clicks: sum(|r| r.clicks as f64),
            search_volume: sum(|r| r.search_volume as f64),
            cpc: sum(|r| r.cpc),
            competitor_score: sum(|r| r.competitor_score),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedKpi {
    /// 0-100, best group = 100.
    pub clicks: f64,
    /// 0-100, best group = 100.
    pub search_volume: f64,
    /// 0-1, most expensive group = 1.
    pub cpc: f64,
    /// Raw 0-100.
    pub competitor_score: f64,
}

/// Max-scales clicks and search volume to 0-100 and CPC to 0-1 across
/// groups. A column that is zero everywhere stays zero.
pub fn normalize_kpi_table(groups: &IndexMap<String, KpiAggregate>) -> IndexMap<String, NormalizedKpi> {
    let max = |f: fn(&KpiAggregate) -> f64| groups.values().map(f).fold(0.0_f64, f64::max);
    let (mc, mv, mp) = (max(|g| g.clicks), max(|g| g.search_volume), max(|g| g.cpc));
    let scale = |v: f64, m: f64, bound: f64| if m > 0.0 { v / m * bound } else { 0.0 };
    groups
        .iter()
        .map(|(name, g)| {
            (
                name.clone(),
                NormalizedKpi {
                    clicks: scale(g.clicks, mc, 100.0),
                    search_volume: scale(g.search_volume, mv, 100.0),
                    cpc: scale(g.cpc, mp, 1.0),
                    competitor_score: g.competitor_score,
                },
            )
        })
        .collect()
}
