//! Validated value types for keywords, KPIs, campaign configuration and
//! the evolving campaign state.

use std::collections::HashSet;
use std::fmt;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::allocation::AllocationPlan;
use crate::error::{Error, Result};

/// Canonical identity of a keyword: NFKC, lowercased, trimmed, with runs of
/// whitespace collapsed to one ASCII space.
///
/// ```
/// use kwgen_core::normalize_keyword;
/// assert_eq!(normalize_keyword("  Sony  Bank ").unwrap(), "sony bank");
/// assert_eq!(normalize_keyword("ＳＯＮＹ").unwrap(), "sony");
/// ```
pub fn normalize_keyword(raw: &str) -> Result<String> {
    let folded: String = raw.nfkc().collect::<String>().to_lowercase();
    // Lowercasing can leave a few compatibility characters un-normalized.
    let folded: String = folded.nfkc().collect();
    let collapsed = collapse_whitespace(&folded);
    if collapsed.is_empty() {
        return Err(Error::InvalidKeyword(format!("{raw:?} is empty after trimming")));
    }
    Ok(collapsed)
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Initial,
    Wider,
    Deeper,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Initial => "initial",
            Origin::Wider => "wider",
            Origin::Deeper => "deeper",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyword {
    surface: String,
    normalized: String,
    category: String,
    origin: Origin,
    step_introduced: usize,
}

impl Keyword {
    pub fn new(
        surface: &str,
        category: &str,
        origin: Origin,
        step_introduced: usize,
    ) -> Result<Self> {
        let normalized = normalize_keyword(surface)?;
        let surface = collapse_whitespace(surface);
        let category = collapse_whitespace(category);
        if category.is_empty() {
            return Err(Error::InvalidKeyword(format!(
                "keyword {surface:?} has an empty category"
            )));
        }
        if (step_introduced == 0) != (origin == Origin::Initial) {
            return Err(Error::InvalidKeyword(format!(
                "{surface:?}: origin {origin} is inconsistent with step {step_introduced}"
            )));
        }
        Ok(Keyword {
            surface,
            normalized,
            category,
            origin,
            step_introduced,
        })
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn normalized(&self) -> &str {
        &self.normalized
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn step_introduced(&self) -> usize {
        self.step_introduced
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KpiRecord {
    pub clicks: u64,
    pub search_volume: u64,
    pub cpc: f64,
    pub competitor_score: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub conversions: u64,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

impl KpiRecord {
    pub const ZERO: KpiRecord = KpiRecord {
        clicks: 0,
        search_volume: 0,
        cpc: 0.0,
        competitor_score: 0.0,
        conversions: 0,
    };

    pub fn new(clicks: u64, search_volume: u64, cpc: f64, competitor_score: f64) -> Result<Self> {
        let record = KpiRecord {
            clicks,
            search_volume,
            cpc,
            competitor_score,
            conversions: 0,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cpc.is_finite() && self.cpc >= 0.0) {
            return Err(Error::InvalidKpi(format!("cpc {} must be >= 0", self.cpc)));
        }
        if !(self.competitor_score.is_finite() && (0.0..=100.0).contains(&self.competitor_score)) {
            return Err(Error::InvalidKpi(format!(
                "competitor_score {} must lie in [0, 100]",
                self.competitor_score
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KpiMetric {
    #[default]
    Clicks,
    Conversions,
}

/// Projects the configured KPI out of a record.
pub fn selected_kpi(record: &KpiRecord, metric: KpiMetric) -> f64 {
    match metric {
        KpiMetric::Clicks => record.clicks as f64,
        KpiMetric::Conversions => record.conversions as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordSet {
    step: usize,
    keywords: Vec<Keyword>,
}

impl KeywordSet {
    pub fn new(step: usize, keywords: Vec<Keyword>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(keywords.len());
        for kw in &keywords {
            if !seen.insert(kw.normalized()) {
                return Err(Error::InvalidKeyword(format!(
                    "duplicate keyword {:?} in set for step {step}",
                    kw.normalized()
                )));
            }
        }
        Ok(KeywordSet { step, keywords })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn keywords(&self) -> &[Keyword] {
        &self.keywords
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    /// Distinct categories in first-appearance order.
    pub fn categories(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for kw in &self.keywords {
            if !out.contains(&kw.category()) {
                out.push(kw.category());
            }
        }
        out
    }
}

fn default_temperature() -> f64 {
    0.1
}

fn default_retry_limit() -> u32 {
    3
}

fn default_memory_k() -> usize {
    20
}

fn default_search_results() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub product: String,
    #[serde(rename = "horizon_T")]
    pub horizon_t: usize,
    pub per_step_n: usize,
    pub initial_count: usize,
    #[serde(default)]
    pub kpi_metric: KpiMetric,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
    #[serde(default)]
    pub seed: u64,
    /// Memory records retrieved per step for the prompt.
    #[serde(default = "default_memory_k")]
    pub memory_k: usize,
    /// Snippets requested from the search provider per query.
    #[serde(default = "default_search_results")]
    pub search_results: usize,
}

impl CampaignConfig {
    /// Defaults used by the hermetic demo: T = 3, temperature 0.1.
    pub fn new(product: impl Into<String>) -> Self {
        CampaignConfig {
            product: product.into(),
            horizon_t: 3,
            per_step_n: 10,
            initial_count: 3,
            kpi_metric: KpiMetric::Clicks,
            temperature: default_temperature(),
            retry_limit: default_retry_limit(),
            seed: 0,
            memory_k: default_memory_k(),
            search_results: default_search_results(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| {
            Err(Error::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if self.product.trim().is_empty() {
            return bad("product", "must not be empty");
        }
        if self.horizon_t < 1 {
            return bad("horizon_T", "must be >= 1");
        }
        if self.per_step_n < 1 {
            return bad("per_step_n", "must be >= 1");
        }
        if self.initial_count < 1 {
            return bad("initial_count", "must be >= 1");
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad("temperature", "must be a finite value >= 0");
        }
        if self.memory_k < 1 {
            return bad("memory_k", "must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    pub source_id: String,
    pub text: String,
    pub retrieved_at: DateTime<Utc>,
}

/// Live information gathered for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchContext {
    pub query: String,
    snippets: Vec<Snippet>,
}

impl SearchContext {
    pub fn new(query: impl Into<String>, snippets: Vec<Snippet>) -> Result<Self> {
        if let Some(bad) = snippets.iter().find(|s| s.text.trim().is_empty()) {
            return Err(Error::InvalidInput(format!(
                "snippet from {:?} has empty text",
                bad.source_id
            )));
        }
        Ok(SearchContext {
            query: query.into(),
            snippets,
        })
    }

    pub fn empty(query: impl Into<String>) -> Self {
        SearchContext {
            query: query.into(),
            snippets: Vec::new(),
        }
    }

    pub fn snippets(&self) -> &[Snippet] {
        &self.snippets
    }

    /// All snippet texts joined by newlines, in provider order.
    pub fn joined_text(&self) -> String {
        self.snippets
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step: usize,
    pub keyword_set: KeywordSet,
    pub observed_kpis: IndexMap<String, KpiRecord>,
    pub group_kpi_wider: f64,
    pub group_kpi_deeper: f64,
    /// Absent for the initial step.
    pub allocation: Option<AllocationPlan>,
    /// `n - |accepted|` after the retry loop.
    pub deficit: usize,
    pub warnings: Vec<String>,
}

impl StepOutcome {
    /// Builds an outcome, filling zero records for keywords without KPIs and
    /// computing the wider/deeper group totals from origin tags.
    pub fn assemble(
        keyword_set: KeywordSet,
        mut kpis: IndexMap<String, KpiRecord>,
        metric: KpiMetric,
        allocation: Option<AllocationPlan>,
        deficit: usize,
        warnings: Vec<String>,
    ) -> Self {
        let mut observed = IndexMap::with_capacity(keyword_set.len());
        for kw in keyword_set.keywords() {
            let record = kpis.swap_remove(kw.normalized()).unwrap_or(KpiRecord::ZERO);
            observed.insert(kw.normalized().to_string(), record);
        }
        let mut wider = 0.0;
        let mut deeper = 0.0;
        for kw in keyword_set.keywords() {
            let value = selected_kpi(&observed[kw.normalized()], metric);
            match kw.origin() {
                Origin::Wider => wider += value,
                Origin::Deeper => deeper += value,
                Origin::Initial => {}
            }
        }
        StepOutcome {
            step: keyword_set.step(),
            keyword_set,
            observed_kpis: observed,
            group_kpi_wider: wider,
            group_kpi_deeper: deeper,
            allocation,
            deficit,
            warnings,
        }
    }

    /// Selected KPI summed over every keyword of the step.
    pub fn total_kpi(&self, metric: KpiMetric) -> f64 {
        self.observed_kpis
            .values()
            .map(|r| selected_kpi(r, metric))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    /// Normalized keyword keys, in insertion order.
    pub members: Vec<String>,
    pub kpi_total: f64,
    pub created_step: usize,
}

/// Everything the orchestrator knows about a campaign between steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignState {
    config: CampaignConfig,
    cumulative: IndexMap<String, Keyword>,
    categories: IndexMap<String, CategoryStats>,
    history: Vec<StepOutcome>,
    t: usize,
}

impl CampaignState {
    /// Starts a campaign from the observed initial set (step 0).
    pub fn seed(config: CampaignConfig, initial: StepOutcome) -> Result<Self> {
        config.validate()?;
        if initial.step != 0 {
            return Err(Error::InvalidInput(format!(
                "initial outcome must be step 0, got {}",
                initial.step
            )));
        }
        let mut state = CampaignState {
            config,
            cumulative: IndexMap::new(),
            categories: IndexMap::new(),
            history: Vec::new(),
            t: 0,
        };
        state.absorb(initial)?;
        Ok(state)
    }

    /// Appends a generation step. Every keyword must be new and carry an
    /// origin consistent with the category inventory before the step.
    pub fn commit(&mut self, outcome: StepOutcome) -> Result<()> {
        if outcome.step != self.t + 1 {
            return Err(Error::InvalidInput(format!(
                "expected outcome for step {}, got {}",
                self.t + 1,
                outcome.step
            )));
        }
        for kw in outcome.keyword_set.keywords() {
            let exists = self.find_category(kw.category()).is_some();
            let consistent = match kw.origin() {
                Origin::Wider => !exists,
                Origin::Deeper => exists,
                Origin::Initial => false,
            };
            if !consistent {
                return Err(Error::InvalidKeyword(format!(
                    "{:?} tagged {} but category {:?} {}",
                    kw.surface(),
                    kw.origin(),
                    kw.category(),
                    if exists { "already exists" } else { "is new" }
                )));
            }
        }
        self.absorb(outcome)?;
        self.t += 1;
        Ok(())
    }

    fn absorb(&mut self, outcome: StepOutcome) -> Result<()> {
        for kw in outcome.keyword_set.keywords() {
            if self.cumulative.contains_key(kw.normalized()) {
                return Err(Error::InvalidKeyword(format!(
                    "{:?} is already in the campaign",
                    kw.normalized()
                )));
            }
        }
        let metric = self.config.kpi_metric;
        for kw in outcome.keyword_set.keywords() {
            let value = selected_kpi(&outcome.observed_kpis[kw.normalized()], metric);
            let name = self
                .find_category(kw.category())
                .map(str::to_string)
                .unwrap_or_else(|| kw.category().to_string());
            let stats = self.categories.entry(name).or_insert_with(|| CategoryStats {
                members: Vec::new(),
                kpi_total: 0.0,
                created_step: outcome.step,
            });
            stats.members.push(kw.normalized().to_string());
            stats.kpi_total += value;
            self.cumulative
                .insert(kw.normalized().to_string(), kw.clone());
        }
        self.history.push(outcome);
        Ok(())
    }

    /// Looks up an existing category by case/width-insensitive name and
    /// returns its canonical spelling.
    pub fn find_category(&self, name: &str) -> Option<&str> {
        if let Some((key, _)) = self.categories.get_key_value(name) {
            return Some(key.as_str());
        }
        let wanted = normalize_keyword(name).ok()?;
        self.categories
            .keys()
            .find(|k| normalize_keyword(k).ok().as_deref() == Some(wanted.as_str()))
            .map(String::as_str)
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn cumulative(&self) -> &IndexMap<String, Keyword> {
        &self.cumulative
    }

    pub fn contains(&self, normalized: &str) -> bool {
        self.cumulative.contains_key(normalized)
    }

    pub fn categories(&self) -> &IndexMap<String, CategoryStats> {
        &self.categories
    }

    /// Category → cumulative selected-KPI, in creation order.
    pub fn category_kpis(&self) -> IndexMap<String, f64> {
        self.categories
            .iter()
            .map(|(name, stats)| (name.clone(), stats.kpi_total))
            .collect()
    }

    pub fn history(&self) -> &[StepOutcome] {
        &self.history
    }

    pub fn last_outcome(&self) -> &StepOutcome {
        self.history.last().expect("seeded state always has step 0")
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.config.horizon_t
    }

    /// Selected KPI summed over every generation step (step 0 excluded).
    pub fn objective_total(&self) -> f64 {
        let metric = self.config.kpi_metric;
        self.history
            .iter()
            .filter(|o| o.step > 0)
            .map(|o| o.total_kpi(metric))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn whitespace_and_case_are_folded() {
        assert_eq!(normalize_keyword("  Sony  Bank ").unwrap(), "sony bank");
        assert_eq!(normalize_keyword("Sony\t\nBank").unwrap(), "sony bank");
    }

    #[test]
    fn japanese_text_is_already_normal() {
        assert_eq!(normalize_keyword("ソニー銀行").unwrap(), "ソニー銀行");
    }

    #[test]
    fn full_width_latin_folds_to_ascii() {
        // U+FF33 U+FF2F U+FF2E U+FF39 decompose to "SONY" under NFKC.
        assert_eq!(normalize_keyword("ＳＯＮＹ").unwrap(), "sony");
        // Ideographic space is whitespace after NFKC.
        assert_eq!(normalize_keyword("ソニー\u{3000}銀行").unwrap(), "ソニー 銀行");
        // Half-width katakana composes to full width.
        assert_eq!(normalize_keyword("ｿﾆｰ").unwrap(), "ソニー");
    }

    #[test]
    fn blank_keyword_is_rejected() {
        assert!(matches!(normalize_keyword("   "), Err(Error::InvalidKeyword(_))));
        assert!(matches!(normalize_keyword("\u{3000}"), Err(Error::InvalidKeyword(_))));
    }

    #[test]
    fn origin_must_match_step() {
        assert!(Keyword::new("a", "c", Origin::Initial, 0).is_ok());
        assert!(Keyword::new("a", "c", Origin::Initial, 1).is_err());
        assert!(Keyword::new("a", "c", Origin::Wider, 0).is_err());
        assert!(Keyword::new("a", "c", Origin::Deeper, 2).is_ok());
    }

    #[test]
    fn keyword_surface_is_collapsed_but_keeps_case() {
        let kw = Keyword::new("  Sony   Bank ", "Core", Origin::Initial, 0).unwrap();
        assert_eq!(kw.surface(), "Sony Bank");
        assert_eq!(kw.normalized(), "sony bank");
    }

    #[test]
    fn selected_kpi_projects_clicks() {
        let mut r = KpiRecord::new(42, 10, 1.0, 5.0).unwrap();
        assert_eq!(selected_kpi(&r, KpiMetric::Clicks), 42.0);
        r.clicks = 0;
        assert_eq!(selected_kpi(&r, KpiMetric::Clicks), 0.0);
        r.clicks = 13998;
        assert_eq!(selected_kpi(&r, KpiMetric::Clicks), 13998.0);
        r.conversions = 7;
        assert_eq!(selected_kpi(&r, KpiMetric::Conversions), 7.0);
    }

    #[test]
    fn kpi_record_bounds() {
        assert!(KpiRecord::new(0, 0, -0.1, 0.0).is_err());
        assert!(KpiRecord::new(0, 0, 0.0, 100.5).is_err());
        assert!(KpiRecord::new(0, 0, 0.0, 100.0).is_ok());
    }

    #[test]
    fn keyword_set_rejects_normalized_duplicates() {
        let a = Keyword::new("Sony Bank", "c", Origin::Initial, 0).unwrap();
        let b = Keyword::new("ＳＯＮＹ bank", "c", Origin::Initial, 0).unwrap();
        assert!(KeywordSet::new(0, vec![a, b]).is_err());
    }

    #[test]
    fn config_validation_names_the_field() {
        let mut c = CampaignConfig::new("p");
        c.horizon_t = 0;
        match c.validate() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "horizon_T"),
            other => panic!("unexpected {other:?}"),
        }
        let mut c = CampaignConfig::new("p");
        c.per_step_n = 0;
        assert!(c.validate().is_err());
    }

    fn kw(s: &str, c: &str, o: Origin, step: usize) -> Keyword {
        Keyword::new(s, c, o, step).unwrap()
    }

    fn kpis(entries: &[(&str, u64)]) -> IndexMap<String, KpiRecord> {
        entries
            .iter()
            .map(|(k, c)| (normalize_keyword(k).unwrap(), KpiRecord::new(*c, 0, 0.0, 0.0).unwrap()))
            .collect()
    }

    fn seeded() -> CampaignState {
        let set = KeywordSet::new(
            0,
            vec![kw("a1", "A", Origin::Initial, 0), kw("b1", "B", Origin::Initial, 0)],
        )
        .unwrap();
        let outcome =
            StepOutcome::assemble(set, kpis(&[("a1", 5)]), KpiMetric::Clicks, None, 0, vec![]);
        CampaignState::seed(CampaignConfig::new("p"), outcome).unwrap()
    }

    #[test]
    fn outcome_fills_zero_records_and_group_totals() {
        let set = KeywordSet::new(
            1,
            vec![
                kw("k1", "New", Origin::Wider, 1),
                kw("k2", "New", Origin::Wider, 1),
                kw("k3", "A", Origin::Deeper, 1),
                kw("k4", "A", Origin::Deeper, 1),
            ],
        )
        .unwrap();
        let o = StepOutcome::assemble(
            set,
            kpis(&[("k1", 10), ("k2", 20), ("k3", 70)]),
            KpiMetric::Clicks,
            None,
            0,
            vec![],
        );
        assert_eq!(o.observed_kpis.len(), 4);
        assert_eq!(o.observed_kpis["k4"], KpiRecord::ZERO);
        assert_eq!((o.group_kpi_wider, o.group_kpi_deeper), (30.0, 70.0));
        assert_eq!(o.total_kpi(KpiMetric::Clicks), 100.0);
    }

    #[test]
    fn state_tracks_categories_and_rejects_duplicates() {
        let mut s = seeded();
        assert_eq!(s.categories()["A"].kpi_total, 5.0);
        assert_eq!(s.find_category("a"), Some("A"));

        let set = KeywordSet::new(
            1,
            vec![kw("a2", "a", Origin::Deeper, 1), kw("c1", "C", Origin::Wider, 1)],
        )
        .unwrap();
        let o = StepOutcome::assemble(set, kpis(&[("a2", 3), ("c1", 4)]), KpiMetric::Clicks, None, 0, vec![]);
        s.commit(o).unwrap();
        assert_eq!(s.t(), 1);
        assert_eq!(s.categories()["A"].kpi_total, 8.0);
        assert_eq!(s.categories()["A"].members, vec!["a1", "a2"]);
        assert_eq!(s.categories()["C"].created_step, 1);
        assert_eq!(s.objective_total(), 7.0);

        let dup = KeywordSet::new(2, vec![kw("A1", "A", Origin::Deeper, 2)]).unwrap();
        let o = StepOutcome::assemble(dup, IndexMap::new(), KpiMetric::Clicks, None, 0, vec![]);
        let before = s.clone();
        assert!(s.commit(o).is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn commit_rejects_inconsistent_origin() {
        let mut s = seeded();
        let set = KeywordSet::new(1, vec![kw("x", "A", Origin::Wider, 1)]).unwrap();
        let o = StepOutcome::assemble(set, IndexMap::new(), KpiMetric::Clicks, None, 0, vec![]);
        assert!(s.commit(o).is_err());
        let set = KeywordSet::new(1, vec![kw("x", "Z", Origin::Deeper, 1)]).unwrap();
        let o = StepOutcome::assemble(set, IndexMap::new(), KpiMetric::Clicks, None, 0, vec![]);
        assert!(s.commit(o).is_err());
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(raw in "\\PC{1,24}") {
            if let Ok(once) = normalize_keyword(&raw) {
                prop_assert_eq!(normalize_keyword(&once).unwrap(), once);
            }
        }
    }
}
