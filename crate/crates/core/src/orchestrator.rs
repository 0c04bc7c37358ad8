//! The closed keyword-generation loop.
//!
//! Each step searches for fresh product context, retrieves related memory,
//! splits the budget between new and existing categories from the previous
//! step's KPIs, prompts the model, enforces the plan on its answer (with
//! bounded re-prompts on a shortfall), observes KPIs and records everything.
//! A step is transactional: on error neither the state nor memory changes.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::allocation::{aggregate_group_kpi, compute_split, AllocationPlan, PolicyVariant};
use crate::domain::{
    normalize_keyword, selected_kpi, CampaignConfig, CampaignState, Keyword, KeywordSet,
    KpiRecord, Origin, SearchContext, StepOutcome,
};
use crate::error::{Error, Result, ToolError};
use crate::kpi::KpiSource;
use crate::memory::{MemoryRecord, VectorMemory};
use crate::parse::{parse_generation_response, ParsedGeneration};
use crate::prompt::{build_generation_prompt, build_initial_prompt};
use crate::scalar::Scalar;
use crate::tools::{CallDigest, ChatModel, Embedder, SearchProvider};

/// Number of top-KPI memory keywords appended to the search query.
pub const QUERY_TOP_KEYWORDS: usize = 3;

/// Everything a campaign talks to.
pub struct Toolbox<S: Scalar = f64> {
    pub model: Box<dyn ChatModel>,
    pub search: Box<dyn SearchProvider>,
    pub embedder: Arc<dyn Embedder<S>>,
    pub memory: VectorMemory<S>,
    pub kpi_source: Box<dyn KpiSource>,
}

impl<S: Scalar> Toolbox<S> {
    /// Digests of remote exchanges across all tools.
    pub fn audit_trail(&self) -> Vec<CallDigest> {
        let mut out = self.model.audit_trail();
        out.extend(self.search.audit_trail());
        out.extend(self.embedder.audit_trail());
        out
    }
}

/// Calls `f`, retrying retriable tool errors up to `retries` more times.
fn with_retries<T>(retries: u32, mut f: impl FnMut() -> Result<T, ToolError>) -> Result<T, ToolError> {
    let mut attempt = 0;
    loop {
        match f() {
            Err(e) if e.retriable && attempt < retries => {
                tracing::warn!(error = %e, attempt, "tool call failed, retrying");
                attempt += 1;
            }
            other => return other,
        }
    }
}

/// Applies an allocation plan to model output, accumulating across retries.
#[derive(Debug)]
pub struct PlanEnforcer<'a> {
    state: &'a CampaignState,
    step: usize,
    n: usize,
    remaining_wider: usize,
    remaining_quotas: IndexMap<String, usize>,
    opened: IndexMap<String, String>,
    seen: HashSet<String>,
    accepted: Vec<Keyword>,
}

impl<'a> PlanEnforcer<'a> {
    pub fn new(plan: &AllocationPlan, state: &'a CampaignState) -> Self {
        let remaining_quotas = state
            .categories()
            .keys()
            .map(|name| (name.clone(), plan.quota(name)))
            .collect();
        PlanEnforcer {
            state,
            step: state.t() + 1,
            n: plan.n,
            remaining_wider: plan.wider_count,
            remaining_quotas,
            opened: IndexMap::new(),
            seen: HashSet::new(),
            accepted: Vec::new(),
        }
    }

    /// Keeps the keywords that fit the remaining plan, in output order:
    /// duplicates of known keywords are dropped, existing categories take at
    /// most their remaining quota (tagged deeper) and categories new to the
    /// campaign share the remaining wider count (tagged wider).
    pub fn absorb(&mut self, parsed: &ParsedGeneration) {
        for (raw_category, keywords) in &parsed.by_category {
            let existing = self.state.find_category(raw_category).map(str::to_string);
            let category = match &existing {
                Some(name) => name.clone(),
                None => {
                    let Ok(key) = normalize_keyword(raw_category) else { continue };
                    self.opened
                        .get(&key)
                        .cloned()
                        .unwrap_or_else(|| raw_category.trim().to_string())
                }
            };
            for surface in keywords {
                let Ok(key) = normalize_keyword(surface) else { continue };
                if self.state.contains(&key) || self.seen.contains(&key) {
                    continue;
                }
                let origin = if existing.is_some() {
                    let slot = self.remaining_quotas.get_mut(&category).expect("existing category");
                    if *slot == 0 {
                        continue;
                    }
                    *slot -= 1;
                    Origin::Deeper
                } else {
                    if self.remaining_wider == 0 {
                        continue;
                    }
                    self.remaining_wider -= 1;
                    Origin::Wider
                };
                let Ok(kw) = Keyword::new(surface, &category, origin, self.step) else { continue };
                if origin == Origin::Wider {
                    if let Ok(cat_key) = normalize_keyword(&category) {
                        self.opened.entry(cat_key).or_insert_with(|| category.clone());
                    }
                }
                self.seen.insert(key);
                self.accepted.push(kw);
            }
        }
    }

    pub fn deficit(&self) -> usize {
        self.n - self.accepted.len()
    }

    pub fn accepted(&self) -> &[Keyword] {
        &self.accepted
    }

    pub fn remaining_wider(&self) -> usize {
        self.remaining_wider
    }

    pub fn remaining_quotas(&self) -> &IndexMap<String, usize> {
        &self.remaining_quotas
    }

    pub fn into_accepted(self) -> Vec<Keyword> {
        self.accepted
    }
}

/// One-shot plan enforcement: `(accepted, n - |accepted|)`.
pub fn enforce_plan(parsed: &ParsedGeneration, plan: &AllocationPlan, state: &CampaignState) -> (Vec<Keyword>, usize) {
    let mut enforcer = PlanEnforcer::new(plan, state);
    enforcer.absorb(parsed);
    let deficit = enforcer.deficit();
    (enforcer.into_accepted(), deficit)
}

/// Prompts the model for the step-0 keyword set.
pub fn init_keywords(
    config: &CampaignConfig,
    model: &dyn ChatModel,
    search: &dyn SearchProvider,
) -> Result<KeywordSet> {
    config.validate()?;
    let retries = config.retry_limit;
    let context = with_retries(retries, || search.search(&config.product, config.search_results))?;
    let base = build_initial_prompt(config, &context);
    let mut prompt = base.clone();
    let mut last_problem = String::new();

    for attempt in 0..=retries {
        let text = with_retries(retries, || model.complete(&prompt.render(), config.temperature))?;
        let problem = match parse_generation_response(&text) {
            Ok(parsed) => match pick_initial(&parsed, config.initial_count) {
                Ok(set) => return Ok(set),
                Err(reason) => reason,
            },
            Err(e) => e.to_string(),
        };
        tracing::warn!(attempt, %problem, "initial keyword answer rejected");
        prompt = base.with_initial_correction(config.initial_count, &problem);
        last_problem = problem;
    }
    Err(Error::GenerationFailure(format!(
        "no usable initial keyword set after {} attempt(s): {last_problem}",
        retries + 1
    )))
}

/// First `count` distinct keywords in category order.
fn pick_initial(parsed: &ParsedGeneration, count: usize) -> std::result::Result<KeywordSet, String> {
    let mut seen = HashSet::new();
    let mut picked = Vec::with_capacity(count);
    'outer: for (category, keywords) in &parsed.by_category {
        for surface in keywords {
            if picked.len() == count {
                break 'outer;
            }
            let Ok(kw) = Keyword::new(surface, category, Origin::Initial, 0) else { continue };
            if seen.insert(kw.normalized().to_string()) {
                picked.push(kw);
            }
        }
    }
    if picked.len() < count {
        return Err(format!("only {} of {count} distinct keywords", picked.len()));
    }
    let set = KeywordSet::new(0, picked).map_err(|e| e.to_string())?;
    if count >= 2 && set.categories().len() < 2 {
        return Err("keywords must span at least 2 categories".into());
    }
    Ok(set)
}

/// The product plus the highest-KPI keywords in memory, comma-joined.
pub fn search_query<S: Scalar>(config: &CampaignConfig, memory: &VectorMemory<S>) -> String {
    let mut ranked: Vec<(usize, f64)> = memory
        .records()
        .iter()
        .enumerate()
        .map(|(id, r)| (id, selected_kpi(&r.kpis, config.kpi_metric)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut parts = vec![config.product.trim().to_string()];
    for (id, _) in ranked.into_iter().take(QUERY_TOP_KEYWORDS) {
        parts.push(memory.records()[id].keyword.surface().to_string());
    }
    parts.join(", ")
}

fn memory_records<S: Scalar>(
    keywords: &[Keyword],
    kpis: &IndexMap<String, KpiRecord>,
    embedder: &dyn Embedder<S>,
    retries: u32,
) -> Result<Vec<MemoryRecord<S>>> {
    if keywords.is_empty() {
        return Ok(Vec::new());
    }
    let texts: Vec<&str> = keywords.iter().map(Keyword::surface).collect();
    let vectors = with_retries(retries, || embedder.embed(&texts))?;
    Ok(keywords
        .iter()
        .zip(vectors)
        .map(|(kw, embedding)| MemoryRecord {
            keyword: kw.clone(),
            kpis: kpis.get(kw.normalized()).copied().unwrap_or(KpiRecord::ZERO),
            step: kw.step_introduced(),
            embedding,
        })
        .collect())
}

fn store_all<S: Scalar>(memory: &mut VectorMemory<S>, records: Vec<MemoryRecord<S>>) -> Result<()> {
    for r in &records {
        memory.check(r)?;
    }
    for r in records {
        memory.add(r)?;
    }
    Ok(())
}

/// Observes the initial set and opens a campaign state.
pub fn seed_campaign<S: Scalar>(
    config: CampaignConfig,
    initial: KeywordSet,
    tools: &mut Toolbox<S>,
) -> Result<CampaignState> {
    let retries = config.retry_limit;
    let kpis = with_retries(retries, || tools.kpi_source.observe(initial.keywords()))?;
    let records = memory_records(initial.keywords(), &kpis, tools.embedder.as_ref(), retries)?;
    let outcome = StepOutcome::assemble(initial, kpis, config.kpi_metric, None, 0, Vec::new());
    let state = CampaignState::seed(config, outcome)?;
    store_all(&mut tools.memory, records)?;
    Ok(state)
}

/// Runs one generation step. On error, `state` and `tools.memory` are
/// untouched.
pub fn run_step<S: Scalar>(
    state: &CampaignState,
    tools: &mut Toolbox<S>,
    variant: PolicyVariant,
) -> Result<(CampaignState, StepOutcome)> {
    let config = state.config();
    if state.is_finished() {
        return Err(Error::InvalidInput(format!(
            "campaign already reached its horizon of {} steps",
            config.horizon_t
        )));
    }
    let retries = config.retry_limit;
    let step = state.t() + 1;

    // (1) live context and (2) memory retrieval
    let query = search_query(config, &tools.memory);
    let context: SearchContext = with_retries(retries, || tools.search.search(&query, config.search_results))?;
    let product_vec = with_retries(retries, || tools.embedder.embed_one(&config.product))?;
    let hits = tools.memory.query_top_k(&product_vec, config.memory_k)?;

    // (3) allocation
    let (wider_kpi, deeper_kpi) = aggregate_group_kpi(state.last_outcome(), config.kpi_metric);
    let split = compute_split(wider_kpi, deeper_kpi, config.per_step_n, variant)?;
    let plan = AllocationPlan::build(split, &state.category_kpis())?;

    // (4) generation with bounded re-prompts
    let base = build_generation_prompt(state, &context, &hits, &plan);
    let mut prompt = base.clone();
    let mut enforcer = PlanEnforcer::new(&plan, state);
    let mut warnings = Vec::new();
    let mut parsed_any = false;
    for attempt in 0..=retries {
        let text = with_retries(retries, || tools.model.complete(&prompt.render(), config.temperature))?;
        match parse_generation_response(&text) {
            Ok(parsed) => {
                parsed_any = true;
                enforcer.absorb(&parsed);
            }
            Err(e) => warnings.push(format!("attempt {attempt}: unusable model output ({e})")),
        }
        if enforcer.deficit() == 0 {
            break;
        }
        prompt = base.for_retry(
            state,
            enforcer.accepted(),
            enforcer.remaining_wider(),
            enforcer.remaining_quotas(),
            enforcer.deficit(),
        );
    }
    if !parsed_any {
        return Err(Error::GenerationFailure(format!(
            "step {step}: no parsable model output after {} attempt(s)",
            retries + 1
        )));
    }
    let deficit = enforcer.deficit();
    if deficit > 0 {
        warnings.push(format!(
            "accepted {} of {} keywords after {} attempt(s)",
            config.per_step_n - deficit,
            config.per_step_n,
            retries + 1
        ));
    }
    for w in &warnings {
        tracing::warn!(step, "{w}");
    }
    let accepted = enforcer.into_accepted();

    // (5) KPI feedback
    let kpis = with_retries(retries, || tools.kpi_source.observe(&accepted))?;
    let records = memory_records(&accepted, &kpis, tools.embedder.as_ref(), retries)?;

    let keyword_set = KeywordSet::new(step, accepted)?;
    let outcome = StepOutcome::assemble(keyword_set, kpis, config.kpi_metric, Some(plan), deficit, warnings);
    let mut next = state.clone();
    next.commit(outcome.clone())?;

    // (6) memory, only once nothing else can fail
    store_all(&mut tools.memory, records)?;
    Ok((next, outcome))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordView {
    pub surface: String,
    pub category: String,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub allocation: Option<AllocationPlan>,
    pub keywords: Vec<KeywordView>,
    pub kpis: IndexMap<String, KpiRecord>,
    pub group_kpi_wider: f64,
    pub group_kpi_deeper: f64,
    pub deficit: usize,
    pub category_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub config: CampaignConfig,
    pub policy: PolicyVariant,
    pub initial: StepReport,
    pub steps: Vec<StepReport>,
    pub objective_total: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audit: Vec<CallDigest>,
    /// Set on a partial report from a campaign that stopped early.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CampaignReport {
    pub fn from_state(state: &CampaignState, policy: PolicyVariant, audit: Vec<CallDigest>) -> Self {
        let mut seen_categories: HashSet<&str> = HashSet::new();
        let mut views = state.history().iter().map(|o| {
            for kw in o.keyword_set.keywords() {
                seen_categories.insert(state.find_category(kw.category()).unwrap_or(kw.category()));
            }
            StepReport {
                step: o.step,
                allocation: o.allocation.clone(),
                keywords: o
                    .keyword_set
                    .keywords()
                    .iter()
                    .map(|k| KeywordView {
                        surface: k.surface().to_string(),
                        category: k.category().to_string(),
                        origin: k.origin(),
                    })
                    .collect(),
                kpis: o.observed_kpis.clone(),
                group_kpi_wider: o.group_kpi_wider,
                group_kpi_deeper: o.group_kpi_deeper,
                deficit: o.deficit,
                category_count: seen_categories.len(),
                warnings: o.warnings.clone(),
            }
        });
        let initial = views.next().expect("seeded state has step 0");
        let steps = views.collect();
        CampaignReport {
            config: state.config().clone(),
            policy,
            initial,
            steps,
            objective_total: state.objective_total(),
            audit,
            error: None,
        }
    }

    /// Stable, pretty-printed JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Category counts after the initial set and after each step.
    pub fn category_counts(&self) -> Vec<usize> {
        std::iter::once(&self.initial)
            .chain(&self.steps)
            .map(|s| s.category_count)
            .collect()
    }

    pub fn cumulative_keywords(&self) -> Vec<&KeywordView> {
        std::iter::once(&self.initial)
            .chain(&self.steps)
            .flat_map(|s| &s.keywords)
            .collect()
    }
}

/// Final state plus its report.
#[derive(Debug, Clone)]
pub struct CampaignRun {
    pub state: CampaignState,
    pub report: CampaignReport,
}

/// A campaign that stopped on an error, with whatever completed before it.
#[derive(Debug)]
pub struct CampaignFailure {
    pub error: Error,
    pub partial: Option<Box<CampaignRun>>,
}

impl fmt::Display for CampaignFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.partial {
            Some(run) => write!(f, "{} (after {} completed step(s))", self.error, run.state.t()),
            None => write!(f, "{} (before the initial set was ready)", self.error),
        }
    }
}

impl std::error::Error for CampaignFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Initial set, then `horizon_T` generation steps.
pub fn run_campaign<S: Scalar>(
    config: CampaignConfig,
    tools: &mut Toolbox<S>,
    variant: PolicyVariant,
) -> std::result::Result<CampaignRun, CampaignFailure> {
    let fail = |error, partial| CampaignFailure { error, partial };
    let initial = init_keywords(&config, tools.model.as_ref(), tools.search.as_ref()).map_err(|e| fail(e, None))?;
    let mut state = seed_campaign(config, initial, tools).map_err(|e| fail(e, None))?;
    while !state.is_finished() {
        match run_step(&state, tools, variant) {
            Ok((next, _)) => state = next,
            Err(error) => {
                let mut report = CampaignReport::from_state(&state, variant, tools.audit_trail());
                report.error = Some(error.to_string());
                return Err(fail(error, Some(Box::new(CampaignRun { state, report }))));
            }
        }
    }
    let report = CampaignReport::from_state(&state, variant, tools.audit_trail());
    Ok(CampaignRun { state, report })
}
