//! Command implementations, independent of argument parsing.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use kwgen_core::kpi::{filter_product, read_dataset_str, ColumnMapping, DatasetRow, KpiAggregate, ReplayOracle};
use kwgen_core::metrics::{greedy_embed_f1, jaccard, score_method, set_cosine, EvaluationTable};
use kwgen_core::tools::remote::{
    HttpTransport, RemoteChat, RemoteEmbed, RemoteSearch, CHAT_KEY_VAR, EMBED_KEY_VAR, SEARCH_KEY_VAR,
};
use kwgen_core::tools::{CatalogChatModel, FixtureSearch, HashEmbedder, ScriptedChatModel};
use kwgen_core::{
    normalize_kpi_table, parse_generation_response, run_campaign, CampaignFailure, CampaignReport, CampaignRun,
    ChatModel, Embedder, Keyword, LineError, Memory, Origin, PolicyVariant, SearchProvider, Tools,
};

use crate::config::{EmbedderChoice, ModelChoice, RunConfig, SearchChoice};
use crate::CliError;

const REMOTE_TIMEOUT: Duration = Duration::from_secs(30);

/// Most dataset problems listed by `dataset validate`.
pub const MAX_REPORTED_ERRORS: usize = 20;

fn transport(tool: &'static str, url: &str, key_env: &Option<String>, default_var: &str) -> Result<HttpTransport, CliError> {
    let var = key_env.as_deref().unwrap_or(default_var);
    Ok(HttpTransport::from_env(tool, url, var, REMOTE_TIMEOUT)?)
}

pub fn build_embedder(choice: &EmbedderChoice) -> Result<Arc<dyn Embedder<f64>>, CliError> {
    Ok(match choice {
        EmbedderChoice::Hash { dim } => Arc::new(HashEmbedder::<f64>::new(*dim)),
        EmbedderChoice::Remote {
            url,
            model,
            dim,
            api_key_env,
        } => Arc::new(RemoteEmbed::<f64>::new(
            transport("embed", url, api_key_env, EMBED_KEY_VAR)?,
            model.clone(),
            *dim,
        )),
    })
}

pub fn embedder_dim(choice: &EmbedderChoice) -> usize {
    match choice {
        EmbedderChoice::Hash { dim } | EmbedderChoice::Remote { dim, .. } => *dim,
    }
}

pub fn load_rows(path: &Path, product: Option<&str>) -> Result<Vec<DatasetRow>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read dataset {}: {e}", path.display())))?;
    let rows = read_dataset_str(&text, &ColumnMapping::default()).map_err(|errors| {
        let listed: Vec<String> = errors.iter().take(MAX_REPORTED_ERRORS).map(ToString::to_string).collect();
        CliError::Validation(format!("dataset {} is invalid:\n  {}", path.display(), listed.join("\n  ")))
    })?;
    Ok(filter_product(rows, product)?)
}

/// Instantiates every tool named by the config, with an empty memory.
pub fn build_tools(cfg: &RunConfig) -> Result<Tools, CliError> {
    let embedder = build_embedder(&cfg.embedder)?;
    let model: Box<dyn ChatModel> = match &cfg.model {
        ModelChoice::Mock { script } => Box::new(ScriptedChatModel::from_file(script)?),
        ModelChoice::Catalog { catalog } => Box::new(CatalogChatModel::from_file(catalog)?),
        ModelChoice::Remote {
            url,
            model,
            api_key_env,
        } => Box::new(RemoteChat::new(transport("chat", url, api_key_env, CHAT_KEY_VAR)?, model.clone())),
    };
    let search: Box<dyn SearchProvider> = match &cfg.search {
        SearchChoice::Fixture { corpus } => Box::new(FixtureSearch::from_file(corpus)?),
        SearchChoice::Remote { url, api_key_env } => {
            Box::new(RemoteSearch::new(transport("search", url, api_key_env, SEARCH_KEY_VAR)?))
        }
    };
    let rows = load_rows(&cfg.dataset, cfg.dataset_product.as_deref())?;
    let oracle = ReplayOracle::new(rows, embedder.clone())?.with_noise(cfg.kpi_noise, cfg.campaign.seed);
    Ok(Tools {
        model,
        search,
        embedder,
        memory: Memory::new(embedder_dim(&cfg.embedder)),
        kpi_source: Box::new(oracle),
    })
}

/// Runs one campaign with the given policy. A failed campaign keeps its
/// partial report.
pub fn run_with_policy(cfg: &RunConfig, policy: PolicyVariant) -> Result<CampaignRun, CampaignOutcomeError> {
    let mut tools = build_tools(cfg).map_err(CampaignOutcomeError::Setup)?;
    let run = run_campaign(cfg.campaign.clone(), &mut tools, policy).map_err(CampaignOutcomeError::Failed)?;
    if let Some(path) = &cfg.memory_snapshot {
        tools
            .memory
            .snapshot(path)
            .map_err(|e| CampaignOutcomeError::Setup(e.into()))?;
    }
    Ok(run)
}

#[derive(Debug)]
pub enum CampaignOutcomeError {
    Setup(CliError),
    Failed(CampaignFailure),
}

impl From<CampaignOutcomeError> for CliError {
    fn from(e: CampaignOutcomeError) -> Self {
        match e {
            CampaignOutcomeError::Setup(e) => e,
            CampaignOutcomeError::Failed(f) => CliError::from(f.error),
        }
    }
}

/// Sum of clicks over generation steps (the initial set is excluded).
pub fn cumulative_clicks(report: &CampaignReport) -> f64 {
    report
        .steps
        .iter()
        .flat_map(|s| s.kpis.values())
        .map(|k| k.clicks as f64)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub policy: String,
    pub cumulative_clicks: f64,
    pub objective_total: f64,
    pub per_step: Vec<f64>,
    pub keywords: usize,
    pub categories: usize,
    /// Similarity of the final keyword set to the dataset's own keywords.
    pub similarity_bertscore: Option<f64>,
    pub jaccard: Option<f64>,
    pub cosine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    /// Policies by cumulative clicks, best first; ties keep input order.
    pub ranking: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl AblationReport {
    pub fn table(&self) -> EvaluationTable {
        let mut table = EvaluationTable::new([
            "cumulative_clicks",
            "objective_total",
            "keywords",
            "categories",
            "similarity_bertscore",
            "jaccard",
            "cosine",
        ]);
        for r in &self.rows {
            table.push_row(
                &r.policy,
                &[
                    Some(r.cumulative_clicks),
                    Some(r.objective_total),
                    Some(r.keywords as f64),
                    Some(r.categories as f64),
                    r.similarity_bertscore,
                    r.jaccard,
                    r.cosine,
                ],
            );
        }
        table
    }
}

/// Drops repeated variants, keeping the first occurrence.
pub fn dedup_variants(variants: &[PolicyVariant]) -> (Vec<PolicyVariant>, Vec<String>) {
    let mut kept: Vec<PolicyVariant> = Vec::new();
    let mut warnings = Vec::new();
    for v in variants {
        if kept.contains(v) {
            warnings.push(format!("variant {v} listed more than once; running it once"));
        } else {
            kept.push(*v);
        }
    }
    (kept, warnings)
}

fn ablation_row(cfg: &RunConfig, policy: PolicyVariant, offline: &[String]) -> Result<AblationRow, CliError> {
    let run = run_with_policy(cfg, policy)?;
    let report = &run.report;
    let keywords: Vec<&str> = report.cumulative_keywords().iter().map(|k| k.surface.as_str()).collect();
    let embedder = build_embedder(&cfg.embedder)?;
    let offline: Vec<&str> = offline.iter().map(String::as_str).collect();
    let (bert, jac, cos) = if offline.is_empty() {
        (None, None, None)
    } else {
        (
            Some(greedy_embed_f1(&keywords, &offline, embedder.as_ref())?.f1),
            Some(jaccard(&keywords, &offline)),
            Some(set_cosine(&keywords, &offline, embedder.as_ref())?),
        )
    };
    Ok(AblationRow {
        policy: policy.to_string(),
        cumulative_clicks: cumulative_clicks(report),
        objective_total: report.objective_total,
        per_step: run.state.history()[1..]
            .iter()
            .map(|o| o.total_kpi(cfg.campaign.kpi_metric))
            .collect(),
        keywords: keywords.len(),
        categories: run.state.categories().len(),
        similarity_bertscore: bert,
        jaccard: jac,
        cosine: cos,
    })
}

/// One campaign per variant, identical apart from the policy. Campaigns
/// run on separate threads.
pub fn ablate(cfg: &RunConfig, variants: &[PolicyVariant]) -> Result<AblationReport, CliError> {
    let (variants, warnings) = dedup_variants(variants);
    for w in &warnings {
        tracing::warn!("{w}");
    }
    if variants.len() < 2 {
        return Err(CliError::Validation(format!(
            "ablation needs at least 2 distinct variants, got {}",
            variants.len()
        )));
    }
    let offline: Vec<String> = load_rows(&cfg.dataset, cfg.dataset_product.as_deref())?
        .into_iter()
        .map(|r| r.keyword)
        .collect();
    let results: Vec<Result<AblationRow, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = variants
            .iter()
            .map(|&v| {
                let offline = &offline;
                scope.spawn(move || ablation_row(cfg, v, offline))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("ablation worker panicked")).collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[b].cumulative_clicks.total_cmp(&rows[a].cumulative_clicks).then(a.cmp(&b)));
    Ok(AblationReport {
        ranking: order.iter().map(|&i| rows[i].policy.clone()).collect(),
        rows,
        warnings,
    })
}

/// Reads a keyword list: a JSON array of strings, a JSON category map
/// (model output or a campaign report), or one keyword per line with `#`
/// comments.
pub fn read_keyword_list(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read keyword list {}: {e}", path.display())))?;
    let bad = |reason: String| CliError::Validation(format!("keyword list {}: {reason}", path.display()));
    let trimmed = text.trim_start();
    let list: Vec<String> = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed).map_err(|e| bad(e.to_string()))?
    } else if trimmed.starts_with('{') {
        match serde_json::from_str::<CampaignReport>(trimmed) {
            Ok(report) => report.cumulative_keywords().iter().map(|k| k.surface.clone()).collect(),
            Err(_) => parse_generation_response(trimmed)
                .map_err(|e| bad(e.to_string()))?
                .by_category
                .into_values()
                .flatten()
                .collect(),
        }
    } else {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    };
    let list: Vec<String> = list.into_iter().filter(|k| !k.trim().is_empty()).collect();
    if list.is_empty() {
        return Err(bad("no keywords".into()));
    }
    Ok(list)
}

pub const KPI_COLUMNS: [&str; 5] = ["n_clicks", "n_search_volume", "n_cpc", "competitor_score", "match_rate"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Mean KPIs of matched keywords, max-scaled across methods.
    pub kpi: EvaluationTable,
    /// Relevance to the reference text and similarity to the dataset's
    /// keywords.
    pub comparison: EvaluationTable,
}

/// Scores each named keyword list against the dataset and reference text.
pub fn evaluate(
    methods: &[(String, Vec<String>)],
    rows: Vec<DatasetRow>,
    reference_text: &str,
    embedder: Arc<dyn Embedder<f64>>,
) -> Result<EvaluationReport, CliError> {
    if methods.is_empty() {
        return Err(CliError::Validation("no keyword lists to evaluate".into()));
    }
    let offline: Vec<String> = rows.iter().map(|r| r.keyword.clone()).collect();
    let oracle = ReplayOracle::new(rows, embedder.clone())?;

    let mut aggregates: IndexMap<String, KpiAggregate> = IndexMap::new();
    let mut match_rates = Vec::new();
    let mut comparison = Vec::new();
    for (name, keywords) in methods {
        if keywords.is_empty() {
            return Err(CliError::Validation(format!("keyword list `{name}` is empty")));
        }
        let mut matched = Vec::new();
        for surface in keywords {
            let kw = Keyword::new(surface, "evaluated", Origin::Initial, 0)?;
            if let Some(m) = oracle.match_keyword(&kw)? {
                matched.push(m.row.kpis());
            }
        }
        match_rates.push(matched.len() as f64 / keywords.len() as f64);
        aggregates.insert(name.clone(), KpiAggregate::mean_of(&matched));
        let reference = (!reference_text.trim().is_empty()).then_some(reference_text);
        let scores = score_method(keywords.as_slice(), reference, offline.as_slice(), embedder.as_ref())?;
        comparison.push((name.clone(), scores));
    }

    let mut kpi = EvaluationTable::new(KPI_COLUMNS);
    for ((name, n), rate) in normalize_kpi_table(&aggregates).iter().zip(match_rates) {
        kpi.push_row(
            name,
            &[Some(n.clicks), Some(n.search_volume), Some(n.cpc), Some(n.competitor_score), Some(rate)],
        );
    }
    Ok(EvaluationReport {
        kpi,
        comparison: kwgen_core::metrics::render_comparison(&comparison),
    })
}

/// Outcome of `dataset validate`.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetCheck {
    Valid { rows: usize },
    Invalid { errors: Vec<LineError> },
}

pub fn check_dataset(path: &Path) -> Result<DatasetCheck, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read dataset {}: {e}", path.display())))?;
    Ok(match read_dataset_str(&text, &ColumnMapping::default()) {
        Ok(rows) => DatasetCheck::Valid { rows: rows.len() },
        Err(errors) => DatasetCheck::Invalid { errors },
    })
}
