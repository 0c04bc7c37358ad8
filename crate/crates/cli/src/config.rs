//! Run configuration files (TOML).
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use kwgen_core::{CampaignConfig, KpiMetric, PolicyVariant};

use crate::CliError;

fn default_dim() -> usize {
    kwgen_core::tools::DEFAULT_HASH_DIM
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderChoice {
    Hash {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Remote {
        url: String,
        model: String,
        dim: usize,
        api_key_env: Option<String>,
    },
}

impl Default for EmbedderChoice {
    fn default() -> Self {
        EmbedderChoice::Hash { dim: default_dim() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelChoice {
    /// Replays a JSON array of canned responses.
    Mock { script: PathBuf },
    /// Answers from a category catalog.
    Catalog { catalog: PathBuf },
    Remote {
        url: String,
        model: String,
        api_key_env: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SearchChoice {
    Fixture { corpus: PathBuf },
    Remote { url: String, api_key_env: Option<String> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    product: String,
    #[serde(rename = "horizon_T")]
    horizon_t: Option<usize>,
    per_step_n: Option<usize>,
    initial_count: Option<usize>,
    #[serde(default)]
    kpi_metric: KpiMetric,
    temperature: Option<f64>,
    retry_limit: Option<u32>,
    #[serde(default)]
    seed: u64,
    memory_k: Option<usize>,
    search_results: Option<usize>,
    #[serde(default = "default_policy")]
    policy: String,
    fixed_ratio: Option<f64>,
    dataset: PathBuf,
    dataset_product: Option<String>,
    #[serde(default)]
    kpi_noise: f64,
    memory_snapshot: Option<PathBuf>,
    output: Option<PathBuf>,
    #[serde(default)]
    embedder: EmbedderChoice,
    model: ModelChoice,
    search: SearchChoice,
}

fn default_policy() -> String {
    "full_adaptive".into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub campaign: CampaignConfig,
    pub policy: PolicyVariant,
    pub dataset: PathBuf,
    pub dataset_product: Option<String>,
    /// Log-normal sigma applied to replayed clicks and volume; 0 disables.
    pub kpi_noise: f64,
    pub memory_snapshot: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub embedder: EmbedderChoice,
    pub model: ModelChoice,
    pub search: SearchChoice,
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("config field `{field}`: {reason}"))
}

fn require_file(field: &str, path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(invalid(field, format!("file not found: {}", path.display())))
    }
}

fn parse_policy(name: &str, ratio: Option<f64>) -> Result<PolicyVariant, CliError> {
    let bare = name.trim().to_ascii_lowercase();
    if bare == "fixed" || bare == "fixed_growth" {
        let ratio = ratio.ok_or_else(|| invalid("fixed_ratio", "required when policy is fixed_growth"))?;
        return PolicyVariant::fixed(ratio).map_err(|e| invalid("fixed_ratio", e));
    }
    if ratio.is_some() {
        return Err(invalid("fixed_ratio", "only valid with policy = \"fixed_growth\""));
    }
    name.parse().map_err(|e| invalid("policy", e))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self, CliError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {}", e.message())))?;
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

        let defaults = CampaignConfig::new(raw.product.clone());
        let campaign = CampaignConfig {
            product: raw.product,
            horizon_t: raw.horizon_t.unwrap_or(defaults.horizon_t),
            per_step_n: raw.per_step_n.unwrap_or(defaults.per_step_n),
            initial_count: raw.initial_count.unwrap_or(defaults.initial_count),
            kpi_metric: raw.kpi_metric,
            temperature: raw.temperature.unwrap_or(defaults.temperature),
            retry_limit: raw.retry_limit.unwrap_or(defaults.retry_limit),
            seed: raw.seed,
            memory_k: raw.memory_k.unwrap_or(defaults.memory_k),
            search_results: raw.search_results.unwrap_or(defaults.search_results),
        };
        campaign.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        if campaign.kpi_metric == KpiMetric::Conversions {
            // The dataset format has no conversions column, so every keyword would score 0.
            return Err(invalid("kpi_metric", "\"conversions\" needs a dataset with conversions; use \"clicks\""));
        }
        let policy = parse_policy(&raw.policy, raw.fixed_ratio)?;

        let dataset = resolve(&raw.dataset);
        require_file("dataset", &dataset)?;
        if !(raw.kpi_noise.is_finite() && raw.kpi_noise >= 0.0) {
            return Err(invalid("kpi_noise", "must be a finite value >= 0"));
        }

        let embedder = raw.embedder;
        match &embedder {
            EmbedderChoice::Hash { dim } | EmbedderChoice::Remote { dim, .. } if *dim < 8 => {
                return Err(invalid("embedder.dim", "must be >= 8"));
            }
            _ => {}
        }
        let model = match raw.model {
            ModelChoice::Mock { script } => {
                let script = resolve(&script);
                require_file("model.script", &script)?;
                ModelChoice::Mock { script }
            }
            ModelChoice::Catalog { catalog } => {
                let catalog = resolve(&catalog);
                require_file("model.catalog", &catalog)?;
                ModelChoice::Catalog { catalog }
            }
            remote => remote,
        };
        let search = match raw.search {
            SearchChoice::Fixture { corpus } => {
                let corpus = resolve(&corpus);
                require_file("search.corpus", &corpus)?;
                SearchChoice::Fixture { corpus }
            }
            remote => remote,
        };

        Ok(RunConfig {
            campaign,
            policy,
            dataset,
            dataset_product: raw.dataset_product,
            kpi_noise: raw.kpi_noise,
            memory_snapshot: raw.memory_snapshot.as_deref().map(resolve),
            output: raw.output.as_deref().map(resolve),
            embedder,
            model,
            search,
        })
    }

    /// True when every tool is offline.
    pub fn is_hermetic(&self) -> bool {
        matches!(self.embedder, EmbedderChoice::Hash { .. })
            && !matches!(self.model, ModelChoice::Remote { .. })
            && !matches!(self.search, SearchChoice::Remote { .. })
    }
}
