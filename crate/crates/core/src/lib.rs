//! Closed-loop keyword generation for sponsored search advertising.
//!
//! The crate is organised bottom-up: [`domain`] value types, the
//! [`allocation`] policy, pluggable [`tools`], the vector [`memory`], the
//! dataset-replay [`kpi`] source, prompt rendering and parsing, the
//! [`orchestrator`] loop and the evaluation [`metrics`].
//!
//! Numeric code is generic over [`Scalar`] (`f32`/`f64`); the aliases below
//! fix the scalar to `f64`, which is what the orchestrator and CLI use.

pub mod allocation;
pub mod domain;
pub mod error;
pub mod kpi;
pub mod memory;
pub mod metrics;
pub mod orchestrator;
pub mod parse;
pub mod prompt;
pub mod scalar;
pub mod tools;
pub mod vector;

pub use allocation::{
    aggregate_group_kpi, assign_deeper_quotas, compute_split, AllocationPlan, PolicyVariant, Split,
};
pub use domain::{
    normalize_keyword, selected_kpi, CampaignConfig, CampaignState, CategoryStats, Keyword,
    KeywordSet, KpiMetric, KpiRecord, Origin, SearchContext, Snippet, StepOutcome,
};
pub use error::{Error, LineError, Result, ToolError, ToolErrorKind};
pub use kpi::{
    load_dataset, normalize_kpi_table, ColumnMapping, DatasetRow, KpiAggregate, KpiSource,
    NormalizedKpi, ReplayOracle,
};
pub use memory::{Hit, MemoryRecord, VectorMemory};
pub use orchestrator::{
    enforce_plan, init_keywords, run_campaign, run_step, seed_campaign, CampaignFailure,
    CampaignReport, CampaignRun, Toolbox,
};
pub use parse::{parse_generation_response, ParsedGeneration};
pub use prompt::{build_generation_prompt, GenerationPrompt};
pub use scalar::Scalar;
pub use tools::{ChatModel, Embedder, HashEmbedder, SearchProvider};

pub type Memory = VectorMemory<f64>;
pub type MemoryF32 = VectorMemory<f32>;
pub type Embedding = Vec<f64>;
pub type EmbeddingF32 = Vec<f32>;
pub type Oracle = ReplayOracle<f64>;
pub type OracleF32 = ReplayOracle<f32>;
pub type Tools = Toolbox<f64>;
pub type ToolsF32 = Toolbox<f32>;
