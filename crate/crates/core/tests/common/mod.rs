#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use kwgen_core::kpi::{load_dataset, read_dataset_str, ColumnMapping, ReplayOracle};
use kwgen_core::tools::{CatalogChatModel, FixtureSearch, HashEmbedder, ScriptedChatModel, StaticSearch};
use kwgen_core::{CampaignConfig, ChatModel, KpiSource, Memory, Tools};

pub fn fixture(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(path)
}

pub fn demo_config() -> CampaignConfig {
    let mut config = CampaignConfig::new("sony medical insurance");
    config.per_step_n = 18;
    config.retry_limit = 0;
    config.seed = 7;
    config
}

pub fn demo_tools() -> Tools {
    let embedder = Arc::new(HashEmbedder::<f64>::new(256));
    let rows = load_dataset(
        &fixture("demo/dataset.csv"),
        Some("sony medical insurance"),
        &ColumnMapping::default(),
    )
    .unwrap();
    Tools {
        model: Box::new(ScriptedChatModel::from_file(&fixture("demo/chat_script.json")).unwrap()),
        search: Box::new(FixtureSearch::from_file(&fixture("demo/search_corpus.json")).unwrap()),
        embedder: embedder.clone(),
        memory: Memory::new(256),
        kpi_source: Box::new(ReplayOracle::new(rows, embedder).unwrap()),
    }
}

pub fn ablation_config() -> CampaignConfig {
    let mut config = CampaignConfig::new("mirrorless camera");
    config.seed = 11;
    config
}

pub fn ablation_tools() -> Tools {
    let embedder = Arc::new(HashEmbedder::<f64>::new(256));
    let rows = load_dataset(&fixture("ablation/dataset.csv"), None, &ColumnMapping::default()).unwrap();
    Tools {
        model: Box::new(CatalogChatModel::from_file(&fixture("ablation/catalog.json")).unwrap()),
        search: Box::new(FixtureSearch::from_file(&fixture("ablation/search_corpus.json")).unwrap()),
        embedder: embedder.clone(),
        memory: Memory::new(256),
        kpi_source: Box::new(ReplayOracle::new(rows, embedder).unwrap()),
    }
}

pub const SMALL_DATASET: &str = "product,keyword,search_volume,clicks,cpc,competitor_score\n\
    sony bank,sony bank mortgage,900,50,1.2,60\n\
    sony bank,sony bank account,700,30,0.8,40\n\
    sony bank,housing loan rates,500,20,1.5,70\n\
    sony bank,foreign currency deposit,400,10,0.6,20\n";

pub fn small_oracle() -> ReplayOracle<f64> {
    let rows = read_dataset_str(SMALL_DATASET, &ColumnMapping::default()).unwrap();
    ReplayOracle::new(rows, Arc::new(HashEmbedder::<f64>::new(64))).unwrap()
}

/// Tools for small hand-written scenarios: n = 4, 64-dim hash embedder.
pub fn small_tools(model: Box<dyn ChatModel>, kpi: Box<dyn KpiSource>) -> Tools {
    Tools {
        model,
        search: Box::new(StaticSearch::new(vec!["Sony Bank offers mortgages and deposits.".into()])),
        embedder: Arc::new(HashEmbedder::<f64>::new(64)),
        memory: Memory::new(64),
        kpi_source: kpi,
    }
}

pub fn small_config() -> CampaignConfig {
    let mut c = CampaignConfig::new("sony bank");
    c.per_step_n = 4;
    c.horizon_t = 2;
    c.retry_limit = 1;
    c
}

pub fn scripted(responses: &[&str]) -> Box<dyn ChatModel> {
    Box::new(ScriptedChatModel::new(responses.iter().map(|s| s.to_string()).collect()))
}
