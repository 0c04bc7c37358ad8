//! Pluggable backends: chat model, search provider and text embedder.
//!
//! Every interface has a deterministic offline implementation (used by the
//! hermetic demo and the test suites) and a thin HTTP adapter.

mod hash_embed;
mod mock;
pub mod remote;

pub use hash_embed::{hash_embed, HashEmbedder, DEFAULT_HASH_DIM};
pub use mock::{
    CatalogChatModel, FailingChatModel, FixtureSearch, ScriptedChatModel, StaticSearch,
};

use serde::{Deserialize, Serialize};

use crate::domain::SearchContext;
use crate::error::ToolError;
use crate::scalar::Scalar;

pub trait ChatModel: Send + Sync {
    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, ToolError>;

    /// Request/response digests recorded by remote clients.
    fn audit_trail(&self) -> Vec<CallDigest> {
        Vec::new()
    }
}

pub trait SearchProvider: Send + Sync {
    /// Results come back in provider relevance order.
    fn search(&self, query: &str, max_results: usize) -> Result<SearchContext, ToolError>;

    fn audit_trail(&self) -> Vec<CallDigest> {
        Vec::new()
    }
}

/// Maps texts to unit-norm vectors of a fixed dimension.
pub trait Embedder<S: Scalar = f64>: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<S>>, ToolError>;

    fn embed_one(&self, text: &str) -> Result<Vec<S>, ToolError> {
        Ok(self.embed(&[text])?.pop().expect("one text in, one vector out"))
    }

    fn audit_trail(&self) -> Vec<CallDigest> {
        Vec::new()
    }
}

/// SHA-256 digests of one remote exchange, kept for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallDigest {
    pub tool: String,
    pub request_sha256: String,
    pub response_sha256: String,
}
