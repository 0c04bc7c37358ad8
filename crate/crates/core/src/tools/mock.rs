use std::collections::HashSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::Deserialize;

use crate::domain::{normalize_keyword, SearchContext, Snippet};
use crate::error::{Error, Result, ToolError};
use crate::prompt::{self, PromptRequest};

use super::{ChatModel, SearchProvider};

/// Replays a fixed list of responses, one per call, in order.
#[derive(Debug, Default)]
pub struct ScriptedChatModel {
    responses: Vec<String>,
    cursor: AtomicUsize,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedChatModel {
    pub fn new(responses: Vec<String>) -> Self {
        ScriptedChatModel {
            responses,
            cursor: AtomicUsize::new(0),
            prompts: Mutex::new(Vec::new()),
        }
    }

    /// Reads a JSON array of response strings.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let responses: Vec<String> = serde_json::from_str(&text).map_err(|e| {
            Error::InvalidInput(format!("chat script {}: {e}", path.display()))
        })?;
        Ok(Self::new(responses))
    }

    pub fn calls(&self) -> usize {
        self.cursor.load(Ordering::SeqCst)
    }

    /// Prompts received so far, in call order.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("prompt log poisoned").clone()
    }
}

impl ChatModel for ScriptedChatModel {
    fn complete(&self, prompt: &str, _temperature: f64) -> Result<String, ToolError> {
        let idx = self.cursor.fetch_add(1, Ordering::SeqCst);
        self.prompts
            .lock()
            .expect("prompt log poisoned")
            .push(prompt.to_string());
        self.responses.get(idx).cloned().ok_or_else(|| {
            ToolError::injected(
                "scripted-chat",
                format!("script exhausted after {} responses", self.responses.len()),
            )
        })
    }
}

/// Answers every prompt from a fixed category catalog.
///
/// The response is a pure function of the prompt: initial requests take the
/// first keyword of the first `count` catalog categories; expansion requests
/// fill each deeper quota with the category's next unused keywords and open
/// new catalog categories (at most `per_new_category` keywords each) until
/// the wider count is met.
#[derive(Debug, Clone)]
pub struct CatalogChatModel {
    catalog: IndexMap<String, Vec<String>>,
    per_new_category: usize,
}

impl CatalogChatModel {
    pub fn new(catalog: IndexMap<String, Vec<String>>, per_new_category: usize) -> Self {
        CatalogChatModel {
            catalog,
            per_new_category: per_new_category.max(1),
        }
    }

    /// Reads `{"per_new_category": k, "categories": {name: [keywords]}}`.
    pub fn from_file(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct CatalogFile {
            #[serde(default = "default_per_new")]
            per_new_category: usize,
            categories: IndexMap<String, Vec<String>>,
        }
        fn default_per_new() -> usize {
            3
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CatalogFile = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("catalog {}: {e}", path.display())))?;
        Ok(Self::new(file.categories, file.per_new_category))
    }

    fn answer(&self, request: &PromptRequest) -> IndexMap<String, Vec<String>> {
        let mut out: IndexMap<String, Vec<String>> = IndexMap::new();
        match request {
            PromptRequest::Initial { count } => {
                for (cat, kws) in self.catalog.iter().take(*count) {
                    if let Some(first) = kws.first() {
                        out.insert(cat.clone(), vec![first.clone()]);
                    }
                }
            }
            PromptRequest::Expansion {
                wider_count,
                quotas,
                inventory,
            } => {
                let known: HashSet<String> = inventory
                    .values()
                    .flatten()
                    .filter_map(|k| normalize_keyword(k).ok())
                    .collect();
                let existing: HashSet<String> = inventory
                    .keys()
                    .filter_map(|c| normalize_keyword(c).ok())
                    .collect();
                for (cat, quota) in quotas {
                    let Some(pool) = self.catalog.get(cat) else { continue };
                    let fresh: Vec<String> = pool
                        .iter()
                        .filter(|k| normalize_keyword(k).is_ok_and(|n| !known.contains(&n)))
                        .take(*quota)
                        .cloned()
                        .collect();
                    if !fresh.is_empty() {
                        out.insert(cat.clone(), fresh);
                    }
                }
                let mut remaining = *wider_count;
                for (cat, pool) in &self.catalog {
                    if remaining == 0 {
                        break;
                    }
                    if normalize_keyword(cat).map_or(true, |c| existing.contains(&c)) {
                        continue;
                    }
                    let take = remaining.min(self.per_new_category);
                    let picked: Vec<String> = pool.iter().take(take).cloned().collect();
                    remaining -= picked.len();
                    if !picked.is_empty() {
                        out.insert(cat.clone(), picked);
                    }
                }
            }
        }
        out
    }
}

impl ChatModel for CatalogChatModel {
    fn complete(&self, prompt_text: &str, _temperature: f64) -> Result<String, ToolError> {
        let request = prompt::read_request(prompt_text).ok_or_else(|| {
            ToolError::injected("catalog-chat", "prompt carries no recognizable request block")
        })?;
        let answer = self.answer(&request);
        let body = serde_json::to_string_pretty(&answer).expect("string map serializes");
        Ok(format!("```json\n{body}\n```"))
    }
}

/// Delegates to `inner` but fails (non-retriably) on the given 0-based call.
pub struct FailingChatModel<M> {
    inner: M,
    fail_on_call: usize,
    calls: AtomicUsize,
}

impl<M: ChatModel> FailingChatModel<M> {
    pub fn new(inner: M, fail_on_call: usize) -> Self {
        FailingChatModel {
            inner,
            fail_on_call,
            calls: AtomicUsize::new(0),
        }
    }
}

impl<M: ChatModel> ChatModel for FailingChatModel<M> {
    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, ToolError> {
        let idx = self.calls.fetch_add(1, Ordering::SeqCst);
        if idx == self.fail_on_call {
            return Err(ToolError::injected("chat", format!("injected failure on call {idx}")));
        }
        self.inner.complete(prompt, temperature)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum FixtureSnippet {
    Text(String),
    Full { source_id: String, text: String },
}

/// Search provider backed by a JSON corpus mapping query tokens to snippets.
///
/// A query is split into normalized tokens (whitespace and commas); the
/// snippets of each matching token are returned in query-token order,
/// without duplicates, up to `max_results`. Tokens may also be multi-word
/// corpus keys matched as whole comma-separated query parts.
#[derive(Debug, Clone, Default)]
pub struct FixtureSearch {
    corpus: IndexMap<String, Vec<FixtureSnippet>>,
}

impl FixtureSearch {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: IndexMap<String, Vec<FixtureSnippet>> = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("search corpus: {e}")))?;
        let mut corpus = IndexMap::new();
        for (key, snippets) in raw {
            let key = normalize_keyword(&key)?;
            corpus.insert(key, snippets);
        }
        Ok(FixtureSearch { corpus })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn lookup_keys(query: &str) -> Vec<String> {
        let mut keys = Vec::new();
        for part in query.split(',') {
            let Ok(part) = normalize_keyword(part) else { continue };
            keys.push(part.clone());
            keys.extend(part.split(' ').map(str::to_string));
        }
        keys
    }
}

impl SearchProvider for FixtureSearch {
    fn search(&self, query: &str, max_results: usize) -> Result<SearchContext, ToolError> {
        let mut seen = HashSet::new();
        let mut snippets = Vec::new();
        'outer: for key in Self::lookup_keys(query) {
            let Some(entries) = self.corpus.get(&key) else { continue };
            for (i, entry) in entries.iter().enumerate() {
                if snippets.len() >= max_results {
                    break 'outer;
                }
                let (source_id, text) = match entry {
                    FixtureSnippet::Text(t) => (format!("fixture:{key}#{i}"), t.clone()),
                    FixtureSnippet::Full { source_id, text } => (source_id.clone(), text.clone()),
                };
                if text.trim().is_empty() || !seen.insert(text.clone()) {
                    continue;
                }
                snippets.push(Snippet {
                    source_id,
                    text,
                    retrieved_at: DateTime::<Utc>::UNIX_EPOCH,
                });
            }
        }
        SearchContext::new(query, snippets)
            .map_err(|e| ToolError::injected("fixture-search", e.to_string()))
    }
}

/// Returns the same snippets for every query.
#[derive(Debug, Clone, Default)]
pub struct StaticSearch {
    texts: Vec<String>,
}

impl StaticSearch {
    pub fn new(texts: Vec<String>) -> Self {
        StaticSearch { texts }
    }
}

impl SearchProvider for StaticSearch {
    fn search(&self, query: &str, max_results: usize) -> Result<SearchContext, ToolError> {
        let snippets = self
            .texts
            .iter()
            .take(max_results)
            .enumerate()
            .map(|(i, t)| Snippet {
                source_id: format!("static#{i}"),
                text: t.clone(),
                retrieved_at: DateTime::<Utc>::UNIX_EPOCH,
            })
            .collect();
        SearchContext::new(query, snippets)
            .map_err(|e| ToolError::injected("static-search", e.to_string()))
    }
}
