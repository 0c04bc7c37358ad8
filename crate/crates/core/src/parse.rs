//! Extraction of the category → keywords JSON object from model output.

use indexmap::IndexMap;
use serde_json::Value;

use crate::error::{Error, Result};

/// Model output as an ordered category → keywords mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedGeneration {
    pub by_category: IndexMap<String, Vec<String>>,
}

impl ParsedGeneration {
    pub fn keyword_count(&self) -> usize {
        self.by_category.values().map(Vec::len).sum()
    }
}

/// Finds the first well-formed JSON object in `text`, tolerating prose and
/// code fences around it, and checks it has the shape
/// `{string: [string, ...]}`. Keywords are trimmed; blank ones are dropped.
pub fn parse_generation_response(text: &str) -> Result<ParsedGeneration> {
    let object = first_json_object(text).ok_or(Error::Parse)?;
    let mut by_category = IndexMap::new();
    for (name, value) in object {
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::Schema("empty category name".into()));
        }
        let Value::Array(items) = value else {
            return Err(Error::Schema(format!("category {name:?} is not an array")));
        };
        let mut keywords = Vec::with_capacity(items.len());
        for item in items {
            let Value::String(s) = item else {
                return Err(Error::Schema(format!("category {name:?} holds a non-string keyword")));
            };
            let s = s.trim();
            if !s.is_empty() {
                keywords.push(s.to_string());
            }
        }
        by_category
            .entry(name.to_string())
            .or_insert_with(Vec::new)
            .extend(keywords);
    }
    Ok(ParsedGeneration { by_category })
}

fn first_json_object(text: &str) -> Option<serde_json::Map<String, Value>> {
    for (start, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}
