//! Long-term keyword memory: every generated keyword with its KPIs and
//! embedding, searchable by exact cosine similarity.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Keyword, KpiRecord};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vector::{dot, is_unit};

pub const SNAPSHOT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct MemoryRecord<S = f64> {
    pub keyword: Keyword,
    pub kpis: KpiRecord,
    pub step: usize,
    pub embedding: Vec<S>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit<'a, S> {
    pub id: usize,
    pub record: &'a MemoryRecord<S>,
    pub cosine: S,
}

/// Flat, exact vector store. Record ids are insertion indices.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorMemory<S = f64> {
    dim: usize,
    records: Vec<MemoryRecord<S>>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u64,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct Line<S> {
    id: usize,
    #[serde(flatten)]
    record: MemoryRecord<S>,
}

impl<S: Scalar> VectorMemory<S> {
    pub fn new(dim: usize) -> Self {
        VectorMemory {
            dim,
            records: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[MemoryRecord<S>] {
        &self.records
    }

    pub fn get(&self, id: usize) -> Option<&MemoryRecord<S>> {
        self.records.get(id)
    }

    /// Validates a record without inserting it.
    pub fn check(&self, record: &MemoryRecord<S>) -> Result<()> {
        if record.embedding.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: record.embedding.len(),
            });
        }
        if !is_unit(&record.embedding) {
            return Err(Error::InvalidInput(format!(
                "embedding for {:?} is not unit norm",
                record.keyword.surface()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, record: MemoryRecord<S>) -> Result<usize> {
        self.check(&record)?;
        self.records.push(record);
        Ok(self.records.len() - 1)
    }

    /// Top-`k` records by cosine to `query`, highest first; equal scores
    /// keep insertion order. Stored vectors are unit norm, so the score is
    /// the dot product divided by the query norm.
    pub fn query_top_k(&self, query: &[S], k: usize) -> Result<Vec<Hit<'_, S>>> {
        if query.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: query.len(),
            });
        }
        if k == 0 {
            return Err(Error::InvalidInput("k must be >= 1".into()));
        }
        let qn = dot(query, query).sqrt();
        let mut hits: Vec<Hit<'_, S>> = self
            .records
            .iter()
            .enumerate()
            .map(|(id, record)| Hit {
                id,
                record,
                cosine: if qn > S::zero() {
                    dot(query, &record.embedding) / qn
                } else {
                    S::zero()
                },
            })
            .collect();
        hits.sort_by(|a, b| b.cosine.total_cmp_s(&a.cosine).then(a.id.cmp(&b.id)));
        hits.truncate(k);
        Ok(hits)
    }

    /// The store as JSON lines: a `{"version","dim"}` header, then one
    /// record per line. Floats use the shortest round-trip decimal form.
    pub fn to_snapshot_string(&self) -> Result<String> {
        let header = Header {
            version: SNAPSHOT_VERSION,
            dim: self.dim,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for (id, record) in self.records.iter().enumerate() {
            let line = serde_json::to_string(&Line {
                id,
                record: record.clone(),
            })
            .map_err(|e| Error::InvalidInput(format!("record {id} is not serializable: {e}")))?;
            out.push_str(&line);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn snapshot(&self, path: &Path) -> Result<()> {
        let text = self.to_snapshot_string()?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_snapshot_str(&text)
    }

    pub fn from_snapshot_str(text: &str) -> Result<Self> {
        let corrupt = |line: usize, reason: String| Error::CorruptSnapshot { line, reason };
        if !text.ends_with('\n') {
            return Err(corrupt(text.lines().count().max(1), "missing final newline (truncated?)".into()));
        }
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| corrupt(1, "empty file".into()))?;
        let header: Header =
            serde_json::from_str(first).map_err(|e| corrupt(1, format!("bad header: {e}")))?;
        if header.version != SNAPSHOT_VERSION {
            return Err(Error::SnapshotVersion {
                found: header.version,
                expected: SNAPSHOT_VERSION,
            });
        }
        let mut store = VectorMemory::new(header.dim);
        for (idx, line) in lines {
            let lineno = idx + 1;
            let parsed: Line<S> =
                serde_json::from_str(line).map_err(|e| corrupt(lineno, e.to_string()))?;
            if parsed.id != store.len() {
                return Err(corrupt(
                    lineno,
                    format!("expected id {}, found {}", store.len(), parsed.id),
                ));
            }
            store
                .add(parsed.record)
                .map_err(|e| corrupt(lineno, e.to_string()))?;
        }
        Ok(store)
    }
}

trait TotalCmp {
    fn total_cmp_s(&self, other: &Self) -> std::cmp::Ordering;
}

impl<S: Scalar> TotalCmp for S {
    fn total_cmp_s(&self, other: &Self) -> std::cmp::Ordering {
        self.as_f64().total_cmp(&other.as_f64())
    }
}
