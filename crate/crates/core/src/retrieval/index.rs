//! Exact-scan cosine index and its on-disk layout.
//!
//! ```text
//! <index_dir>/manifest.json   provider id, dim, entry count, corpus fields
//! <index_dir>/entries.jsonl   one {"table", "text"} object per entry
//! <index_dir>/vectors.f64le   count * dim little-endian f64, entry-major
//! ```

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::provider::{embed, EmbeddingProvider};
use super::{cosine_similarity, EmbeddingVector, RankedMatch, RetrievalError};
use crate::catalog::{TableMetadata, TableRef};
use crate::util::atomic_write;

const FORMAT_VERSION: u32 = 1;
const ENTRIES_FILE: &str = "entries.jsonl";
const VECTORS_FILE: &str = "vectors.f64le";
/// Which metadata fields make up the embedded text.
pub const CORPUS_FIELDS: &str = "title+description";

/// One line of `entries.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub table: TableRef,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub format_version: u32,
    pub provider_id: String,
    pub dim: usize,
    pub count: usize,
    pub corpus_fields: String,
    pub entries_file: String,
    pub vectors_file: String,
}

/// Immutable after build; safe to share across threads for querying.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalIndex {
    provider_id: String,
    dim: usize,
    tables: Vec<TableRef>,
    texts: Vec<String>,
    vectors: Vec<EmbeddingVector>,
}

impl RetrievalIndex {
    /// Embeds `title + description` of every table. Any provider failure
    /// aborts the build; no partial index is returned.
    pub fn build(
        catalog: &[TableMetadata],
        provider: &dyn EmbeddingProvider,
    ) -> Result<Self, RetrievalError> {
        if catalog.is_empty() {
            return Err(RetrievalError::EmptyCatalog);
        }
        let mut seen = BTreeSet::new();
        for meta in catalog {
            if !seen.insert(&meta.table) {
                return Err(RetrievalError::DuplicateRef(meta.table.clone()));
            }
        }
        let texts: Vec<String> = catalog.iter().map(TableMetadata::corpus_text).collect();
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(RetrievalError::EmptyText);
        }
        let vectors = provider.embed_batch(&texts)?;
        if vectors.len() != texts.len() {
            return Err(RetrievalError::ProviderUnavailable(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                vectors.len()
            )));
        }
        for v in &vectors {
            if v.dim() != provider.dim() {
                return Err(RetrievalError::DimMismatch {
                    left: v.dim(),
                    right: provider.dim(),
                });
            }
            if v.norm() == 0.0 {
                return Err(RetrievalError::ZeroVector);
            }
        }
        Ok(RetrievalIndex {
            provider_id: provider.id().to_string(),
            dim: provider.dim(),
            tables: catalog.iter().map(|m| m.table.clone()).collect(),
            texts,
            vectors,
        })
    }

    /// Builds directly from precomputed entries.
    pub fn from_parts(
        provider_id: impl Into<String>,
        entries: Vec<(TableRef, String, EmbeddingVector)>,
    ) -> Result<Self, RetrievalError> {
        let dim = entries.first().map(|e| e.2.dim()).ok_or(RetrievalError::EmptyIndex)?;
        let mut seen = BTreeSet::new();
        let mut idx = RetrievalIndex {
            provider_id: provider_id.into(),
            dim,
            tables: Vec::new(),
            texts: Vec::new(),
            vectors: Vec::new(),
        };
        for (table, text, vector) in entries {
            if vector.dim() != dim {
                return Err(RetrievalError::DimMismatch {
                    left: dim,
                    right: vector.dim(),
                });
            }
            if !seen.insert(table.clone()) {
                return Err(RetrievalError::DuplicateRef(table));
            }
            idx.tables.push(table);
            idx.texts.push(text);
            idx.vectors.push(vector);
        }
        Ok(idx)
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&TableRef, &str, &EmbeddingVector)> {
        self.tables
            .iter()
            .zip(&self.texts)
            .zip(&self.vectors)
            .map(|((t, s), v)| (t, s.as_str(), v))
    }

    pub fn manifest(&self) -> IndexManifest {
        IndexManifest {
            format_version: FORMAT_VERSION,
            provider_id: self.provider_id.clone(),
            dim: self.dim,
            count: self.len(),
            corpus_fields: CORPUS_FIELDS.to_string(),
            entries_file: ENTRIES_FILE.to_string(),
            vectors_file: VECTORS_FILE.to_string(),
        }
    }

    pub fn persist(&self, dir: &Path) -> Result<(), RetrievalError> {
        let storage = |path: &Path, e: std::io::Error| RetrievalError::Storage {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(|e| storage(dir, e))?;

        let mut entries = Vec::new();
        for (table, text) in self.tables.iter().zip(&self.texts) {
            let line = serde_json::json!({ "table": table, "text": text });
            entries.extend_from_slice(line.to_string().as_bytes());
            entries.push(b'\n');
        }
        let mut vectors = Vec::with_capacity(self.len() * self.dim * 8);
        for v in &self.vectors {
            for x in v.values() {
                vectors.extend_from_slice(&x.to_le_bytes());
            }
        }
        let manifest = serde_json::to_vec_pretty(&self.manifest()).expect("manifest serializes");

        for (name, bytes) in [
            (ENTRIES_FILE, &entries),
            (VECTORS_FILE, &vectors),
            ("manifest.json", &manifest),
        ] {
            let path = dir.join(name);
            atomic_write(&path, bytes).map_err(|e| storage(&path, e))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, RetrievalError> {
        let storage = |path: &Path, message: String| RetrievalError::Storage {
            path: path.display().to_string(),
            message,
        };
        let manifest_path = dir.join("manifest.json");
        let manifest: IndexManifest = std::fs::read(&manifest_path)
            .map_err(|e| storage(&manifest_path, e.to_string()))
            .and_then(|b| {
                serde_json::from_slice(&b).map_err(|e| storage(&manifest_path, e.to_string()))
            })?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(storage(
                &manifest_path,
                format!("unsupported format version {}", manifest.format_version),
            ));
        }

        let entries_path = dir.join(&manifest.entries_file);
        let entries_text = std::fs::read_to_string(&entries_path)
            .map_err(|e| storage(&entries_path, e.to_string()))?;
        let entries: Vec<IndexEntry> = entries_text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| storage(&entries_path, e.to_string())))
            .collect::<Result<_, _>>()?;

        let vectors_path = dir.join(&manifest.vectors_file);
        let raw = std::fs::read(&vectors_path).map_err(|e| storage(&vectors_path, e.to_string()))?;
        let expected = manifest.count * manifest.dim * 8;
        if entries.len() != manifest.count || raw.len() != expected {
            return Err(storage(
                dir,
                format!(
                    "manifest says {} entries x {} dims, found {} entries and {} vector bytes",
                    manifest.count,
                    manifest.dim,
                    entries.len(),
                    raw.len()
                ),
            ));
        }
        let mut vectors = Vec::with_capacity(manifest.count);
        for chunk in raw.chunks_exact(manifest.dim * 8).take(manifest.count) {
            let values = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            vectors.push(EmbeddingVector::new(values)?);
        }
        Ok(RetrievalIndex {
            provider_id: manifest.provider_id,
            dim: manifest.dim,
            tables: entries.iter().map(|e| e.table.clone()).collect(),
            texts: entries.into_iter().map(|e| e.text).collect(),
            vectors,
        })
    }

    /// Top-k tables for `prompt`, best first. `k` larger than the index returns
    /// every entry.
    pub fn query(
        &self,
        prompt: &str,
        k: usize,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Vec<RankedMatch>, RetrievalError> {
        if provider.id() != self.provider_id {
            return Err(RetrievalError::ProviderMismatch {
                index: self.provider_id.clone(),
                query: provider.id().to_string(),
            });
        }
        let q = embed(prompt, provider)?;
        rank_by_vector(self, &q, k)
    }

    /// 1-based position of `gold` in the full ranking for `prompt`, or
    /// `len + 1` when the table is not indexed.
    pub fn gold_rank(
        &self,
        prompt: &str,
        gold: &TableRef,
        provider: &dyn EmbeddingProvider,
    ) -> Result<usize, RetrievalError> {
        let all = self.query(prompt, self.len(), provider)?;
        Ok(all
            .iter()
            .find(|m| &m.table == gold)
            .map_or(self.len() + 1, |m| m.rank))
    }
}

/// Scores every entry against `query` and returns the best `k`.
///
/// Ordering is by score descending, then table id ascending, so equal scores
/// always rank the lexicographically smaller id first.
pub fn rank_by_vector(
    index: &RetrievalIndex,
    query: &EmbeddingVector,
    k: usize,
) -> Result<Vec<RankedMatch>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let mut scored = index
        .tables
        .iter()
        .zip(&index.vectors)
        .map(|(t, v)| cosine_similarity(query, v).map(|s| (t, s)))
        .collect::<Result<Vec<_>, _>>()?;
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.cmp(b.0))
    });
    Ok(scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (t, score))| RankedMatch {
            table: t.clone(),
            score,
            rank: i + 1,
        })
        .collect())
}
