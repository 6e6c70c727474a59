//! Dense retrieval of tables for a natural-language question.
//!
//! Table descriptions are embedded once into a [`RetrievalIndex`]; a question
//! is embedded with the same provider and every entry is scored by cosine
//! similarity. Downstream stages use only the rank-1 table.

mod index;
mod metrics;
mod provider;

use serde::{Deserialize, Serialize};

use crate::catalog::TableRef;

pub use index::{rank_by_vector, IndexManifest, IndexEntry, RetrievalIndex};
pub use metrics::{exact_match_at_k, HitRates};
pub use provider::{
    embed, EmbeddingProvider, HashingProvider, HttpEmbeddingProvider, PrecomputedProvider,
};

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("non-finite value in embedding")]
    NonFinite,
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("index is empty")]
    EmptyIndex,
    #[error("duplicate table {0} in index input")]
    DuplicateRef(TableRef),
    #[error("index was built with provider {index:?}, query uses {query:?}")]
    ProviderMismatch { index: String, query: String },
    #[error("k must be positive")]
    InvalidK,
    #[error("no rankings to score")]
    EmptyRankings,
    #[error("gold rank for {0:?} must be at least 1")]
    InvalidRank(String),
    #[error("index storage error at {path}: {message}")]
    Storage { path: String, message: String },
}

/// Dense embedding. Always finite; dimension is the length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, RetrievalError> {
        if values.is_empty() {
            return Err(RetrievalError::DimMismatch { left: 0, right: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RetrievalError::NonFinite);
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = RetrievalError;

    fn try_from(value: Vec<f64>) -> Result<Self, Self::Error> {
        EmbeddingVector::new(value)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(value: EmbeddingVector) -> Self {
        value.0
    }
}

/// `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, RetrievalError> {
    if a.dim() != b.dim() {
        return Err(RetrievalError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(RetrievalError::ZeroVector);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMatch {
    pub table: TableRef,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}
