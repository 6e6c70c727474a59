use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbeddingVector, RetrievalError};

/// Maps text to dense vectors. Must be deterministic per `(id, text)`.
pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier recorded in index manifests.
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, RetrievalError>;
}

pub fn embed(text: &str, provider: &dyn EmbeddingProvider) -> Result<EmbeddingVector, RetrievalError> {
    if text.trim().is_empty() {
        return Err(RetrievalError::EmptyText);
    }
    let mut out = provider.embed_batch(&[text.to_string()])?;
    let v = out
        .pop()
        .ok_or_else(|| RetrievalError::ProviderUnavailable("provider returned no vector".into()))?;
    if v.dim() != provider.dim() {
        return Err(RetrievalError::DimMismatch {
            left: v.dim(),
            right: provider.dim(),
        });
    }
    Ok(v)
}

/// Signed feature hashing of lowercase alphanumeric tokens (FNV-1a).
///
/// Keyword-level only; meant for tests and offline smoke runs, not for
/// reproducing sentence-encoder quality.
#[derive(Debug, Clone)]
pub struct HashingProvider {
    dim: usize,
    id: String,
}

impl HashingProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dim must be positive");
        HashingProvider {
            dim,
            id: format!("hashing-fnv1a-{dim}"),
        }
    }

    fn vector_for(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for token in text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            let h = fnv1a(token.to_lowercase().as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        v
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl EmbeddingProvider for HashingProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        texts
            .iter()
            .map(|t| EmbeddingVector::new(self.vector_for(t)))
            .collect()
    }
}

/// Lookup table of vectors computed elsewhere (e.g. by a sentence encoder run
/// offline). Texts are matched after trimming.
#[derive(Debug, Clone)]
pub struct PrecomputedProvider {
    id: String,
    dim: usize,
    vectors: HashMap<String, EmbeddingVector>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PrecomputedFile {
    provider_id: String,
    dim: usize,
    entries: Vec<PrecomputedEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PrecomputedEntry {
    text: String,
    vector: Vec<f64>,
}

impl PrecomputedProvider {
    pub fn from_pairs<I, S>(id: impl Into<String>, pairs: I) -> Result<Self, RetrievalError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (text, values) in pairs {
            let v = EmbeddingVector::new(values)?;
            match dim {
                None => dim = Some(v.dim()),
                Some(d) if d != v.dim() => {
                    return Err(RetrievalError::DimMismatch {
                        left: d,
                        right: v.dim(),
                    })
                }
                _ => {}
            }
            vectors.insert(text.into().trim().to_string(), v);
        }
        let dim = dim.ok_or_else(|| RetrievalError::ProviderUnavailable("no vectors".into()))?;
        Ok(PrecomputedProvider {
            id: id.into(),
            dim,
            vectors,
        })
    }

    /// Loads `{"provider_id", "dim", "entries": [{"text", "vector"}]}`.
    pub fn from_file(path: &Path) -> Result<Self, RetrievalError> {
        let storage = |message: String| RetrievalError::Storage {
            path: path.display().to_string(),
            message,
        };
        let bytes = std::fs::read(path).map_err(|e| storage(e.to_string()))?;
        let file: PrecomputedFile =
            serde_json::from_slice(&bytes).map_err(|e| storage(e.to_string()))?;
        let provider = Self::from_pairs(
            file.provider_id,
            file.entries.into_iter().map(|e| (e.text, e.vector)),
        )?;
        if provider.dim != file.dim {
            return Err(RetrievalError::DimMismatch {
                left: provider.dim,
                right: file.dim,
            });
        }
        Ok(provider)
    }
}

impl EmbeddingProvider for PrecomputedProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        texts
            .iter()
            .map(|t| {
                self.vectors.get(t.trim()).cloned().ok_or_else(|| {
                    RetrievalError::ProviderUnavailable(format!(
                        "no precomputed vector for {:?}",
                        t.chars().take(60).collect::<String>()
                    ))
                })
            })
            .collect()
    }
}

/// Remote embedding service: `POST {"texts": [...]}` answered by
/// `{"vectors": [[...], ...]}`. An optional bearer token is read from the
/// environment variable named at construction.
pub struct HttpEmbeddingProvider {
    id: String,
    url: String,
    dim: usize,
    token: Option<String>,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

impl HttpEmbeddingProvider {
    pub fn new(id: impl Into<String>, url: impl Into<String>, dim: usize, token_env: Option<&str>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        HttpEmbeddingProvider {
            id: id.into(),
            url: url.into(),
            dim,
            token: token_env.and_then(|name| std::env::var(name).ok()),
            agent,
        }
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        let unavailable = |e: ureq::Error| RetrievalError::ProviderUnavailable(format!("{}: {e}", self.url));
        let mut req = self.agent.post(&self.url);
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let resp: EmbedResponse = req
            .send_json(EmbedRequest { texts })
            .map_err(unavailable)?
            .body_mut()
            .read_json()
            .map_err(unavailable)?;
        if resp.vectors.len() != texts.len() {
            return Err(RetrievalError::ProviderUnavailable(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                resp.vectors.len()
            )));
        }
        resp.vectors
            .into_iter()
            .map(|values| {
                let v = EmbeddingVector::new(values)?;
                if v.dim() != self.dim {
                    return Err(RetrievalError::DimMismatch {
                        left: v.dim(),
                        right: self.dim,
                    });
                }
                Ok(v)
            })
            .collect()
    }
}
