use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;
use statviz_core::llm::ProviderSettings;
use statviz_core::retrieval::{EmbeddingProvider, HashingProvider, HttpEmbeddingProvider, PrecomputedProvider};

use crate::UserError;

pub const DEFAULT_CONFIG: &str = "statviz.toml";
pub const DEFAULT_ENDPOINT: &str = "https://opendata.cbs.nl";

/// Settings read from `statviz.toml`. Secrets never live here; providers
/// name the environment variable holding their key.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub endpoint: String,
    pub data_dir: PathBuf,
    pub index_dir: PathBuf,
    pub output_dir: PathBuf,
    pub forms_dir: PathBuf,
    pub sheets_dir: PathBuf,
    pub task_file: PathBuf,
    /// On-disk cache of raw OData responses.
    pub cache_dir: Option<PathBuf>,
    pub page_size: usize,
    pub workers: usize,
    pub max_iters: usize,
    pub timeout_s: f64,
    /// Command that starts the sandbox harness, e.g. `["python3", "harness/run.py"]`.
    pub harness: Option<Vec<String>>,
    pub embedding: EmbeddingSettings,
    /// Named model configurations, selected with `--model-config`.
    pub models: BTreeMap<String, ProviderSettings>,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            endpoint: DEFAULT_ENDPOINT.into(),
            data_dir: "data".into(),
            index_dir: "index".into(),
            output_dir: "output".into(),
            forms_dir: "grades/forms".into(),
            sheets_dir: "grades/sheets".into(),
            task_file: "tasks/suite.tsv".into(),
            cache_dir: None,
            page_size: 10_000,
            workers: 1,
            max_iters: 25,
            timeout_s: 60.0,
            harness: None,
            embedding: EmbeddingSettings::default(),
            models: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingSettings {
    /// Token hashing; offline and deterministic.
    Hashing { dim: usize },
    /// Vectors computed elsewhere, looked up by text.
    Precomputed { path: PathBuf },
    /// POST `{texts}` -> `{vectors}`.
    Http {
        id: String,
        url: String,
        dim: usize,
        #[serde(default)]
        token_env: Option<String>,
    },
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        EmbeddingSettings::Hashing { dim: 384 }
    }
}

impl EmbeddingSettings {
    pub fn build(&self) -> anyhow::Result<Box<dyn EmbeddingProvider>> {
        Ok(match self {
            EmbeddingSettings::Hashing { dim } => {
                if *dim == 0 {
                    return Err(UserError::new("embedding.dim must be positive").into());
                }
                Box::new(HashingProvider::new(*dim))
            }
            EmbeddingSettings::Precomputed { path } => Box::new(PrecomputedProvider::from_file(path)?),
            EmbeddingSettings::Http { id, url, dim, token_env } => {
                Box::new(HttpEmbeddingProvider::new(id.clone(), url.clone(), *dim, token_env.as_deref()))
            }
        })
    }
}

/// Values from flags or `STATVIZ_*` variables; these win over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub endpoint: Option<String>,
    pub data_dir: Option<PathBuf>,
    pub index_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl CliConfig {
    /// Reads `path`, or `statviz.toml` in the working directory when present.
    /// An explicitly named file must exist.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None if Path::new(DEFAULT_CONFIG).is_file() => Self::from_file(Path::new(DEFAULT_CONFIG))?,
            None => CliConfig::default(),
        };
        if let Some(v) = &overrides.endpoint {
            cfg.endpoint = v.clone();
        }
        if let Some(v) = &overrides.data_dir {
            cfg.data_dir = v.clone();
        }
        if let Some(v) = &overrides.index_dir {
            cfg.index_dir = v.clone();
        }
        if let Some(v) = &overrides.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = overrides.workers {
            cfg.workers = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UserError::new(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| UserError::new(format!("invalid config {}: {e}", path.display())).into())
    }

    fn validate(&self) -> anyhow::Result<()> {
        let bad = |m: &str| Err(UserError::new(m.to_string()).into());
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if self.page_size == 0 {
            return bad("page_size must be at least 1");
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return bad("timeout_s must be positive");
        }
        if self.harness.as_ref().is_some_and(Vec::is_empty) {
            return bad("harness command is empty");
        }
        Ok(())
    }

    /// Creates `dir` if needed and returns it.
    pub fn ensure_dir<'a>(&self, dir: &'a Path) -> anyhow::Result<&'a Path> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }
}
