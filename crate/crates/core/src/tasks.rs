//! Task suites: natural-language chart requests with a difficulty label.
//!
//! Suites are tab-separated text files with four columns:
//! `id`, `difficulty`, `gold_table` (may be empty) and `prompt`.
//! Blank lines and lines starting with `#` are ignored.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::TableRef;

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate task id {0:?}")]
    DuplicateId(String),
    #[error("task {0:?} has an empty prompt")]
    EmptyPrompt(String),
    #[error("task suite {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Difficulty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            other => Err(format!("unknown difficulty {other:?} (easy, medium, hard)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub prompt: String,
    pub difficulty: Difficulty,
    #[serde(default)]
    pub gold_table: Option<TableRef>,
}

impl TaskSpec {
    pub fn new(id: impl Into<String>, prompt: impl Into<String>, difficulty: Difficulty) -> Result<Self, TaskError> {
        let id = id.into();
        let prompt = prompt.into();
        if prompt.trim().is_empty() {
            return Err(TaskError::EmptyPrompt(id));
        }
        Ok(TaskSpec {
            id,
            prompt,
            difficulty,
            gold_table: None,
        })
    }
}

pub fn parse_suite(text: &str) -> Result<Vec<TaskSpec>, TaskError> {
    let mut tasks = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let err = |message: String| TaskError::Parse { line, message };
        let fields: Vec<&str> = raw.splitn(4, '\t').collect();
        let [id, difficulty, gold, prompt] = fields[..] else {
            return Err(err(format!(
                "expected 4 tab-separated fields, found {}",
                fields.len()
            )));
        };
        let id = id.trim();
        if id.is_empty()
            || !id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
        {
            return Err(err(format!("task id {id:?} must be [A-Za-z0-9._-]+")));
        }
        let difficulty = difficulty.parse().map_err(err)?;
        let gold_table = match gold.trim() {
            "" | "-" => None,
            g => Some(TableRef::new(g).map_err(|e| err(e.to_string()))?),
        };
        let prompt = prompt.trim();
        if prompt.is_empty() {
            return Err(TaskError::EmptyPrompt(id.to_string()));
        }
        if !seen.insert(id.to_string()) {
            return Err(TaskError::DuplicateId(id.to_string()));
        }
        tasks.push(TaskSpec {
            id: id.to_string(),
            prompt: prompt.to_string(),
            difficulty,
            gold_table,
        });
    }
    Ok(tasks)
}

pub fn load_suite(path: &Path) -> Result<Vec<TaskSpec>, TaskError> {
    let text = std::fs::read_to_string(path).map_err(|source| TaskError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_suite(&text)
}

pub fn render_suite(tasks: &[TaskSpec]) -> String {
    let mut out = String::from("# id\tdifficulty\tgold_table\tprompt\n");
    for t in tasks {
        let gold = t.gold_table.as_ref().map(|g| g.as_str()).unwrap_or("");
        out.push_str(&format!("{}\t{}\t{}\t{}\n", t.id, t.difficulty, gold, t.prompt));
    }
    out
}
