//! Prompt assembly for the zero-shot and agentic modes.
//!
//! Optional instruction modules ship as text assets under `prompts/modules/`
//! and are inserted in enum order. Bundles expose content hashes so a run
//! record can pin the exact prompt text it used.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{Cell, TableMetadata};
use crate::util::sha256_hex;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown prompt module {given:?}; valid modules: {valid}")]
    UnknownModule { given: String, valid: String },
    #[error("table metadata lists no columns")]
    NoColumns,
    #[error("task text is empty")]
    EmptyTask,
    #[error("sample row has {got} values for {expected} columns")]
    SampleArity { got: usize, expected: usize },
    #[error("run id {0:?} is not filesystem-safe")]
    InvalidRunId(String),
}

/// Optional instruction block. Ordering of the variants is the insertion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleId {
    VizContext,
    LessonsLearned,
    VizChecklist,
}

impl ModuleId {
    pub const ALL: [ModuleId; 3] = [
        ModuleId::VizContext,
        ModuleId::LessonsLearned,
        ModuleId::VizChecklist,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModuleId::VizContext => "viz_context",
            ModuleId::LessonsLearned => "lessons_learned",
            ModuleId::VizChecklist => "viz_checklist",
        }
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModuleId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModuleId::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| PromptError::UnknownModule {
                given: s.to_string(),
                valid: ModuleId::ALL.map(ModuleId::as_str).join(", "),
            })
    }
}

/// Parses a list of module ids (e.g. from a comma-separated flag).
pub fn parse_modules<S: AsRef<str>>(ids: &[S]) -> Result<BTreeSet<ModuleId>, PromptError> {
    ids.iter()
        .map(|s| s.as_ref())
        .filter(|s| !s.trim().is_empty())
        .map(ModuleId::from_str)
        .collect()
}

/// Curated body of a module, as shipped in `prompts/modules/<id>.txt`.
pub fn render_module(id: ModuleId) -> &'static str {
    match id {
        ModuleId::VizContext => include_str!("../../prompts/modules/viz_context.txt"),
        ModuleId::LessonsLearned => include_str!("../../prompts/modules/lessons_learned.txt"),
        ModuleId::VizChecklist => include_str!("../../prompts/modules/viz_checklist.txt"),
    }
}

/// Like [`render_module`] but from a string id.
pub fn render_module_by_name(id: &str) -> Result<&'static str, PromptError> {
    ModuleId::from_str(id).map(render_module)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    ZeroShot,
    Agentic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub kind: PromptKind,
    pub system_text: String,
    pub user_text: Option<String>,
    pub enabled_modules: BTreeSet<ModuleId>,
}

impl PromptBundle {
    /// sha256 of the system text, the user text (if any) and each enabled module body.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        out.insert("system".to_string(), sha256_hex(self.system_text.as_bytes()));
        if let Some(user) = &self.user_text {
            out.insert("user".to_string(), sha256_hex(user.as_bytes()));
        }
        for m in &self.enabled_modules {
            out.insert(
                format!("module:{m}"),
                sha256_hex(render_module(*m).as_bytes()),
            );
        }
        out
    }
}

/// Tool names and one-line descriptions as listed in the agentic prompt.
pub const AGENT_TOOLS: [(&str, &str); 5] = [
    ("list_files", "Lists files in directory"),
    ("read_file_head", "Reads start of file"),
    ("execute_python_code", "Executes Python code"),
    ("read_visualization_image", "Reads the plot"),
    ("get_human_feedback", "Logs request for help"),
];

const AGENT_STEPS: [(&str, &str); 7] = [
    ("Understand Request", "Clarify the user's goal."),
    ("Explore Data", "Use list_files if needed."),
    ("Inspect Data", "Use read_file_head."),
    ("Plan Code", "Plan pandas/matplotlib/seaborn code."),
    ("Execute Code", "Use execute_python_code."),
    ("Analyze Results", "Check execution output."),
    ("Respond", "Explain steps, results, describe plot."),
];

/// Per-run file layout under `<output_dir>/<run_id>/`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunPaths {
    pub run_id: String,
    pub dir: PathBuf,
    pub log_file: PathBuf,
    pub llm_log: PathBuf,
    pub manifest: PathBuf,
    pub target_plot: PathBuf,
    pub feedback_file: PathBuf,
}

pub const AGENT_LOG: &str = "agent_log";
pub const LLM_LOG: &str = "llm_log";
pub const MANIFEST: &str = "manifest.json";
pub const TARGET_PLOT: &str = "plot.png";
pub const FEEDBACK_FILE: &str = "feedback.txt";

impl RunPaths {
    pub fn new(output_dir: &Path, run_id: &str) -> Result<Self, PromptError> {
        let safe = !run_id.is_empty()
            && run_id != "."
            && run_id != ".."
            && run_id.len() <= 200
            && run_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
        if !safe {
            return Err(PromptError::InvalidRunId(run_id.to_string()));
        }
        let dir = output_dir.join(run_id);
        Ok(RunPaths {
            run_id: run_id.to_string(),
            log_file: dir.join(AGENT_LOG),
            llm_log: dir.join(LLM_LOG),
            manifest: dir.join(MANIFEST),
            target_plot: dir.join(TARGET_PLOT),
            feedback_file: dir.join(FEEDBACK_FILE),
            dir,
        })
    }

    pub fn code_file_name(n: usize) -> String {
        format!("code_iter_{n}.py")
    }

    pub fn code_path(&self, n: usize) -> PathBuf {
        self.dir.join(Self::code_file_name(n))
    }

    /// Path as the model sees it: `./output/<run_id>/<file>`.
    pub fn shown(&self, file: &str) -> String {
        format!("./output/{}/{file}", self.run_id)
    }
}

/// Comma-separated values in column order; nulls render as `null`.
pub fn format_sample_row(sample: &[Cell]) -> String {
    sample
        .iter()
        .map(|c| c.as_deref().unwrap_or("null"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn task_clause(task: &str) -> String {
    let task = task.trim().trim_end_matches('.');
    let mut chars = task.chars();
    match (chars.next(), chars.next()) {
        // "Plot the ..." reads as "Write Python code to plot the ..."; acronyms stay as-is
        (Some(first), Some(second)) if first.is_uppercase() && second.is_lowercase() => {
            first.to_lowercase().chain(task.chars().skip(1)).collect()
        }
        _ => task.to_string(),
    }
}

fn push_modules(out: &mut String, modules: &BTreeSet<ModuleId>) {
    for m in modules {
        out.push_str(render_module(*m).trim_end());
        out.push_str("\n\n");
    }
}

/// Single-pass prompt: columns, one sample row, description, optional
/// modules, fixed constraints, then the task. The whole request is the user
/// message; the system text stays empty.
pub fn assemble_zero_shot(
    meta: &TableMetadata,
    sample: &[Cell],
    task: &str,
    modules: &BTreeSet<ModuleId>,
) -> Result<PromptBundle, PromptError> {
    if meta.columns.is_empty() {
        return Err(PromptError::NoColumns);
    }
    if task.trim().is_empty() {
        return Err(PromptError::EmptyTask);
    }
    if sample.len() != meta.columns.len() {
        return Err(PromptError::SampleArity {
            got: sample.len(),
            expected: meta.columns.len(),
        });
    }
    let columns = meta
        .columns
        .iter()
        .map(|c| c.name.as_str())
        .collect::<Vec<_>>()
        .join(", ");

    let mut out = String::new();
    out.push_str("Data Analysis Request\n");
    out.push_str("Column names (attributes) of data to be analyzed:\n");
    out.push_str(&columns);
    out.push_str("\n\nSample row from the data (example):\n");
    out.push_str(&format_sample_row(sample));
    out.push_str("\n\nData description:\n");
    out.push_str(meta.title.trim());
    out.push('\n');
    out.push_str(meta.description.trim());
    out.push_str("\nColumn details:\n");
    for c in &meta.columns {
        out.push_str(&format!("- {}: {}", c.name, c.kind.describe()));
        if let Some(unit) = &c.unit {
            out.push_str(&format!(" (unit: {unit})"));
        }
        out.push('\n');
    }
    out.push('\n');
    push_modules(&mut out, modules);
    out.push_str(
        "Additional information: Don't use the sample row as input. Make sure to use only the \
         corresponding column name(s) from the list provided above. Assume that you already have \
         access to all the data stored in a variable named df. Don't use any variables other than \
         df and those derived from df. ",
    );
    out.push_str(&format!(
        "Now do the following: Write Python code to {}. Provide a short description of the data, \
         separated from the code.\n",
        task_clause(task)
    ));

    Ok(PromptBundle {
        kind: PromptKind::ZeroShot,
        system_text: String::new(),
        user_text: Some(out),
        enabled_modules: modules.clone(),
    })
}

/// System prompt for the tool-using loop. The task itself goes in as the
/// first user message.
pub fn assemble_agentic(
    paths: &RunPaths,
    dataset_context: &str,
    modules: &BTreeSet<ModuleId>,
) -> Result<PromptBundle, PromptError> {
    let mut out = String::new();
    out.push_str(
        "You are an expert data analysis and visualization assistant. Your goal is to help the \
         user create a visualization based on their request.\n\n",
    );
    if !dataset_context.trim().is_empty() {
        out.push_str(dataset_context.trim_end());
        out.push_str("\n\n");
    }
    push_modules(&mut out, modules);
    out.push_str(&format!(
        "You have access to a filesystem restricted to the './data/' directory. All outputs for \
         this run will be saved within './output/{}/'.\n",
        paths.run_id
    ));
    out.push_str("Key file paths for this run:\n");
    out.push_str(&format!("- Log File: {}\n", paths.shown(AGENT_LOG)));
    out.push_str(&format!(
        "- Executed Code: {}\n",
        paths.shown("code_iter_{n}.py")
    ));
    out.push_str(&format!("- Target Plot: {}\n", paths.shown(TARGET_PLOT)));
    out.push_str(&format!("- Human Feedback: {}\n\n", paths.shown(FEEDBACK_FILE)));

    out.push_str("Follow these steps:\n");
    for (i, (title, body)) in AGENT_STEPS.iter().enumerate() {
        out.push_str(&format!("{}. {title}: {body}\n", i + 1));
    }
    out.push_str("\nAvailable Tools:\n");
    for (name, desc) in AGENT_TOOLS {
        out.push_str(&format!("- {name}: {desc}\n"));
    }
    out.push_str(
        "\nCode passed to execute_python_code runs with the dataset already loaded as df. Save \
         the figure to the target plot path.\n",
    );

    Ok(PromptBundle {
        kind: PromptKind::Agentic,
        system_text: out,
        user_text: None,
        enabled_modules: modules.clone(),
    })
}

/// Dataset block injected into the agentic prompt for the retrieved table.
pub fn dataset_context(meta: &TableMetadata, data_file: &str) -> String {
    let mut out = format!(
        "Dataset for this request: {} ({})\nFile: {data_file}\nDescription: {}\nColumns:\n",
        meta.title.trim(),
        meta.table,
        meta.description.trim()
    );
    for c in &meta.columns {
        out.push_str(&format!("- {}: {}", c.name, c.kind.describe()));
        if let Some(unit) = &c.unit {
            out.push_str(&format!(" (unit: {unit})"));
        }
        out.push('\n');
    }
    out
}
