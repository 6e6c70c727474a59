use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{checklist, EvalError, GradeSheet};
use crate::agent::RunRecord;
use crate::util::{atomic_write, sanitize_component};

const SEPARATOR: &str = "---";
const HEADER_KEYS: [&str; 5] = ["run_id", "model_config", "task_id", "grader", "notes"];

/// `<model_config>__<task_id>.txt`, one file per graded pair.
pub fn form_file_name(model_config: &str, task_id: &str) -> String {
    format!(
        "{}__{}.txt",
        sanitize_component(model_config),
        sanitize_component(task_id)
    )
}

/// Blank form for one run: header block, then one `id =` line per item
/// preceded by its question as a comment.
pub fn render_grade_form(record: &RunRecord) -> String {
    let mut out = String::new();
    out.push_str("# Answer every item with 1 (yes) or 0 (no).\n");
    out.push_str(&format!("# task: {}\n", record.task.prompt.replace('\n', " ")));
    out.push_str(&format!("# difficulty: {}\n", record.task.difficulty));
    out.push_str(&format!("# retrieved table: {}\n", record.retrieved.table));
    let status = record.status.as_str();
    match &record.reason {
        Some(r) => out.push_str(&format!("# status: {status} ({})\n", r.replace('\n', " "))),
        None => out.push_str(&format!("# status: {status}\n")),
    }
    out.push_str(&format!(
        "# plot: {}\n",
        record.final_plot.as_deref().unwrap_or("none")
    ));
    if !record.code_iterations.is_empty() {
        out.push_str(&format!("# code: {}\n", record.code_iterations.join(", ")));
    }
    out.push_str(&format!("run_id = {}\n", record.run_id));
    out.push_str(&format!("model_config = {}\n", record.model_config));
    out.push_str(&format!("task_id = {}\n", record.task.id));
    out.push_str("grader =\nnotes =\n");
    out.push_str(SEPARATOR);
    out.push('\n');
    for item in checklist() {
        out.push_str(&format!("# [{}] {}\n{} =\n", item.category.as_str(), item.question, item.id));
    }
    out
}

/// Writes the blank form for `record` into `forms_dir` and returns its path.
/// Re-emitting overwrites with identical bytes.
pub fn emit_grade_form(record: &RunRecord, forms_dir: &Path) -> Result<PathBuf, EvalError> {
    let io = |e: std::io::Error| EvalError::Io {
        path: forms_dir.display().to_string(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(forms_dir).map_err(io)?;
    let path = forms_dir.join(form_file_name(&record.model_config, &record.task.id));
    atomic_write(&path, render_grade_form(record).as_bytes()).map_err(io)?;
    Ok(path)
}

/// Parses a filled-in form. Every item must be answered exactly once with
/// 0 or 1; `run_id`, `model_config`, `task_id` are required header fields.
pub fn parse_grade_sheet(text: &str) -> Result<GradeSheet, EvalError> {
    let mut header: BTreeMap<String, String> = BTreeMap::new();
    let mut answers: BTreeMap<String, u8> = BTreeMap::new();
    let mut in_items = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed == SEPARATOR {
            if in_items {
                return Err(EvalError::Syntax {
                    line,
                    message: "second header separator".into(),
                });
            }
            in_items = true;
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| EvalError::Syntax {
            line,
            message: format!("expected `key = value`, got {trimmed:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !in_items {
            if !HEADER_KEYS.contains(&key) {
                return Err(EvalError::Syntax {
                    line,
                    message: format!("unknown header field {key:?}"),
                });
            }
            if header.insert(key.to_string(), value.to_string()).is_some() {
                return Err(EvalError::Syntax {
                    line,
                    message: format!("header field {key:?} repeated"),
                });
            }
            continue;
        }
        if super::checklist_item(key).is_none() {
            return Err(EvalError::UnknownItem(key.to_string()));
        }
        if answers.contains_key(key) {
            return Err(EvalError::DuplicateItem(key.to_string()));
        }
        let v = match value {
            "0" => 0,
            "1" => 1,
            "" => return Err(EvalError::MissingAnswer(key.to_string())),
            other => {
                return Err(EvalError::NonBinary {
                    item: key.to_string(),
                    value: other.to_string(),
                })
            }
        };
        answers.insert(key.to_string(), v);
    }
    let mut take = |k: &str| -> Result<String, EvalError> {
        match header.remove(k) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(EvalError::MissingHeader(k.to_string())),
        }
    };
    let run_id = take("run_id")?;
    let model_config = take("model_config")?;
    let task_id = take("task_id")?;
    let grader = header.remove("grader").unwrap_or_default();
    let notes = header.remove("notes").filter(|n| !n.is_empty());
    let sheet = GradeSheet {
        run_id,
        model_config,
        task_id,
        grader,
        notes,
        answers,
    };
    sheet.validate()?;
    Ok(sheet)
}

/// Parses every `*.txt` file in `dir`, sorted by file name.
pub fn load_sheets(dir: &Path) -> Result<Vec<GradeSheet>, EvalError> {
    let io = |p: &Path, e: &dyn std::fmt::Display| EvalError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io(dir, &e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| io(p, &e))?;
            parse_grade_sheet(&text).map_err(|e| io(p, &e))
        })
        .collect()
}
