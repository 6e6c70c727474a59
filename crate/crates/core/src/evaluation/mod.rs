//! Binary-rubric scoring of chart outputs.
//!
//! Each (model configuration, task) output is graded by hand against 22
//! yes/no items split into visual (8), code (7) and data (7) categories.
//! Category totals are scaled to 10 and rounded half-up to two decimals;
//! reports average those per-sheet scores and round again.
//!
//! All arithmetic runs on integer hundredths so rounding never depends on
//! binary floating point.

mod forms;
mod report;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::tasks::{Difficulty, TaskSpec};

pub use forms::{emit_grade_form, form_file_name, load_sheets, parse_grade_sheet, render_grade_form};
pub use report::{parse_report_csv, render_report, ReportFormat};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("grade sheet is missing an answer for {0:?}")]
    MissingAnswer(String),
    #[error("grade sheet answers unknown item {0:?}")]
    UnknownItem(String),
    #[error("item {0:?} is answered more than once")]
    DuplicateItem(String),
    #[error("answer for {item:?} must be 0 or 1, got {value:?}")]
    NonBinary { item: String, value: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("grade sheet header lacks {0:?}")]
    MissingHeader(String),
    #[error("sheet {sheet:?} refers to unknown task {task:?}")]
    UnknownTask { sheet: String, task: String },
    #[error("no grade sheets to aggregate")]
    NoSheets,
    #[error("raw total {got} exceeds category size {max}")]
    TotalOutOfRange { got: u32, max: u32 },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("report csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Visual,
    Code,
    Data,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Visual, Category::Code, Category::Data];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Visual => "visual",
            Category::Code => "code",
            Category::Data => "data",
        }
    }

    pub fn size(self) -> u32 {
        match self {
            Category::Visual => 8,
            Category::Code | Category::Data => 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChecklistItem {
    pub id: &'static str,
    pub category: Category,
    pub question: &'static str,
}

const fn item(id: &'static str, category: Category, question: &'static str) -> ChecklistItem {
    ChecklistItem { id, category, question }
}

static CHECKLIST: [ChecklistItem; 22] = [
    item("x_axis_correct", Category::Visual, "Does the x-axis show the right variable with correct ticks?"),
    item("y_axis_correct", Category::Visual, "Does the y-axis show the right measure with correct ticks?"),
    item("axis_labels_clear", Category::Visual, "Are both axes labelled clearly, with units where relevant?"),
    item("color_used_well", Category::Visual, "Does the use of colour help rather than hinder reading?"),
    item("legend_accurate", Category::Visual, "Is the legend present when needed and does it match the series?"),
    item("good_scaling", Category::Visual, "Are axis ranges and scales appropriate for the data?"),
    item("marks_correct", Category::Visual, "Are the marks (lines, bars, points) the right ones for the data?"),
    item("readable_layout", Category::Visual, "Is the layout readable, with no overlapping text or clutter?"),
    item("correct_imports", Category::Code, "Does the code import exactly the libraries it uses?"),
    item("code_runs", Category::Code, "Does the code run without errors?"),
    item("correct_columns", Category::Code, "Does the code reference existing, correct column names?"),
    item("filters_correctly", Category::Code, "Does the code filter rows as the request requires?"),
    item("no_hardcoding", Category::Code, "Does the code avoid hardcoded data values?"),
    item("prompt_fully_handled", Category::Code, "Does the code address every part of the request?"),
    item("no_redundancy", Category::Code, "Is the code free of redundant or dead steps?"),
    item("correct_chart_type", Category::Data, "Is the chart type suitable for the question?"),
    item("column_selection", Category::Data, "Are the plotted columns the ones the question asks about?"),
    item("correct_filtering", Category::Data, "Does the plotted data reflect the requested subset (period, region, category)?"),
    item("correct_aggregation", Category::Data, "Are values aggregated correctly, if aggregation is needed?"),
    item("subset_accurate", Category::Data, "Do the plotted values match the source data?"),
    item("handles_nulls", Category::Data, "Are missing values handled sensibly?"),
    item("prompt_fully_covered", Category::Data, "Does the chart answer the whole question?"),
];

/// The 22 rubric items in fixed order.
pub fn checklist() -> &'static [ChecklistItem] {
    const _: () = {
        let mut counts = [0u32; 3];
        let mut i = 0;
        while i < CHECKLIST.len() {
            counts[CHECKLIST[i].category as usize] += 1;
            i += 1;
        }
        assert!(counts[0] == 8 && counts[1] == 7 && counts[2] == 7);
    };
    &CHECKLIST
}

pub fn checklist_item(id: &str) -> Option<&'static ChecklistItem> {
    CHECKLIST.iter().find(|i| i.id == id)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeSheet {
    pub run_id: String,
    pub model_config: String,
    pub task_id: String,
    pub grader: String,
    #[serde(default)]
    pub notes: Option<String>,
    /// Item id to 0 or 1.
    pub answers: BTreeMap<String, u8>,
}

impl GradeSheet {
    pub fn validate(&self) -> Result<(), EvalError> {
        for (id, v) in &self.answers {
            if checklist_item(id).is_none() {
                return Err(EvalError::UnknownItem(id.clone()));
            }
            if *v > 1 {
                return Err(EvalError::NonBinary {
                    item: id.clone(),
                    value: v.to_string(),
                });
            }
        }
        if let Some(missing) = CHECKLIST.iter().find(|i| !self.answers.contains_key(i.id)) {
            return Err(EvalError::MissingAnswer(missing.id.to_string()));
        }
        Ok(())
    }

    pub fn raw_totals(&self) -> RawTotals {
        let mut t = RawTotals::default();
        for item in &CHECKLIST {
            let v = u32::from(self.answers.get(item.id).copied().unwrap_or(0));
            match item.category {
                Category::Visual => t.visual += v,
                Category::Code => t.code += v,
                Category::Data => t.data += v,
            }
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RawTotals {
    pub visual: u32,
    pub code: u32,
    pub data: u32,
}

/// Half-up rounding of `num / den` to an integer, for non-negative inputs.
fn div_round_half_up(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}

/// `raw / size * 10` in hundredths, rounded half-up.
fn normalized_centi(raw: u32, size: u32) -> u32 {
    div_round_half_up(u64::from(raw) * 1000, u64::from(size)) as u32
}

/// Scores out of 10, stored as hundredths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryScores {
    pub visual_centi: u32,
    pub code_centi: u32,
    pub data_centi: u32,
    pub raw_totals: RawTotals,
}

impl CategoryScores {
    pub fn visual(&self) -> f64 {
        f64::from(self.visual_centi) / 100.0
    }

    pub fn code(&self) -> f64 {
        f64::from(self.code_centi) / 100.0
    }

    pub fn data(&self) -> f64 {
        f64::from(self.data_centi) / 100.0
    }
}

pub fn normalize_totals(raw: RawTotals) -> Result<CategoryScores, EvalError> {
    for (got, cat) in [(raw.visual, Category::Visual), (raw.code, Category::Code), (raw.data, Category::Data)] {
        if got > cat.size() {
            return Err(EvalError::TotalOutOfRange {
                got,
                max: cat.size(),
            });
        }
    }
    Ok(CategoryScores {
        visual_centi: normalized_centi(raw.visual, Category::Visual.size()),
        code_centi: normalized_centi(raw.code, Category::Code.size()),
        data_centi: normalized_centi(raw.data, Category::Data.size()),
        raw_totals: raw,
    })
}

/// Normalized scores of a validated sheet.
pub fn normalize(sheet: &GradeSheet) -> CategoryScores {
    normalize_totals(sheet.raw_totals()).expect("totals of a sheet never exceed category sizes")
}

/// Mean of per-sheet normalized scores over `n` sheets, in hundredths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeanScores {
    pub visual_centi: u32,
    pub code_centi: u32,
    pub data_centi: u32,
    pub n: usize,
}

impl MeanScores {
    pub fn of(scores: &[CategoryScores]) -> Option<MeanScores> {
        if scores.is_empty() {
            return None;
        }
        let n = scores.len() as u64;
        let mean = |f: fn(&CategoryScores) -> u32| {
            let sum: u64 = scores.iter().map(|s| u64::from(f(s))).sum();
            div_round_half_up(sum, n) as u32
        };
        Some(MeanScores {
            visual_centi: mean(|s| s.visual_centi),
            code_centi: mean(|s| s.code_centi),
            data_centi: mean(|s| s.data_centi),
            n: scores.len(),
        })
    }

    pub fn visual(&self) -> f64 {
        f64::from(self.visual_centi) / 100.0
    }

    pub fn code(&self) -> f64 {
        f64::from(self.code_centi) / 100.0
    }

    pub fn data(&self) -> f64 {
        f64::from(self.data_centi) / 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model_config: String,
    pub scores: MeanScores,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub model_config: String,
    pub difficulty: Difficulty,
    pub scores: MeanScores,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// Sorted by model configuration.
    pub rows: Vec<ReportRow>,
    /// Sorted by model configuration, then difficulty.
    pub breakdown: Vec<BreakdownRow>,
    pub n_sheets: usize,
}

pub fn aggregate(sheets: &[GradeSheet], tasks: &[TaskSpec]) -> Result<ScoreReport, EvalError> {
    if sheets.is_empty() {
        return Err(EvalError::NoSheets);
    }
    let difficulty: HashMap<&str, Difficulty> =
        tasks.iter().map(|t| (t.id.as_str(), t.difficulty)).collect();
    let mut by_model: BTreeMap<&str, Vec<CategoryScores>> = BTreeMap::new();
    let mut by_group: BTreeMap<(&str, Difficulty), Vec<CategoryScores>> = BTreeMap::new();
    for s in sheets {
        s.validate()?;
        let d = *difficulty
            .get(s.task_id.as_str())
            .ok_or_else(|| EvalError::UnknownTask {
                sheet: s.run_id.clone(),
                task: s.task_id.clone(),
            })?;
        let scores = normalize(s);
        by_model.entry(&s.model_config).or_default().push(scores);
        by_group.entry((&s.model_config, d)).or_default().push(scores);
    }
    let rows = by_model
        .into_iter()
        .map(|(m, s)| ReportRow {
            model_config: m.to_string(),
            scores: MeanScores::of(&s).expect("group is non-empty"),
        })
        .collect();
    let breakdown = by_group
        .into_iter()
        .map(|((m, d), s)| BreakdownRow {
            model_config: m.to_string(),
            difficulty: d,
            scores: MeanScores::of(&s).expect("group is non-empty"),
        })
        .collect();
    Ok(ScoreReport {
        rows,
        breakdown,
        n_sheets: sheets.len(),
    })
}
