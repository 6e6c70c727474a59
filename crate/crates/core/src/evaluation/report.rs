use std::str::FromStr;

use super::{BreakdownRow, EvalError, MeanScores, ReportRow, ScoreReport};
use crate::tasks::Difficulty;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "text-table" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format {other:?} (text, csv)")),
        }
    }
}

fn centi(v: u32) -> String {
    format!("{}.{:02}", v / 100, v % 100)
}

fn parse_centi(s: &str) -> Result<u32, EvalError> {
    let bad = || EvalError::Csv(format!("bad score {s:?}"));
    let (whole, frac) = s.trim().split_once('.').ok_or_else(bad)?;
    if frac.len() != 2 {
        return Err(bad());
    }
    let whole: u32 = whole.parse().map_err(|_| bad())?;
    let frac: u32 = frac.parse().map_err(|_| bad())?;
    Ok(whole * 100 + frac)
}

/// One row per model configuration with visual/code/data means and `n`.
/// The difficulty breakdown is appended when requested and non-empty.
pub fn render_report(report: &ScoreReport, format: ReportFormat, by_difficulty: bool) -> String {
    let breakdown = by_difficulty && !report.breakdown.is_empty();
    match format {
        ReportFormat::Csv => render_csv(report, breakdown),
        ReportFormat::Text => render_text(report, breakdown),
    }
}

fn render_text(report: &ScoreReport, breakdown: bool) -> String {
    let width = report
        .rows
        .iter()
        .map(|r| r.model_config.len())
        .chain(["model_config".len()])
        .max()
        .unwrap_or(0);
    let mut out = format!(
        "{:<width$}  {:>6}  {:>6}  {:>6}  {:>4}\n",
        "model_config", "visual", "code", "data", "n"
    );
    for r in &report.rows {
        let s = r.scores;
        out.push_str(&format!(
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>4}\n",
            r.model_config,
            centi(s.visual_centi),
            centi(s.code_centi),
            centi(s.data_centi),
            s.n
        ));
    }
    if breakdown {
        out.push_str("\nby difficulty\n");
        out.push_str(&format!(
            "{:<width$}  {:<10}  {:>6}  {:>6}  {:>6}  {:>4}\n",
            "model_config", "difficulty", "visual", "code", "data", "n"
        ));
        for b in &report.breakdown {
            let s = b.scores;
            out.push_str(&format!(
                "{:<width$}  {:<10}  {:>6}  {:>6}  {:>6}  {:>4}\n",
                b.model_config,
                b.difficulty.as_str(),
                centi(s.visual_centi),
                centi(s.code_centi),
                centi(s.data_centi),
                s.n
            ));
        }
    }
    out
}

fn render_csv(report: &ScoreReport, breakdown: bool) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>, rec: &[String]| w.write_record(rec).expect("in-memory write");
    write(&mut w, &["model_config", "visual", "code", "data", "n"].map(String::from));
    for r in &report.rows {
        let s = r.scores;
        write(
            &mut w,
            &[
                r.model_config.clone(),
                centi(s.visual_centi),
                centi(s.code_centi),
                centi(s.data_centi),
                s.n.to_string(),
            ],
        );
    }
    let mut out = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
    if breakdown {
        let mut w = csv::Writer::from_writer(Vec::new());
        write(
            &mut w,
            &["model_config", "difficulty", "visual", "code", "data", "n"].map(String::from),
        );
        for b in &report.breakdown {
            let s = b.scores;
            write(
                &mut w,
                &[
                    b.model_config.clone(),
                    b.difficulty.as_str().to_string(),
                    centi(s.visual_centi),
                    centi(s.code_centi),
                    centi(s.data_centi),
                    s.n.to_string(),
                ],
            );
        }
        out.push('\n');
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
    }
    out
}

fn scores(fields: &[&str]) -> Result<MeanScores, EvalError> {
    Ok(MeanScores {
        visual_centi: parse_centi(fields[0])?,
        code_centi: parse_centi(fields[1])?,
        data_centi: parse_centi(fields[2])?,
        n: fields[3]
            .parse()
            .map_err(|_| EvalError::Csv(format!("bad count {:?}", fields[3])))?,
    })
}

fn records(section: &str) -> Result<Vec<csv::StringRecord>, EvalError> {
    csv::Reader::from_reader(section.as_bytes())
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| EvalError::Csv(e.to_string()))
}

/// Inverse of the CSV rendering. `n_sheets` is recovered as the sum of row counts.
pub fn parse_report_csv(text: &str) -> Result<ScoreReport, EvalError> {
    let normalized = text.replace("\r\n", "\n");
    let mut sections = normalized.split("\n\n").filter(|s| !s.trim().is_empty());
    let main = sections.next().ok_or_else(|| EvalError::Csv("empty report".into()))?;
    let mut rows = Vec::new();
    for rec in records(main)? {
        if rec.len() != 5 {
            return Err(EvalError::Csv(format!("expected 5 fields, got {}", rec.len())));
        }
        let f: Vec<&str> = rec.iter().collect();
        rows.push(ReportRow {
            model_config: f[0].to_string(),
            scores: scores(&f[1..])?,
        });
    }
    let mut breakdown = Vec::new();
    if let Some(section) = sections.next() {
        for rec in records(section)? {
            if rec.len() != 6 {
                return Err(EvalError::Csv(format!("expected 6 fields, got {}", rec.len())));
            }
            let f: Vec<&str> = rec.iter().collect();
            breakdown.push(BreakdownRow {
                model_config: f[0].to_string(),
                difficulty: Difficulty::from_str(f[1]).map_err(EvalError::Csv)?,
                scores: scores(&f[2..])?,
            });
        }
    }
    let n_sheets = rows.iter().map(|r| r.scores.n).sum();
    Ok(ScoreReport {
        rows,
        breakdown,
        n_sheets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::aggregate;
    use crate::evaluation::tests::sheet;
    use crate::tasks::TaskSpec;

    /// 25 sheets whose means are 7.50 / 8.97 / 7.37.
    fn o1_high_fixture() -> (Vec<crate::evaluation::GradeSheet>, Vec<TaskSpec>) {
        let mut sheets = Vec::new();
        let mut tasks = Vec::new();
        for i in 0..25 {
            let d = match i {
                0..=6 => Difficulty::Easy,
                7..=17 => Difficulty::Medium,
                _ => Difficulty::Hard,
            };
            let id = format!("t{i:02}");
            tasks.push(TaskSpec::new(&id, "p", d).unwrap());
            let code = if i < 7 { 7 } else { 6 };
            let data = if i < 4 { 6 } else { 5 };
            sheets.push(sheet("o1-high", &id, 6, code, data));
        }
        (sheets, tasks)
    }

    #[test]
    fn renders_reference_row() {
        let (sheets, tasks) = o1_high_fixture();
        let r = aggregate(&sheets, &tasks).unwrap();
        let csv = render_report(&r, ReportFormat::Csv, false);
        assert_eq!(csv, "model_config,visual,code,data,n\no1-high,7.50,8.97,7.37,25\n");
        let text = render_report(&r, ReportFormat::Text, false);
        assert!(text.contains("7.50    8.97    7.37"), "{text}");
        assert!(!text.contains("by difficulty"));
    }

    #[test]
    fn csv_round_trip_with_breakdown() {
        let (sheets, tasks) = o1_high_fixture();
        let r = aggregate(&sheets, &tasks).unwrap();
        let csv = render_report(&r, ReportFormat::Csv, true);
        let back = parse_report_csv(&csv).unwrap();
        assert_eq!(back, r);
        let sizes: Vec<usize> = back.breakdown.iter().map(|b| b.scores.n).collect();
        assert_eq!(sizes, [7, 11, 7]);
    }

    #[test]
    fn empty_breakdown_is_omitted() {
        let r = ScoreReport {
            rows: vec![ReportRow {
                model_config: "m".into(),
                scores: MeanScores { visual_centi: 1000, code_centi: 0, data_centi: 571, n: 1 },
            }],
            breakdown: vec![],
            n_sheets: 1,
        };
        assert!(!render_report(&r, ReportFormat::Text, true).contains("difficulty"));
        assert_eq!(render_report(&r, ReportFormat::Csv, true).lines().count(), 2);
    }
}
