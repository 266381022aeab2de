//! Evaluation reports, cross-report aggregation and rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{EditType, EvalOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Markdown,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    EditType,
    Model,
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "edit_type" => Ok(GroupBy::EditType),
            "model" => Ok(GroupBy::Model),
            other => Err(format!("unknown grouping `{other}`")),
        }
    }
}

/// Means of the subject sub-scores over records that have them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMeans {
    pub samples: usize,
    pub sift: f64,
    pub aligned_iou: f64,
    pub ssim: f64,
    /// Over records with a colour score only.
    pub color_similarity: Option<f64>,
    pub position: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub total: usize,
    pub successful: usize,
    pub failed: usize,
    pub edit_specific: Option<f64>,
    pub subject: Option<SubjectMeans>,
    pub background: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub overall: GroupSummary,
    pub per_edit_type: BTreeMap<EditType, GroupSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: Option<String>,
    /// Sorted by `edit_id`.
    pub records: Vec<EvalOutcome>,
    pub summary: ReportSummary,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn summarize_group<'a>(records: impl Iterator<Item = &'a EvalOutcome> + Clone) -> GroupSummary {
    let total = records.clone().count();
    let ok: Vec<&EvalOutcome> = records.filter(|r| r.evaluation_success).collect();
    let subjects: Vec<_> = ok.iter().filter_map(|r| r.subject.as_ref()).collect();
    let subject = (!subjects.is_empty()).then(|| SubjectMeans {
        samples: subjects.len(),
        sift: mean(subjects.iter().map(|s| s.sift)).unwrap_or_default(),
        aligned_iou: mean(subjects.iter().map(|s| s.aligned_iou)).unwrap_or_default(),
        ssim: mean(subjects.iter().map(|s| s.ssim)).unwrap_or_default(),
        color_similarity: mean(subjects.iter().filter_map(|s| s.color_similarity)),
        position: mean(subjects.iter().map(|s| s.position)).unwrap_or_default(),
    });
    GroupSummary {
        total,
        successful: ok.len(),
        failed: total - ok.len(),
        edit_specific: mean(ok.iter().map(|r| r.edit_specific)),
        subject,
        background: mean(ok.iter().filter_map(|r| r.background)),
    }
}

/// Aggregates over `records`. Failed evaluations only contribute to counts.
pub fn summarize(records: &[EvalOutcome]) -> ReportSummary {
    let mut per_edit_type = BTreeMap::new();
    for t in EditType::ALL {
        if records.iter().any(|r| r.edit_type == t) {
            per_edit_type.insert(t, summarize_group(records.iter().filter(move |r| r.edit_type == t)));
        }
    }
    ReportSummary {
        overall: summarize_group(records.iter()),
        per_edit_type,
    }
}

impl EvaluationReport {
    /// Sorts `records` by `edit_id` and computes the summary.
    pub fn new(model: Option<String>, mut records: Vec<EvalOutcome>) -> Self {
        records.sort_by(|a, b| a.edit_id.cmp(&b.edit_id));
        let summary = summarize(&records);
        Self {
            model,
            records,
            summary,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn csv_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

const REPORT_COLUMNS: [&str; 10] = [
    "Edit Type",
    "N",
    "Failed",
    "Edit-Specific",
    "SIFT",
    "Aligned IoU",
    "SSIM",
    "Color",
    "Position",
    "Background",
];

fn report_rows(report: &EvaluationReport, fmt: fn(Option<f64>) -> String) -> Vec<Vec<String>> {
    let row = |label: &str, g: Option<&GroupSummary>| {
        let s = g.and_then(|g| g.subject.as_ref());
        vec![
            label.to_string(),
            g.map_or(0, |g| g.total).to_string(),
            g.map_or(0, |g| g.failed).to_string(),
            fmt(g.and_then(|g| g.edit_specific)),
            fmt(s.map(|s| s.sift)),
            fmt(s.map(|s| s.aligned_iou)),
            fmt(s.map(|s| s.ssim)),
            fmt(s.and_then(|s| s.color_similarity)),
            fmt(s.map(|s| s.position)),
            fmt(g.and_then(|g| g.background)),
        ]
    };
    let mut rows: Vec<Vec<String>> = EditType::ALL
        .iter()
        .map(|t| row(t.title(), report.summary.per_edit_type.get(t)))
        .collect();
    rows.push(row("Avg.", Some(&report.summary.overall)));
    rows
}

fn markdown(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(
        out,
        "|{}|",
        header
            .iter()
            .enumerate()
            .map(|(i, _)| if i == 0 { "---" } else { "---:" })
            .collect::<Vec<_>>()
            .join("|")
    );
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

/// Renders a report. Markdown and CSV carry one row per edit type in
/// [`EditType::ALL`] order plus an `Avg.` row; JSON is the full report.
pub fn render_report(report: &EvaluationReport, format: Format) -> Vec<u8> {
    let header: Vec<String> = REPORT_COLUMNS.iter().map(|s| s.to_string()).collect();
    match format {
        Format::Json => report.to_json().into_bytes(),
        Format::Markdown => {
            let mut out = String::new();
            if let Some(m) = &report.model {
                let _ = writeln!(out, "## {m}\n");
            }
            out.push_str(&markdown(&header, &report_rows(report, cell)));
            out.into_bytes()
        }
        Format::Csv => csv_bytes(&header, &report_rows(report, csv_cell)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub cells: Vec<Option<f64>>,
    /// Unweighted mean of the present cells.
    pub average: Option<f64>,
}

/// Mean edit-specific scores, one row per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub group_by: GroupBy,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
    /// Mean over every successful record in the column.
    pub column_averages: Vec<Option<f64>>,
    /// Mean over every successful record in the table.
    pub overall: Option<f64>,
    pub notes: Vec<String>,
}

/// Cross-tabulates mean edit-specific scores by model and edit type.
/// Reports without a model name are labelled `model{i}`; reports sharing a
/// name are pooled.
pub fn aggregate(reports: &[EvaluationReport], group_by: GroupBy) -> Table {
    let mut models: Vec<String> = Vec::new();
    let mut scores: BTreeMap<(usize, EditType), Vec<f64>> = BTreeMap::new();
    for (i, r) in reports.iter().enumerate() {
        let name = r.model.clone().unwrap_or_else(|| format!("model{i}"));
        let m = match models.iter().position(|n| *n == name) {
            Some(m) => m,
            None => {
                models.push(name);
                models.len() - 1
            }
        };
        for rec in r.records.iter().filter(|r| r.evaluation_success) {
            scores.entry((m, rec.edit_type)).or_default().push(rec.edit_specific);
        }
    }

    let mut notes = Vec::new();
    let types: Vec<EditType> = EditType::ALL
        .into_iter()
        .filter(|t| {
            let present = scores.keys().any(|(_, et)| et == t);
            if !present && reports.iter().any(|r| r.records.iter().any(|rec| rec.edit_type == *t)) {
                notes.push(format!("{t}: no successful evaluations; omitted"));
            }
            present
        })
        .collect();
    let kept: Vec<usize> = (0..models.len())
        .filter(|m| {
            let present = scores.keys().any(|(mm, _)| mm == m);
            if !present {
                notes.push(format!("{}: no successful evaluations; omitted", models[*m]));
            }
            present
        })
        .collect();

    let (row_keys, col_keys): (Vec<String>, Vec<String>) = match group_by {
        GroupBy::EditType => (
            types.iter().map(|t| t.title().to_string()).collect(),
            kept.iter().map(|&m| models[m].clone()).collect(),
        ),
        GroupBy::Model => (
            kept.iter().map(|&m| models[m].clone()).collect(),
            types.iter().map(|t| t.title().to_string()).collect(),
        ),
    };
    let key = |r: usize, c: usize| match group_by {
        GroupBy::EditType => (kept[c], types[r]),
        GroupBy::Model => (kept[r], types[c]),
    };
    let values = |r: usize, c: usize| scores.get(&key(r, c)).map(|v| v.as_slice()).unwrap_or(&[]);

    let rows = row_keys
        .iter()
        .enumerate()
        .map(|(r, label)| {
            let cells: Vec<Option<f64>> = (0..col_keys.len())
                .map(|c| mean(values(r, c).iter().copied()))
                .collect();
            TableRow {
                label: label.clone(),
                average: mean(cells.iter().flatten().copied()),
                cells,
            }
        })
        .collect();
    let column_averages = (0..col_keys.len())
        .map(|c| mean((0..row_keys.len()).flat_map(|r| values(r, c).iter().copied())))
        .collect();
    let overall = mean(scores.values().flatten().copied());

    Table {
        group_by,
        columns: col_keys,
        rows,
        column_averages,
        overall,
        notes,
    }
}

fn table_grid(table: &Table, fmt: fn(Option<f64>) -> String) -> (Vec<String>, Vec<Vec<String>>) {
    let first = match table.group_by {
        GroupBy::EditType => "Edit Type",
        GroupBy::Model => "Model",
    };
    let mut header = vec![first.to_string()];
    header.extend(table.columns.iter().cloned());
    header.push("Avg.".to_string());
    let mut rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.label.clone()];
            row.extend(r.cells.iter().map(|c| fmt(*c)));
            row.push(fmt(r.average));
            row
        })
        .collect();
    let mut avg = vec!["Avg.".to_string()];
    avg.extend(table.column_averages.iter().map(|c| fmt(*c)));
    avg.push(fmt(table.overall));
    rows.push(avg);
    (header, rows)
}

pub fn render_table(table: &Table, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(table).expect("table serializes");
            s.push('\n');
            s.into_bytes()
        }
        Format::Markdown => {
            let (h, rows) = table_grid(table, cell);
            let mut out = markdown(&h, &rows);
            for n in &table.notes {
                let _ = writeln!(out, "\n> {n}");
            }
            out.into_bytes()
        }
        Format::Csv => {
            let (h, rows) = table_grid(table, csv_cell);
            csv_bytes(&h, &rows)
        }
    }
}
