//! Baseline-relative score scaling and summary tables.
//!
//! Each raw metric score is divided by the baseline model's score on the same
//! (metric, task, split) and multiplied by 100. Scaled metrics are averaged
//! into four task/split cells per (model, method) row, and the row's overall
//! score is the mean of those four cells.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::gaze::Split;
use crate::numeric::{fmt_1dp, fmt_signed_1dp};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreTask {
    Report,
    Diagnosis,
}

impl fmt::Display for ScoreTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreTask::Report => "report",
            ScoreTask::Diagnosis => "diagnosis",
        })
    }
}

impl FromStr for ScoreTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "report" => Ok(ScoreTask::Report),
            "diagnosis" => Ok(ScoreTask::Diagnosis),
            other => Err(Error::Score(format!("unknown task `{other}`"))),
        }
    }
}

/// The four task/split columns, in display order.
pub const COLUMNS: [(ScoreTask, Split); 4] = [
    (ScoreTask::Report, Split::Alpha),
    (ScoreTask::Report, Split::Beta),
    (ScoreTask::Diagnosis, Split::Alpha),
    (ScoreTask::Diagnosis, Split::Beta),
];

fn column_of(task: ScoreTask, split: Split) -> usize {
    COLUMNS.iter().position(|&c| c == (task, split)).expect("all combinations listed")
}

fn column_name(col: usize) -> String {
    let (task, split) = COLUMNS[col];
    format!("{task}_{split}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScore {
    pub model_id: String,
    pub method_id: String,
    pub metric_id: String,
    pub task: ScoreTask,
    pub split: Split,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledCell {
    pub model_id: String,
    pub method_id: String,
    pub metric_id: String,
    pub task: ScoreTask,
    pub split: Split,
    /// Percent of the baseline score.
    pub scaled: f64,
}

/// Reads `model_id, method_id, metric_id, task, split, value` rows.
pub fn read_scores_csv<R: Read>(source: R) -> Result<Vec<RawScore>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    for col in ["model_id", "method_id", "metric_id", "task", "split", "value"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::MissingColumn(col.into()));
        }
    }
    let mut scores = Vec::new();
    for rec in reader.deserialize::<RawRow>() {
        let row = rec?;
        scores.push(RawScore {
            model_id: row.model_id,
            method_id: row.method_id,
            metric_id: row.metric_id,
            task: row.task.parse()?,
            split: row.split.parse()?,
            value: row.value,
        });
    }
    validate_raw(&scores)?;
    Ok(scores)
}

#[derive(Deserialize)]
struct RawRow {
    model_id: String,
    method_id: String,
    metric_id: String,
    task: String,
    split: String,
    value: f64,
}

/// Rejects duplicate keys and negative or non-finite values.
pub fn validate_raw(raw: &[RawScore]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in raw {
        if !s.value.is_finite() || s.value < 0.0 {
            return Err(Error::Score(format!(
                "{}/{}/{} {} {}: value {} must be finite and non-negative",
                s.model_id, s.method_id, s.metric_id, s.task, s.split, s.value
            )));
        }
        if !seen.insert((&s.model_id, &s.method_id, &s.metric_id, s.task, s.split)) {
            return Err(Error::Score(format!(
                "duplicate score for {}/{}/{} {} {}",
                s.model_id, s.method_id, s.metric_id, s.task, s.split
            )));
        }
    }
    Ok(())
}

/// Scales every raw score against `baseline_model_id`. When the baseline
/// model has several methods, `baseline_method_id` picks one.
pub fn scale_scores_with(
    raw: &[RawScore],
    baseline_model_id: &str,
    baseline_method_id: Option<&str>,
) -> Result<Vec<ScaledCell>> {
    validate_raw(raw)?;
    let mut baseline: HashMap<(&str, ScoreTask, Split), (f64, &str)> = HashMap::new();
    for s in raw.iter().filter(|s| {
        s.model_id == baseline_model_id && baseline_method_id.is_none_or(|m| s.method_id == m)
    }) {
        let key = (s.metric_id.as_str(), s.task, s.split);
        if let Some((_, method)) = baseline.insert(key, (s.value, &s.method_id)) {
            return Err(Error::Score(format!(
                "baseline {baseline_model_id} has several methods ({method}, {}); choose one",
                s.method_id
            )));
        }
    }

    let needed: BTreeSet<(&str, ScoreTask, Split)> =
        raw.iter().map(|s| (s.metric_id.as_str(), s.task, s.split)).collect();
    let missing: Vec<String> = needed
        .iter()
        .filter(|k| !baseline.contains_key(*k))
        .map(|(m, t, s)| format!("({m}, {t}, {s})"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingBaseline(missing));
    }
    if let Some(((m, t, s), _)) = baseline.iter().find(|(_, (v, _))| *v == 0.0) {
        return Err(Error::ZeroBaseline(format!("({m}, {t}, {s})")));
    }

    Ok(raw
        .iter()
        .map(|s| {
            let (base, _) = baseline[&(s.metric_id.as_str(), s.task, s.split)];
            ScaledCell {
                model_id: s.model_id.clone(),
                method_id: s.method_id.clone(),
                metric_id: s.metric_id.clone(),
                task: s.task,
                split: s.split,
                scaled: s.value / base * 100.0,
            }
        })
        .collect())
}

pub fn scale_scores(raw: &[RawScore], baseline_model_id: &str) -> Result<Vec<ScaledCell>> {
    scale_scores_with(raw, baseline_model_id, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowDelta {
    pub cells: [f64; 4],
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model_id: String,
    pub method_id: String,
    /// report-alpha, report-beta, diagnosis-alpha, diagnosis-beta.
    pub cells: [f64; 4],
    pub overall: f64,
    /// Difference to the same model's base-method row, when it exists.
    pub delta: Option<RowDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub base_method_id: String,
    pub rows: Vec<TableRow>,
}

impl ScoreTable {
    /// Builds rows from already-reduced cells, in the given order.
    pub fn from_rows(rows: Vec<(String, String, [f64; 4])>, base_method_id: &str) -> Self {
        let mut out: Vec<TableRow> = rows
            .into_iter()
            .map(|(model_id, method_id, cells)| TableRow {
                overall: cells.iter().sum::<f64>() / 4.0,
                model_id,
                method_id,
                cells,
                delta: None,
            })
            .collect();
        let bases: HashMap<String, ([f64; 4], f64)> = out
            .iter()
            .filter(|r| r.method_id == base_method_id)
            .map(|r| (r.model_id.clone(), (r.cells, r.overall)))
            .collect();
        for row in &mut out {
            if let Some((cells, overall)) = bases.get(&row.model_id) {
                row.delta = Some(RowDelta {
                    cells: std::array::from_fn(|i| row.cells[i] - cells[i]),
                    overall: row.overall - overall,
                });
            }
        }
        Self {
            base_method_id: base_method_id.to_string(),
            rows: out,
        }
    }

    pub fn row(&self, model_id: &str, method_id: &str) -> Option<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.model_id == model_id && r.method_id == method_id)
    }
}

/// Averages scaled metrics into the four task/split cells of each
/// (model, method) row; rows keep first-appearance order.
pub fn aggregate_table(cells: &[ScaledCell], base_method_id: &str) -> Result<ScoreTable> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut sums: HashMap<(String, String), [(f64, usize); 4]> = HashMap::new();
    for c in cells {
        let key = (c.model_id.clone(), c.method_id.clone());
        let acc = sums.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            [(0.0, 0); 4]
        });
        let col = column_of(c.task, c.split);
        acc[col].0 += c.scaled;
        acc[col].1 += 1;
    }
    let mut rows = Vec::with_capacity(order.len());
    for key in order {
        let acc = sums[&key];
        if let Some(col) = acc.iter().position(|(_, n)| *n == 0) {
            return Err(Error::IncompleteRow {
                row: format!("{}/{}", key.0, key.1),
                missing: column_name(col),
            });
        }
        let cells = std::array::from_fn(|i| acc[i].0 / acc[i].1 as f64);
        rows.push((key.0, key.1, cells));
    }
    Ok(ScoreTable::from_rows(rows, base_method_id))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    /// Models that are never flagged as best in a column (e.g. models trained
    /// on the evaluation domain, or the baseline itself).
    pub excluded_from_best: Vec<String>,
}

/// Per column (four cells then overall), whether each row holds the best
/// value among non-excluded rows.
pub fn best_flags(table: &ScoreTable, options: &ReportOptions) -> Vec<[bool; 5]> {
    let eligible = |r: &TableRow| !options.excluded_from_best.contains(&r.model_id);
    let value = |r: &TableRow, col: usize| if col < 4 { r.cells[col] } else { r.overall };
    let best: [Option<f64>; 5] = std::array::from_fn(|col| {
        table
            .rows
            .iter()
            .filter(|r| eligible(r))
            .map(|r| value(r, col))
            .reduce(f64::max)
    });
    table
        .rows
        .iter()
        .map(|r| std::array::from_fn(|col| eligible(r) && Some(value(r, col)) == best[col]))
        .collect()
}

pub fn emit_report(table: &ScoreTable, format: ReportFormat, options: &ReportOptions) -> Result<String> {
    match format {
        ReportFormat::Markdown => Ok(emit_markdown(table, options)),
        ReportFormat::Csv => emit_csv(table, options),
    }
}

const HEADERS: [&str; 5] = ["Report Alpha", "Report Beta", "Diagnosis Alpha", "Diagnosis Beta", "Overall"];

fn emit_markdown(table: &ScoreTable, options: &ReportOptions) -> String {
    let flags = best_flags(table, options);
    let mut out = format!("| Model | Method | {} |\n", HEADERS.join(" | "));
    out.push_str("|---|---|---:|---:|---:|---:|---:|\n");
    for (row, best) in table.rows.iter().zip(flags) {
        let values: [f64; 5] = [row.cells[0], row.cells[1], row.cells[2], row.cells[3], row.overall];
        let deltas: Option<[f64; 5]> = row
            .delta
            .filter(|_| row.method_id != table.base_method_id)
            .map(|d| [d.cells[0], d.cells[1], d.cells[2], d.cells[3], d.overall]);
        let cells: Vec<String> = (0..5)
            .map(|col| {
                let mut s = fmt_1dp(values[col]);
                if best[col] {
                    s = format!("**{s}**");
                }
                if let Some(d) = deltas {
                    s.push_str(&format!(" ({})", fmt_signed_1dp(d[col])));
                }
                s
            })
            .collect();
        out.push_str(&format!("| {} | {} | {} |\n", row.model_id, row.method_id, cells.join(" | ")));
    }
    out
}

const CSV_HEADER: [&str; 13] = [
    "model_id",
    "method_id",
    "report_alpha",
    "report_beta",
    "diagnosis_alpha",
    "diagnosis_beta",
    "overall",
    "delta_report_alpha",
    "delta_report_beta",
    "delta_diagnosis_alpha",
    "delta_diagnosis_beta",
    "delta_overall",
    "best",
];

fn emit_csv(table: &ScoreTable, options: &ReportOptions) -> Result<String> {
    let flags = best_flags(table, options);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for (row, best) in table.rows.iter().zip(flags) {
        let mut rec = vec![row.model_id.clone(), row.method_id.clone()];
        rec.extend(row.cells.iter().map(f64::to_string));
        rec.push(row.overall.to_string());
        match row.delta {
            Some(d) => {
                rec.extend(d.cells.iter().map(f64::to_string));
                rec.push(d.overall.to_string());
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 5)),
        }
        let names = ["report_alpha", "report_beta", "diagnosis_alpha", "diagnosis_beta", "overall"];
        let best: Vec<&str> = (0..5).filter(|&c| best[c]).map(|c| names[c]).collect();
        rec.push(best.join(";"));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<score csv>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

/// Parses a table written by [`emit_report`] in CSV format.
pub fn parse_report_csv<R: Read>(source: R, base_method_id: &str) -> Result<ScoreTable> {
    let mut reader = csv::Reader::from_reader(source);
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or_default()
                .parse::<f64>()
                .map_err(|e| Error::Score(format!("column {}: {e}", CSV_HEADER[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            match rec.get(i).unwrap_or_default() {
                "" => Ok(None),
                _ => num(i).map(Some),
            }
        };
        let cells = [num(2)?, num(3)?, num(4)?, num(5)?];
        let delta = match (opt(7)?, opt(8)?, opt(9)?, opt(10)?, opt(11)?) {
            (Some(a), Some(b), Some(c), Some(d), Some(o)) => Some(RowDelta { cells: [a, b, c, d], overall: o }),
            _ => None,
        };
        rows.push(TableRow {
            model_id: rec.get(0).unwrap_or_default().to_string(),
            method_id: rec.get(1).unwrap_or_default().to_string(),
            cells,
            overall: num(6)?,
            delta,
        });
    }
    Ok(ScoreTable {
        base_method_id: base_method_id.to_string(),
        rows,
    })
}

/// Writes raw scores in the scores-CSV layout.
pub fn write_scores_csv<W: Write>(scores: &[RawScore], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["model_id", "method_id", "metric_id", "task", "split", "value"])?;
    for s in scores {
        w.write_record([
            s.model_id.as_str(),
            &s.method_id,
            &s.metric_id,
            &s.task.to_string(),
            &s.split.to_string(),
            &s.value.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<scores csv>", e))?;
    Ok(())
}
