//! Relative-delta comparison tables against a named baseline.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::metrics::EvalReport;

/// One model's deltas against the baseline, in percent:
/// `(model - baseline) / baseline * 100`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub accuracy_delta_pct: f64,
    pub f1_delta_pct: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline: String,
    pub class_labels: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Builds the table. Reports must share a label set; the baseline report
/// itself renders as a dash row.
pub fn compare_models(
    reports: &[(String, EvalReport)],
    baseline: &str,
) -> Result<ComparisonTable> {
    let base = reports
        .iter()
        .find(|(name, _)| name == baseline)
        .map(|(_, r)| r)
        .ok_or_else(|| Error::InvalidInput(format!("baseline {baseline:?} not among reports")))?;
    let class_labels: Vec<String> = base.per_class.iter().map(|s| s.label.clone()).collect();
    let mut rows = Vec::new();
    for (name, report) in reports {
        let report_labels: Vec<&str> = report.per_class.iter().map(|s| s.label.as_str()).collect();
        if report_labels != class_labels.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::InvalidInput(format!(
                "report {name:?} has a different label set"
            )));
        }
        if name == baseline {
            continue;
        }
        let accuracy_delta_pct = delta_pct(report.accuracy, base.accuracy);
        let f1_delta_pct = class_labels
            .iter()
            .map(|l| {
                (
                    l.clone(),
                    delta_pct(report.f1(l).unwrap_or(0.0), base.f1(l).unwrap_or(0.0)),
                )
            })
            .collect();
        rows.push(ComparisonRow { model: name.clone(), accuracy_delta_pct, f1_delta_pct });
    }
    Ok(ComparisonTable { baseline: baseline.to_string(), class_labels, rows })
}

fn delta_pct(value: f64, base: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        (value - base) / base * 100.0
    }
}

impl ComparisonTable {
    /// Plain-text rendering; the baseline row prints "-" in every numeric
    /// column.
    pub fn render(&self) -> String {
        let mut cols = vec!["Model".to_string(), "Accuracy".to_string()];
        for l in &self.class_labels {
            cols.push(format!("F1 ({l})"));
        }
        let mut table: Vec<Vec<String>> = vec![cols];
        let dash_row: Vec<String> = std::iter::once(self.baseline.clone())
            .chain(std::iter::repeat("-".to_string()).take(1 + self.class_labels.len()))
            .collect();
        table.push(dash_row);
        for row in &self.rows {
            let mut cells = vec![row.model.clone(), format_pct(row.accuracy_delta_pct)];
            for (_, d) in &row.f1_delta_pct {
                cells.push(format_pct(*d));
            }
            table.push(cells);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &table {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| format!("{cell:<width$}", width = widths[c]))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

fn format_pct(v: f64) -> String {
    format!("{v:+.2}%")
}
