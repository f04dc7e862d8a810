//! Min / max / mean / standard deviation per report column.

use serde::{Deserialize, Serialize};

use super::EvalRecord;
use crate::error::HarnessError;
use crate::segment::Method;

/// One report column: which source and which quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Manual,
    Balloon,
    Graph,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    VolumeCm3,
    Voxels,
    Dsc,
}

/// Column order of the report table.
pub const COLUMNS: [(Source, Quantity); 8] = [
    (Source::Manual, Quantity::VolumeCm3),
    (Source::Manual, Quantity::Voxels),
    (Source::Balloon, Quantity::VolumeCm3),
    (Source::Balloon, Quantity::Voxels),
    (Source::Balloon, Quantity::Dsc),
    (Source::Graph, Quantity::VolumeCm3),
    (Source::Graph, Quantity::Voxels),
    (Source::Graph, Quantity::Dsc),
];

impl Source {
    fn method(self) -> Option<Method> {
        match self {
            Source::Manual => None,
            Source::Balloon => Some(Method::Balloon),
            Source::Graph => Some(Method::Graph),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Source::Manual => "manual",
            Source::Balloon => "balloon",
            Source::Graph => "graph",
        }
    }
}

impl Quantity {
    pub fn label(self) -> &'static str {
        match self {
            Quantity::VolumeCm3 => "volume_cm3",
            Quantity::Voxels => "voxels",
            Quantity::Dsc => "dsc",
        }
    }
}

/// Value of one column in one record, if present.
pub fn cell(record: &EvalRecord, source: Source, quantity: Quantity) -> Option<f64> {
    if !record.ok {
        return None;
    }
    match source.method() {
        None => {
            let r = record.reference.as_ref()?;
            match quantity {
                Quantity::VolumeCm3 => Some(r.volume_cm3),
                Quantity::Voxels => Some(r.voxel_count as f64),
                Quantity::Dsc => None,
            }
        }
        Some(m) => {
            let outcome = record.methods.get(&m)?;
            let run = outcome.run.as_ref()?;
            match quantity {
                Quantity::VolumeCm3 => Some(run.volume_cm3),
                Quantity::Voxels => Some(run.voxel_count as f64),
                Quantity::Dsc => outcome.dsc.map(|d| d.percent),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub source: Source,
    pub quantity: Quantity,
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 when `n == 1`.
    pub std: f64,
    /// Set when `n == 1` and `std` carries no information.
    pub single_sample: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub cases: usize,
    pub successful: usize,
    pub failed: usize,
    /// Columns with at least one value, in [`COLUMNS`] order.
    pub columns: Vec<ColumnStats>,
}

impl SummaryReport {
    pub fn column(&self, source: Source, quantity: Quantity) -> Option<&ColumnStats> {
        self.columns.iter().find(|c| c.source == source && c.quantity == quantity)
    }
}

/// Statistics of a non-empty sample.
pub fn stats(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (min, max, mean, std)
}

pub fn summarize(records: &[EvalRecord]) -> Result<SummaryReport, HarnessError> {
    let successful = records.iter().filter(|r| r.ok).count();
    if successful == 0 {
        return Err(HarnessError::NoSuccessfulRecords);
    }
    let columns = COLUMNS
        .iter()
        .filter_map(|&(source, quantity)| {
            let values: Vec<f64> = records.iter().filter_map(|r| cell(r, source, quantity)).collect();
            if values.is_empty() {
                return None;
            }
            let (min, max, mean, std) = stats(&values);
            Some(ColumnStats {
                source,
                quantity,
                n: values.len(),
                min,
                max,
                mean,
                std,
                single_sample: values.len() == 1,
            })
        })
        .collect();
    Ok(SummaryReport {
        cases: records.len(),
        successful,
        failed: records.len() - successful,
        columns,
    })
}

fn fmt_cell(v: Option<f64>, q: Quantity) -> String {
    match (v, q) {
        (None, _) => "-".into(),
        (Some(v), Quantity::Voxels) => format!("{v:.0}"),
        (Some(v), _) => format!("{v:.2}"),
    }
}

/// Fixed-width text table: one row per case, then min, max and μ ± σ.
pub fn render_table(records: &[EvalRecord], summary: &SummaryReport) -> String {
    let mut header = vec!["case".to_string()];
    header.extend(COLUMNS.iter().map(|(s, q)| format!("{}.{}", s.label(), q.label())));
    header.push("runtime_ms b/g".into());
    let mut rows: Vec<Vec<String>> = vec![header];
    for r in records {
        let mut row = vec![r.id.clone()];
        if let Some(e) = &r.error {
            row.push(format!("FAILED ({}: {})", e.stage, e.detail));
            rows.push(row);
            continue;
        }
        row.extend(COLUMNS.iter().map(|&(s, q)| fmt_cell(cell(r, s, q), q)));
        let rt = |m| {
            r.methods
                .get(&m)
                .and_then(|o: &super::MethodOutcome| o.run.as_ref())
                .map_or("-".to_string(), |x| format!("{:.0}", x.runtime_ms))
        };
        row.push(format!("{}/{}", rt(Method::Balloon), rt(Method::Graph)));
        rows.push(row);
    }
    let stat_row = |label: &str, f: &dyn Fn(&ColumnStats) -> String| {
        let mut row = vec![label.to_string()];
        row.extend(COLUMNS.iter().map(|&(s, q)| summary.column(s, q).map_or("-".into(), f)));
        row.push(String::new());
        row
    };
    let body = rows.len();
    rows.push(stat_row("min", &|c| fmt_cell(Some(c.min), c.quantity)));
    rows.push(stat_row("max", &|c| fmt_cell(Some(c.max), c.quantity)));
    rows.push(stat_row("mean ± sd", &|c| {
        let flag = if c.single_sample { " (n=1)" } else { "" };
        match c.quantity {
            Quantity::Voxels => format!("{:.0} ± {:.0}{flag}", c.mean, c.std),
            _ => format!("{:.2} ± {:.2}{flag}", c.mean, c.std),
        }
    }));

    let ncols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncols)
        .map(|c| {
            rows.iter()
                .filter(|r| r.len() > 2 || c == 0)
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        if i == 1 || i == body {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (ncols - 1)));
            out.push('\n');
        }
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 || row.len() == 2 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out.push_str(&format!(
        "{} cases, {} successful, {} failed\n",
        summary.cases, summary.successful, summary.failed
    ));
    out
}
