//! Text and JSON renderings of quality reports, and scorer validation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use qads_core::analysis::{DatasetSummary, ValidationReport};
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Closed interval scores are declared to live in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRange {
    pub min: f64,
    pub max: f64,
}

impl ScoreRange {
    pub const UNIT: ScoreRange = ScoreRange { min: 0.0, max: 1.0 };

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

impl std::str::FromStr for ScoreRange {
    type Err = String;

    /// Parses `MIN,MAX`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| format!("expected MIN,MAX, got {s:?}"))?;
        let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        let (min, max) = (parse(a)?, parse(b)?);
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(format!("invalid range {min},{max}"));
        }
        Ok(ScoreRange { min, max })
    }
}

/// Scorer validation over the ids present in both inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerValidation {
    pub real_range: ScoreRange,
    pub pred_range: ScoreRange,
    pub only_real: usize,
    pub only_pred: usize,
    #[serde(flatten)]
    pub report: ValidationReport,
}

/// Joins real and predicted scores by id (in id order) and correlates them.
/// Every value must lie inside its declared range.
pub fn validate_scorer(
    real: &BTreeMap<String, f64>,
    pred: &BTreeMap<String, f64>,
    real_range: ScoreRange,
    pred_range: ScoreRange,
) -> Result<ScorerValidation> {
    let mut pairs = Vec::new();
    for (id, &r) in real {
        let Some(&p) = pred.get(id) else { continue };
        for (what, v, range) in [("real", r, real_range), ("predicted", p, pred_range)] {
            if !range.contains(v) {
                return Err(qads_core::Error::InvalidArgument(format!(
                    "{what} score {v} for {id:?} outside [{}, {}]",
                    range.min, range.max
                ))
                .into());
            }
        }
        pairs.push((r, p));
    }
    let only_real = real.keys().filter(|id| !pred.contains_key(*id)).count();
    let only_pred = pred.keys().filter(|id| !real.contains_key(*id)).count();
    Ok(ScorerValidation {
        real_range,
        pred_range,
        only_real,
        only_pred,
        report: ValidationReport::new(pairs)?,
    })
}

pub fn validation_text(v: &ScorerValidation) -> String {
    format!(
        "pairs      {}\npearson_r  {:.6}\nonly_real  {}\nonly_pred  {}\n",
        v.report.n, v.report.pearson_r, v.only_real, v.only_pred
    )
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".to_string())
}

/// Aligned plain-text table, one row per dataset.
pub fn summary_table(rows: &[DatasetSummary]) -> String {
    let header = [
        "dataset", "size", "scored", "mean", "min", "max", "l1", "l2", "l3", "l4", "l5",
    ];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        let mut row = vec![
            r.dataset.clone(),
            r.size.to_string(),
            r.count.to_string(),
            opt(r.mean),
            opt(r.min),
            opt(r.max),
        ];
        row.extend(r.histogram.iter().map(usize::to_string));
        cells.push(row);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(line, "{cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

pub fn summary_json(rows: &[DatasetSummary]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("summaries serialize");
    s.push('\n');
    s
}
