//! Score discretization, scorer validation, and per-dataset summaries.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::quality::QualityTable;

/// Equal-width label in `1..=5` for a score in `[0, 1]`.
pub fn discretize(qs: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&qs) {
        return Err(Error::InvalidArgument(format!("score {qs} outside [0, 1]")));
    }
    Ok((libm::floor(qs * 5.0) as u8 + 1).min(5))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    #[default]
    EqualWidth,
    Quantile,
}

/// Labels for a batch of scores. Quantile binning ranks the scores (ties by
/// position) and splits the ranks into five equal groups.
pub fn label_scores(scores: &[f64], binning: Binning) -> Result<Vec<u8>> {
    match binning {
        Binning::EqualWidth => scores.iter().map(|&q| discretize(q)).collect(),
        Binning::Quantile => {
            if let Some(q) = scores.iter().find(|q| !(0.0..=1.0).contains(*q)) {
                return Err(Error::InvalidArgument(format!("score {q} outside [0, 1]")));
            }
            let n = scores.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
            let mut labels = vec![0u8; n];
            for (rank, i) in order.into_iter().enumerate() {
                labels[i] = (rank * 5 / n) as u8 + 1;
            }
            Ok(labels)
        }
    }
}

/// Sample Pearson correlation, computed two-pass (means first).
pub fn pearson(pairs: &[(f64, f64)]) -> Result<f64> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("need at least 2 pairs, got {n}")));
    }
    if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in pairs".to_string()));
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance".to_string()));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Agreement between measured and predicted quality scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub pearson_r: f64,
    pub pairs: Vec<(f64, f64)>,
}

impl ValidationReport {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        let pearson_r = pearson(&pairs)?;
        Ok(ValidationReport {
            n: pairs.len(),
            pearson_r,
            pairs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset: String,
    pub size: usize,
    pub count: usize,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Counts of labels 1 through 5.
    pub histogram: [usize; 5],
}

/// Quality summary per dataset over the samples present in `quality`,
/// ordered by dataset name.
pub fn dataset_report(quality: &QualityTable, corpus: &Corpus) -> Vec<DatasetSummary> {
    corpus
        .datasets()
        .map(|(name, samples)| {
            let mut histogram = [0usize; 5];
            let mut scores = Vec::new();
            for s in samples {
                if let Some(q) = quality.score(&s.id) {
                    scores.push(q);
                    if let Some(l) = quality.label(&s.id) {
                        histogram[l as usize - 1] += 1;
                    }
                }
            }
            let (mean, min, max) = if scores.is_empty() {
                (None, None, None)
            } else {
                let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let m = scores.iter().sum::<f64>() / scores.len() as f64;
                // summation rounding can push the mean a hair outside the range
                (Some(m.clamp(lo, hi)), Some(lo), Some(hi))
            };
            DatasetSummary {
                dataset: name.to_string(),
                size: samples.len(),
                count: scores.len(),
                mean,
                min,
                max,
                histogram,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sample;
    use crate::quality::QualityRow;
    use alloc::collections::BTreeMap;

    #[test]
    fn discretize_edges() {
        assert_eq!(discretize(0.0).unwrap(), 1);
        assert_eq!(discretize(1.0).unwrap(), 5);
        assert_eq!(discretize(0.37).unwrap(), 2);
        assert_eq!(discretize(0.2).unwrap(), 2);
        assert_eq!(discretize(0.19999).unwrap(), 1);
        assert!(discretize(-0.01).is_err());
        assert!(discretize(1.01).is_err());
        assert!(discretize(f64::NAN).is_err());
    }

    #[test]
    fn quantile_labels_balanced() {
        let scores: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).rev().collect();
        let labels = label_scores(&scores, Binning::Quantile).unwrap();
        assert_eq!(labels, vec![5, 5, 4, 4, 3, 3, 2, 2, 1, 1]);
        assert_eq!(label_scores(&[0.5], Binning::EqualWidth).unwrap(), vec![3]);
    }

    #[test]
    fn pearson_examples() {
        let lin: Vec<(f64, f64)> = (1..=10).map(|x| (x as f64, 2.0 * x as f64 + 1.0)).collect();
        assert_eq!(pearson(&lin).unwrap(), 1.0);
        assert_eq!(pearson(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]).unwrap(), -1.0);
        let r = pearson(&[(1.0, 1.0), (2.0, 3.0), (3.0, 2.0), (4.0, 4.0)]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_degenerate() {
        assert!(matches!(pearson(&[(1.0, 2.0)]), Err(Error::Degenerate(_))));
        assert!(matches!(pearson(&[(1.0, 2.0), (1.0, 3.0)]), Err(Error::Degenerate(_))));
        assert!(pearson(&[(1.0, f64::NAN), (2.0, 3.0)]).is_err());
        assert!(ValidationReport::new(vec![(0.0, 0.0), (0.0, 0.0)]).is_err());
    }

    #[test]
    fn report_means_and_empty_datasets() {
        let mut c = Corpus::new();
        c.insert(
            "a",
            vec![
                Sample::new("a1", "a", "q", "x").unwrap(),
                Sample::new("a2", "a", "q", "x").unwrap(),
            ],
        )
        .unwrap();
        c.insert("b", vec![Sample::new("b1", "b", "q", "x").unwrap()]).unwrap();
        let mut t = QualityTable::new();
        for (id, qs) in [("a1", 0.2), ("a2", 0.6)] {
            t.insert(QualityRow {
                id: id.into(),
                qs,
                per_testset: BTreeMap::new(),
                label: None,
            })
            .unwrap();
        }
        let rep = dataset_report(&t, &c);
        assert_eq!(rep[0].dataset, "a");
        assert!((rep[0].mean.unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(rep[0].histogram, [0, 1, 0, 1, 0]);
        assert_eq!(rep[1].count, 0);
        assert_eq!(rep[1].mean, None);
    }
}
