//! Quality-weighted diverse selection and per-dataset selection ratios.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{greedy, EmbeddingSet};
use crate::quality::QualityTable;
use crate::rng;

/// Per-row quality aligned with `emb`. Ids absent from the table get 0.0;
/// the second value counts them.
pub fn quality_vector(emb: &EmbeddingSet, table: &QualityTable) -> (Vec<f64>, usize) {
    let mut missing = 0;
    let v = emb
        .ids()
        .iter()
        .map(|id| match table.score(id) {
            Some(q) => q,
            None => {
                missing += 1;
                0.0
            }
        })
        .collect();
    (v, missing)
}

/// Greedy selection ranked by `quality[i] * min_dist[i]`.
///
/// Same loop as [`crate::geometry::kcenter_greedy`], including the random
/// start for an empty seed pool. Equal products go to the larger raw
/// distance, then the smaller index.
pub fn qads_select(
    emb: &EmbeddingSet,
    quality: &[f64],
    seed: &[usize],
    budget: usize,
    rng_seed: u64,
) -> Result<Vec<usize>> {
    if quality.len() != emb.len() {
        return Err(Error::InvalidArgument(format!(
            "{} quality scores for {} points",
            quality.len(),
            emb.len()
        )));
    }
    if let Some((i, q)) = quality.iter().enumerate().find(|(_, q)| !q.is_finite() || **q < 0.0) {
        return Err(Error::InvalidArgument(format!("quality score {q} at index {i}")));
    }
    greedy(emb, seed, budget, rng_seed, |state| {
        let mut best = usize::MAX;
        let mut best_metric = f64::NEG_INFINITY;
        let mut best_d = f64::NEG_INFINITY;
        for (i, (&d, &q)) in state.min_dist().iter().zip(quality).enumerate() {
            if state.contains(i) {
                continue;
            }
            let m = q * d;
            if m > best_metric || (m == best_metric && d > best_d) {
                best = i;
                best_metric = m;
                best_d = d;
            }
        }
        best
    })
}

/// Uniform sample of `budget` indices from `0..n` without replacement.
pub fn random_select(n: usize, budget: usize, rng_seed: u64) -> Result<Vec<usize>> {
    if budget > n {
        return Err(Error::BudgetInfeasible { budget, seed: 0, n });
    }
    Ok(rng::sample_indices(
        n,
        budget,
        rng::derive_seed(rng_seed, "random-select"),
    ))
}

/// Round half away from zero.
pub fn round_budget(x: f64) -> usize {
    libm::round(x) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    Selected,
    KeepAll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub dataset: String,
    pub n: usize,
    pub ratio: f64,
    pub budget: usize,
    pub mode: PlanMode,
}

impl PlanEntry {
    pub fn keep_all(dataset: impl Into<String>, n: usize) -> Self {
        PlanEntry {
            dataset: dataset.into(),
            n,
            ratio: 1.0,
            budget: n,
            mode: PlanMode::KeepAll,
        }
    }

    /// Entry keeping `round(ratio * n)` samples. A ratio of exactly 1 is
    /// keep-all.
    pub fn with_ratio(dataset: impl Into<String>, n: usize, ratio: f64) -> Result<Self> {
        let dataset = dataset.into();
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ratio {ratio} for {dataset:?} outside (0, 1]"
            )));
        }
        if ratio == 1.0 {
            return Ok(Self::keep_all(dataset, n));
        }
        Ok(PlanEntry {
            dataset,
            n,
            ratio,
            budget: round_budget(ratio * n as f64),
            mode: PlanMode::Selected,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.mode {
            PlanMode::KeepAll => self.ratio == 1.0 && self.budget == self.n,
            PlanMode::Selected => {
                self.ratio > 0.0 && self.ratio <= 1.0 && self.budget == round_budget(self.ratio * self.n as f64)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "inconsistent plan entry for {:?}: n={} ratio={} budget={}",
                self.dataset, self.n, self.ratio, self.budget
            )))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionPlan {
    pub entries: Vec<PlanEntry>,
}

impl SelectionPlan {
    pub fn get(&self, dataset: &str) -> Option<&PlanEntry> {
        self.entries.iter().find(|e| e.dataset == dataset)
    }

    pub fn total_budget(&self) -> usize {
        self.entries.iter().map(|e| e.budget).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        for e in &self.entries {
            e.validate()?;
            if seen.insert(e.dataset.as_str(), ()).is_some() {
                return Err(Error::InvalidArgument(format!("dataset {:?} planned twice", e.dataset)));
            }
        }
        Ok(())
    }
}

/// Balanced scheme: datasets of size `>= upp` are cut down to the mean size
/// of the datasets strictly between `low` and `upp`; smaller ones are kept
/// whole.
pub fn balanced_ratios(sizes: &BTreeMap<String, usize>, low: usize, upp: usize) -> Result<SelectionPlan> {
    if low >= upp {
        return Err(Error::InvalidArgument(format!("low {low} must be below upp {upp}")));
    }
    let mid: Vec<usize> = sizes.values().copied().filter(|&n| low < n && n < upp).collect();
    if mid.is_empty() {
        return Err(Error::EmptyNumerator);
    }
    let target = mid.iter().map(|&n| n as f64).sum::<f64>() / mid.len() as f64;
    let entries = sizes
        .iter()
        .map(|(name, &n)| {
            if n >= upp {
                PlanEntry::with_ratio(name.clone(), n, target / n as f64)
            } else {
                Ok(PlanEntry::keep_all(name.clone(), n))
            }
        })
        .collect::<Result<_>>()?;
    Ok(SelectionPlan { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetQuality {
    pub dataset: String,
    pub n: usize,
    pub qs_avg: f64,
}

/// Quality-driven scheme: `ratio = qs_avg / qs_max`.
pub fn quality_ratios(datasets: &[DatasetQuality], qs_max: f64) -> Result<SelectionPlan> {
    if !(qs_max > 0.0 && qs_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("qs_max {qs_max} must be positive")));
    }
    let entries = datasets
        .iter()
        .map(|d| {
            if !(d.qs_avg > 0.0 && d.qs_avg <= qs_max) {
                return Err(Error::InvalidArgument(format!(
                    "average score {} for {:?} outside (0, {qs_max}]",
                    d.qs_avg, d.dataset
                )));
            }
            PlanEntry::with_ratio(d.dataset.clone(), d.n, d.qs_avg / qs_max)
        })
        .collect::<Result<_>>()?;
    Ok(SelectionPlan { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::kcenter_greedy;
    use alloc::string::ToString;
    use alloc::vec;

    fn line(xs: &[f32]) -> EmbeddingSet {
        let mut e = EmbeddingSet::new(1).unwrap();
        for (i, x) in xs.iter().enumerate() {
            e.push(format!("p{i}"), &[*x]).unwrap();
        }
        e
    }

    fn sizes(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn product_metric_example() {
        // 4 * 1.0 = 4 beats 5 * 0.5 = 2.5
        let e = line(&[0.0, 4.0, 5.0]);
        let picks = qads_select(&e, &[1.0, 1.0, 0.5], &[0], 1, 0).unwrap();
        assert_eq!(picks, vec![1]);
        // plain k-center would take the farther point
        assert_eq!(kcenter_greedy(&e, &[0], 1, 0).unwrap(), vec![2]);
    }

    #[test]
    fn zero_quality_picked_last() {
        let e = line(&[0.0, 1.0, 2.0, 100.0]);
        let picks = qads_select(&e, &[1.0, 0.1, 0.1, 0.0], &[0], 3, 0).unwrap();
        assert_eq!(*picks.last().unwrap(), 3);
    }

    #[test]
    fn equal_products_prefer_distance() {
        // metrics: idx1 = 2*1.0 = 2, idx2 = 4*0.5 = 2 -> idx2 (farther)
        let e = line(&[0.0, 2.0, -4.0]);
        assert_eq!(qads_select(&e, &[1.0, 1.0, 0.5], &[0], 1, 0).unwrap(), vec![2]);
    }

    #[test]
    fn qads_rejects_bad_quality() {
        let e = line(&[0.0, 1.0]);
        assert!(qads_select(&e, &[1.0], &[0], 1, 0).is_err());
        assert!(qads_select(&e, &[1.0, -0.1], &[0], 1, 0).is_err());
        assert!(qads_select(&e, &[1.0, f64::NAN], &[0], 1, 0).is_err());
        assert!(matches!(
            qads_select(&e, &[1.0, 1.0], &[0], 2, 0),
            Err(Error::BudgetInfeasible { .. })
        ));
    }

    #[test]
    fn random_select_contract() {
        assert_eq!(random_select(10, 0, 1).unwrap(), Vec::<usize>::new());
        let mut all = random_select(10, 10, 1).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(random_select(100, 7, 9).unwrap(), random_select(100, 7, 9).unwrap());
        assert!(random_select(3, 4, 0).is_err());
    }

    #[test]
    fn balanced_hand_example() {
        let plan = balanced_ratios(
            &sizes(&[("a", 500), ("b", 2000), ("c", 5000), ("d", 30000)]),
            1000,
            10000,
        )
        .unwrap();
        let d = plan.get("d").unwrap();
        assert!((d.ratio - 3500.0 / 30000.0).abs() < 1e-12);
        assert_eq!(d.budget, 3500);
        assert_eq!(d.mode, PlanMode::Selected);
        for k in ["a", "b", "c"] {
            assert_eq!(plan.get(k).unwrap().mode, PlanMode::KeepAll);
            assert_eq!(plan.get(k).unwrap().ratio, 1.0);
        }
        plan.validate().unwrap();
    }

    #[test]
    fn balanced_all_below_upp_keeps_everything() {
        let plan = balanced_ratios(&sizes(&[("a", 2000), ("b", 3000)]), 1000, 10000).unwrap();
        assert!(plan.entries.iter().all(|e| e.mode == PlanMode::KeepAll));
    }

    #[test]
    fn balanced_errors() {
        let s = sizes(&[("a", 500), ("b", 50000)]);
        assert_eq!(balanced_ratios(&s, 1000, 10000), Err(Error::EmptyNumerator));
        assert!(balanced_ratios(&s, 10, 10).is_err());
    }

    #[test]
    fn quality_ratio_examples() {
        let plan = quality_ratios(
            &[
                DatasetQuality {
                    dataset: "full".into(),
                    n: 40,
                    qs_avg: 5.0,
                },
                DatasetQuality {
                    dataset: "half".into(),
                    n: 40,
                    qs_avg: 2.5,
                },
            ],
            5.0,
        )
        .unwrap();
        assert_eq!(plan.get("full").unwrap().mode, PlanMode::KeepAll);
        assert_eq!(plan.get("half").unwrap().ratio, 0.5);
        assert_eq!(plan.get("half").unwrap().budget, 20);
        let too_big = [DatasetQuality {
            dataset: "x".into(),
            n: 1,
            qs_avg: 5.1,
        }];
        assert!(quality_ratios(&too_big, 5.0).is_err());
        let zero = [DatasetQuality {
            dataset: "x".into(),
            n: 1,
            qs_avg: 0.0,
        }];
        assert!(quality_ratios(&zero, 5.0).is_err());
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_budget(2.5), 3);
        assert_eq!(round_budget(3.5), 4);
        assert_eq!(round_budget(2.4999), 2);
        assert_eq!(PlanEntry::with_ratio("x", 5, 0.5).unwrap().budget, 3);
    }

    #[test]
    fn plan_validation_catches_drift() {
        let mut e = PlanEntry::with_ratio("x", 100, 0.3).unwrap();
        e.budget = 31;
        assert!(e.validate().is_err());
        let dup = SelectionPlan {
            entries: vec![PlanEntry::keep_all("a", 1), PlanEntry::keep_all("a", 1)],
        };
        assert!(dup.validate().is_err());
    }
}
