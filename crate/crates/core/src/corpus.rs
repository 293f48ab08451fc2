//! Instruction samples grouped into named datasets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One question/answer record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub dataset: String,
    pub question: String,
    pub answer: String,
}

impl Sample {
    pub fn new(
        id: impl Into<String>,
        dataset: impl Into<String>,
        question: impl Into<String>,
        answer: impl Into<String>,
    ) -> Result<Self> {
        let sample = Sample {
            id: id.into(),
            dataset: dataset.into(),
            question: question.into(),
            answer: answer.into(),
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidSample("empty id".to_string()));
        }
        if self.question.is_empty() {
            return Err(Error::InvalidSample(format!("{}: empty question", self.id)));
        }
        if self.answer.is_empty() {
            return Err(Error::InvalidSample(format!("{}: empty answer", self.id)));
        }
        Ok(())
    }

    /// Text handed to the embedding model.
    pub fn embedding_text(&self, question_only: bool) -> String {
        if question_only {
            self.question.clone()
        } else {
            format!("{}\n{}", self.question, self.answer)
        }
    }
}

/// Named datasets, each an ordered list of samples.
///
/// Ids are unique across the whole corpus. Datasets iterate in name order,
/// samples within a dataset in insertion (file) order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    datasets: BTreeMap<String, Vec<Sample>>,
    ids: BTreeSet<String>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a dataset fragment. Fails without modifying the corpus if the
    /// dataset already exists or any id collides.
    pub fn insert(&mut self, name: impl Into<String>, samples: Vec<Sample>) -> Result<()> {
        let name = name.into();
        if self.datasets.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("dataset {name:?} loaded twice")));
        }
        let mut fresh = BTreeSet::new();
        for s in &samples {
            s.validate()?;
            if self.ids.contains(&s.id) || !fresh.insert(s.id.clone()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        self.ids.append(&mut fresh);
        self.datasets.insert(name, samples);
        Ok(())
    }

    pub fn dataset(&self, name: &str) -> Option<&[Sample]> {
        self.datasets.get(name).map(Vec::as_slice)
    }

    pub fn datasets(&self) -> impl Iterator<Item = (&str, &[Sample])> {
        self.datasets.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.datasets.keys().map(String::as_str)
    }

    /// Dataset sizes `n_i`.
    pub fn sizes(&self) -> BTreeMap<String, usize> {
        self.datasets.iter().map(|(k, v)| (k.clone(), v.len())).collect()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.ids.contains(id)
    }
}
