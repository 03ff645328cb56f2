//! The text-in/text-out model boundary.
//!
//! A model answers a [`DatasetRecord`] with up to `k` sampled sequences,
//! each carrying the sum of its token log-probabilities. External models
//! exchange these as prediction files; in-process stand-ins implement
//! [`Predictor`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::io::{read_jsonl, write_jsonl};

pub const DEFAULT_SAMPLE_SIZE: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub log_prob: f64,
}

impl Candidate {
    pub fn new(text: impl Into<String>, log_prob: f64) -> Self {
        Candidate {
            text: text.into(),
            log_prob,
        }
    }
}

/// One line of a prediction file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub query_id: String,
    pub candidates: Vec<Candidate>,
    /// Set by adapters when the backend failed for this query.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PredictionSet {
    pub fn new(query_id: impl Into<String>, candidates: Vec<Candidate>) -> Self {
        PredictionSet {
            query_id: query_id.into(),
            candidates,
            error: None,
        }
    }

    pub fn validate(&self, sample_size: usize) -> Result<()> {
        if self.candidates.len() > sample_size {
            return Err(Error::Invalid(format!(
                "query {}: {} candidates exceed sample size {sample_size}",
                self.query_id,
                self.candidates.len()
            )));
        }
        if let Some(c) = self
            .candidates
            .iter()
            .find(|c| !c.log_prob.is_finite() || c.log_prob > 0.0)
        {
            return Err(Error::Invalid(format!(
                "query {}: log_prob {} of `{}` is not a finite value <= 0",
                self.query_id, c.log_prob, c.text
            )));
        }
        Ok(())
    }

    /// Highest log-probability candidate; the earliest wins ties.
    pub fn top(&self) -> Option<&Candidate> {
        self.candidates
            .iter()
            .reduce(|best, c| if c.log_prob > best.log_prob { c } else { best })
    }
}

pub trait Predictor: Sync {
    fn predict(&self, record: &DatasetRecord) -> Result<Vec<Candidate>>;

    fn predict_set(&self, record: &DatasetRecord) -> Result<PredictionSet> {
        Ok(PredictionSet::new(
            record.query_id.clone(),
            self.predict(record)?,
        ))
    }
}

/// Runs `model` over `records` in parallel; output follows record order.
pub fn predict_all(model: &dyn Predictor, records: &[DatasetRecord]) -> Result<Vec<PredictionSet>> {
    use rayon::prelude::*;
    records
        .par_iter()
        .map(|r| {
            model
                .predict_set(r)
                .map_err(|e| Error::Invalid(format!("model failed on query {}: {e}", r.query_id)))
        })
        .collect()
}

pub fn read_predictions(path: &Path, sample_size: usize) -> Result<Vec<PredictionSet>> {
    let sets: Vec<PredictionSet> = read_jsonl(path)?;
    for (i, s) in sets.iter().enumerate() {
        s.validate(sample_size).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
    }
    Ok(sets)
}

pub fn write_predictions(path: &Path, sets: &[PredictionSet]) -> Result<usize> {
    write_jsonl(path, sets)
}
