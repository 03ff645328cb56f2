//! Neighbor-removal curves.
//!
//! Each case is first assembled under the budget; only the neighbors that
//! made it into the input take part. Removing `m` neighbors reassembles the
//! input from the remaining ones (kept in their original order) and asks
//! the model again.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{IndexedQuery, RecordBuilder};
use crate::error::{Error, Result};
use crate::evaluation::ranking::exact_match;
use crate::model::{Candidate, Predictor};
use crate::neighborhood::Neighborhood;
use crate::text_catalog::canonical_text;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalOrder {
    RelevantFirst,
    Random,
}

impl FromStr for RemovalOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relevant_first" | "relevant-first" => Ok(RemovalOrder::RelevantFirst),
            "random" => Ok(RemovalOrder::Random),
            _ => Err(Error::Invalid(format!("unknown removal order `{s}`"))),
        }
    }
}

impl fmt::Display for RemovalOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RemovalOrder::RelevantFirst => "relevant_first",
            RemovalOrder::Random => "random",
        })
    }
}

/// Per-query value averaged into each curve point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMetric {
    /// `exp` of the target's best candidate log-prob, 0 when not generated.
    TargetProbability,
    ExactMatch,
}

impl FromStr for AblationMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target_prob" | "target_probability" | "logprob" => {
                Ok(AblationMetric::TargetProbability)
            }
            "em" | "exact_match" => Ok(AblationMetric::ExactMatch),
            _ => Err(Error::Invalid(format!("unknown ablation metric `{s}`"))),
        }
    }
}

impl fmt::Display for AblationMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationMetric::TargetProbability => "target_prob",
            AblationMetric::ExactMatch => "em",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationCase {
    pub query: IndexedQuery,
    pub neighborhood: Neighborhood,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationConfig {
    pub order: RemovalOrder,
    pub metric: AblationMetric,
    pub removals: Vec<usize>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub removed: usize,
    pub metric: f64,
}

/// Best log-prob among candidates equal to `target`, `-inf` if none.
pub fn target_log_prob(candidates: &[Candidate], target: &str) -> f64 {
    let target = canonical_text(target);
    candidates
        .iter()
        .filter(|c| canonical_text(&c.text) == target)
        .map(|c| c.log_prob)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn target_probability(candidates: &[Candidate], target: &str) -> f64 {
    target_log_prob(candidates, target).exp()
}

fn metric_value(metric: AblationMetric, candidates: &[Candidate], target: &str) -> f64 {
    match metric {
        AblationMetric::TargetProbability => target_probability(candidates, target),
        AblationMetric::ExactMatch => {
            let top = candidates
                .iter()
                .reduce(|best, c| if c.log_prob > best.log_prob { c } else { best });
            top.map_or(0.0, |c| exact_match(&c.text, target) as f64)
        }
    }
}

struct CaseRunner<'a, 'b> {
    case: &'a AblationCase,
    effective: Neighborhood,
    target: String,
    builder: &'a RecordBuilder<'b>,
    model: &'a dyn Predictor,
}

impl CaseRunner<'_, '_> {
    fn predict(&self, keep: &[usize]) -> Result<Vec<Candidate>> {
        let nbh = self.effective.subset(keep);
        let vq = self
            .builder
            .verbalizer
            .assemble(&nbh, self.builder.budget)?;
        let record = self.builder.record(&self.case.query, &vq);
        self.model
            .predict(&record)
            .map_err(|e| Error::Invalid(format!("model failed on query {}: {e}", record.query_id)))
    }

    fn removal_order(&self, order: RemovalOrder, seed: u64) -> Result<Vec<usize>> {
        let n = self.effective.len();
        let mut idx: Vec<usize> = (0..n).collect();
        match order {
            RemovalOrder::RelevantFirst => {
                let base = target_probability(&self.predict(&idx)?, &self.target);
                let mut relevance = Vec::with_capacity(n);
                for j in 0..n {
                    let keep: Vec<usize> = (0..n).filter(|&i| i != j).collect();
                    relevance.push(base - target_probability(&self.predict(&keep)?, &self.target));
                }
                idx.sort_by(|&a, &b| relevance[b].total_cmp(&relevance[a]));
            }
            RemovalOrder::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let q = self.case.query;
                rng.set_stream(q.triple_index as u64 * 2 + u64::from(q.query.inverse));
                idx.shuffle(&mut rng);
            }
        }
        Ok(idx)
    }

    fn curve(&self, config: &AblationConfig) -> Result<Vec<f64>> {
        let order = self.removal_order(config.order, config.seed)?;
        let n = order.len();
        config
            .removals
            .iter()
            .map(|&m| {
                let mut keep = order[m.min(n)..].to_vec();
                keep.sort_unstable();
                Ok(metric_value(
                    config.metric,
                    &self.predict(&keep)?,
                    &self.target,
                ))
            })
            .collect()
    }
}

/// Mean metric per removal count over `cases`. Counts above a case's
/// neighbor total remove everything.
pub fn neighbor_ablation(
    cases: &[AblationCase],
    builder: &RecordBuilder<'_>,
    model: &dyn Predictor,
    config: &AblationConfig,
) -> Result<Vec<AblationPoint>> {
    if cases.is_empty() {
        return Err(Error::Invalid("ablation needs at least one query".into()));
    }
    let curves: Vec<Vec<f64>> = cases
        .par_iter()
        .map(|case| {
            let target = case.neighborhood.query.target.ok_or_else(|| {
                Error::Invalid(format!("query {} has no target", case.query.query_id()))
            })?;
            let base = builder
                .verbalizer
                .assemble(&case.neighborhood, builder.budget)?;
            let included: Vec<usize> = (0..base.included_count()).collect();
            let runner = CaseRunner {
                case,
                effective: case.neighborhood.subset(&included),
                target: builder.verbalizer.entity(target)?.to_string(),
                builder,
                model,
            };
            runner.curve(config)
        })
        .collect::<Result<_>>()?;
    let n = curves.len() as f64;
    Ok(config
        .removals
        .iter()
        .enumerate()
        .map(|(i, &removed)| AblationPoint {
            removed,
            metric: curves.iter().map(|c| c[i]).sum::<f64>() / n,
        })
        .collect())
}
