//! Scoring of prediction files against dataset records.

pub mod ablation;
pub mod flat_index;
pub mod ranking;
pub mod target_position;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::kg_store::{known_heads, known_tails, Dictionary, KnowledgeGraph};
use crate::model::PredictionSet;
use crate::text_catalog::TextCatalog;
use crate::vectors::VectorTable;

pub use ablation::{
    neighbor_ablation, AblationCase, AblationConfig, AblationMetric, AblationPoint, RemovalOrder,
};
pub use flat_index::{EntityIndex, Hit};
pub use ranking::{
    combined_metric, exact_match, filtered_rank, hits_at_k, scores_from_samples, DenseUniverse,
    EntityScores, EntityUniverse, MetricsReport, RankingResult, DEFAULT_HITS_KS,
};
pub use target_position::{classify_target_position, PositionReport, TargetPosition};

/// Per-query outcomes plus their aggregate.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub ranks: Vec<RankingResult>,
    pub exact_matches: Vec<u8>,
    pub report: MetricsReport,
    /// Records with no prediction line; they score as if nothing was generated.
    pub missing_predictions: usize,
}

fn index_predictions(predictions: &[PredictionSet]) -> HashMap<&str, &PredictionSet> {
    let mut by_id = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_id.insert(p.query_id.as_str(), p).is_some() {
            log::warn!(
                "duplicate prediction line for query {}; keeping the last",
                p.query_id
            );
        }
    }
    by_id
}

fn top_exact_match(p: Option<&PredictionSet>, target: &str) -> u8 {
    p.and_then(PredictionSet::top)
        .map_or(0, |c| exact_match(&c.text, target))
}

fn finish(
    records: &[DatasetRecord],
    rows: Vec<(RankingResult, u8, bool)>,
    ks: &[usize],
) -> Result<Evaluation> {
    let missing_predictions = rows.iter().filter(|r| r.2).count();
    if missing_predictions > 0 {
        log::warn!(
            "{missing_predictions} of {} records have no prediction",
            records.len()
        );
    }
    let (ranks, exact_matches): (Vec<_>, Vec<_>) =
        rows.into_iter().map(|(r, em, _)| (r, em)).unzip();
    let report = MetricsReport::new(&ranks, &exact_matches, ks)?;
    Ok(Evaluation {
        ranks,
        exact_matches,
        report,
        missing_predictions,
    })
}

/// Sampled-ranking evaluation. With an empty `filter_graphs` the ranks
/// are unfiltered.
pub fn evaluate_transductive(
    records: &[DatasetRecord],
    predictions: &[PredictionSet],
    catalog: &TextCatalog,
    dictionary: &Dictionary,
    filter_graphs: &[&KnowledgeGraph],
    universe: &impl EntityUniverse,
    ks: &[usize],
) -> Result<Evaluation> {
    let by_id = index_predictions(predictions);
    let filtered = !filter_graphs.is_empty();
    let rows = records
        .par_iter()
        .map(|rec| {
            let prediction = by_id.get(rec.query_id.as_str()).copied();
            let head = dictionary.entity_id(&rec.head_id)?;
            let relation = dictionary.relation_id(&rec.relation_id)?;
            let target = dictionary.entity_id(&rec.target_id)?;
            let filter = match (filtered, rec.inverse) {
                (false, _) => Default::default(),
                (true, false) => known_tails(head, relation, filter_graphs),
                (true, true) => known_heads(head, relation, filter_graphs),
            };
            let scores = prediction
                .map(|p| scores_from_samples(p, catalog, dictionary))
                .unwrap_or_default();
            let rank = filtered_rank(target, &scores, &filter, universe)
                .map_err(|e| Error::Invalid(format!("query {}: {e}", rec.query_id)))?;
            Ok((
                RankingResult {
                    query_id: rec.query_id.clone(),
                    rank: Some(rank),
                    filtered,
                },
                top_exact_match(prediction, &rec.target_text),
                prediction.is_none(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    finish(records, rows, ks)
}

/// Nearest-entity evaluation. `generated` holds one embedding per query id
/// for the model's top output; a target outside the retrieved top
/// `max(ks)` has no rank.
pub fn evaluate_inductive(
    records: &[DatasetRecord],
    predictions: &[PredictionSet],
    generated: &VectorTable,
    index: &EntityIndex,
    ks: &[usize],
) -> Result<Evaluation> {
    if generated.dim() != index.dim() {
        return Err(Error::DimensionMismatch {
            expected: index.dim(),
            actual: generated.dim(),
        });
    }
    let depth = ks.iter().copied().chain([1]).max().unwrap_or(1);
    let by_id = index_predictions(predictions);
    let rows = records
        .par_iter()
        .map(|rec| {
            let prediction = by_id.get(rec.query_id.as_str()).copied();
            let target = index
                .index_of(&rec.target_id)
                .ok_or_else(|| Error::not_found("indexed entity", rec.target_id.clone()))?;
            let rank = match generated.get(&rec.query_id) {
                Some(v) => index
                    .nearest(v, depth)?
                    .iter()
                    .position(|h| h.index == target)
                    .map(|p| p + 1),
                None => None,
            };
            Ok((
                RankingResult {
                    query_id: rec.query_id.clone(),
                    rank,
                    filtered: false,
                },
                top_exact_match(prediction, &rec.target_text),
                prediction.is_none(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    finish(records, rows, ks)
}
