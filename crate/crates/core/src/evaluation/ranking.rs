//! Sampled-sequence scoring, filtered ranks and Hits@k.
//!
//! Sampled candidates are mapped back to entities by exact text; every
//! entity that was not generated scores `-inf`. Ties are pessimistic: any
//! competitor scoring at least the target's score ranks above it, so an
//! ungenerated target is ranked below every unfiltered competitor.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg_store::{Dictionary, EntityId};
use crate::model::PredictionSet;
use crate::text_catalog::{canonical_text, TextCatalog};

/// 1 iff the texts are equal after NFC and trimming.
pub fn exact_match(generated: &str, target: &str) -> u8 {
    u8::from(canonical_text(generated) == canonical_text(target))
}

pub fn combined_metric(exact_match: f64, hits_at_1: f64) -> f64 {
    1000.0 * exact_match + hits_at_1
}

/// The set of entities that compete in a ranking.
pub trait EntityUniverse: Sync {
    fn contains(&self, entity: EntityId) -> bool;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl EntityUniverse for HashSet<EntityId> {
    fn contains(&self, entity: EntityId) -> bool {
        HashSet::contains(self, &entity)
    }

    fn len(&self) -> usize {
        HashSet::len(self)
    }
}

/// Every id of a dictionary with `n` entities.
#[derive(Clone, Copy, Debug)]
pub struct DenseUniverse(pub usize);

impl DenseUniverse {
    pub fn of(dictionary: &Dictionary) -> Self {
        DenseUniverse(dictionary.entity_count())
    }
}

impl EntityUniverse for DenseUniverse {
    fn contains(&self, entity: EntityId) -> bool {
        (entity.0 as usize) < self.0
    }

    fn len(&self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EntityScores {
    scores: HashMap<EntityId, f64>,
}

impl EntityScores {
    pub fn from_map(scores: HashMap<EntityId, f64>) -> Self {
        EntityScores { scores }
    }

    pub fn get(&self, entity: EntityId) -> f64 {
        self.scores
            .get(&entity)
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// Entities with a finite score.
    pub fn scored(&self) -> impl Iterator<Item = (EntityId, f64)> + '_ {
        self.scores.iter().map(|(&e, &s)| (e, s))
    }
}

/// Maps each candidate text to its entity; duplicates keep the max score.
pub fn scores_from_samples(
    p: &PredictionSet,
    catalog: &TextCatalog,
    dictionary: &Dictionary,
) -> EntityScores {
    let mut scores: HashMap<EntityId, f64> = HashMap::new();
    for c in &p.candidates {
        let Some(id) = catalog.entity_for_text(&c.text) else {
            continue;
        };
        let Ok(entity) = dictionary.entity_id(id) else {
            continue;
        };
        scores
            .entry(entity)
            .and_modify(|s| *s = s.max(c.log_prob))
            .or_insert(c.log_prob);
    }
    EntityScores { scores }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingResult {
    pub query_id: String,
    /// `None` when the target is beyond the retrieved list.
    pub rank: Option<usize>,
    pub filtered: bool,
}

impl RankingResult {
    pub fn hit(&self, k: usize) -> bool {
        self.rank.is_some_and(|r| r <= k)
    }
}

/// Rank of `target` among `universe` minus `filter`. The target itself is
/// never filtered.
pub fn filtered_rank(
    target: EntityId,
    scores: &EntityScores,
    filter: &HashSet<EntityId>,
    universe: &impl EntityUniverse,
) -> Result<usize> {
    if !universe.contains(target) {
        return Err(Error::not_found("target entity", format!("#{}", target.0)));
    }
    let target_score = scores.get(target);
    let competes = |e: EntityId| e != target && universe.contains(e) && !filter.contains(&e);
    if target_score == f64::NEG_INFINITY {
        // every remaining competitor ties or beats it
        let filtered_out = filter
            .iter()
            .filter(|&&e| e != target && universe.contains(e))
            .count();
        return Ok(universe.len() - filtered_out);
    }
    let above = scores
        .scored()
        .filter(|&(e, s)| s >= target_score && competes(e))
        .count();
    Ok(1 + above)
}

pub fn hits_at_k(ranks: &[RankingResult], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Invalid("Hits@k over an empty rank list".into()));
    }
    if k == 0 {
        return Err(Error::Invalid("Hits@k needs k >= 1".into()));
    }
    Ok(ranks.iter().filter(|r| r.hit(k)).count() as f64 / ranks.len() as f64)
}

pub const DEFAULT_HITS_KS: [usize; 3] = [1, 3, 10];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub hits_at: BTreeMap<usize, f64>,
    pub exact_match: f64,
    pub combined: f64,
    pub n_queries: usize,
}

impl MetricsReport {
    /// `exact_matches` holds one 0/1 value per query, parallel to `ranks`.
    pub fn new(ranks: &[RankingResult], exact_matches: &[u8], ks: &[usize]) -> Result<Self> {
        if ranks.len() != exact_matches.len() {
            return Err(Error::Invalid(
                "ranks and exact-match lists differ in length".into(),
            ));
        }
        let mut hits_at = BTreeMap::new();
        for &k in ks.iter().chain([1].iter()) {
            hits_at.insert(k, hits_at_k(ranks, k)?);
        }
        let exact_match = exact_matches.iter().map(|&v| v as f64).sum::<f64>() / ranks.len() as f64;
        Ok(MetricsReport {
            combined: combined_metric(exact_match, hits_at[&1]),
            hits_at,
            exact_match,
            n_queries: ranks.len(),
        })
    }

    /// `metric<TAB>value` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("metric\tvalue\n");
        out.push_str(&format!("n_queries\t{}\n", self.n_queries));
        for (k, v) in &self.hits_at {
            out.push_str(&format!("hits@{k}\t{v:.6}\n"));
        }
        out.push_str(&format!("exact_match\t{:.6}\n", self.exact_match));
        out.push_str(&format!("combined\t{:.6}\n", self.combined));
        out
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut rows: Vec<(String, String)> = vec![("queries".into(), self.n_queries.to_string())];
        for (k, v) in &self.hits_at {
            rows.push((format!("Hits@{k}"), format!("{v:.4}")));
        }
        rows.push(("EM".into(), format!("{:.4}", self.exact_match)));
        rows.push(("1000EM + Hits@1".into(), format!("{:.4}", self.combined)));
        let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
        let rule = format!("+-{}-+-{}-+", "-".repeat(w0), "-".repeat(w1));
        writeln!(f, "{rule}")?;
        for (name, value) in rows {
            writeln!(f, "| {name:<w0$} | {value:>w1$} |")?;
        }
        write!(f, "{rule}")
    }
}
