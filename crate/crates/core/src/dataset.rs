//! Forward/inverse query enumeration and line-delimited dataset records.
//!
//! Every triple `(h, r, t)` at position `i` yields the query `i:fwd`
//! asking `(h, r, ?)` and `i:inv` asking `(t, r⁻¹, ?)`. Records are
//! verbalized in parallel and written in query order.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{create_writer, read_jsonl};
use crate::kg_store::{Dictionary, KnowledgeGraph};
use crate::neighborhood::{form_neighborhood, Neighborhood, Query};
use crate::relation_similarity::RelationSimilarity;
use crate::verbalizer::{TokenBudget, VerbalizedQuery, Verbalizer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IndexedQuery {
    pub triple_index: usize,
    pub query: Query,
}

impl IndexedQuery {
    pub fn query_id(&self) -> String {
        let dir = if self.query.inverse { "inv" } else { "fwd" };
        format!("{}:{dir}", self.triple_index)
    }
}

/// Parses `<triple-index>:<fwd|inv>`.
pub fn parse_query_id(id: &str) -> Option<(usize, bool)> {
    let (idx, dir) = id.split_once(':')?;
    let inverse = match dir {
        "fwd" => false,
        "inv" => true,
        _ => return None,
    };
    Some((idx.parse().ok()?, inverse))
}

/// Two queries per triple, forward then inverse, in triple order.
pub fn emit_queries(graph: &KnowledgeGraph) -> impl Iterator<Item = IndexedQuery> + '_ {
    graph.triples().iter().enumerate().flat_map(|(i, &t)| {
        [
            IndexedQuery {
                triple_index: i,
                query: Query::forward(t),
            },
            IndexedQuery {
                triple_index: i,
                query: Query::inverse(t),
            },
        ]
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub query_id: String,
    pub input_text: String,
    pub target_text: String,
    pub head_id: String,
    pub relation_id: String,
    pub target_id: String,
    pub inverse: bool,
}

/// Where neighborhoods come from. `similarity: None` or `cap == 0`
/// produces bare task inputs.
#[derive(Clone, Copy)]
pub struct NeighborhoodSource<'a> {
    pub graph: &'a KnowledgeGraph,
    pub similarity: Option<&'a RelationSimilarity>,
    pub cap: usize,
}

impl NeighborhoodSource<'_> {
    pub fn form(&self, query: &Query) -> Result<Neighborhood> {
        match self.similarity {
            Some(sim) if self.cap > 0 => form_neighborhood(query, self.graph, sim, self.cap),
            _ => Ok(Neighborhood::empty(*query)),
        }
    }
}

/// Everything needed to turn a query into a record.
#[derive(Clone, Copy)]
pub struct RecordBuilder<'a> {
    pub verbalizer: Verbalizer<'a>,
    pub neighbors: NeighborhoodSource<'a>,
    pub budget: &'a TokenBudget,
}

impl RecordBuilder<'_> {
    pub fn dictionary(&self) -> &Dictionary {
        self.verbalizer.dictionary
    }

    pub fn verbalize(&self, q: &IndexedQuery) -> Result<(Neighborhood, VerbalizedQuery)> {
        let nbh = self.neighbors.form(&q.query)?;
        let vq = self.verbalizer.assemble(&nbh, self.budget)?;
        Ok((nbh, vq))
    }

    pub fn record(&self, q: &IndexedQuery, vq: &VerbalizedQuery) -> DatasetRecord {
        let dict = self.dictionary();
        DatasetRecord {
            query_id: q.query_id(),
            input_text: vq.input_text.clone(),
            target_text: vq.target_text.clone(),
            head_id: dict.entity_name(q.query.head).to_string(),
            relation_id: dict.relation_name(q.query.relation).to_string(),
            target_id: q
                .query
                .target
                .map(|t| dict.entity_name(t).to_string())
                .unwrap_or_default(),
            inverse: q.query.inverse,
        }
    }

    pub fn build(&self, q: &IndexedQuery) -> Result<DatasetRecord> {
        let (_, vq) = self.verbalize(q)?;
        Ok(self.record(q, &vq))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WriteSummary {
    pub written: usize,
    pub skipped: Vec<(String, String)>,
}

const CHUNK: usize = 8192;

/// Writes one JSON record per line. Queries that fail to verbalize are
/// logged and skipped; the returned count covers written lines only.
pub fn write_dataset(
    queries: &[IndexedQuery],
    builder: &RecordBuilder<'_>,
    out_path: &Path,
) -> Result<WriteSummary> {
    let mut out = create_writer(out_path)?;
    let mut summary = WriteSummary::default();
    for chunk in queries.chunks(CHUNK) {
        let results: Vec<Result<DatasetRecord>> =
            chunk.par_iter().map(|q| builder.build(q)).collect();
        for (q, res) in chunk.iter().zip(results) {
            match res {
                Ok(rec) => {
                    serde_json::to_writer(&mut out, &rec)
                        .map_err(|e| Error::io(out_path, e.into()))?;
                    out.write_all(b"\n").map_err(|e| Error::io(out_path, e))?;
                    summary.written += 1;
                }
                Err(e) => {
                    let id = q.query_id();
                    log::warn!("skipping query {id}: {e}");
                    summary.skipped.push((id, e.to_string()));
                }
            }
        }
    }
    out.flush().map_err(|e| Error::io(out_path, e))?;
    Ok(summary)
}

pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>> {
    read_jsonl(path)
}
