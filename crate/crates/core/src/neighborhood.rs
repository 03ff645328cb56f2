//! 1-hop neighborhoods of a query head, with the answer edge removed.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg_store::{Dictionary, Direction, EntityId, KnowledgeGraph, RelationId, Triple};
use crate::relation_similarity::RelationSimilarity;

pub const DEFAULT_NEIGHBOR_CAP: usize = 512;

/// A link-prediction query `(head, relation, ?)`.
///
/// Inverse queries come from rewriting `(h, r, t)` as `(t, r⁻¹, ?)`: `head`
/// then holds the original tail and `target` the original head, while
/// `relation` keeps the original (non-inverted) relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Query {
    pub head: EntityId,
    pub relation: RelationId,
    pub inverse: bool,
    pub target: Option<EntityId>,
}

impl Query {
    pub fn forward(triple: Triple) -> Self {
        Query {
            head: triple.head,
            relation: triple.relation,
            inverse: false,
            target: Some(triple.tail),
        }
    }

    pub fn inverse(triple: Triple) -> Self {
        Query {
            head: triple.tail,
            relation: triple.relation,
            inverse: true,
            target: Some(triple.head),
        }
    }

    /// True for the answer edge in either orientation.
    pub fn is_excluded(&self, triple: &Triple) -> bool {
        let Some(target) = self.target else {
            return false;
        };
        triple.relation == self.relation
            && ((triple.head == self.head && triple.tail == target)
                || (triple.head == target && triple.tail == self.head))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborTriple {
    pub position: usize,
    pub triple: Triple,
    pub direction: Direction,
    pub similarity: f64,
}

impl NeighborTriple {
    /// The endpoint that is not the query head.
    pub fn other(&self) -> EntityId {
        match self.direction {
            Direction::Outgoing => self.triple.tail,
            Direction::Incoming => self.triple.head,
        }
    }

    fn order(&self, other: &Self) -> Ordering {
        other
            .similarity
            .total_cmp(&self.similarity)
            .then(self.position.cmp(&other.position))
            .then(direction_rank(self.direction).cmp(&direction_rank(other.direction)))
    }
}

fn direction_rank(d: Direction) -> u8 {
    match d {
        Direction::Outgoing => 0,
        Direction::Incoming => 1,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighborhood {
    pub query: Query,
    pub neighbors: Vec<NeighborTriple>,
}

impl Neighborhood {
    pub fn empty(query: Query) -> Self {
        Neighborhood {
            query,
            neighbors: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// Same query, keeping only the neighbors at `keep` (in the given order).
    pub fn subset(&self, keep: &[usize]) -> Self {
        Neighborhood {
            query: self.query,
            neighbors: keep.iter().map(|&i| self.neighbors[i]).collect(),
        }
    }
}

/// Collects the neighbors of `query.head`, drops the answer edge, sorts by
/// descending relation similarity to `query.relation` and keeps `cap`.
///
/// Ties are broken by ascending triple position, then outgoing before
/// incoming (self-loops appear in both directions).
pub fn form_neighborhood(
    query: &Query,
    graph: &KnowledgeGraph,
    similarity: &RelationSimilarity,
    cap: usize,
) -> Result<Neighborhood> {
    if !similarity.contains(query.relation) {
        return Err(Error::not_found(
            "relation vector",
            format!("#{}", query.relation.0),
        ));
    }
    let mut neighbors = Vec::new();
    for adj in graph.adjacent(query.head) {
        if query.is_excluded(&adj.triple) {
            continue;
        }
        neighbors.push(NeighborTriple {
            position: adj.position,
            triple: adj.triple,
            direction: adj.direction,
            similarity: similarity.similarity(adj.triple.relation, query.relation)?,
        });
    }
    if neighbors.len() > cap {
        if cap == 0 {
            neighbors.clear();
        } else {
            neighbors.select_nth_unstable_by(cap - 1, NeighborTriple::order);
            neighbors.truncate(cap);
        }
    }
    neighbors.sort_unstable_by(NeighborTriple::order);
    Ok(Neighborhood {
        query: *query,
        neighbors,
    })
}

/// Line-delimited dump of one formed neighborhood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodRecord {
    pub query_id: String,
    pub neighbors: Vec<NeighborEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborEntry {
    pub position: usize,
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub direction: String,
    pub similarity: f64,
}

impl NeighborhoodRecord {
    pub fn new(query_id: String, nbh: &Neighborhood, dictionary: &Dictionary) -> Self {
        NeighborhoodRecord {
            query_id,
            neighbors: nbh
                .neighbors
                .iter()
                .map(|n| NeighborEntry {
                    position: n.position,
                    head: dictionary.entity_name(n.triple.head).to_string(),
                    relation: dictionary.relation_name(n.triple.relation).to_string(),
                    tail: dictionary.entity_name(n.triple.tail).to_string(),
                    direction: match n.direction {
                        Direction::Outgoing => "out".into(),
                        Direction::Incoming => "in".into(),
                    },
                    similarity: n.similarity,
                })
                .collect(),
        }
    }
}
