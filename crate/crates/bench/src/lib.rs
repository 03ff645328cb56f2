//! Seeded synthetic inputs for the benchmarks.

use std::collections::{HashMap, HashSet};

use kgctx_core::evaluation::EntityScores;
use kgctx_core::{
    Dictionary, Disambiguation, EntityId, KnowledgeGraph, RawCatalog, RelationEmbeddings,
    RelationSimilarity, SimilarityMatrix, SplitTag, TextCatalog, Triple, VectorTable,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct World {
    pub dictionary: Dictionary,
    pub graph: KnowledgeGraph,
    pub catalog: TextCatalog,
    pub similarity: RelationSimilarity,
}

/// A graph whose head degrees follow a rough power law: entity `i` is
/// drawn with weight `1 / (i + 1)`.
pub fn world(entities: usize, relations: usize, triples: usize, seed: u64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dictionary = Dictionary::new();
    let ents: Vec<EntityId> = (0..entities)
        .map(|i| dictionary.intern_entity(&format!("Q{i}")))
        .collect();
    let rels: Vec<_> = (0..relations)
        .map(|i| dictionary.intern_relation(&format!("P{i}")))
        .collect();
    let harmonic: Vec<f64> = (0..entities)
        .scan(0.0, |acc, i| {
            *acc += 1.0 / (i + 1) as f64;
            Some(*acc)
        })
        .collect();
    let total = harmonic[entities - 1];
    let pick = |rng: &mut ChaCha8Rng| {
        let x = rng.random_range(0.0..total);
        harmonic.partition_point(|&c| c < x).min(entities - 1)
    };
    let mut seen = HashSet::new();
    let mut list = Vec::with_capacity(triples);
    while list.len() < triples {
        let t = Triple::new(
            ents[pick(&mut rng)],
            rels[rng.random_range(0..relations)],
            ents[rng.random_range(0..entities)],
        );
        if seen.insert(t) {
            list.push(t);
        }
    }
    let graph = KnowledgeGraph::from_triples(SplitTag::Train, list, &dictionary);
    let labels: Vec<(String, String)> = (0..entities)
        .map(|i| (format!("Q{i}"), format!("entity {i}")))
        .collect();
    let relation_labels: Vec<(String, String)> = (0..relations)
        .map(|i| (format!("P{i}"), format!("relation {i}")))
        .collect();
    let catalog = TextCatalog::build(
        &RawCatalog::from_pairs(labels.iter().map(|(a, b)| (a.as_str(), b.as_str()))),
        &RawCatalog::from_pairs(
            relation_labels
                .iter()
                .map(|(a, b)| (a.as_str(), b.as_str())),
        ),
        Disambiguation::default(),
    )
    .expect("synthetic labels are unique");
    let mut table = VectorTable::new(32).expect("nonzero dim");
    for i in 0..relations {
        let v: Vec<f32> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        table.push(format!("P{i}"), &v).expect("matching dim");
    }
    let matrix = SimilarityMatrix::build(&RelationEmbeddings::new(table)).expect("valid vectors");
    let similarity = RelationSimilarity::new(matrix, &dictionary);
    World {
        dictionary,
        graph,
        catalog,
        similarity,
    }
}

/// `n` random unit vectors of dimension `dim`, keyed `e0`, `e1`, ...
pub fn unit_vectors(n: usize, dim: usize, seed: u64) -> VectorTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = VectorTable::new(dim).expect("nonzero dim");
    for i in 0..n {
        table
            .push(format!("e{i}"), &unit(&mut rng, dim))
            .expect("matching dim");
    }
    table
}

pub fn unit(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `sampled` scored entities out of `universe`, plus a filter of `filtered`
/// other entities.
pub fn scores(
    universe: usize,
    sampled: usize,
    filtered: usize,
    seed: u64,
) -> (EntityScores, HashSet<EntityId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let map: HashMap<EntityId, f64> = (0..sampled)
        .map(|_| {
            (
                EntityId(rng.random_range(0..universe as u32)),
                -rng.random_range(0.0..30.0),
            )
        })
        .collect();
    let filter = (0..filtered)
        .map(|_| EntityId(rng.random_range(0..universe as u32)))
        .collect();
    (EntityScores::from_map(map), filter)
}
