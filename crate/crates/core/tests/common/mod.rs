#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::HashSet;

use kgctx_core::dataset::IndexedQuery;
use kgctx_core::kg_store::{Direction, SplitTag};
use kgctx_core::{
    Dictionary, Disambiguation, EntityId, KnowledgeGraph, NeighborTriple, Query, RawCatalog,
    RelationEmbeddings, RelationSimilarity, SimilarityMatrix, TextCatalog, Triple, VectorTable,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct World {
    pub dict: Dictionary,
    pub graph: KnowledgeGraph,
    pub catalog: TextCatalog,
    pub sim: RelationSimilarity,
    pub vectors: VectorTable,
}

pub fn build_world(
    entities: &[(String, String)],
    relations: &[(String, String)],
    triples: &[(String, String, String)],
    vectors: &[(String, Vec<f32>)],
) -> World {
    let mut dict = Dictionary::new();
    for (id, _) in entities {
        dict.intern_entity(id);
    }
    for (id, _) in relations {
        dict.intern_relation(id);
    }
    let ts: Vec<Triple> = triples
        .iter()
        .map(|(h, r, t)| {
            Triple::new(
                dict.entity_id(h).unwrap(),
                dict.relation_id(r).unwrap(),
                dict.entity_id(t).unwrap(),
            )
        })
        .collect();
    let graph = KnowledgeGraph::from_triples(SplitTag::Train, ts, &dict);
    let catalog = TextCatalog::build(
        &RawCatalog::from_pairs(entities.iter().map(|(a, b)| (a.as_str(), b.as_str()))),
        &RawCatalog::from_pairs(relations.iter().map(|(a, b)| (a.as_str(), b.as_str()))),
        Disambiguation::default(),
    )
    .unwrap();
    let dim = vectors[0].1.len();
    let mut table = VectorTable::new(dim).unwrap();
    for (k, v) in vectors {
        table.push(k.clone(), v).unwrap();
    }
    let matrix = SimilarityMatrix::build(&RelationEmbeddings::new(table.clone())).unwrap();
    World {
        sim: RelationSimilarity::new(matrix, &dict),
        dict,
        graph,
        catalog,
        vectors: table,
    }
}

fn pairs(v: &[(&str, &str)]) -> Vec<(String, String)> {
    v.iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect()
}

/// The Steve Jobs mini-graph: place of birth (the query relation), an
/// occupation edge and an incoming founded-by edge.
pub fn steve_jobs() -> World {
    build_world(
        &pairs(&[
            ("Q19837", "Steve Jobs"),
            ("Q47265", "Palo Alto"),
            ("Q131524", "entrepreneur"),
            ("Q312", "Apple"),
        ]),
        &pairs(&[
            ("P19", "place of birth"),
            ("P106", "occupation"),
            ("P112", "founded by"),
        ]),
        &[
            ("Q19837".into(), "P19".into(), "Q47265".into()),
            ("Q19837".into(), "P106".into(), "Q131524".into()),
            ("Q312".into(), "P112".into(), "Q19837".into()),
        ],
        &[
            ("P19".into(), vec![1.0, 0.0]),
            ("P106".into(), vec![0.8, 0.6]),
            ("P112".into(), vec![0.6, 0.8]),
        ],
    )
}

pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.iter().map(|x| (x / n) as f32).collect();
        }
    }
}

/// A random multigraph with small integer-valued relation vectors, so
/// exact similarity ties occur.
pub fn random_world(
    rng: &mut ChaCha8Rng,
    n_entities: usize,
    n_relations: usize,
    n_triples: usize,
) -> World {
    let entities: Vec<(String, String)> = (0..n_entities)
        .map(|i| (format!("E{i}"), format!("ent {i}")))
        .collect();
    let relations: Vec<(String, String)> = (0..n_relations)
        .map(|i| (format!("R{i}"), format!("rel {i}")))
        .collect();
    let triples: Vec<(String, String, String)> = (0..n_triples)
        .map(|_| {
            (
                format!("E{}", rng.random_range(0..n_entities)),
                format!("R{}", rng.random_range(0..n_relations)),
                format!("E{}", rng.random_range(0..n_entities)),
            )
        })
        .collect();
    let vectors: Vec<(String, Vec<f32>)> = (0..n_relations)
        .map(|i| {
            let v = loop {
                let v: Vec<f32> = (0..3).map(|_| rng.random_range(-2i32..=2) as f32).collect();
                if v.iter().any(|&x| x != 0.0) {
                    break v;
                }
            };
            (format!("R{i}"), v)
        })
        .collect();
    build_world(&entities, &relations, &triples, &vectors)
}

pub fn all_queries(world: &World) -> Vec<IndexedQuery> {
    kgctx_core::emit_queries(&world.graph).collect()
}

/// Independent cosine in f64.
pub fn cosine_oracle(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Brute-force neighborhood: scan every triple, keep those touching the
/// head (a self-loop counts twice), drop the answer edge, sort.
pub fn neighborhood_oracle(world: &World, query: &Query, cap: usize) -> Vec<(usize, Direction)> {
    let qv = world
        .vectors
        .get(world.dict.relation_name(query.relation))
        .unwrap();
    let mut out: Vec<(f64, usize, u8, Direction)> = Vec::new();
    for (pos, t) in world.graph.triples().iter().enumerate() {
        if let Some(target) = query.target {
            let same_pair = (t.head == query.head && t.tail == target)
                || (t.head == target && t.tail == query.head);
            if t.relation == query.relation && same_pair {
                continue;
            }
        }
        let sim = cosine_oracle(
            world
                .vectors
                .get(world.dict.relation_name(t.relation))
                .unwrap(),
            qv,
        );
        if t.head == query.head {
            out.push((sim, pos, 0, Direction::Outgoing));
        }
        if t.tail == query.head {
            out.push((sim, pos, 1, Direction::Incoming));
        }
    }
    out.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    out.truncate(cap);
    out.into_iter().map(|(_, p, _, d)| (p, d)).collect()
}

pub fn neighbor_precedes(a: &NeighborTriple, b: &NeighborTriple) -> bool {
    let dir = |d: Direction| matches!(d, Direction::Incoming) as u8;
    match b.similarity.partial_cmp(&a.similarity).unwrap() {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => (a.position, dir(a.direction)) < (b.position, dir(b.direction)),
    }
}

/// Pessimistic rank by sorting: competitors sorted by descending score,
/// the target placed after every competitor with an equal score.
pub fn rank_oracle(scores: &[f64], target: usize, filter: &HashSet<usize>) -> usize {
    let mut list: Vec<(f64, u8, usize)> = scores
        .iter()
        .enumerate()
        .filter(|&(e, _)| e == target || !filter.contains(&e))
        .map(|(e, &s)| (s, u8::from(e == target), e))
        .collect();
    // descending score; within a score the target sorts last
    list.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    list.iter().position(|x| x.2 == target).unwrap() + 1
}

pub fn hits_oracle(ranks: &[usize], k: usize) -> f64 {
    let mut hits = 0usize;
    for &r in ranks {
        if r <= k {
            hits += 1;
        }
    }
    hits as f64 / ranks.len() as f64
}

pub struct PlantedCorpus {
    pub world: World,
    pub queries: Vec<IndexedQuery>,
    pub planted: HashSet<usize>,
}

/// `n` independent stars. Star `i` has head `H<i>`, answer edge
/// `(H<i>, ask, T<i>)`, a few filler edges, and when planted a `hint`
/// edge to the same target. `hint` is the relation closest to `ask`, so
/// the planted edge is always the first neighbor.
pub fn planted_corpus(n: usize, planted_count: usize, fillers: usize, seed: u64) -> PlantedCorpus {
    let mut rng = rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let planted: HashSet<usize> = order[..planted_count].iter().copied().collect();

    let mut entities = Vec::new();
    let mut triples = Vec::new();
    let mut relations = vec![
        ("ask".to_string(), "asked about".to_string()),
        ("hint".to_string(), "hinted at".to_string()),
    ];
    let mut vectors = vec![
        ("ask".to_string(), vec![1.0, 0.0]),
        ("hint".to_string(), vec![0.99, 0.141]),
    ];
    for j in 0..fillers {
        relations.push((format!("f{j}"), format!("filler link {j}")));
        let angle = 0.3 + j as f64 * 0.2;
        vectors.push((
            format!("f{j}"),
            vec![angle.cos() as f32, angle.sin() as f32],
        ));
    }
    for i in 0..n {
        let (h, t) = (format!("H{i:05}"), format!("T{i:05}"));
        entities.push((h.clone(), format!("Head{i:05}")));
        entities.push((t.clone(), format!("Target{i:05}")));
        triples.push((h.clone(), "ask".to_string(), t.clone()));
        let k = rng.random_range(1..=fillers);
        for j in 0..k {
            let x = format!("X{i:05}_{j}");
            entities.push((x.clone(), format!("Filler{i:05}x{j}")));
            if rng.random_bool(0.5) {
                triples.push((h.clone(), format!("f{j}"), x));
            } else {
                triples.push((x, format!("f{j}"), h.clone()));
            }
        }
        if planted.contains(&i) {
            triples.push((h.clone(), "hint".to_string(), t.clone()));
        }
    }
    let world = build_world(&entities, &relations, &triples, &vectors);
    let ask = world.dict.relation_id("ask").unwrap();
    let queries: Vec<IndexedQuery> = all_queries(&world)
        .into_iter()
        .filter(|q| q.query.relation == ask && !q.query.inverse)
        .collect();
    assert_eq!(queries.len(), n);
    // planted set is indexed by star, which is also the query order
    PlantedCorpus {
        world,
        queries,
        planted,
    }
}

/// 500 triples where each (head, relation) and each (tail, relation) pair
/// occurs once, so every query has a single answer.
pub fn functional_split(n_triples: usize, seed: u64) -> World {
    let mut rng = rng(seed);
    let n_entities = 400;
    let n_relations = 8;
    let mut used_out = HashSet::new();
    let mut used_in = HashSet::new();
    let mut triples = Vec::new();
    while triples.len() < n_triples {
        let h = rng.random_range(0..n_entities);
        let t = rng.random_range(0..n_entities);
        let r = rng.random_range(0..n_relations);
        if h == t || used_out.contains(&(h, r)) || used_in.contains(&(t, r)) {
            continue;
        }
        used_out.insert((h, r));
        used_in.insert((t, r));
        triples.push((format!("E{h}"), format!("R{r}"), format!("E{t}")));
    }
    let entities: Vec<(String, String)> = (0..n_entities)
        .map(|i| (format!("E{i}"), format!("entity {i}")))
        .collect();
    let relations: Vec<(String, String)> = (0..n_relations)
        .map(|i| (format!("R{i}"), format!("relation {i}")))
        .collect();
    let vectors: Vec<(String, Vec<f32>)> = (0..n_relations)
        .map(|i| (format!("R{i}"), random_unit(&mut rng, 4)))
        .collect();
    build_world(&entities, &relations, &triples, &vectors)
}

pub fn entity(world: &World, name: &str) -> EntityId {
    world.dict.entity_id(name).unwrap()
}
