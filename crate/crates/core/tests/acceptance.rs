//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Dataset criteria read from `$KGCTX_DATA_ROOT` (default `./data`).

mod common;

use std::collections::HashSet;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::*;
use kgctx_core::dataset::RecordBuilder;
use kgctx_core::evaluation::{
    classify_target_position, combined_metric, evaluate_transductive, filtered_rank, hits_at_k,
    neighbor_ablation, AblationCase, AblationConfig, AblationMetric, DenseUniverse, EntityIndex,
    EntityScores, PositionReport, RankingResult, RemovalOrder, TargetPosition,
};
use kgctx_core::kg_store::{ingest_triples, Dialect, SplitTag};
use kgctx_core::model::predict_all;
use kgctx_core::oracle::{HintReader, Memorizer};
use kgctx_core::verbalizer::SEPARATOR;
use kgctx_core::{
    form_neighborhood, Dictionary, EntityId, NeighborhoodSource, Query, TokenBudget, Tokenizer,
    UnigramTokenizer, VectorTable, Verbalizer, WhitespaceTokenizer,
};
use rand::Rng;

const ILPC_LIMIT: Duration = Duration::from_secs(60);
const RANKING_LIMIT: Duration = Duration::from_secs(10);
const CLOSURE_LIMIT: Duration = Duration::from_secs(30);
const MAX_TOKENS: usize = 512;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn data_root() -> PathBuf {
    std::env::var_os("KGCTX_DATA_ROOT").map_or_else(|| PathBuf::from("data"), PathBuf::from)
}

fn ilpc_counts() -> Outcome {
    let expected = [
        ("small", (10_230, 96, 78_616)),
        ("large", (46_626, 130, 202_446)),
    ];
    let started = Instant::now();
    let mut notes = Vec::new();
    for (name, (entities, relations, triples)) in expected {
        let path = data_root().join("ilpc").join(name).join("train.txt");
        if !path.exists() {
            return Err(format!("{} not found; set KGCTX_DATA_ROOT to a directory holding ilpc/{{small,large}}/train.txt", path.display()));
        }
        let mut dict = Dictionary::new();
        let graph = ingest_triples(&path, Dialect::Tsv, SplitTag::Train, &mut dict)
            .map_err(|e| e.to_string())?;
        let s = graph.stats();
        ensure(
            (s.entity_count, s.relation_count, s.triple_count) == (entities, relations, triples),
            || format!("ilpc-{name}: got {s}, expected {entities}\t{relations}\t{triples}"),
        )?;
        notes.push(format!("{name} {s}"));
    }
    let elapsed = started.elapsed();
    ensure(elapsed < ILPC_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} in {elapsed:.2?}",
        notes.join(", ").replace('\t', "/")
    ))
}

fn verbalization_golden() -> Outcome {
    let w = steve_jobs();
    let v = Verbalizer::new(&w.dict, &w.catalog);
    let fwd = Query::forward(w.graph.triple(0));
    let nbh = form_neighborhood(&fwd, &w.graph, &w.sim, 512).map_err(|e| e.to_string())?;
    let segments: Vec<String> = nbh
        .neighbors
        .iter()
        .map(|n| v.neighbor(n).unwrap())
        .collect();
    let vq = v
        .assemble(&nbh, &TokenBudget::default())
        .map_err(|e| e.to_string())?;
    let inv = v
        .task(&Query::inverse(w.graph.triple(2)))
        .map_err(|e| e.to_string())?;
    let checks = [
        (v.task(&fwd).unwrap(), "predict Steve Jobs place of birth"),
        (segments[0].clone(), "occupation entrepreneur"),
        (segments[1].clone(), "inverse of founded by Apple"),
        (
            vq.input_text.clone(),
            "predict Steve Jobs place of birth [SEP] occupation entrepreneur [SEP] inverse of founded by Apple",
        ),
        (vq.target_text.clone(), "Palo Alto"),
        (inv, "predict Steve Jobs inverse of founded by"),
    ];
    for (got, want) in &checks {
        ensure(got == want, || format!("got {got:?}, want {want:?}"))?;
    }
    ensure(segments.len() == 2, || {
        format!("{} neighbor segments", segments.len())
    })?;
    Ok(format!("{} byte-exact strings", checks.len()))
}

fn ranking_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = rng(0xACCE_0003);
    let mut lib_ranks = Vec::new();
    let mut oracle_ranks = Vec::new();
    let mut ungenerated_targets = 0;
    for trial in 0..1000 {
        let n = rng.random_range(1..=200usize);
        let scores: Vec<f64> = (0..n)
            .map(|_| match rng.random_range(0..10) {
                0..=2 => f64::NEG_INFINITY,
                3..=6 => -(rng.random_range(0..8) as f64) * 0.5,
                _ => -rng.random_range(0.0..10.0),
            })
            .collect();
        let target = rng.random_range(0..n);
        let p_filter = rng.random_range(0.0..0.5);
        let filter: HashSet<usize> = (0..n).filter(|_| rng.random_bool(p_filter)).collect();
        ungenerated_targets += usize::from(scores[target] == f64::NEG_INFINITY);
        let entity_scores = EntityScores::from_map(
            scores
                .iter()
                .enumerate()
                .filter(|(_, s)| s.is_finite())
                .map(|(e, &s)| (EntityId(e as u32), s))
                .collect(),
        );
        let filter_ids: HashSet<EntityId> = filter.iter().map(|&e| EntityId(e as u32)).collect();
        let got = filtered_rank(
            EntityId(target as u32),
            &entity_scores,
            &filter_ids,
            &DenseUniverse(n),
        )
        .map_err(|e| e.to_string())?;
        let want = rank_oracle(&scores, target, &filter);
        ensure(got == want, || {
            format!("trial {trial}: rank {got}, oracle {want}")
        })?;
        lib_ranks.push(RankingResult {
            query_id: trial.to_string(),
            rank: Some(got),
            filtered: true,
        });
        oracle_ranks.push(want);
    }
    for k in [1, 3, 10] {
        let got = hits_at_k(&lib_ranks, k).map_err(|e| e.to_string())?;
        let want = hits_oracle(&oracle_ranks, k);
        ensure(got == want, || format!("Hits@{k}: {got} vs oracle {want}"))?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < RANKING_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("1000 instances ({ungenerated_targets} ungenerated targets), Hits@1/3/10 exact, {elapsed:.2?}"))
}

fn leakage_fuzz() -> Outcome {
    let mut rng = rng(0xACCE_0004);
    let mut checked_neighbors = 0usize;
    for case in 0..10_000 {
        let n_e = rng.random_range(2..=20);
        let n_r = rng.random_range(1..=5);
        let n_t = rng.random_range(1..=60);
        let w = random_world(&mut rng, n_e, n_r, n_t);
        let t = w.graph.triple(rng.random_range(0..w.graph.triples().len()));
        let q = if rng.random_bool(0.5) {
            Query::forward(t)
        } else {
            Query::inverse(t)
        };
        let cap = if rng.random_bool(0.2) {
            rng.random_range(1..=8)
        } else {
            512
        };
        let target = q.target.unwrap();
        let nbh = form_neighborhood(&q, &w.graph, &w.sim, cap).map_err(|e| e.to_string())?;
        for n in &nbh.neighbors {
            let tr = n.triple;
            let leaked = tr.relation == q.relation
                && ((tr.head == q.head && tr.tail == target)
                    || (tr.head == target && tr.tail == q.head));
            ensure(!leaked, || {
                format!("case {case}: answer edge at position {} leaked", n.position)
            })?;
        }
        for pair in nbh.neighbors.windows(2) {
            ensure(neighbor_precedes(&pair[0], &pair[1]), || {
                format!(
                    "case {case}: order violated between positions {} and {}",
                    pair[0].position, pair[1].position
                )
            })?;
        }
        let got: Vec<_> = nbh
            .neighbors
            .iter()
            .map(|n| (n.position, n.direction))
            .collect();
        let want = neighborhood_oracle(&w, &q, cap);
        ensure(got == want, || {
            format!("case {case}: {got:?} vs brute force {want:?}")
        })?;
        checked_neighbors += got.len();
    }
    Ok(format!(
        "10000 random queries, {checked_neighbors} neighbors, 0 violations"
    ))
}

const WORD_PIECES: [&str; 12] = [
    "an", "er", "in", "on", "th", "ing", "ion", "st", "re", "at", "en", "ed",
];

fn unigram_for_tests(rng: &mut rand_chacha::ChaCha8Rng) -> UnigramTokenizer {
    let mut pieces: Vec<(String, f64)> = vec![("▁".into(), -6.0)];
    for c in 'a'..='z' {
        pieces.push((c.to_string(), -5.0 - rng.random_range(0.0..1.0)));
        pieces.push((format!("▁{c}"), -4.5 - rng.random_range(0.0..1.0)));
    }
    for c in '0'..='9' {
        pieces.push((c.to_string(), -5.5));
    }
    for p in WORD_PIECES {
        pieces.push((p.to_string(), -3.0 - rng.random_range(0.0..2.0)));
        pieces.push((format!("▁{p}"), -2.5 - rng.random_range(0.0..2.0)));
    }
    UnigramTokenizer::new(pieces).unwrap()
}

fn random_word(rng: &mut rand_chacha::ChaCha8Rng) -> String {
    let len = rng.random_range(1..=9);
    (0..len)
        .map(|_| {
            if rng.random_bool(0.3) {
                WORD_PIECES[rng.random_range(0..WORD_PIECES.len())].to_string()
            } else {
                char::from(b'a' + rng.random_range(0..26u8)).to_string()
            }
        })
        .collect()
}

/// A hub-heavy graph whose neighborhoods overflow the budget.
const HUBS: usize = 10;

fn budget_world(rng: &mut rand_chacha::ChaCha8Rng) -> World {
    let n_entities = 1500;
    let n_relations = 12;
    let entities: Vec<(String, String)> = (0..n_entities)
        .map(|i| {
            let words: Vec<String> = (0..rng.random_range(1..=6))
                .map(|_| random_word(rng))
                .collect();
            (format!("E{i}"), format!("{} {i}", words.join(" ")))
        })
        .collect();
    let relations: Vec<(String, String)> = (0..n_relations)
        .map(|i| (format!("R{i}"), format!("{} r{i}", random_word(rng))))
        .collect();
    let hubs = HUBS;
    let mut triples = Vec::new();
    for _ in 0..6000 {
        let hub = format!("E{}", rng.random_range(0..hubs));
        let other = format!("E{}", rng.random_range(0..n_entities));
        let rel = format!("R{}", rng.random_range(0..n_relations));
        if rng.random_bool(0.5) {
            triples.push((hub, rel, other));
        } else {
            triples.push((other, rel, hub));
        }
    }
    let vectors: Vec<(String, Vec<f32>)> = (0..n_relations)
        .map(|i| (format!("R{i}"), random_unit(rng, 8)))
        .collect();
    build_world(&entities, &relations, &triples, &vectors)
}

fn budget_property() -> Outcome {
    let mut rng = rng(0xACCE_0005);
    let unigram: std::sync::Arc<dyn Tokenizer> = std::sync::Arc::new(unigram_for_tests(&mut rng));
    let whitespace: std::sync::Arc<dyn Tokenizer> = std::sync::Arc::new(WhitespaceTokenizer);
    let mut truncated = 0;
    let mut assemblies = 0;
    for _ in 0..4 {
        let w = budget_world(&mut rng);
        let v = Verbalizer::new(&w.dict, &w.catalog);
        let triples = w.graph.triples();
        let hubs = HUBS;
        for i in 0..250 {
            let t = triples[rng.random_range(0..triples.len())];
            // mostly hub-headed queries, which overflow the budget
            let hub_head = (t.head.0 as usize) < hubs;
            let q = if hub_head == rng.random_bool(0.8) {
                Query::forward(t)
            } else {
                Query::inverse(t)
            };
            let nbh = form_neighborhood(&q, &w.graph, &w.sim, 512).map_err(|e| e.to_string())?;
            let tok = if i % 2 == 0 { &unigram } else { &whitespace };
            let budget = TokenBudget::new(MAX_TOKENS, tok.clone());
            let vq = v.assemble(&nbh, &budget).map_err(|e| e.to_string())?;
            assemblies += 1;
            let used = tok.count(&vq.input_text);
            ensure(used <= MAX_TOKENS, || {
                format!("{} input uses {used} tokens", tok.name())
            })?;
            let included = vq.included_count();
            for (j, seg) in vq.neighbors().enumerate() {
                let want = v.neighbor(&nbh.neighbors[j]).unwrap();
                ensure(seg == want, || {
                    format!("segment {j} is {seg:?}, expected {want:?}")
                })?;
            }
            if included < nbh.len() {
                truncated += 1;
                let next = v.neighbor(&nbh.neighbors[included]).unwrap();
                let grown = tok.count(&format!("{}{SEPARATOR}{next}", vq.input_text));
                ensure(grown > MAX_TOKENS, || {
                    format!(
                        "{}: neighbor {included} would fit ({grown} tokens) but was dropped",
                        tok.name()
                    )
                })?;
            }
        }
    }
    ensure(truncated > assemblies / 2, || {
        format!("only {truncated} of {assemblies} assemblies hit the budget")
    })?;
    Ok(format!(
        "{assemblies} assemblies (whitespace + unigram), {truncated} truncated, 0 violations"
    ))
}

fn flat_index_exactness() -> Outcome {
    let mut rng = rng(0xACCE_0006);
    let dim = 16;
    let mut table = VectorTable::new(dim).unwrap();
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for i in 0..1000 {
        // every tenth row repeats an earlier one to force exact ties
        let v = if i % 10 == 9 {
            rows[rng.random_range(0..rows.len())].clone()
        } else {
            random_unit(&mut rng, dim)
        };
        table.push(format!("e{i}"), &v).unwrap();
        rows.push(v);
    }
    let index = EntityIndex::new(table).map_err(|e| e.to_string())?;
    let mut queries: Vec<Vec<f32>> = (0..150).map(|_| random_unit(&mut rng, dim)).collect();
    queries.extend((0..50).map(|_| rows[rng.random_range(0..rows.len())].clone()));
    for (qi, q) in queries.iter().enumerate() {
        let mut full: Vec<(f64, usize)> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(q).map(|(&a, &b)| a as f64 * b as f64).sum(), i))
            .collect();
        full.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for k in [1, 10] {
            let got: Vec<usize> = index
                .nearest(q, k)
                .map_err(|e| e.to_string())?
                .iter()
                .map(|h| h.index)
                .collect();
            let want: Vec<usize> = full[..k].iter().map(|x| x.1).collect();
            ensure(got == want, || {
                format!("query {qi}, k={k}: {got:?} vs full scan {want:?}")
            })?;
        }
    }
    Ok(format!(
        "{} queries over 1000 unit vectors, k in {{1, 10}}, exact id sequences",
        queries.len()
    ))
}

fn oracle_closures() -> Outcome {
    let started = Instant::now();
    let budget = TokenBudget::default();

    let w = functional_split(500, 0xACCE_0007);
    let builder = RecordBuilder {
        verbalizer: Verbalizer::new(&w.dict, &w.catalog),
        neighbors: NeighborhoodSource {
            graph: &w.graph,
            similarity: Some(&w.sim),
            cap: 512,
        },
        budget: &budget,
    };
    let records: Vec<_> = all_queries(&w)
        .iter()
        .map(|q| builder.build(q).unwrap())
        .collect();
    let preds = predict_all(&Memorizer::new(&w.graph, &w.dict, &w.catalog), &records)
        .map_err(|e| e.to_string())?;
    let ev = evaluate_transductive(
        &records,
        &preds,
        &w.catalog,
        &w.dict,
        &[],
        &DenseUniverse::of(&w.dict),
        &[1, 3, 10],
    )
    .map_err(|e| e.to_string())?;
    let h1 = ev.report.hits_at[&1];
    ensure(h1 == 1.0, || format!("memorizer unfiltered Hits@1 = {h1}"))?;

    let planted = 150;
    let c = planted_corpus(500, planted, 4, 0xACCE_0017);
    let w = &c.world;
    let builder = RecordBuilder {
        verbalizer: Verbalizer::new(&w.dict, &w.catalog),
        neighbors: NeighborhoodSource {
            graph: &w.graph,
            similarity: Some(&w.sim),
            cap: 512,
        },
        budget: &budget,
    };
    let mut records = Vec::new();
    let mut positions = PositionReport::default();
    for q in &c.queries {
        let (_, vq) = builder.verbalize(q).map_err(|e| e.to_string())?;
        positions.add(classify_target_position(&vq, &vq.target_text), 0);
        records.push(builder.record(q, &vq));
    }
    let preds =
        predict_all(&HintReader::from_catalog(&w.catalog), &records).map_err(|e| e.to_string())?;
    let ev = evaluate_transductive(
        &records,
        &preds,
        &w.catalog,
        &w.dict,
        &[&w.graph],
        &DenseUniverse::of(&w.dict),
        &[1, 3, 10],
    )
    .map_err(|e| e.to_string())?;
    let em_hits: usize = ev.exact_matches.iter().map(|&v| v as usize).sum();
    ensure(em_hits == planted, || {
        format!("hint reader matched {em_hits} of {} planted", planted)
    })?;
    ensure(ev.report.exact_match == planted as f64 / 500.0, || {
        format!("EM {}", ev.report.exact_match)
    })?;

    let total: f64 = TargetPosition::ALL
        .iter()
        .map(|&p| positions.frequency(p))
        .sum();
    ensure((total - 1.0).abs() < 1e-12, || {
        format!("position frequencies sum to {total}")
    })?;
    ensure(positions.total() == 500, || {
        format!("{} classified", positions.total())
    })?;
    ensure(
        positions.count(TargetPosition::InNeighborhood) == planted,
        || {
            format!(
                "{} in neighborhood, {planted} planted",
                positions.count(TargetPosition::InNeighborhood)
            )
        },
    )?;

    let elapsed = started.elapsed();
    ensure(elapsed < CLOSURE_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "memorizer H@1 = {h1:.3}; hint reader EM = {}/500 = {:.2}; positions {:.2}/{:.2}/{:.2}; {elapsed:.2?}",
        em_hits,
        ev.report.exact_match,
        positions.frequency(TargetPosition::InTask),
        positions.frequency(TargetPosition::InNeighborhood),
        positions.frequency(TargetPosition::NotInInput),
    ))
}

fn ablation_shape() -> Outcome {
    let fillers = 5;
    let c = planted_corpus(200, 60, fillers, 0xACCE_0008);
    let w = &c.world;
    let budget = TokenBudget::default();
    let builder = RecordBuilder {
        verbalizer: Verbalizer::new(&w.dict, &w.catalog),
        neighbors: NeighborhoodSource {
            graph: &w.graph,
            similarity: Some(&w.sim),
            cap: 512,
        },
        budget: &budget,
    };
    let cases: Vec<AblationCase> = c
        .queries
        .iter()
        .map(|q| AblationCase {
            query: *q,
            neighborhood: builder.neighbors.form(&q.query).unwrap(),
        })
        .collect();
    let max_n = cases.iter().map(|c| c.neighborhood.len()).max().unwrap();
    let removals: Vec<usize> = (0..=max_n).collect();
    let model = HintReader::from_catalog(&w.catalog);
    let seeds = 10;
    let mut summary = Vec::new();
    for metric in [
        AblationMetric::TargetProbability,
        AblationMetric::ExactMatch,
    ] {
        let run = |order, seed| {
            neighbor_ablation(
                &cases,
                &builder,
                &model,
                &AblationConfig {
                    order,
                    metric,
                    removals: removals.clone(),
                    seed,
                },
            )
            .map_err(|e| e.to_string())
        };
        let relevant = run(RemovalOrder::RelevantFirst, 0)?;
        let mut mean_random = vec![0.0; removals.len()];
        for seed in 0..seeds {
            let random = run(RemovalOrder::Random, seed)?;
            for (i, (r, x)) in relevant.iter().zip(&random).enumerate() {
                ensure(r.metric <= x.metric, || {
                    format!(
                        "{metric} seed {seed}: removing {} relevant-first {} > random {}",
                        r.removed, r.metric, x.metric
                    )
                })?;
                mean_random[i] += x.metric / seeds as f64;
            }
            ensure(random[0].metric == relevant[0].metric, || {
                format!("{metric}: curves differ at 0")
            })?;
            ensure(random[max_n].metric == relevant[max_n].metric, || {
                format!("{metric}: curves differ at full removal")
            })?;
        }
        for (i, r) in relevant.iter().enumerate() {
            ensure(r.metric <= mean_random[i] + 1e-12, || {
                format!("{metric}: mean curve crosses at {i}")
            })?;
        }
        let fmt = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.3}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        summary.push(format!(
            "{metric} relevant [{}] random [{}]",
            fmt(&relevant.iter().map(|p| p.metric).collect::<Vec<_>>()),
            fmt(&mean_random)
        ));
    }
    Ok(format!(
        "{} queries, {seeds} seeds; {}",
        cases.len(),
        summary.join("; ")
    ))
}

fn combined_metric_ordering() -> Outcome {
    let a = combined_metric(0.20, 0.90);
    let b = combined_metric(0.21, 0.10);
    ensure(b > a, || format!("B {b} does not beat A {a}"))?;
    ensure(combined_metric(0.5, 0.3) == 500.3, || {
        "1000*0.5 + 0.3 != 500.3".into()
    })?;
    let best = [("A", a), ("B", b)]
        .into_iter()
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap()
        .0;
    ensure(best == "B", || format!("selected {best}"))?;
    Ok(format!("A = {a:.2}, B = {b:.2}, selected B"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("dataset ingestion exactness (ILPC)", ilpc_counts),
        ("verbalization golden strings", verbalization_golden),
        ("ranking oracle equivalence", ranking_oracle),
        ("leakage fuzzing", leakage_fuzz),
        ("token budget property", budget_property),
        ("flat index exactness", flat_index_exactness),
        ("oracle closures", oracle_closures),
        ("ablation shape", ablation_shape),
        ("combined metric ordering", combined_metric_ordering),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let stdout = std::io::stdout();
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = started.elapsed();
        let mut out = stdout.lock();
        match outcome {
            Ok(detail) => writeln!(out, "PASS  {name} [{elapsed:.2?}]: {detail}").unwrap(),
            Err(reason) => {
                failed += 1;
                writeln!(out, "FAIL  {name} [{elapsed:.2?}]: {reason}").unwrap();
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
