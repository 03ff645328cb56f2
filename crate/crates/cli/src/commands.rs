use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use kgctx_core::dataset::{read_records, write_dataset};
use kgctx_core::evaluation::{
    classify_target_position, evaluate_inductive, evaluate_transductive, exact_match,
    neighbor_ablation, AblationCase, AblationConfig, AblationMetric, DenseUniverse, PositionReport,
    RemovalOrder,
};
use kgctx_core::io::{read_jsonl, write_jsonl};
use kgctx_core::kg_store::write_snapshot;
use kgctx_core::model::{predict_all, read_predictions, write_predictions};
use kgctx_core::neighborhood::NeighborhoodRecord;
use kgctx_core::oracle::{Constant, HintReader, Memorizer, OracleKind};
use kgctx_core::prompting::{
    build_prompt, gpt_hits, parse_answer, query_stream, AnswerRecord, PromptRecord,
};
use kgctx_core::{
    emit_queries, DatasetRecord, Dictionary, EntityIndex, Evaluation, IndexedQuery,
    NeighborhoodSource, PredictionSet, Predictor, RecordBuilder, RelationEmbeddings,
    SimilarityMatrix, SplitTag, VectorTable, VerbalizedQuery, Verbalizer,
};

use crate::config::{required, RunConfig};
use crate::exit::UsageError;
use crate::output::Output;
use crate::workspace::{catalog, load_graph, similarity, similarity_matrix, Workspace};

pub fn ingest(
    config: &RunConfig,
    out: &Output,
    input: &Path,
    output: &Path,
    split: SplitTag,
) -> anyhow::Result<()> {
    let mut dictionary = Dictionary::new();
    let graph = load_graph(input, split, config.dialect, &mut dictionary)?;
    write_snapshot(&graph, &dictionary, output)?;
    out.tsv(&format!(
        "split\tentities\trelations\ttriples\n{split}\t{}\n",
        graph.stats()
    ));
    Ok(())
}

pub fn stats(config: &RunConfig, out: &Output, files: &[PathBuf]) -> anyhow::Result<()> {
    let mut tsv = String::from("source\tentities\trelations\ttriples\n");
    if files.is_empty() {
        let ws = Workspace::load(config)?;
        for g in ws.graphs() {
            writeln!(tsv, "{}\t{}", g.split(), g.stats())?;
        }
    } else {
        for path in files {
            let mut dictionary = Dictionary::new();
            let g = load_graph(path, SplitTag::Train, config.dialect, &mut dictionary)?;
            writeln!(tsv, "{}\t{}", path.display(), g.stats())?;
        }
    }
    out.tsv(&tsv);
    Ok(())
}

pub fn build_sim(
    config: &RunConfig,
    out: &Output,
    output: Option<&Path>,
    rank: Option<&str>,
) -> anyhow::Result<()> {
    let path = required(&config.relation_vectors, "relation_vectors")?;
    let emb = RelationEmbeddings::load(path)?;
    let checksum = emb.checksum();
    let matrix = match output {
        Some(dest) => {
            let m = SimilarityMatrix::build(&emb)?;
            m.save_cache(&checksum, dest)?;
            m
        }
        None if config.sim_cache.is_some() => similarity_matrix(config)?,
        None => {
            return Err(UsageError(
                "build-sim needs an output path (-o) or a sim_cache setting".into(),
            )
            .into())
        }
    };
    let mut tsv = format!(
        "relations\tdim\tchecksum\n{}\t{}\t{checksum}\n",
        matrix.len(),
        emb.dim()
    );
    if let Some(query) = rank {
        let q = matrix.index_of(query).unwrap_or_default();
        tsv.push_str("\nrelation\tsimilarity\n");
        for r in matrix.rank_by_similarity(query)? {
            let j = matrix.index_of(r).unwrap_or_default();
            writeln!(tsv, "{r}\t{:.6}", matrix.value(q, j))?;
        }
    }
    out.tsv(&tsv);
    Ok(())
}

pub fn emit(
    config: &RunConfig,
    out: &Output,
    split: SplitTag,
    output: &Path,
    neighborhoods: Option<&Path>,
) -> anyhow::Result<()> {
    let ws = Workspace::load(config)?;
    let catalog = catalog(config)?;
    let graph = ws.graph(split)?;
    let sim = match config.cap {
        0 => None,
        _ => Some(similarity(config, &ws.dictionary)?),
    };
    let budget = config.budget()?;
    let builder = RecordBuilder {
        verbalizer: Verbalizer::new(&ws.dictionary, &catalog),
        neighbors: NeighborhoodSource {
            graph: ws.graph(config.neighborhood_graph)?,
            similarity: sim.as_ref(),
            cap: config.cap,
        },
        budget: &budget,
    };
    let queries: Vec<IndexedQuery> = emit_queries(graph).collect();
    let summary = write_dataset(&queries, &builder, output)?;
    if let Some(path) = neighborhoods {
        let records = queries
            .iter()
            .map(|q| {
                let nbh = builder.neighbors.form(&q.query)?;
                Ok(NeighborhoodRecord::new(q.query_id(), &nbh, &ws.dictionary))
            })
            .collect::<kgctx_core::Result<Vec<_>>>()?;
        write_jsonl(path, &records)?;
    }
    out.tsv(&format!(
        "queries\twritten\tskipped\n{}\t{}\t{}\n",
        queries.len(),
        summary.written,
        summary.skipped.len()
    ));
    Ok(())
}

fn write_ranks(path: &Path, eval: &Evaluation) -> anyhow::Result<()> {
    let mut body = String::from("query_id\trank\texact_match\n");
    for (r, em) in eval.ranks.iter().zip(&eval.exact_matches) {
        let rank = r.rank.map_or_else(|| "NA".to_string(), |v| v.to_string());
        writeln!(body, "{}\t{rank}\t{em}", r.query_id)?;
    }
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

/// Cutoffs and the optional per-query rank dump.
pub struct Scoring<'a> {
    pub ks: &'a [usize],
    pub ranks: Option<&'a Path>,
}

fn report(out: &Output, eval: &Evaluation, ranks: Option<&Path>) -> anyhow::Result<()> {
    if let Some(path) = ranks {
        write_ranks(path, eval)?;
    }
    out.report(&eval.report.to_tsv(), &eval.report.to_string());
    Ok(())
}

pub fn score(
    config: &RunConfig,
    out: &Output,
    records: &Path,
    predictions: &Path,
    unfiltered: bool,
    scoring: Scoring<'_>,
) -> anyhow::Result<()> {
    let ws = Workspace::load(config)?;
    let catalog = catalog(config)?;
    let records = read_records(records)?;
    let predictions = read_predictions(predictions, config.sample_size)?;
    let filter = if unfiltered {
        Vec::new()
    } else {
        ws.filter_graphs(&config.filter)?
    };
    let eval = evaluate_transductive(
        &records,
        &predictions,
        &catalog,
        &ws.dictionary,
        &filter,
        &DenseUniverse::of(&ws.dictionary),
        scoring.ks,
    )?;
    report(out, &eval, scoring.ranks)
}

pub fn eval_inductive(
    config: &RunConfig,
    out: &Output,
    records: &Path,
    predictions: &Path,
    generated: &Path,
    normalize: bool,
    scoring: Scoring<'_>,
) -> anyhow::Result<()> {
    let path = required(&config.entity_vectors, "entity_vectors")?;
    let index = if normalize {
        EntityIndex::normalized(&VectorTable::load(path)?)?
    } else {
        EntityIndex::load(path)?
    };
    let generated = VectorTable::load(generated)?;
    let eval = evaluate_inductive(
        &read_records(records)?,
        &read_predictions(predictions, config.sample_size)?,
        &generated,
        &index,
        scoring.ks,
    )?;
    report(out, &eval, scoring.ranks)
}

fn by_query(predictions: &[PredictionSet]) -> HashMap<&str, &PredictionSet> {
    predictions
        .iter()
        .map(|p| (p.query_id.as_str(), p))
        .collect()
}

pub fn analyze_target(
    config: &RunConfig,
    out: &Output,
    records: &Path,
    predictions: &Path,
) -> anyhow::Result<()> {
    let records = read_records(records)?;
    let predictions = read_predictions(predictions, config.sample_size)?;
    let by_id = by_query(&predictions);
    let mut report = PositionReport::default();
    for rec in &records {
        let vq = VerbalizedQuery::from_input(rec.input_text.clone(), rec.target_text.clone());
        let em = by_id
            .get(rec.query_id.as_str())
            .and_then(|p| p.top())
            .map_or(0, |c| exact_match(&c.text, &rec.target_text));
        report.add(classify_target_position(&vq, &rec.target_text), em);
    }
    out.tsv(&report.to_tsv());
    Ok(())
}

/// Borrowed inputs an oracle may need.
pub struct OracleInputs<'a> {
    pub workspace: Option<&'a Workspace>,
    pub catalog: &'a kgctx_core::TextCatalog,
    pub neighborhood_graph: SplitTag,
    pub text: Option<&'a str>,
}

pub fn make_oracle<'a>(
    kind: OracleKind,
    inputs: &OracleInputs<'a>,
) -> anyhow::Result<Box<dyn Predictor + 'a>> {
    Ok(match kind {
        OracleKind::Memorizer => {
            let ws = inputs
                .workspace
                .ok_or_else(|| UsageError("the memorizer needs triple files".into()))?;
            Box::new(Memorizer::new(
                ws.graph(inputs.neighborhood_graph)?,
                &ws.dictionary,
                inputs.catalog,
            ))
        }
        OracleKind::HintReader => Box::new(HintReader::from_catalog(inputs.catalog)),
        OracleKind::Constant => Box::new(Constant {
            text: inputs
                .text
                .ok_or_else(|| UsageError("the constant oracle needs --text".into()))?
                .to_string(),
        }),
    })
}

pub fn oracle(
    config: &RunConfig,
    out: &Output,
    kind: OracleKind,
    records: &Path,
    output: &Path,
    text: Option<&str>,
) -> anyhow::Result<()> {
    let records: Vec<DatasetRecord> = read_records(records)?;
    let catalog = catalog(config)?;
    let ws = match kind {
        OracleKind::Memorizer => Some(Workspace::load(config)?),
        _ => None,
    };
    let inputs = OracleInputs {
        workspace: ws.as_ref(),
        catalog: &catalog,
        neighborhood_graph: config.neighborhood_graph,
        text,
    };
    let model = make_oracle(kind, &inputs)?;
    let sets = predict_all(model.as_ref(), &records)?;
    let n = write_predictions(output, &sets)?;
    out.tsv(&format!("oracle\tpredictions\n{kind}\t{n}\n"));
    Ok(())
}

pub struct AblateArgs<'a> {
    pub split: SplitTag,
    pub kind: OracleKind,
    pub text: Option<&'a str>,
    pub order: RemovalOrder,
    pub metric: AblationMetric,
    pub removals: Vec<usize>,
    pub limit: Option<usize>,
}

pub fn ablate(config: &RunConfig, out: &Output, args: AblateArgs<'_>) -> anyhow::Result<()> {
    let ws = Workspace::load(config)?;
    let catalog = catalog(config)?;
    let sim = similarity(config, &ws.dictionary)?;
    let budget = config.budget()?;
    let builder = RecordBuilder {
        verbalizer: Verbalizer::new(&ws.dictionary, &catalog),
        neighbors: NeighborhoodSource {
            graph: ws.graph(config.neighborhood_graph)?,
            similarity: Some(&sim),
            cap: config.cap,
        },
        budget: &budget,
    };
    let cases = emit_queries(ws.graph(args.split)?)
        .take(args.limit.unwrap_or(usize::MAX))
        .map(|q| {
            Ok(AblationCase {
                query: q,
                neighborhood: builder.neighbors.form(&q.query)?,
            })
        })
        .collect::<kgctx_core::Result<Vec<_>>>()?;
    let inputs = OracleInputs {
        workspace: Some(&ws),
        catalog: &catalog,
        neighborhood_graph: config.neighborhood_graph,
        text: args.text,
    };
    let model = make_oracle(args.kind, &inputs)?;
    let ablation = AblationConfig {
        order: args.order,
        metric: args.metric,
        removals: args.removals,
        seed: config.seed,
    };
    let points = neighbor_ablation(&cases, &builder, model.as_ref(), &ablation)?;
    let mut tsv = format!("removed\t{}\n", ablation.metric);
    for p in points {
        writeln!(tsv, "{}\t{:.6}", p.removed, p.metric)?;
    }
    out.tsv(&tsv);
    Ok(())
}

pub fn prompt_build(
    out: &Output,
    records: &Path,
    output: &Path,
    no_neighbors: bool,
) -> anyhow::Result<()> {
    let prompts: Vec<PromptRecord> = read_records(records)?
        .into_iter()
        .map(|rec| {
            let vq = VerbalizedQuery::from_input(rec.input_text, rec.target_text);
            let pair = build_prompt(&vq, !no_neighbors);
            PromptRecord {
                query_id: rec.query_id,
                system_text: pair.system_text,
                user_text: pair.user_text,
                target_text: vq.target_text,
            }
        })
        .collect();
    let n = write_jsonl(output, &prompts)?;
    out.tsv(&format!("prompts\n{n}\n"));
    Ok(())
}

pub fn prompt_score(
    config: &RunConfig,
    out: &Output,
    records: &Path,
    answers: &Path,
    ks: &[usize],
) -> anyhow::Result<()> {
    let records = read_records(records)?;
    let answers: Vec<AnswerRecord> = read_jsonl(answers)?;
    let by_id: HashMap<&str, &AnswerRecord> =
        answers.iter().map(|a| (a.query_id.as_str(), a)).collect();
    let mut hits = vec![0usize; ks.len()];
    for rec in &records {
        let parsed: Vec<String> = by_id
            .get(rec.query_id.as_str())
            .map(|a| a.answers.iter().map(|s| parse_answer(s)).collect())
            .unwrap_or_default();
        let stream = query_stream(&rec.query_id);
        for (slot, &k) in hits.iter_mut().zip(ks) {
            *slot += gpt_hits(&parsed, &rec.target_text, k, config.seed, stream)
                .with_context(|| format!("query {}", rec.query_id))? as usize;
        }
    }
    let n = records.len().max(1) as f64;
    let mut tsv = format!("metric\tvalue\nn_queries\t{}\n", records.len());
    for (h, k) in hits.iter().zip(ks) {
        writeln!(tsv, "hits@{k}\t{:.6}", *h as f64 / n)?;
    }
    out.tsv(&tsv);
    Ok(())
}
