//! Loading of graphs, texts and relation similarities from a [`RunConfig`].

use std::io::Read;
use std::path::Path;

use anyhow::Context;
use kgctx_core::io::open_reader;
use kgctx_core::kg_store::{ingest_triples, read_snapshot};
use kgctx_core::text_catalog::load_raw;
use kgctx_core::{
    Dialect, Dictionary, KnowledgeGraph, RelationEmbeddings, RelationSimilarity, SimilarityMatrix,
    SplitTag, TextCatalog,
};

use crate::config::{required, RunConfig};
use crate::exit::UsageError;

const SPLITS: [SplitTag; 4] = [
    SplitTag::Train,
    SplitTag::Valid,
    SplitTag::Test,
    SplitTag::Inference,
];

pub fn is_snapshot(path: &Path) -> kgctx_core::Result<bool> {
    let mut head = [0u8; 8];
    let mut reader = open_reader(path)?;
    let n = reader.read(&mut head).map_err(|e| kgctx_core::Error::Io {
        path: path.into(),
        source: e,
    })?;
    Ok(n == 8 && &head == b"KGCTXSNP")
}

/// Reads a triple file or a snapshot, whichever `path` holds.
pub fn load_graph(
    path: &Path,
    split: SplitTag,
    dialect: Dialect,
    dictionary: &mut Dictionary,
) -> anyhow::Result<KnowledgeGraph> {
    let graph = if is_snapshot(path)? {
        let g = read_snapshot(path, dictionary)?;
        if g.split() != split {
            log::warn!(
                "{} holds a {} snapshot, used here as {split}",
                path.display(),
                g.split()
            );
        }
        g
    } else {
        ingest_triples(path, dialect, split, dictionary)?
    };
    log::info!("{split}: {} ({})", graph.stats(), path.display());
    Ok(graph)
}

/// All configured splits over one shared dictionary. Splits load in a
/// fixed order so identifiers do not depend on which command runs.
pub struct Workspace {
    pub dictionary: Dictionary,
    graphs: Vec<KnowledgeGraph>,
}

impl Workspace {
    pub fn load(config: &RunConfig) -> anyhow::Result<Self> {
        let mut dictionary = Dictionary::new();
        let mut graphs = Vec::new();
        for split in SPLITS {
            if let Some(path) = config.split_path(split) {
                graphs.push(load_graph(path, split, config.dialect, &mut dictionary)?);
            }
        }
        if graphs.is_empty() {
            return Err(UsageError(
                "no triple files configured (set --train, --valid, --test or --inference)".into(),
            )
            .into());
        }
        Ok(Workspace { dictionary, graphs })
    }

    pub fn graphs(&self) -> &[KnowledgeGraph] {
        &self.graphs
    }

    pub fn graph(&self, split: SplitTag) -> anyhow::Result<&KnowledgeGraph> {
        self.graphs
            .iter()
            .find(|g| g.split() == split)
            .ok_or_else(|| UsageError(format!("the {split} split is not configured")).into())
    }

    pub fn filter_graphs(&self, splits: &[SplitTag]) -> anyhow::Result<Vec<&KnowledgeGraph>> {
        splits.iter().map(|&s| self.graph(s)).collect()
    }
}

pub fn catalog(config: &RunConfig) -> anyhow::Result<TextCatalog> {
    let labels = required(&config.labels, "labels")?;
    let relations = required(&config.relation_labels, "relation_labels")?;
    let entities = load_raw(labels, config.descriptions.as_deref())?;
    let relations = load_raw(relations, None)?;
    Ok(TextCatalog::build(
        &entities,
        &relations,
        config.disambiguation,
    )?)
}

/// Builds the similarity matrix, going through the cache when one is set.
pub fn similarity_matrix(config: &RunConfig) -> anyhow::Result<SimilarityMatrix> {
    let path = required(&config.relation_vectors, "relation_vectors")?;
    let emb = RelationEmbeddings::load(path)?;
    let checksum = emb.checksum();
    if let Some(cache) = &config.sim_cache {
        if cache.exists() {
            if let Some(m) = SimilarityMatrix::load_cache(&checksum, cache)? {
                log::info!("similarity matrix from cache {}", cache.display());
                return Ok(m);
            }
            log::info!("cache {} is stale, rebuilding", cache.display());
        }
        let m = SimilarityMatrix::build(&emb)?;
        m.save_cache(&checksum, cache)
            .with_context(|| format!("writing cache {}", cache.display()))?;
        return Ok(m);
    }
    Ok(SimilarityMatrix::build(&emb)?)
}

pub fn similarity(
    config: &RunConfig,
    dictionary: &Dictionary,
) -> anyhow::Result<RelationSimilarity> {
    Ok(RelationSimilarity::new(
        similarity_matrix(config)?,
        dictionary,
    ))
}
