//! Neighborhood-augmented knowledge graph completion as text generation.
//!
//! Triples are ingested into an interned graph, every triple becomes a
//! forward and an inverse query, and each query is rendered as text
//! together with its most relevant 1-hop neighbors. Model outputs come back
//! as sampled sequences and are scored with filtered Hits@k and exact match.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod kg_store;
pub mod model;
pub mod neighborhood;
pub mod oracle;
pub mod prompting;
pub mod relation_similarity;
pub mod text_catalog;
pub mod vectors;
pub mod verbalizer;

pub use dataset::{emit_queries, DatasetRecord, IndexedQuery, NeighborhoodSource, RecordBuilder};
pub use error::{Error, Result};
pub use evaluation::{EntityIndex, Evaluation, MetricsReport, RankingResult, TargetPosition};
pub use kg_store::{
    Dialect, Dictionary, Direction, EntityId, GraphStats, KnowledgeGraph, RelationId, SplitTag,
    Triple,
};
pub use model::{Candidate, PredictionSet, Predictor, DEFAULT_SAMPLE_SIZE};
pub use neighborhood::{
    form_neighborhood, NeighborTriple, Neighborhood, Query, DEFAULT_NEIGHBOR_CAP,
};
pub use prompting::PromptPair;
pub use relation_similarity::{RelationEmbeddings, RelationSimilarity, SimilarityMatrix};
pub use text_catalog::{Disambiguation, RawCatalog, TextCatalog};
pub use vectors::VectorTable;
pub use verbalizer::{
    TokenBudget, Tokenizer, UnigramTokenizer, VerbalizedQuery, Verbalizer, WhitespaceTokenizer,
    DEFAULT_MAX_TOKENS,
};
