//! Run configuration, layered as flags > config file > environment > defaults.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::Args;
use kgctx_core::{
    Dialect, Disambiguation, SplitTag, TokenBudget, Tokenizer, UnigramTokenizer,
    WhitespaceTokenizer, DEFAULT_MAX_TOKENS, DEFAULT_NEIGHBOR_CAP, DEFAULT_SAMPLE_SIZE,
};
use serde::Deserialize;

use crate::exit::UsageError;

pub const ENV_PREFIX: &str = "KGCTX_";

/// Every setting is optional at each layer; [`Settings::resolve`] fills
/// the gaps with defaults.
#[derive(Args, Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Base directory for relative dataset paths
    #[arg(long, global = true, value_name = "DIR")]
    pub data_root: Option<PathBuf>,
    /// Training triples (TSV or snapshot)
    #[arg(long, global = true, value_name = "PATH")]
    pub train: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    pub valid: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    pub test: Option<PathBuf>,
    /// Inference graph of an inductive split
    #[arg(long, global = true, value_name = "PATH")]
    pub inference: Option<PathBuf>,
    /// Entity labels, `id<TAB>label`
    #[arg(long, global = true, value_name = "PATH")]
    pub labels: Option<PathBuf>,
    /// Entity descriptions, `id<TAB>description`
    #[arg(long, global = true, value_name = "PATH")]
    pub descriptions: Option<PathBuf>,
    /// Relation labels, `id<TAB>label`
    #[arg(long, global = true, value_name = "PATH")]
    pub relation_labels: Option<PathBuf>,
    /// Relation vectors in word2vec text format
    #[arg(long, global = true, value_name = "PATH")]
    pub relation_vectors: Option<PathBuf>,
    /// Entity vectors in word2vec text format
    #[arg(long, global = true, value_name = "PATH")]
    pub entity_vectors: Option<PathBuf>,
    /// Similarity matrix cache, reused while the relation vectors are unchanged
    #[arg(long, global = true, value_name = "PATH")]
    pub sim_cache: Option<PathBuf>,
    /// `whitespace` or a unigram vocabulary file
    #[arg(long, global = true, value_name = "SPEC")]
    pub tokenizer: Option<String>,
    /// Neighbors kept per query [default: 512]
    #[arg(long, global = true)]
    pub cap: Option<usize>,
    /// Token budget of one input [default: 512]
    #[arg(long, global = true)]
    pub max_tokens: Option<usize>,
    /// Candidates allowed per prediction line [default: 50]
    #[arg(long, global = true)]
    pub sample_size: Option<usize>,
    /// Split whose graph supplies neighbors [default: train]
    #[arg(long, global = true, value_name = "SPLIT")]
    pub neighborhood_graph: Option<String>,
    /// Comma-separated splits used for filtering, or `none` [default: train,valid]
    #[arg(long, global = true, value_name = "SPLITS")]
    pub filter: Option<String>,
    /// Triple line format: `tsv` or `loose` [default: tsv]
    #[arg(long, global = true)]
    pub dialect: Option<String>,
    /// Label collision handling: `description` or `id` [default: description]
    #[arg(long, global = true)]
    pub disambiguation: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads [default: all cores]
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

macro_rules! layered {
    ($($field:ident),* $(,)?) => {
        impl Settings {
            /// Fields set in `self` win over `lower`.
            pub fn over(self, lower: Settings) -> Settings {
                Settings { $($field: self.$field.or(lower.$field)),* }
            }

            pub fn from_env(var: impl Fn(&str) -> Option<String>) -> anyhow::Result<Settings> {
                let mut s = Settings::default();
                $(
                    let key = format!("{ENV_PREFIX}{}", stringify!($field).to_uppercase());
                    if let Some(v) = var(&key).filter(|v| !v.is_empty()) {
                        s.$field = Some(v.parse().map_err(|e| UsageError(format!("{key}: {e}")))?);
                    }
                )*
                Ok(s)
            }
        }
    };
}

layered!(
    data_root,
    train,
    valid,
    test,
    inference,
    labels,
    descriptions,
    relation_labels,
    relation_vectors,
    entity_vectors,
    sim_cache,
    tokenizer,
    cap,
    max_tokens,
    sample_size,
    neighborhood_graph,
    filter,
    dialect,
    disambiguation,
    seed,
    workers,
);

impl Settings {
    pub fn from_file(path: &Path) -> anyhow::Result<Settings> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
    }

    /// Combines the layers. `config` is the explicit config path, if any.
    pub fn layer(
        flags: Settings,
        config: Option<&Path>,
        var: impl Fn(&str) -> Option<String>,
    ) -> anyhow::Result<Settings> {
        let env = Settings::from_env(&var)?;
        let config = config
            .map(Path::to_path_buf)
            .or_else(|| var(&format!("{ENV_PREFIX}CONFIG")).map(PathBuf::from));
        let file = match config {
            Some(p) => Settings::from_file(&p)?,
            None => Settings::default(),
        };
        Ok(flags.over(file).over(env))
    }

    pub fn resolve(self) -> anyhow::Result<RunConfig> {
        let root = self.data_root;
        let at = |p: Option<PathBuf>| p.map(|p| resolve_path(root.as_deref(), p));
        let usage = |e: kgctx_core::Error| UsageError(e.to_string());
        let filter = match self.filter.as_deref().map(str::trim) {
            None => vec![SplitTag::Train, SplitTag::Valid],
            Some("" | "none") => Vec::new(),
            Some(list) => list
                .split(',')
                .map(|s| s.trim().parse::<SplitTag>())
                .collect::<Result<_, _>>()
                .map_err(usage)?,
        };
        let disambiguation = match self.disambiguation.as_deref() {
            None | Some("description") => Disambiguation::DescriptionThenId,
            Some("id") => Disambiguation::IdOnly,
            Some(other) => {
                return Err(UsageError(format!(
                    "unknown disambiguation `{other}` (expected description or id)"
                ))
                .into())
            }
        };
        let tokenizer = match self.tokenizer.as_deref() {
            None | Some("whitespace") => TokenizerSpec::Whitespace,
            Some(path) => TokenizerSpec::Unigram(resolve_path(root.as_deref(), path.into())),
        };
        Ok(RunConfig {
            train: at(self.train),
            valid: at(self.valid),
            test: at(self.test),
            inference: at(self.inference),
            labels: at(self.labels),
            descriptions: at(self.descriptions),
            relation_labels: at(self.relation_labels),
            relation_vectors: at(self.relation_vectors),
            entity_vectors: at(self.entity_vectors),
            sim_cache: at(self.sim_cache),
            tokenizer,
            cap: self.cap.unwrap_or(DEFAULT_NEIGHBOR_CAP),
            max_tokens: self.max_tokens.unwrap_or(DEFAULT_MAX_TOKENS),
            sample_size: self.sample_size.unwrap_or(DEFAULT_SAMPLE_SIZE),
            neighborhood_graph: self
                .neighborhood_graph
                .as_deref()
                .map_or(Ok(SplitTag::Train), str::parse)
                .map_err(usage)?,
            filter,
            dialect: self
                .dialect
                .as_deref()
                .map_or(Ok(Dialect::Tsv), str::parse)
                .map_err(usage)?,
            disambiguation,
            seed: self.seed.unwrap_or(0),
            workers: self.workers,
        })
    }
}

fn resolve_path(root: Option<&Path>, p: PathBuf) -> PathBuf {
    match root {
        Some(root) if p.is_relative() => root.join(p),
        _ => p,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenizerSpec {
    Whitespace,
    Unigram(PathBuf),
}

/// Fully resolved settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub inference: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub descriptions: Option<PathBuf>,
    pub relation_labels: Option<PathBuf>,
    pub relation_vectors: Option<PathBuf>,
    pub entity_vectors: Option<PathBuf>,
    pub sim_cache: Option<PathBuf>,
    pub tokenizer: TokenizerSpec,
    pub cap: usize,
    pub max_tokens: usize,
    pub sample_size: usize,
    pub neighborhood_graph: SplitTag,
    pub filter: Vec<SplitTag>,
    pub dialect: Dialect,
    pub disambiguation: Disambiguation,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn split_path(&self, split: SplitTag) -> Option<&Path> {
        match split {
            SplitTag::Train => self.train.as_deref(),
            SplitTag::Valid => self.valid.as_deref(),
            SplitTag::Test => self.test.as_deref(),
            SplitTag::Inference => self.inference.as_deref(),
        }
    }

    pub fn budget(&self) -> anyhow::Result<TokenBudget> {
        let tokenizer: Arc<dyn Tokenizer> = match &self.tokenizer {
            TokenizerSpec::Whitespace => Arc::new(WhitespaceTokenizer),
            TokenizerSpec::Unigram(path) => Arc::new(UnigramTokenizer::load(path)?),
        };
        Ok(TokenBudget::new(self.max_tokens, tokenizer))
    }
}

/// Unwraps a path setting or explains how to provide it.
pub fn required<'a>(value: &'a Option<PathBuf>, key: &str) -> anyhow::Result<&'a Path> {
    value.as_deref().ok_or_else(|| {
        anyhow!(UsageError(format!(
            "{key} is not set; pass --{}, set `{key}` in the config file or {ENV_PREFIX}{}",
            key.replace('_', "-"),
            key.to_uppercase()
        )))
    })
}
