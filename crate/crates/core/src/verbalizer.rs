//! Turning queries and neighborhoods into model input text.
//!
//! The input is the task segment `predict <head> <relation>` followed by
//! neighbor segments, all joined by ` [SEP] `. Outgoing neighbors read
//! `<relation> <other>`, incoming ones `inverse of <relation> <other>`.
//! Neighbors are appended greedily in neighborhood order while the whole
//! text fits the token budget.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::io::{numbered_lines, open_reader};
use crate::kg_store::{Dictionary, Direction, EntityId, RelationId};
use crate::neighborhood::{NeighborTriple, Neighborhood, Query};
use crate::text_catalog::TextCatalog;

pub const SEPARATOR: &str = " [SEP] ";
pub const SEPARATOR_TOKEN: &str = "[SEP]";
pub const TASK_PREFIX: &str = "predict";
pub const INVERSE_MARKER: &str = "inverse of";
pub const DEFAULT_MAX_TOKENS: usize = 512;

pub trait Tokenizer: Send + Sync {
    fn count(&self, text: &str) -> usize;

    /// Whether `count(a + SEPARATOR + b) == count(a) + 1 + count(b)` for
    /// non-empty trimmed `a` and `b`. Lets assembly count incrementally.
    fn separator_additive(&self) -> bool {
        false
    }

    fn name(&self) -> &str;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }

    fn separator_additive(&self) -> bool {
        true
    }

    fn name(&self) -> &str {
        "whitespace"
    }
}

/// Unigram subword tokenizer over a SentencePiece-style vocabulary file
/// (`piece<TAB>log_prob` per line, `▁` marking a word start).
///
/// Text is split on `[SEP]`, each chunk is whitespace-normalized, and the
/// highest-scoring segmentation is found by Viterbi search. Characters no
/// piece covers become single unknown tokens.
#[derive(Clone, Debug)]
pub struct UnigramTokenizer {
    pieces: HashMap<String, f64>,
    max_piece_chars: usize,
    unk_score: f64,
}

const WORD_START: char = '\u{2581}';

impl UnigramTokenizer {
    pub fn new(pieces: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let pieces: HashMap<String, f64> = pieces
            .into_iter()
            .filter(|(p, _)| !p.is_empty() && !is_control_piece(p))
            .collect();
        if pieces.is_empty() {
            return Err(Error::Invalid("tokenizer vocabulary is empty".into()));
        }
        let max_piece_chars = pieces.keys().map(|p| p.chars().count()).max().unwrap_or(1);
        let min_score = pieces.values().copied().fold(f64::INFINITY, f64::min);
        Ok(UnigramTokenizer {
            pieces,
            max_piece_chars,
            unk_score: min_score - 10.0,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut pieces = Vec::new();
        for item in numbered_lines(open_reader(path)?, path) {
            let (line_no, line) = item?;
            if line.is_empty() {
                continue;
            }
            let (piece, score) = match line.split_once('\t') {
                Some((p, s)) => (
                    p,
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse(path, line_no, format!("bad score `{s}`")))?,
                ),
                None => (line.as_str(), 0.0),
            };
            pieces.push((piece.to_string(), score));
        }
        Self::new(pieces).map_err(|e| Error::parse(path, 1, e.to_string()))
    }

    pub fn vocab_size(&self) -> usize {
        self.pieces.len()
    }

    fn count_chunk(&self, chunk: &str) -> usize {
        let mut normalized = String::with_capacity(chunk.len() + 4);
        for word in chunk.split_whitespace() {
            normalized.push(WORD_START);
            normalized.push_str(word);
        }
        if normalized.is_empty() {
            return 0;
        }
        let bounds: Vec<usize> = normalized
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(normalized.len()))
            .collect();
        let n = bounds.len() - 1;
        // best[j] = (score, tokens) of the best segmentation of chars[..j]
        let mut best = vec![(f64::NEG_INFINITY, 0usize); n + 1];
        best[0] = (0.0, 0);
        for j in 1..=n {
            let lo = j.saturating_sub(self.max_piece_chars);
            for i in lo..j {
                if best[i].0 == f64::NEG_INFINITY {
                    continue;
                }
                let piece = &normalized[bounds[i]..bounds[j]];
                let score = match self.pieces.get(piece) {
                    Some(&s) => s,
                    None if j == i + 1 => self.unk_score,
                    None => continue,
                };
                let cand = (best[i].0 + score, best[i].1 + 1);
                if cand.0 > best[j].0 || (cand.0 == best[j].0 && cand.1 < best[j].1) {
                    best[j] = cand;
                }
            }
        }
        best[n].1
    }
}

fn is_control_piece(p: &str) -> bool {
    matches!(p, "<unk>" | "<s>" | "</s>" | "<pad>")
}

impl Tokenizer for UnigramTokenizer {
    fn count(&self, text: &str) -> usize {
        let mut total = 0;
        for (i, chunk) in text.split(SEPARATOR_TOKEN).enumerate() {
            if i > 0 {
                total += 1;
            }
            total += self.count_chunk(chunk);
        }
        total
    }

    fn separator_additive(&self) -> bool {
        true
    }

    fn name(&self) -> &str {
        "unigram"
    }
}

#[derive(Clone)]
pub struct TokenBudget {
    pub max_tokens: usize,
    pub tokenizer: Arc<dyn Tokenizer>,
}

impl TokenBudget {
    pub fn new(max_tokens: usize, tokenizer: Arc<dyn Tokenizer>) -> Self {
        TokenBudget {
            max_tokens,
            tokenizer,
        }
    }

    pub fn whitespace(max_tokens: usize) -> Self {
        Self::new(max_tokens, Arc::new(WhitespaceTokenizer))
    }

    pub fn count_tokens(&self, text: &str) -> usize {
        self.tokenizer.count(text)
    }
}

impl Default for TokenBudget {
    fn default() -> Self {
        Self::whitespace(DEFAULT_MAX_TOKENS)
    }
}

impl fmt::Debug for TokenBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TokenBudget")
            .field("max_tokens", &self.max_tokens)
            .field("tokenizer", &self.tokenizer.name())
            .finish()
    }
}

/// Assembled model input. Spans are byte ranges into `input_text`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerbalizedQuery {
    pub input_text: String,
    pub target_text: String,
    pub task_span: Range<usize>,
    pub neighbor_spans: Vec<Range<usize>>,
}

impl VerbalizedQuery {
    pub fn included_count(&self) -> usize {
        self.neighbor_spans.len()
    }

    pub fn task(&self) -> &str {
        &self.input_text[self.task_span.clone()]
    }

    pub fn neighbors(&self) -> impl Iterator<Item = &str> {
        self.neighbor_spans
            .iter()
            .map(|s| &self.input_text[s.clone()])
    }

    /// Recovers segment spans from an assembled input string.
    pub fn from_input(input_text: String, target_text: String) -> Self {
        let mut spans = Vec::new();
        let mut start = 0;
        for (idx, _) in input_text.match_indices(SEPARATOR) {
            spans.push(start..idx);
            start = idx + SEPARATOR.len();
        }
        spans.push(start..input_text.len());
        let task_span = spans.remove(0);
        VerbalizedQuery {
            input_text,
            target_text,
            task_span,
            neighbor_spans: spans,
        }
    }
}

/// Id-to-text resolution for verbalization.
#[derive(Clone, Copy)]
pub struct Verbalizer<'a> {
    pub dictionary: &'a Dictionary,
    pub catalog: &'a TextCatalog,
}

impl<'a> Verbalizer<'a> {
    pub fn new(dictionary: &'a Dictionary, catalog: &'a TextCatalog) -> Self {
        Verbalizer {
            dictionary,
            catalog,
        }
    }

    pub fn entity(&self, id: EntityId) -> Result<&'a str> {
        let name = self.dictionary.entity_name(id);
        non_empty(self.catalog.entity_text(name)?, "entity", name)
    }

    pub fn relation(&self, id: RelationId) -> Result<&'a str> {
        let name = self.dictionary.relation_name(id);
        non_empty(self.catalog.relation_text(name)?, "relation", name)
    }

    pub fn task(&self, query: &Query) -> Result<String> {
        let head = self.entity(query.head)?;
        let relation = self.relation(query.relation)?;
        Ok(if query.inverse {
            format!("{TASK_PREFIX} {head} {INVERSE_MARKER} {relation}")
        } else {
            format!("{TASK_PREFIX} {head} {relation}")
        })
    }

    pub fn neighbor(&self, n: &NeighborTriple) -> Result<String> {
        let relation = self.relation(n.triple.relation)?;
        let other = self.entity(n.other())?;
        Ok(match n.direction {
            Direction::Outgoing => format!("{relation} {other}"),
            Direction::Incoming => format!("{INVERSE_MARKER} {relation} {other}"),
        })
    }

    /// Task segment plus as many leading neighbors as fit `budget`.
    pub fn assemble(&self, nbh: &Neighborhood, budget: &TokenBudget) -> Result<VerbalizedQuery> {
        let query = &nbh.query;
        let task = self.task(query)?;
        let tok = budget.tokenizer.as_ref();
        let mut used = tok.count(&task);
        if used > budget.max_tokens {
            return Err(Error::BudgetExceeded {
                needed: used,
                max: budget.max_tokens,
            });
        }
        let target_text = match query.target {
            Some(t) => self.entity(t)?.to_string(),
            None => String::new(),
        };
        let additive = tok.separator_additive();
        let mut input_text = task;
        let task_span = 0..input_text.len();
        let mut neighbor_spans = Vec::new();
        for n in &nbh.neighbors {
            let segment = self.neighbor(n)?;
            let start = input_text.len() + SEPARATOR.len();
            let total = if additive {
                used + 1 + tok.count(&segment)
            } else {
                tok.count(&format!("{input_text}{SEPARATOR}{segment}"))
            };
            if total > budget.max_tokens {
                break;
            }
            used = total;
            input_text.push_str(SEPARATOR);
            input_text.push_str(&segment);
            neighbor_spans.push(start..input_text.len());
        }
        Ok(VerbalizedQuery {
            input_text,
            target_text,
            task_span,
            neighbor_spans,
        })
    }
}

fn non_empty<'a>(text: &'a str, kind: &str, id: &str) -> Result<&'a str> {
    if text.trim().is_empty() {
        return Err(Error::Invalid(format!("{kind} `{id}` has empty text")));
    }
    Ok(text)
}
