//! Deterministic stand-in models for exercising the pipeline end to end.

use std::fmt;
use std::str::FromStr;

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::kg_store::{known_heads, known_tails, Dictionary, KnowledgeGraph};
use crate::model::{Candidate, Predictor};
use crate::text_catalog::TextCatalog;
use crate::verbalizer::{VerbalizedQuery, INVERSE_MARKER};

fn ranked(texts: impl IntoIterator<Item = String>) -> Vec<Candidate> {
    texts
        .into_iter()
        .enumerate()
        .map(|(i, text)| Candidate::new(text, -(i as f64 + 1.0)))
        .collect()
}

/// Answers with every tail (heads, for inverse queries) it has seen for the
/// query's head and relation, lowest entity id first.
pub struct Memorizer<'a> {
    graph: &'a KnowledgeGraph,
    dictionary: &'a Dictionary,
    catalog: &'a TextCatalog,
}

impl<'a> Memorizer<'a> {
    pub fn new(
        graph: &'a KnowledgeGraph,
        dictionary: &'a Dictionary,
        catalog: &'a TextCatalog,
    ) -> Self {
        Memorizer {
            graph,
            dictionary,
            catalog,
        }
    }
}

impl Predictor for Memorizer<'_> {
    fn predict(&self, record: &DatasetRecord) -> Result<Vec<Candidate>> {
        let (Ok(head), Ok(relation)) = (
            self.dictionary.entity_id(&record.head_id),
            self.dictionary.relation_id(&record.relation_id),
        ) else {
            return Ok(Vec::new());
        };
        let graphs = [self.graph];
        let answers = if record.inverse {
            known_heads(head, relation, &graphs)
        } else {
            known_tails(head, relation, &graphs)
        };
        let mut answers: Vec<_> = answers.into_iter().collect();
        answers.sort_unstable();
        let texts = answers
            .into_iter()
            .map(|e| {
                self.catalog
                    .entity_text(self.dictionary.entity_name(e))
                    .map(str::to_string)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ranked(texts))
    }
}

/// Reads the entity part of each neighbor segment back out of the input,
/// in input order.
pub struct HintReader {
    /// Longest first, so the longest matching relation text wins.
    relation_texts: Vec<String>,
}

impl HintReader {
    pub fn new<S: Into<String>>(relation_texts: impl IntoIterator<Item = S>) -> Self {
        let mut relation_texts: Vec<String> = relation_texts.into_iter().map(Into::into).collect();
        relation_texts.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        relation_texts.dedup();
        HintReader { relation_texts }
    }

    pub fn from_catalog(catalog: &TextCatalog) -> Self {
        Self::new(catalog.relations().map(|(_, text)| text))
    }

    fn strip_relation<'s>(&self, segment: &'s str) -> Option<&'s str> {
        self.relation_texts.iter().find_map(|rel| {
            segment
                .strip_prefix(rel.as_str())
                .and_then(|rest| rest.strip_prefix(' '))
                .filter(|rest| !rest.is_empty())
        })
    }

    /// Entity text of one neighbor segment, if it parses.
    pub fn entity_of<'s>(&self, segment: &'s str) -> Option<&'s str> {
        let marker = segment
            .strip_prefix(INVERSE_MARKER)
            .and_then(|rest| rest.strip_prefix(' '));
        marker
            .and_then(|rest| self.strip_relation(rest))
            .or_else(|| self.strip_relation(segment))
    }
}

impl Predictor for HintReader {
    fn predict(&self, record: &DatasetRecord) -> Result<Vec<Candidate>> {
        let vq = VerbalizedQuery::from_input(record.input_text.clone(), String::new());
        let texts: Vec<String> = vq
            .neighbors()
            .filter_map(|segment| self.entity_of(segment))
            .map(str::to_string)
            .collect();
        Ok(ranked(texts))
    }
}

/// Always answers the same text.
pub struct Constant {
    pub text: String,
}

impl Predictor for Constant {
    fn predict(&self, _record: &DatasetRecord) -> Result<Vec<Candidate>> {
        Ok(ranked([self.text.clone()]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    Memorizer,
    HintReader,
    Constant,
}

impl FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "memorizer" => Ok(OracleKind::Memorizer),
            "hint_reader" | "hint-reader" => Ok(OracleKind::HintReader),
            "constant" => Ok(OracleKind::Constant),
            _ => Err(Error::Invalid(format!("unknown oracle `{s}`"))),
        }
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleKind::Memorizer => "memorizer",
            OracleKind::HintReader => "hint_reader",
            OracleKind::Constant => "constant",
        })
    }
}
