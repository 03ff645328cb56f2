//! Entity and relation surface texts.
//!
//! Raw labels are not injective: many entities share a name. [`TextCatalog::build`]
//! makes entity texts unique in two stages. Colliding labels first get their
//! description appended (`<label> <description>`); anything still colliding,
//! or lacking a description, falls back to `<label> <id>`. Labels that are
//! already unique pass through untouched. Relation texts must be distinct
//! as loaded.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::io::{numbered_lines, open_reader};

/// NFC followed by trimming surrounding whitespace.
pub fn canonical_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.trim().to_string()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawCatalog {
    /// Labels in file order.
    pub labels: IndexMap<String, String>,
    pub descriptions: HashMap<String, String>,
}

impl RawCatalog {
    pub fn from_pairs<I, S, T>(labels: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        RawCatalog {
            labels: labels
                .into_iter()
                .map(|(id, text)| (id.into(), canonical_text(text.as_ref())))
                .collect(),
            descriptions: HashMap::new(),
        }
    }

    pub fn with_description(mut self, id: &str, description: &str) -> Self {
        self.descriptions
            .insert(id.to_string(), canonical_text(description));
        self
    }
}

/// Parses `id<TAB>text[<TAB>alias...]` lines; only the first text column is kept.
fn read_id_text(
    path: &Path,
    mut on_entry: impl FnMut(usize, String, String) -> Result<()>,
) -> Result<()> {
    for item in numbered_lines(open_reader(path)?, path) {
        let (line_no, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().trim();
        let text = canonical_text(fields.next().unwrap_or_default());
        if id.is_empty() || text.is_empty() {
            return Err(Error::parse(
                path,
                line_no,
                "expected `id<TAB>text` with non-empty text",
            ));
        }
        on_entry(line_no, id.to_string(), text)?;
    }
    Ok(())
}

pub fn load_raw(labels_path: &Path, descriptions_path: Option<&Path>) -> Result<RawCatalog> {
    let mut raw = RawCatalog::default();
    read_id_text(labels_path, |line_no, id, text| {
        if raw.labels.contains_key(&id) {
            log::warn!(
                "{}:{line_no}: duplicate label for `{id}` ignored",
                labels_path.display()
            );
        } else {
            raw.labels.insert(id, text);
        }
        Ok(())
    })?;
    if let Some(path) = descriptions_path {
        let mut orphans = 0usize;
        read_id_text(path, |_, id, text| {
            if raw.labels.contains_key(&id) {
                raw.descriptions.entry(id).or_insert(text);
            } else {
                orphans += 1;
            }
            Ok(())
        })?;
        if orphans > 0 {
            log::warn!(
                "{}: {orphans} description(s) for unknown ids ignored",
                path.display()
            );
        }
    }
    Ok(raw)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Disambiguation {
    /// Description first, identifier as the fallback.
    #[default]
    DescriptionThenId,
    /// Identifier suffix only, for datasets without descriptions.
    IdOnly,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TextCatalog {
    entity_text: IndexMap<String, String>,
    relation_text: IndexMap<String, String>,
    reverse: HashMap<String, String>,
}

impl TextCatalog {
    pub fn build(
        entities: &RawCatalog,
        relations: &RawCatalog,
        mode: Disambiguation,
    ) -> Result<Self> {
        let entity_text = disambiguate(entities, mode);
        let mut relation_text = IndexMap::with_capacity(relations.labels.len());
        let mut owners: HashMap<&str, &str> = HashMap::new();
        for (id, text) in &relations.labels {
            if let Some(first) = owners.insert(text, id) {
                return Err(Error::RelationCollision {
                    text: text.clone(),
                    first: first.to_string(),
                    second: id.clone(),
                });
            }
            relation_text.insert(id.clone(), text.clone());
        }
        let reverse = entity_text
            .iter()
            .map(|(id, text)| (text.clone(), id.clone()))
            .collect();
        Ok(TextCatalog {
            entity_text,
            relation_text,
            reverse,
        })
    }

    pub fn entity_text(&self, id: &str) -> Result<&str> {
        self.entity_text
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| Error::not_found("entity text", id))
    }

    pub fn relation_text(&self, id: &str) -> Result<&str> {
        self.relation_text
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| Error::not_found("relation text", id))
    }

    /// Exact reverse lookup of a disambiguated entity text.
    pub fn entity_for_text(&self, text: &str) -> Option<&str> {
        self.reverse.get(text).map(String::as_str)
    }

    pub fn entities(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entity_text
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, &str)> {
        self.relation_text
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn entity_count(&self) -> usize {
        self.entity_text.len()
    }

    /// Audit dump: `entity<TAB>id<TAB>text` and `relation<TAB>id<TAB>text` lines.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (id, text) in &self.entity_text {
            writeln!(out, "entity\t{id}\t{text}")?;
        }
        for (id, text) in &self.relation_text {
            writeln!(out, "relation\t{id}\t{text}")?;
        }
        out.flush()
    }
}

/// Produces an injective id → text map. Output order follows `raw.labels`.
pub fn disambiguate(raw: &RawCatalog, mode: Disambiguation) -> IndexMap<String, String> {
    let mut label_counts: HashMap<&str, usize> = HashMap::new();
    for label in raw.labels.values() {
        *label_counts.entry(label).or_default() += 1;
    }

    let mut resolved: Vec<Option<String>> = vec![None; raw.labels.len()];
    let mut taken: HashSet<String> = HashSet::new();
    for (i, label) in raw.labels.values().enumerate() {
        if label_counts[label.as_str()] == 1 {
            resolved[i] = Some(label.clone());
            taken.insert(label.clone());
        }
    }

    if mode == Disambiguation::DescriptionThenId {
        let candidates: Vec<(usize, String)> = raw
            .labels
            .iter()
            .enumerate()
            .filter(|(i, _)| resolved[*i].is_none())
            .filter_map(|(i, (id, label))| {
                raw.descriptions
                    .get(id)
                    .filter(|d| !d.is_empty())
                    .map(|d| (i, format!("{label} {d}")))
            })
            .collect();
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for (_, text) in &candidates {
            *counts.entry(text).or_default() += 1;
        }
        let accepted: Vec<(usize, String)> = candidates
            .iter()
            .filter(|(_, text)| counts[text.as_str()] == 1 && !taken.contains(text))
            .cloned()
            .collect();
        for (i, text) in accepted {
            taken.insert(text.clone());
            resolved[i] = Some(text);
        }
    }

    for (i, (id, label)) in raw.labels.iter().enumerate() {
        if resolved[i].is_some() {
            continue;
        }
        let mut text = format!("{label} {id}");
        while taken.contains(&text) {
            text.push(' ');
            text.push_str(id);
        }
        taken.insert(text.clone());
        resolved[i] = Some(text);
    }

    raw.labels
        .keys()
        .cloned()
        .zip(resolved.into_iter().map(Option::unwrap))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn description_then_identifier() {
        let raw = RawCatalog::from_pairs([("Q1", "Apple"), ("Q2", "Apple"), ("Q3", "Pear")])
            .with_description("Q1", "technology company");
        let map = disambiguate(&raw, Disambiguation::DescriptionThenId);
        assert_eq!(map["Q1"], "Apple technology company");
        assert_eq!(map["Q2"], "Apple Q2");
        assert_eq!(map["Q3"], "Pear");
    }

    #[test]
    fn unique_labels_pass_through() {
        let raw = RawCatalog::from_pairs([("Q1", "a"), ("Q2", "b")]);
        let map = disambiguate(&raw, Disambiguation::DescriptionThenId);
        assert_eq!(map["Q1"], "a");
        assert_eq!(map["Q2"], "b");
    }

    #[test]
    fn shared_label_and_description_fall_back_to_ids() {
        let raw = RawCatalog::from_pairs([("Q1", "X"), ("Q2", "X"), ("Q3", "X")])
            .with_description("Q1", "d")
            .with_description("Q2", "d")
            .with_description("Q3", "d");
        let map = disambiguate(&raw, Disambiguation::DescriptionThenId);
        let inverse: HashMap<&String, &String> = map.iter().map(|(k, v)| (v, k)).collect();
        assert_eq!(inverse.len(), 3);
        assert_eq!(map["Q1"], "X Q1");
        assert_eq!(map["Q3"], "X Q3");
    }

    #[test]
    fn id_only_mode_ignores_descriptions() {
        let raw = RawCatalog::from_pairs([("Q1", "X"), ("Q2", "X")]).with_description("Q1", "d");
        let map = disambiguate(&raw, Disambiguation::IdOnly);
        assert_eq!(map["Q1"], "X Q1");
    }

    #[test]
    fn suffix_collision_with_unique_label_is_resolved() {
        let raw = RawCatalog::from_pairs([("Q1", "X"), ("Q2", "X"), ("Q9", "X Q1")]);
        let map = disambiguate(&raw, Disambiguation::DescriptionThenId);
        assert_eq!(map["Q9"], "X Q1");
        assert_eq!(map["Q1"], "X Q1 Q1");
        assert_eq!(map["Q2"], "X Q2");
    }

    #[test]
    fn relation_collision_is_an_error() {
        let ents = RawCatalog::default();
        let rels = RawCatalog::from_pairs([("P1", "part of"), ("P2", "part of")]);
        let err = TextCatalog::build(&ents, &rels, Disambiguation::default()).unwrap_err();
        assert!(matches!(err, Error::RelationCollision { .. }));
    }

    #[test]
    fn canonical_text_applies_nfc_and_trim() {
        assert_eq!(canonical_text("  Cafe\u{301} "), "Caf\u{e9}");
    }
}
