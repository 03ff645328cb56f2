//! Triple storage with bidirectional adjacency.
//!
//! Identifiers are interned into a [`Dictionary`] that may be shared by
//! several graphs (train / valid / test), so ids compare across splits.
//! A [`KnowledgeGraph`] is immutable once built; its head and tail
//! indices are compressed-row arrays keyed by entity id.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{create_writer, numbered_lines, open_reader};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// Interned entity and relation identifiers, numbered in first-seen order.
#[derive(Clone, Debug, Default)]
pub struct Dictionary {
    entities: IndexSet<Box<str>>,
    relations: IndexSet<Box<str>>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern_entity(&mut self, name: &str) -> EntityId {
        if let Some(i) = self.entities.get_index_of(name) {
            return EntityId(i as u32);
        }
        let (i, _) = self.entities.insert_full(name.into());
        EntityId(i as u32)
    }

    pub fn intern_relation(&mut self, name: &str) -> RelationId {
        if let Some(i) = self.relations.get_index_of(name) {
            return RelationId(i as u32);
        }
        let (i, _) = self.relations.insert_full(name.into());
        RelationId(i as u32)
    }

    pub fn entity_id(&self, name: &str) -> Result<EntityId> {
        self.entities
            .get_index_of(name)
            .map(|i| EntityId(i as u32))
            .ok_or_else(|| Error::not_found("entity", name))
    }

    pub fn relation_id(&self, name: &str) -> Result<RelationId> {
        self.relations
            .get_index_of(name)
            .map(|i| RelationId(i as u32))
            .ok_or_else(|| Error::not_found("relation", name))
    }

    /// Panics if `id` was not produced by this dictionary.
    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entities[id.0 as usize]
    }

    /// Panics if `id` was not produced by this dictionary.
    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id.0 as usize]
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn entities(&self) -> impl ExactSizeIterator<Item = EntityId> {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn relations(&self) -> impl ExactSizeIterator<Item = RelationId> {
        (0..self.relations.len() as u32).map(RelationId)
    }
}

/// Line format of a triple file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Dialect {
    /// `head<TAB>relation<TAB>tail`
    #[default]
    Tsv,
    /// Fields separated by commas and/or runs of whitespace.
    Loose,
}

impl FromStr for Dialect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" | "tab" => Ok(Dialect::Tsv),
            "loose" | "csv" | "whitespace" => Ok(Dialect::Loose),
            other => Err(Error::Invalid(format!("unknown triple dialect `{other}`"))),
        }
    }
}

impl Dialect {
    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Dialect::Tsv => line.split('\t').collect(),
            Dialect::Loose => line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SplitTag {
    #[default]
    Train,
    Valid,
    Test,
    Inference,
}

impl SplitTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Valid => "valid",
            SplitTag::Test => "test",
            SplitTag::Inference => "inference",
        }
    }

    fn code(self) -> u8 {
        match self {
            SplitTag::Train => 0,
            SplitTag::Valid => 1,
            SplitTag::Test => 2,
            SplitTag::Inference => 3,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => SplitTag::Train,
            1 => SplitTag::Valid,
            2 => SplitTag::Test,
            3 => SplitTag::Inference,
            _ => return None,
        })
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "valid" | "validation" => Ok(SplitTag::Valid),
            "test" => Ok(SplitTag::Test),
            "inference" => Ok(SplitTag::Inference),
            other => Err(Error::Invalid(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// The entity is the triple's head.
    Outgoing,
    /// The entity is the triple's tail.
    Incoming,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Adjacent {
    pub position: usize,
    pub triple: Triple,
    pub direction: Direction,
}

impl Adjacent {
    /// The endpoint that is not the anchor entity.
    pub fn other(&self) -> EntityId {
        match self.direction {
            Direction::Outgoing => self.triple.tail,
            Direction::Incoming => self.triple.head,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GraphStats {
    pub entity_count: usize,
    pub relation_count: usize,
    pub triple_count: usize,
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}",
            self.entity_count, self.relation_count, self.triple_count
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Csr {
    offsets: Vec<u32>,
    positions: Vec<u32>,
}

impl Csr {
    fn build(len: usize, triples: &[Triple], key: impl Fn(&Triple) -> EntityId) -> Self {
        let mut offsets = vec![0u32; len + 1];
        for t in triples {
            offsets[key(t).0 as usize + 1] += 1;
        }
        for i in 0..len {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut positions = vec![0u32; triples.len()];
        for (pos, t) in triples.iter().enumerate() {
            let slot = &mut cursor[key(t).0 as usize];
            positions[*slot as usize] = pos as u32;
            *slot += 1;
        }
        Csr { offsets, positions }
    }

    fn bucket(&self, id: EntityId) -> &[u32] {
        let i = id.0 as usize;
        if i + 1 >= self.offsets.len() {
            return &[];
        }
        &self.positions[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }
}

/// Accumulates triples, dropping exact duplicates.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    split: SplitTag,
    entities: IndexSet<EntityId>,
    relations: IndexSet<RelationId>,
    triples: Vec<Triple>,
    seen: HashSet<Triple>,
    duplicates: usize,
}

impl GraphBuilder {
    pub fn new(split: SplitTag) -> Self {
        GraphBuilder {
            split,
            ..Default::default()
        }
    }

    /// Returns `false` when the triple was already present.
    pub fn push(&mut self, triple: Triple) -> bool {
        if !self.seen.insert(triple) {
            self.duplicates += 1;
            return false;
        }
        self.entities.insert(triple.head);
        self.relations.insert(triple.relation);
        self.entities.insert(triple.tail);
        self.triples.push(triple);
        true
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    /// `dictionary` must be the one the pushed ids came from.
    pub fn finish(self, dictionary: &Dictionary) -> KnowledgeGraph {
        let universe = dictionary.entity_count();
        let outgoing = Csr::build(universe, &self.triples, |t| t.head);
        let incoming = Csr::build(universe, &self.triples, |t| t.tail);
        KnowledgeGraph {
            split: self.split,
            entities: self.entities,
            relations: self.relations,
            triples: self.triples,
            outgoing,
            incoming,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    split: SplitTag,
    entities: IndexSet<EntityId>,
    relations: IndexSet<RelationId>,
    triples: Vec<Triple>,
    outgoing: Csr,
    incoming: Csr,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.split == other.split
            && self.triples == other.triples
            && self.entities.iter().eq(other.entities.iter())
            && self.relations.iter().eq(other.relations.iter())
    }
}

impl KnowledgeGraph {
    pub fn from_triples(
        split: SplitTag,
        triples: impl IntoIterator<Item = Triple>,
        dictionary: &Dictionary,
    ) -> Self {
        let mut builder = GraphBuilder::new(split);
        for t in triples {
            builder.push(t);
        }
        builder.finish(dictionary)
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn triple(&self, position: usize) -> Triple {
        self.triples[position]
    }

    /// Entities in order of first occurrence.
    pub fn entities(&self) -> impl ExactSizeIterator<Item = EntityId> + '_ {
        self.entities.iter().copied()
    }

    pub fn relations(&self) -> impl ExactSizeIterator<Item = RelationId> + '_ {
        self.relations.iter().copied()
    }

    pub fn contains_entity(&self, entity: EntityId) -> bool {
        self.entities.contains(&entity)
    }

    pub fn contains_relation(&self, relation: RelationId) -> bool {
        self.relations.contains(&relation)
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            entity_count: self.entities.len(),
            relation_count: self.relations.len(),
            triple_count: self.triples.len(),
        }
    }

    /// Triple positions where `entity` is the head, ascending.
    pub fn outgoing(&self, entity: EntityId) -> &[u32] {
        self.outgoing.bucket(entity)
    }

    /// Triple positions where `entity` is the tail, ascending.
    pub fn incoming(&self, entity: EntityId) -> &[u32] {
        self.incoming.bucket(entity)
    }

    pub fn degree(&self, entity: EntityId) -> usize {
        self.outgoing(entity).len() + self.incoming(entity).len()
    }

    /// Every incident triple of `entity`, by ascending triple position.
    /// A self-loop yields two entries, outgoing first. Entities without
    /// edges in this graph get an empty list.
    pub fn adjacent(&self, entity: EntityId) -> Vec<Adjacent> {
        let out = self.outgoing(entity);
        let inc = self.incoming(entity);
        let mut merged = Vec::with_capacity(out.len() + inc.len());
        let (mut i, mut j) = (0, 0);
        while i < out.len() || j < inc.len() {
            let take_out = j == inc.len() || (i < out.len() && out[i] <= inc[j]);
            let (pos, direction) = if take_out {
                i += 1;
                (out[i - 1], Direction::Outgoing)
            } else {
                j += 1;
                (inc[j - 1], Direction::Incoming)
            };
            merged.push(Adjacent {
                position: pos as usize,
                triple: self.triples[pos as usize],
                direction,
            });
        }
        merged
    }

    /// [`adjacent`](Self::adjacent) by external identifier.
    pub fn adjacent_named(&self, dictionary: &Dictionary, name: &str) -> Result<Vec<Adjacent>> {
        Ok(self.adjacent(dictionary.entity_id(name)?))
    }

    pub fn write_tsv<W: Write>(&self, dictionary: &Dictionary, mut out: W) -> std::io::Result<()> {
        for t in &self.triples {
            writeln!(
                out,
                "{}\t{}\t{}",
                dictionary.entity_name(t.head),
                dictionary.relation_name(t.relation),
                dictionary.entity_name(t.tail)
            )?;
        }
        out.flush()
    }
}

/// Union over `graphs` of tails `t` with `(head, relation, t)` present.
pub fn known_tails(
    head: EntityId,
    relation: RelationId,
    graphs: &[&KnowledgeGraph],
) -> HashSet<EntityId> {
    let mut tails = HashSet::new();
    for g in graphs {
        for &pos in g.outgoing(head) {
            let t = g.triple(pos as usize);
            if t.relation == relation {
                tails.insert(t.tail);
            }
        }
    }
    tails
}

/// Union over `graphs` of heads `h` with `(h, relation, tail)` present.
pub fn known_heads(
    tail: EntityId,
    relation: RelationId,
    graphs: &[&KnowledgeGraph],
) -> HashSet<EntityId> {
    let mut heads = HashSet::new();
    for g in graphs {
        for &pos in g.incoming(tail) {
            let t = g.triple(pos as usize);
            if t.relation == relation {
                heads.insert(t.head);
            }
        }
    }
    heads
}

pub fn read_triples<R: BufRead>(
    reader: R,
    source: &Path,
    dialect: Dialect,
    split: SplitTag,
    dictionary: &mut Dictionary,
) -> Result<KnowledgeGraph> {
    let mut builder = GraphBuilder::new(split);
    for item in numbered_lines(Box::new(reader), source) {
        let (line_no, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let fields = dialect.split(&line);
        if fields.len() != 3 || fields.iter().any(|f| f.trim().is_empty()) {
            return Err(Error::parse(
                source,
                line_no,
                format!(
                    "expected head, relation, tail; got {} field(s)",
                    fields.len()
                ),
            ));
        }
        let head = dictionary.intern_entity(fields[0].trim());
        let relation = dictionary.intern_relation(fields[1].trim());
        let tail = dictionary.intern_entity(fields[2].trim());
        builder.push(Triple::new(head, relation, tail));
    }
    if builder.duplicates() > 0 {
        log::warn!(
            "{}: dropped {} duplicate triple(s)",
            source.display(),
            builder.duplicates()
        );
    }
    Ok(builder.finish(dictionary))
}

pub fn ingest_triples(
    path: &Path,
    dialect: Dialect,
    split: SplitTag,
    dictionary: &mut Dictionary,
) -> Result<KnowledgeGraph> {
    let reader = open_reader(path)?;
    read_triples(reader, path, dialect, split, dictionary)
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"KGCTXSNP";
const SNAPSHOT_VERSION: u32 = 1;

/// Binary snapshot layout (all integers little-endian):
///
/// ```text
/// magic "KGCTXSNP" | version u32 | split u8
/// n_entities u64 | (len u32, utf8 bytes)*
/// n_relations u64 | (len u32, utf8 bytes)*
/// n_triples u64 | (head u32, relation u32, tail u32)*   -- local indices
/// ```
pub fn write_snapshot(graph: &KnowledgeGraph, dictionary: &Dictionary, path: &Path) -> Result<()> {
    let wrap = |e| Error::io(path, e);
    let mut out = create_writer(path)?;
    let local_entities: IndexSet<EntityId> = graph.entities().collect();
    let local_relations: IndexSet<RelationId> = graph.relations().collect();

    out.write_all(SNAPSHOT_MAGIC).map_err(wrap)?;
    out.write_all(&SNAPSHOT_VERSION.to_le_bytes())
        .map_err(wrap)?;
    out.write_all(&[graph.split.code()]).map_err(wrap)?;
    let write_names = |names: Vec<&str>, out: &mut dyn Write| -> std::io::Result<()> {
        out.write_all(&(names.len() as u64).to_le_bytes())?;
        for n in names {
            out.write_all(&(n.len() as u32).to_le_bytes())?;
            out.write_all(n.as_bytes())?;
        }
        Ok(())
    };
    write_names(
        local_entities
            .iter()
            .map(|&e| dictionary.entity_name(e))
            .collect(),
        &mut out,
    )
    .map_err(wrap)?;
    write_names(
        local_relations
            .iter()
            .map(|&r| dictionary.relation_name(r))
            .collect(),
        &mut out,
    )
    .map_err(wrap)?;
    out.write_all(&(graph.triples.len() as u64).to_le_bytes())
        .map_err(wrap)?;
    for t in &graph.triples {
        let h = local_entities.get_index_of(&t.head).unwrap() as u32;
        let r = local_relations.get_index_of(&t.relation).unwrap() as u32;
        let tl = local_entities.get_index_of(&t.tail).unwrap() as u32;
        for v in [h, r, tl] {
            out.write_all(&v.to_le_bytes()).map_err(wrap)?;
        }
    }
    out.flush().map_err(wrap)
}

struct SnapshotReader<'a> {
    input: Box<dyn BufRead>,
    path: &'a Path,
}

impl SnapshotReader<'_> {
    fn bad(&self, message: impl Into<String>) -> Error {
        Error::Snapshot {
            path: self.path.to_path_buf(),
            message: message.into(),
        }
    }

    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.input
            .read_exact(buf)
            .map_err(|e| self.bad(format!("truncated ({e})")))
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn names(&mut self) -> Result<Vec<String>> {
        let n = self.u64()? as usize;
        let mut names = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let mut bytes = vec![0u8; self.u32()? as usize];
            self.fill(&mut bytes)?;
            names.push(String::from_utf8(bytes).map_err(|_| self.bad("identifier is not UTF-8"))?);
        }
        Ok(names)
    }

    fn index(&mut self, len: usize) -> Result<usize> {
        let v = self.u32()? as usize;
        if v >= len {
            return Err(self.bad(format!("index {v} out of range")));
        }
        Ok(v)
    }
}

pub fn read_snapshot(path: &Path, dictionary: &mut Dictionary) -> Result<KnowledgeGraph> {
    let mut r = SnapshotReader {
        input: open_reader(path)?,
        path,
    };
    let mut magic = [0u8; 8];
    r.fill(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(r.bad("not a graph snapshot"));
    }
    let version = r.u32()?;
    if version != SNAPSHOT_VERSION {
        return Err(r.bad(format!("unsupported version {version}")));
    }
    let mut code = [0u8; 1];
    r.fill(&mut code)?;
    let split =
        SplitTag::from_code(code[0]).ok_or_else(|| r.bad(format!("bad split code {}", code[0])))?;

    let entities: Vec<EntityId> = r
        .names()?
        .iter()
        .map(|n| dictionary.intern_entity(n))
        .collect();
    let relations: Vec<RelationId> = r
        .names()?
        .iter()
        .map(|n| dictionary.intern_relation(n))
        .collect();

    let n = r.u64()?;
    let mut builder = GraphBuilder::new(split);
    for _ in 0..n {
        let h = r.index(entities.len())?;
        let rel = r.index(relations.len())?;
        let t = r.index(entities.len())?;
        builder.push(Triple::new(entities[h], relations[rel], entities[t]));
    }
    Ok(builder.finish(dictionary))
}
