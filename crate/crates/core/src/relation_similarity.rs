//! Relation-to-relation cosine similarity.
//!
//! Relation vectors are read from a word-vector file, and the full matrix is
//! materialized once. Row order is the file order; ties in rankings fall
//! back to that order.

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{create_writer, open_reader};
use crate::kg_store::{Dictionary, RelationId};
use crate::vectors::VectorTable;

#[derive(Clone, Debug, PartialEq)]
pub struct RelationEmbeddings {
    table: VectorTable,
}

impl RelationEmbeddings {
    pub fn new(table: VectorTable) -> Self {
        RelationEmbeddings { table }
    }

    pub fn load(path: &Path) -> Result<Self> {
        VectorTable::load(path).map(Self::new)
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn table(&self) -> &VectorTable {
        &self.table
    }

    /// SHA-256 over the keys and raw little-endian components.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim() as u64).to_le_bytes());
        for (i, key) in self.table.keys().enumerate() {
            hasher.update(key.as_bytes());
            hasher.update([0u8]);
            for v in self.table.row(i) {
                hasher.update(v.to_le_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Cosine similarity, accumulated in `f64`. Any zero vector gives 0.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    order: Vec<String>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn build(emb: &RelationEmbeddings) -> Result<Self> {
        let n = emb.len();
        if n == 0 {
            return Err(Error::Invalid(
                "similarity matrix needs at least one relation".into(),
            ));
        }
        let table = emb.table();
        let mut values = vec![0f64; n * n];
        for i in 0..n {
            for j in i..n {
                let c = cosine(table.row(i), table.row(j))?;
                values[i * n + j] = c;
                values[j * n + i] = c;
            }
        }
        Ok(SimilarityMatrix {
            order: table.keys().map(str::to_string).collect(),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[String] {
        &self.order
    }

    pub fn index_of(&self, relation: &str) -> Option<usize> {
        self.order.iter().position(|r| r == relation)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.values[i * n..(i + 1) * n]
    }

    /// All relations by descending similarity to `query`, ties by matrix order.
    pub fn rank_by_similarity(&self, query: &str) -> Result<Vec<&str>> {
        let q = self
            .index_of(query)
            .ok_or_else(|| Error::not_found("relation", query))?;
        let row = self.row(q);
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        Ok(idx.into_iter().map(|i| self.order[i].as_str()).collect())
    }

    /// Binary cache: magic, checksum line, `n`, names, then `n*n` f64 values.
    pub fn save_cache(&self, checksum: &str, path: &Path) -> Result<()> {
        let wrap = |e| Error::io(path, e);
        let mut out = create_writer(path)?;
        let mut header = format!("KGCTXSIM1\n{checksum}\n{}\n", self.len());
        for r in &self.order {
            header.push_str(r);
            header.push('\n');
        }
        out.write_all(header.as_bytes()).map_err(wrap)?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes()).map_err(wrap)?;
        }
        out.flush().map_err(wrap)
    }

    /// Returns `Ok(None)` when the cached checksum differs from `checksum`.
    pub fn load_cache(checksum: &str, path: &Path) -> Result<Option<Self>> {
        let mut input = open_reader(path)?;
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        let bad = |m: &str| Error::Snapshot {
            path: path.to_path_buf(),
            message: m.to_string(),
        };
        let mut cursor = 0usize;
        let mut next_line = || -> Result<String> {
            let end = bytes[cursor..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad("truncated header"))?;
            let line = String::from_utf8(bytes[cursor..cursor + end].to_vec())
                .map_err(|_| bad("bad header"))?;
            cursor += end + 1;
            Ok(line)
        };
        if next_line()? != "KGCTXSIM1" {
            return Err(bad("not a similarity cache"));
        }
        if next_line()? != checksum {
            return Ok(None);
        }
        let n: usize = next_line()?.parse().map_err(|_| bad("bad size"))?;
        let order = (0..n).map(|_| next_line()).collect::<Result<Vec<_>>>()?;
        let body = &bytes[cursor..];
        if body.len() != n * n * 8 {
            return Err(bad("matrix body has the wrong length"));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Some(SimilarityMatrix { order, values }))
    }
}

/// A [`SimilarityMatrix`] indexed by a dictionary's relation ids.
#[derive(Clone, Debug)]
pub struct RelationSimilarity {
    matrix: SimilarityMatrix,
    slots: Vec<Option<usize>>,
}

impl RelationSimilarity {
    pub fn new(matrix: SimilarityMatrix, dictionary: &Dictionary) -> Self {
        let lookup: std::collections::HashMap<&str, usize> = matrix
            .order
            .iter()
            .enumerate()
            .map(|(i, r)| (r.as_str(), i))
            .collect();
        let slots = dictionary
            .relations()
            .map(|r| lookup.get(dictionary.relation_name(r)).copied())
            .collect();
        RelationSimilarity { matrix, slots }
    }

    pub fn matrix(&self) -> &SimilarityMatrix {
        &self.matrix
    }

    pub fn contains(&self, relation: RelationId) -> bool {
        self.slot(relation).is_some()
    }

    fn slot(&self, relation: RelationId) -> Option<usize> {
        self.slots.get(relation.0 as usize).copied().flatten()
    }

    pub fn similarity(&self, a: RelationId, b: RelationId) -> Result<f64> {
        let sa = self
            .slot(a)
            .ok_or_else(|| Error::not_found("relation vector", format!("#{}", a.0)))?;
        let sb = self
            .slot(b)
            .ok_or_else(|| Error::not_found("relation vector", format!("#{}", b.0)))?;
        Ok(self.matrix.value(sa, sb))
    }
}
