//! Exact inner-product search over unit-normalized entity vectors.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::vectors::VectorTable;

pub const UNIT_NORM_TOLERANCE: f64 = 1e-5;

const PAR_CHUNK: usize = 16_384;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub index: usize,
    pub score: f64,
}

impl Hit {
    /// Better hits compare as smaller: higher score, then lower index.
    fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.index.cmp(&other.index))
    }
}

impl Eq for Hit {}

impl PartialOrd for Hit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Hit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank_cmp(other)
    }
}

#[derive(Clone, Debug)]
pub struct EntityIndex {
    table: VectorTable,
}

impl EntityIndex {
    /// Fails when any row is not unit length within [`UNIT_NORM_TOLERANCE`].
    pub fn new(table: VectorTable) -> Result<Self> {
        for (i, row) in table.rows().enumerate() {
            let norm = dot(row, row).sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::Invalid(format!(
                    "entity vector `{}` has norm {norm}, expected 1",
                    table.key(i)
                )));
            }
        }
        Ok(EntityIndex { table })
    }

    /// Rescales every row to unit length; zero rows are rejected.
    pub fn normalized(rows: &VectorTable) -> Result<Self> {
        let mut table = VectorTable::new(rows.dim())?;
        for (i, row) in rows.rows().enumerate() {
            let norm = dot(row, row).sqrt();
            if norm == 0.0 {
                return Err(Error::Invalid(format!(
                    "entity vector `{}` is zero",
                    rows.key(i)
                )));
            }
            let scaled: Vec<f32> = row.iter().map(|&x| (x as f64 / norm) as f32).collect();
            table.push(rows.key(i), &scaled)?;
        }
        Ok(EntityIndex { table })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(VectorTable::load(path)?)
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

    pub fn key(&self, index: usize) -> &str {
        self.table.key(index)
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.table.index_of(key)
    }

    /// The `k` rows with the largest inner product with `query`, best
    /// first; equal scores keep ascending row order.
    pub fn nearest(&self, query: &[f32], k: usize) -> Result<Vec<Hit>> {
        if query.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: query.len(),
            });
        }
        if k == 0 || self.is_empty() {
            return Ok(Vec::new());
        }
        let dim = self.dim();
        let data = self.table.raw_data();
        let hits = if self.len() <= PAR_CHUNK {
            top_k(data, dim, 0, query, k)
        } else {
            data.par_chunks(PAR_CHUNK * dim)
                .enumerate()
                .map(|(c, chunk)| top_k(chunk, dim, c * PAR_CHUNK, query, k))
                .reduce(Vec::new, |a, b| merge(a, b, k))
        };
        Ok(hits)
    }
}

const LANES: usize = 8;

/// f64 inner product over independent lanes so the loop vectorizes. The
/// summation order is fixed, so scores are reproducible.
fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0f64; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(&x, &y)| x as f64 * y as f64)
        .sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += x[l] as f64 * y[l] as f64;
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn top_k(data: &[f32], dim: usize, offset: usize, query: &[f32], k: usize) -> Vec<Hit> {
    // max-heap on rank_cmp keeps the worst retained hit on top
    let mut heap: BinaryHeap<Hit> = BinaryHeap::with_capacity(k + 1);
    for (i, row) in data.chunks_exact(dim).enumerate() {
        let hit = Hit {
            index: offset + i,
            score: dot(row, query),
        };
        if heap.len() < k {
            heap.push(hit);
        } else if let Some(worst) = heap.peek() {
            if hit < *worst {
                heap.pop();
                heap.push(hit);
            }
        }
    }
    heap.into_sorted_vec()
}

fn merge(a: Vec<Hit>, b: Vec<Hit>, k: usize) -> Vec<Hit> {
    let mut all = a;
    all.extend(b);
    all.sort_unstable();
    all.truncate(k);
    all
}
