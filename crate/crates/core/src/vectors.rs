//! Word-vector text format: a `count dim` header, then `key v1 ... v_dim`
//! per line.

use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::io::{numbered_lines, open_reader};

#[derive(Clone, Debug, PartialEq)]
pub struct VectorTable {
    dim: usize,
    keys: IndexMap<String, ()>,
    data: Vec<f32>,
}

impl VectorTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("vector dimension must be positive".into()));
        }
        Ok(VectorTable {
            dim,
            keys: IndexMap::new(),
            data: Vec::new(),
        })
    }

    pub fn push(&mut self, key: impl Into<String>, vector: &[f32]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("vector has non-finite components".into()));
        }
        let key = key.into();
        if self.keys.contains_key(&key) {
            return Err(Error::Invalid(format!("duplicate vector key `{key}`")));
        }
        self.keys.insert(key, ());
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, index: usize) -> &str {
        self.keys.get_index(index).map(|(k, _)| k.as_str()).unwrap()
    }

    pub fn keys(&self) -> impl ExactSizeIterator<Item = &str> {
        self.keys.keys().map(String::as_str)
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.keys.get_index_of(key)
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.index_of(key).map(|i| self.row(i))
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn raw_data(&self) -> &[f32] {
        &self.data
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut lines = numbered_lines(open_reader(path)?, path);
        let (count, dim) = loop {
            match lines.next() {
                None => return Err(Error::parse(path, 1, "missing `count dim` header")),
                Some(item) => {
                    let (line_no, line) = item?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let parts: Vec<&str> = line.split_whitespace().collect();
                    let parsed = match parts.as_slice() {
                        [c, d] => c.parse::<usize>().ok().zip(d.parse::<usize>().ok()),
                        _ => None,
                    };
                    match parsed {
                        Some((_, 0)) => {
                            return Err(Error::parse(path, line_no, "dimension must be positive"))
                        }
                        Some(h) => break h,
                        None => {
                            return Err(Error::parse(path, line_no, "expected `count dim` header"))
                        }
                    }
                }
            }
        };
        let mut table = VectorTable::new(dim)?;
        let mut buf = Vec::with_capacity(dim);
        let mut last_line = 1;
        for item in lines {
            let (line_no, line) = item?;
            last_line = line_no;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap();
            buf.clear();
            for p in parts {
                let v: f32 = p
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, format!("bad component `{p}`")))?;
                buf.push(v);
            }
            table
                .push(key, &buf)
                .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        }
        if table.len() != count {
            return Err(Error::parse(
                path,
                last_line,
                format!("header declares {count} vectors, found {}", table.len()),
            ));
        }
        Ok(table)
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (i, row) in self.rows().enumerate() {
            write!(out, "{}", self.key(i))?;
            for v in row {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    }
}
