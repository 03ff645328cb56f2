//! File helpers shared by the loaders and writers.
//!
//! Paths ending in `.gz` are transparently gzip-decoded on read and
//! gzip-encoded on write.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|ext| ext == "gz")
}

pub fn open_reader(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if is_gzip(path) {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::with_capacity(1 << 16, file)))
    }
}

pub fn create_writer(path: &Path) -> Result<Box<dyn Write>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let buffered = BufWriter::with_capacity(1 << 16, file);
    if is_gzip(path) {
        Ok(Box::new(GzEncoder::new(buffered, Compression::default())))
    } else {
        Ok(Box::new(buffered))
    }
}

/// Iterates `(line_number, line)` pairs with trailing `\r\n` removed.
/// Line numbers start at 1.
pub fn numbered_lines<'a>(
    reader: Box<dyn BufRead + 'a>,
    path: &'a Path,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    reader.lines().enumerate().map(move |(i, line)| {
        let mut line = line.map_err(|e| Error::io(path, e))?;
        if line.ends_with('\r') {
            line.pop();
        }
        Ok((i + 1, line))
    })
}

/// Reads one JSON value per non-empty line.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for item in numbered_lines(open_reader(path)?, path) {
        let (line_no, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let value =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: serde::Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<usize> {
    let mut out = create_writer(path)?;
    let mut n = 0;
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| Error::io(path, e.into()))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        n += 1;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(n)
}
