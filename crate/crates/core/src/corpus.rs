//! Corpus data model and file formats.
//!
//! Formats handled here:
//!
//! - Embedding matrix: `GMDA` magic, `u32` version (1), `u32` dim, `u64` rows,
//!   then `rows * dim` little-endian `f32` values in row-major order.
//! - Document manifest: JSON Lines, one document object per line.
//! - Gold alignments and parallel pair files: UTF-8 TSV with two columns.
//!   Lines starting with `#` and blank lines are ignored.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"GMDA";
pub const EMBEDDING_VERSION: u32 = 1;
const EMBEDDING_HEADER_LEN: u64 = 4 + 4 + 4 + 8;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad magic {found:?} at byte offset 0, expected \"GMDA\"")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported embedding file version {0} at byte offset 4")]
    UnsupportedVersion(u32),
    #[error("truncated embedding file: row {row} incomplete at byte offset {offset} (expected {expected_len} bytes)")]
    TruncatedFile {
        row: u64,
        offset: u64,
        expected_len: u64,
    },
    #[error("trailing data after row {rows} at byte offset {offset}")]
    TrailingData { rows: u64, offset: u64 },
    #[error("non-finite value in row {row}, column {col} (byte offset {offset})")]
    NonFiniteValue { row: usize, col: usize, offset: u64 },
    #[error("invalid embedding shape: {0}")]
    InvalidShape(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("document {doc_id}: embedding row {row} out of bounds ({rows} rows)")]
    RowOutOfBounds {
        doc_id: String,
        row: usize,
        rows: usize,
    },
    #[error("document {0} has no sentences")]
    EmptyDocument(String),
    #[error("line {line}: duplicate document id {doc_id}")]
    DuplicateDocId { line: usize, doc_id: String },
    #[error("line {line}: duplicate pair ({src}, {tgt})")]
    DuplicatePair {
        line: usize,
        src: String,
        tgt: String,
    },
    #[error("gold pair references unknown {side} document {doc_id}")]
    UnknownDocId { side: &'static str, doc_id: String },
    #[error("parallel pair file contains no pairs")]
    EmptyPairs,
    #[error("parallel pair {index}: rows ({src}, {tgt}) out of bounds ({src_rows} source rows, {tgt_rows} target rows)")]
    PairOutOfBounds {
        index: usize,
        src: usize,
        tgt: usize,
        src_rows: usize,
        tgt_rows: usize,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Dense row-major matrix of sentence embeddings, one row per sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    rows: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self, CorpusError> {
        if dim == 0 {
            return Err(CorpusError::InvalidShape("dim must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(CorpusError::InvalidShape(format!(
                "{} values is not a multiple of dim {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(CorpusError::NonFiniteValue {
                row: pos / dim,
                col: pos % dim,
                offset: EMBEDDING_HEADER_LEN + 4 * pos as u64,
            });
        }
        let rows = data.len() / dim;
        Ok(Self { dim, rows, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(dim: usize, rows: &[R]) -> Result<Self, CorpusError> {
        let mut data = Vec::with_capacity(dim * rows.len());
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(CorpusError::InvalidShape(format!(
                    "row {i} has {} components, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Panics if `i >= rows`; manifests are bounds-checked on load.
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| f64::from(v)).collect()
    }
}

pub fn read_embedding_matrix(path: impl AsRef<Path>) -> Result<EmbeddingMatrix, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_embedding_matrix(BufReader::new(file), path)
}

fn read_fully<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

fn parse_embedding_matrix<R: Read>(
    mut reader: R,
    path: &Path,
) -> Result<EmbeddingMatrix, CorpusError> {
    let mut header = [0u8; EMBEDDING_HEADER_LEN as usize];
    let got = read_fully(&mut reader, &mut header).map_err(io_err(path))?;
    if got < 4 || &header[..4] != EMBEDDING_MAGIC {
        return Err(CorpusError::BadMagic {
            found: header[..got.min(4)].to_vec(),
        });
    }
    if got < header.len() {
        return Err(CorpusError::TruncatedFile {
            row: 0,
            offset: got as u64,
            expected_len: EMBEDDING_HEADER_LEN,
        });
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != EMBEDDING_VERSION {
        return Err(CorpusError::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let rows = u64::from_le_bytes(header[12..20].try_into().unwrap());
    if dim == 0 {
        return Err(CorpusError::InvalidShape("dim must be positive".into()));
    }
    let row_bytes = 4 * dim as u64;
    let expected_len = rows
        .checked_mul(row_bytes)
        .and_then(|b| b.checked_add(EMBEDDING_HEADER_LEN))
        .ok_or_else(|| CorpusError::InvalidShape(format!("{rows} rows of dim {dim} overflows")))?;

    // Neither `rows` nor `dim` is trusted for the up-front allocation.
    let mut data = Vec::with_capacity(((expected_len - EMBEDDING_HEADER_LEN) / 4).min(1 << 24) as usize);
    let mut value = [0u8; 4];
    for r in 0..rows {
        let row_offset = EMBEDDING_HEADER_LEN + r * row_bytes;
        for c in 0..dim {
            let offset = row_offset + 4 * c as u64;
            let got = read_fully(&mut reader, &mut value).map_err(io_err(path))?;
            if got < 4 {
                return Err(CorpusError::TruncatedFile {
                    row: r,
                    offset: offset + got as u64,
                    expected_len,
                });
            }
            let v = f32::from_le_bytes(value);
            if !v.is_finite() {
                return Err(CorpusError::NonFiniteValue {
                    row: r as usize,
                    col: c,
                    offset,
                });
            }
            data.push(v);
        }
    }
    let mut probe = [0u8; 1];
    if read_fully(&mut reader, &mut probe).map_err(io_err(path))? != 0 {
        return Err(CorpusError::TrailingData {
            rows,
            offset: expected_len,
        });
    }
    EmbeddingMatrix::new(dim, data)
}

pub fn write_embedding_matrix(
    matrix: &EmbeddingMatrix,
    path: impl AsRef<Path>,
) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> io::Result<()> {
        w.write_all(EMBEDDING_MAGIC)?;
        w.write_all(&EMBEDDING_VERSION.to_le_bytes())?;
        let dim = u32::try_from(matrix.dim)
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "dim exceeds u32"))?;
        w.write_all(&dim.to_le_bytes())?;
        w.write_all(&(matrix.rows as u64).to_le_bytes())?;
        for v in &matrix.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    };
    write(&mut w).map_err(io_err(path))
}

/// One sentence of a document: a pointer into the embedding matrix plus the
/// counts used by the weighting schemes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRef {
    pub emb_row: usize,
    pub token_count: u32,
    #[serde(default = "one")]
    pub occurrence_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_key: Option<String>,
}

fn one() -> u32 {
    1
}

impl SentenceRef {
    pub fn new(emb_row: usize, token_count: u32) -> Self {
        Self {
            emb_row,
            token_count,
            occurrence_count: 1,
            content_key: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub lang: String,
    pub date: Option<NaiveDate>,
    pub sentences: Vec<SentenceRef>,
}

#[derive(Serialize, Deserialize)]
struct ManifestLine {
    doc_id: String,
    lang: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    date: Option<String>,
    sentences: Vec<SentenceRef>,
}

/// Reads a JSON Lines manifest and validates every sentence reference
/// against `emb`.
pub fn read_manifest(
    path: impl AsRef<Path>,
    emb: &EmbeddingMatrix,
) -> Result<Vec<Document>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_manifest(BufReader::new(file), emb, path)
}

fn parse_manifest<R: BufRead>(
    reader: R,
    emb: &EmbeddingMatrix,
    path: &Path,
) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: ManifestLine = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let date = raw
            .date
            .as_deref()
            .map(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d"))
            .transpose()
            .map_err(|e| CorpusError::Parse {
                line: lineno,
                message: format!("date: {e}"),
            })?;
        if raw.sentences.is_empty() {
            return Err(CorpusError::EmptyDocument(raw.doc_id));
        }
        for (si, s) in raw.sentences.iter().enumerate() {
            if s.token_count == 0 || s.occurrence_count == 0 {
                return Err(CorpusError::Parse {
                    line: lineno,
                    message: format!(
                        "sentence {si} of {}: token_count and occurrence_count must be >= 1",
                        raw.doc_id
                    ),
                });
            }
            if s.emb_row >= emb.rows() {
                return Err(CorpusError::RowOutOfBounds {
                    doc_id: raw.doc_id,
                    row: s.emb_row,
                    rows: emb.rows(),
                });
            }
        }
        if !seen.insert(raw.doc_id.clone()) {
            return Err(CorpusError::DuplicateDocId {
                line: lineno,
                doc_id: raw.doc_id,
            });
        }
        docs.push(Document {
            doc_id: raw.doc_id,
            lang: raw.lang,
            date,
            sentences: raw.sentences,
        });
    }
    Ok(docs)
}

pub fn write_manifest(docs: &[Document], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> io::Result<()> {
        for d in docs {
            let line = ManifestLine {
                doc_id: d.doc_id.clone(),
                lang: d.lang.clone(),
                date: d.date.map(|d| d.format("%Y-%m-%d").to_string()),
                sentences: d.sentences.clone(),
            };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    };
    write(&mut w).map_err(io_err(path))
}

/// Yields `(line_number, fields)` for every non-comment, non-blank TSV line.
fn tsv_records<'a, R: BufRead + 'a>(
    reader: R,
    path: &'a Path,
) -> impl Iterator<Item = Result<(usize, Vec<String>), CorpusError>> + 'a {
    reader.lines().enumerate().filter_map(move |(idx, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(io_err(path)(e))),
        };
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            return None;
        }
        Some(Ok((
            idx + 1,
            trimmed.split('\t').map(str::to_owned).collect(),
        )))
    })
}

fn two_fields(line: usize, fields: Vec<String>) -> Result<(String, String), CorpusError> {
    match <[String; 2]>::try_from(fields) {
        Ok([a, b]) if !a.is_empty() && !b.is_empty() => Ok((a, b)),
        Ok(_) => Err(CorpusError::Parse {
            line,
            message: "empty field".into(),
        }),
        Err(f) => Err(CorpusError::Parse {
            line,
            message: format!("expected 2 tab-separated fields, found {}", f.len()),
        }),
    }
}

/// Trusted (source doc_id, target doc_id) pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldAlignment {
    pairs: Vec<(String, String)>,
}

impl GoldAlignment {
    pub fn new<I, S, T>(pairs: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for (i, (s, t)) in pairs.into_iter().enumerate() {
            let p = (s.into(), t.into());
            if !seen.insert(p.clone()) {
                return Err(CorpusError::DuplicatePair {
                    line: i + 1,
                    src: p.0,
                    tgt: p.1,
                });
            }
            out.push(p);
        }
        Ok(Self { pairs: out })
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn validate(&self, src_docs: &[Document], tgt_docs: &[Document]) -> Result<(), CorpusError> {
        let src: HashSet<&str> = src_docs.iter().map(|d| d.doc_id.as_str()).collect();
        let tgt: HashSet<&str> = tgt_docs.iter().map(|d| d.doc_id.as_str()).collect();
        for (s, t) in &self.pairs {
            if !src.contains(s.as_str()) {
                return Err(CorpusError::UnknownDocId {
                    side: "source",
                    doc_id: s.clone(),
                });
            }
            if !tgt.contains(t.as_str()) {
                return Err(CorpusError::UnknownDocId {
                    side: "target",
                    doc_id: t.clone(),
                });
            }
        }
        Ok(())
    }
}

pub fn read_gold(path: impl AsRef<Path>) -> Result<GoldAlignment, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for rec in tsv_records(BufReader::new(file), path) {
        let (line, fields) = rec?;
        let pair = two_fields(line, fields)?;
        if !seen.insert(pair.clone()) {
            return Err(CorpusError::DuplicatePair {
                line,
                src: pair.0,
                tgt: pair.1,
            });
        }
        pairs.push(pair);
    }
    Ok(GoldAlignment { pairs })
}

/// Writes any list of doc_id pairs as two-column TSV (gold or matched).
pub fn write_doc_pairs(
    pairs: &[(String, String)],
    header: Option<&str>,
    path: impl AsRef<Path>,
) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> io::Result<()> {
        if let Some(h) = header {
            writeln!(w, "# {h}")?;
        }
        for (s, t) in pairs {
            writeln!(w, "{s}\t{t}")?;
        }
        w.flush()
    };
    write(&mut w).map_err(io_err(path))
}

/// Reads a two-column doc_id TSV without duplicate checking (matched lists
/// produced by argmin matching may legitimately repeat a target).
pub fn read_doc_pairs(path: impl AsRef<Path>) -> Result<Vec<(String, String)>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    tsv_records(BufReader::new(file), path)
        .map(|rec| rec.and_then(|(line, fields)| two_fields(line, fields)))
        .collect()
}

/// Row-index pairs of translated sentences used to train metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelPairSet {
    pairs: Vec<(usize, usize)>,
}

impl ParallelPairSet {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self, CorpusError> {
        if pairs.is_empty() {
            return Err(CorpusError::EmptyPairs);
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Deterministic prefix of the first `n` pairs.
    pub fn prefix(&self, n: usize) -> Result<Self, CorpusError> {
        Self::new(self.pairs[..n.min(self.pairs.len())].to_vec())
    }

    pub fn validate(&self, src: &EmbeddingMatrix, tgt: &EmbeddingMatrix) -> Result<(), CorpusError> {
        for (index, &(s, t)) in self.pairs.iter().enumerate() {
            if s >= src.rows() || t >= tgt.rows() {
                return Err(CorpusError::PairOutOfBounds {
                    index,
                    src: s,
                    tgt: t,
                    src_rows: src.rows(),
                    tgt_rows: tgt.rows(),
                });
            }
        }
        Ok(())
    }
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<ParallelPairSet, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let mut pairs = Vec::new();
    for rec in tsv_records(BufReader::new(file), path) {
        let (line, fields) = rec?;
        let (a, b) = two_fields(line, fields)?;
        let parse = |s: &str| {
            s.trim().parse::<usize>().map_err(|e| CorpusError::Parse {
                line,
                message: format!("row index {s:?}: {e}"),
            })
        };
        pairs.push((parse(&a)?, parse(&b)?));
    }
    ParallelPairSet::new(pairs)
}

pub fn write_pairs(pairs: &ParallelPairSet, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> io::Result<()> {
        writeln!(w, "# src_row\ttgt_row")?;
        for (s, t) in &pairs.pairs {
            writeln!(w, "{s}\t{t}")?;
        }
        w.flush()
    };
    write(&mut w).map_err(io_err(path))
}
