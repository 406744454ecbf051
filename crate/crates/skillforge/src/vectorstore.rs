//! Persistence and querying of trained skill vectors.
//!
//! Queries run over the input-side vectors only. Similarity defaults to
//! cosine; dot-product and euclidean orderings are available behind
//! [`Metric`] for experimentation. A store is immutable once built, so any
//! number of readers may query it concurrently.
//!
//! Two on-disk formats:
//!
//! * binary: magic `SK2V`, u32 version, u32 V, u32 d, then V length-prefixed
//!   UTF-8 strings in index order, then `V·d` little-endian f32 row-major —
//!   round-trips bit-exactly;
//! * text: header line `V d`, then `skill v1 … vd` per line, spaces inside
//!   skills written as underscores — round-trips to at least six significant
//!   digits.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::lexicon::Normalizer;
use crate::trainer::EmbeddingModel;

const MAGIC: &[u8; 4] = b"SK2V";
const FORMAT_VERSION: u32 = 1;

/// A scored query result. `index` points into the store vocabulary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub score: f64,
}

/// Similarity orderings offered by the query API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Cosine,
    /// Raw dot product; not scale invariant.
    Dot,
    /// Negated euclidean distance, so larger is still better.
    Euclidean,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("unknown skill {query:?}{}", hint_suffix(.hints))]
    UnknownSkill { query: String, hints: Vec<String> },
    #[error("skill {skill:?} has a zero-norm vector and cannot be queried")]
    ZeroNorm { skill: String },
    #[error("vectors have different dimensions ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("k must be positive")]
    ZeroK,
    #[error("{context}: bad magic bytes (not a vector store)")]
    BadMagic { context: String },
    #[error("{context}: unsupported format version {version}")]
    BadVersion { context: String, version: u32 },
    #[error("{context}: {detail}")]
    Corrupt { context: String, detail: String },
    #[error("duplicate skill {skill:?} at row {row}")]
    DuplicateSkill { skill: String, row: usize },
}

fn hint_suffix(hints: &[String]) -> String {
    if hints.is_empty() {
        String::new()
    } else {
        format!(" (closest: {})", hints.join(", "))
    }
}

impl StoreError {
    pub fn is_io(&self) -> bool {
        matches!(self, StoreError::Io { .. })
    }
}

/// Immutable collection of named vectors plus the lookup index.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Vec<f32>,
    dim: usize,
    norms: Vec<f64>,
    /// Digest of the training configuration when built from a model; not
    /// persisted by the on-disk formats (the run manifest carries it).
    pub config_digest: Option<String>,
}

impl EmbeddingStore {
    /// Builds a store from rows; row count and word count must agree.
    pub fn from_rows(words: Vec<String>, matrix: Vec<f32>, dim: usize) -> Result<Self, StoreError> {
        if words.len() * dim != matrix.len() {
            return Err(StoreError::Corrupt {
                context: "store construction".into(),
                detail: format!(
                    "{} words × dim {} != {} matrix entries",
                    words.len(),
                    dim,
                    matrix.len()
                ),
            });
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(StoreError::DuplicateSkill {
                    skill: w.clone(),
                    row: i + 1,
                });
            }
        }
        let norms = (0..words.len())
            .map(|r| {
                matrix[r * dim..(r + 1) * dim]
                    .iter()
                    .map(|&x| (x as f64) * (x as f64))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        Ok(EmbeddingStore {
            words,
            index,
            matrix,
            dim,
            norms,
            config_digest: None,
        })
    }

    /// Extracts the query-side vectors of a trained model.
    pub fn from_model(model: &EmbeddingModel) -> Result<Self, StoreError> {
        let words: Vec<String> = model
            .vocab
            .entries()
            .iter()
            .map(|e| e.canonical.clone())
            .collect();
        let matrix: Vec<f32> = model.w_in.to_vec().iter().map(|&x| x as f32).collect();
        let mut store = EmbeddingStore::from_rows(words, matrix, model.config.dim)?;
        store.config_digest = Some(model.config.digest());
        Ok(store)
    }

    /// Output-side vectors of a model, for research use.
    pub fn from_model_output(model: &EmbeddingModel) -> Result<Self, StoreError> {
        let words: Vec<String> = model
            .vocab
            .entries()
            .iter()
            .map(|e| e.canonical.clone())
            .collect();
        let matrix: Vec<f32> = model.w_out.to_vec().iter().map(|&x| x as f32).collect();
        let mut store = EmbeddingStore::from_rows(words, matrix, model.config.dim)?;
        store.config_digest = Some(model.config.digest());
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        self.words.get(index).map(String::as_str)
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.matrix[index * self.dim..(index + 1) * self.dim]
    }

    /// Rows whose norm is zero are flagged at load and never admitted to
    /// queries.
    pub fn is_zero_norm(&self, index: usize) -> bool {
        self.norms[index] == 0.0
    }

    /// Looks a query string up: exact form first, then the cleaned form.
    pub fn resolve(&self, query: &str, normalizer: &Normalizer) -> Option<usize> {
        if let Some(&i) = self.index.get(query) {
            return Some(i);
        }
        let cleaned = normalizer.normalize(query);
        if cleaned.is_empty() {
            return None;
        }
        self.index.get(&cleaned).copied()
    }

    fn resolve_or_hint(&self, query: &str, normalizer: &Normalizer) -> Result<usize, StoreError> {
        self.resolve(query, normalizer).ok_or_else(|| {
            let cleaned = normalizer.normalize(query);
            let probe = if cleaned.is_empty() { query } else { &cleaned };
            StoreError::UnknownSkill {
                query: query.to_string(),
                hints: self.closest_by_edit_distance(probe, 3),
            }
        })
    }

    fn closest_by_edit_distance(&self, query: &str, n: usize) -> Vec<String> {
        let mut scored: Vec<(usize, &String)> = self
            .words
            .iter()
            .map(|w| (edit_distance(query, w), w))
            .collect();
        scored.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        scored.into_iter().take(n).map(|(_, w)| w.clone()).collect()
    }

    /// Content digest over the canonical binary serialization.
    pub fn digest(&self) -> String {
        let mut bytes = Vec::new();
        self.save_binary(&mut bytes).expect("in-memory write");
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn save_binary(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.words.len() as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for word in &self.words {
            let bytes = word.as_bytes();
            w.write_all(&(bytes.len() as u32).to_le_bytes())?;
            w.write_all(bytes)?;
        }
        for &x in &self.matrix {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load_binary(r: &mut impl Read, origin: &str) -> Result<Self, StoreError> {
        let ctx = |what: &str| format!("{origin}: {what}");
        let io_err = |source: io::Error, what: &str| StoreError::Corrupt {
            context: ctx(what),
            detail: source.to_string(),
        };

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|e| io_err(e, "header"))?;
        if &magic != MAGIC {
            return Err(StoreError::BadMagic { context: ctx("header") });
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |r: &mut dyn Read, what: &str| -> Result<u32, StoreError> {
            r.read_exact(&mut u32buf)
                .map_err(|e| io_err(e, what))?;
            Ok(u32::from_le_bytes(u32buf))
        };
        let version = read_u32(r, "version field")?;
        if version != FORMAT_VERSION {
            return Err(StoreError::BadVersion {
                context: ctx("header"),
                version,
            });
        }
        let v = read_u32(r, "vocab size field")? as usize;
        let dim = read_u32(r, "dimension field")? as usize;

        let mut words = Vec::with_capacity(v);
        for i in 0..v {
            let what = format!("vocab entry {}", i + 1);
            let len = read_u32(r, &what)? as usize;
            if len > (1 << 20) {
                return Err(StoreError::Corrupt {
                    context: ctx(&what),
                    detail: format!("implausible string length {len}"),
                });
            }
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(|e| io_err(e, &what))?;
            let word = String::from_utf8(buf).map_err(|e| StoreError::Corrupt {
                context: ctx(&what),
                detail: e.to_string(),
            })?;
            words.push(word);
        }

        let mut matrix = vec![0f32; v * dim];
        let mut f32buf = [0u8; 4];
        for row in 0..v {
            for col in 0..dim {
                r.read_exact(&mut f32buf).map_err(|e| {
                    io_err(e, &format!("matrix row {} column {}", row + 1, col + 1))
                })?;
                matrix[row * dim + col] = f32::from_le_bytes(f32buf);
            }
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(|e| io_err(e, "end of file"))? != 0 {
            return Err(StoreError::Corrupt {
                context: ctx("end of file"),
                detail: "trailing bytes after matrix".into(),
            });
        }
        EmbeddingStore::from_rows(words, matrix, dim)
    }

    pub fn save_text(&self, w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "{} {}", self.words.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            write!(w, "{}", word.replace(' ', "_"))?;
            for &x in self.row(i) {
                write!(w, " {x:.6e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn load_text(r: impl BufRead, origin: &str) -> Result<Self, StoreError> {
        let corrupt = |line: usize, detail: String| StoreError::Corrupt {
            context: format!("{origin}: line {line}"),
            detail,
        };
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| corrupt(1, "empty file".into()))?;
        let header = header.map_err(|e| corrupt(1, e.to_string()))?;
        let mut parts = header.split_whitespace();
        let v: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| corrupt(1, format!("bad header {header:?}, expected `V d`")))?;
        let dim: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| corrupt(1, format!("bad header {header:?}, expected `V d`")))?;
        if parts.next().is_some() {
            return Err(corrupt(1, format!("bad header {header:?}, expected `V d`")));
        }

        let mut words = Vec::with_capacity(v);
        let mut matrix = Vec::with_capacity(v * dim);
        let mut rows = 0usize;
        for (n, line) in lines {
            let lineno = n + 1;
            let line = line.map_err(|e| corrupt(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            rows += 1;
            if rows > v {
                return Err(corrupt(
                    lineno,
                    format!("more than the declared {v} rows"),
                ));
            }
            let mut fields = line.split_whitespace();
            let word = fields
                .next()
                .ok_or_else(|| corrupt(lineno, "missing skill".into()))?;
            let values: Vec<&str> = fields.collect();
            if values.len() != dim {
                return Err(corrupt(
                    lineno,
                    format!("expected {dim} components, found {}", values.len()),
                ));
            }
            for (col, tok) in values.iter().enumerate() {
                let x: f32 = tok.parse().map_err(|_| {
                    corrupt(lineno, format!("component {} is not a number: {tok:?}", col + 1))
                })?;
                matrix.push(x);
            }
            words.push(word.replace('_', " "));
        }
        if rows != v {
            return Err(StoreError::Corrupt {
                context: format!("{origin}: row {}", rows + 1),
                detail: format!("header declares {v} rows but file has {rows}"),
            });
        }
        EmbeddingStore::from_rows(words, matrix, dim)
    }

    /// Saves to a path: `.txt`/`.vec` pick the text format, anything else
    /// the binary format.
    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let to_io = |source: io::Error| StoreError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = File::create(path).map_err(to_io)?;
        let mut w = BufWriter::new(file);
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") | Some("vec") => self.save_text(&mut w).map_err(to_io)?,
            _ => self.save_binary(&mut w).map_err(to_io)?,
        }
        w.flush().map_err(to_io)
    }

    /// Loads from a path, sniffing the binary magic to pick the format.
    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let to_io = |source: io::Error| StoreError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut file = BufReader::new(File::open(path).map_err(to_io)?);
        let head = file.fill_buf().map_err(to_io)?;
        let origin = path.display().to_string();
        if head.starts_with(MAGIC) {
            EmbeddingStore::load_binary(&mut file, &origin)
        } else {
            EmbeddingStore::load_text(file, &origin)
        }
    }
}

/// Cosine similarity of two vectors, clamped into `[−1, 1]` against
/// floating-point drift. Zero-norm inputs are an error.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64, StoreError> {
    if u.len() != v.len() {
        return Err(StoreError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let mut dot = 0.0f64;
    let mut nu = 0.0f64;
    let mut nv = 0.0f64;
    for (&a, &b) in u.iter().zip(v) {
        dot += a as f64 * b as f64;
        nu += a as f64 * a as f64;
        nv += b as f64 * b as f64;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(StoreError::ZeroNorm {
            skill: String::new(),
        });
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

fn score_f64(query: &[f64], row: &[f32], metric: Metric) -> f64 {
    match metric {
        Metric::Cosine => {
            let mut dot = 0.0;
            let mut nq = 0.0;
            let mut nr = 0.0;
            for (&a, &b) in query.iter().zip(row) {
                dot += a * b as f64;
                nq += a * a;
                nr += b as f64 * b as f64;
            }
            (dot / (nq.sqrt() * nr.sqrt())).clamp(-1.0, 1.0)
        }
        Metric::Dot => query.iter().zip(row).map(|(&a, &b)| a * b as f64).sum(),
        Metric::Euclidean => {
            -query
                .iter()
                .zip(row)
                .map(|(&a, &b)| (a - b as f64) * (a - b as f64))
                .sum::<f64>()
                .sqrt()
        }
    }
}

/// Ranks candidates against a query vector, excluding `exclude` indices and
/// zero-norm rows. Descending score; ties broken by canonical string.
fn rank(
    store: &EmbeddingStore,
    query_vec: &[f64],
    exclude: &[usize],
    k: usize,
    metric: Metric,
) -> Vec<Neighbor> {
    // Candidate entry ordered so the *worst* is the smallest; the heap keeps
    // the best k by evicting its minimum.
    struct Entry<'a> {
        score: f64,
        word: &'a str,
        index: usize,
    }
    impl PartialEq for Entry<'_> {
        fn eq(&self, other: &Self) -> bool {
            self.score == other.score && self.word == other.word
        }
    }
    impl Eq for Entry<'_> {}
    impl Ord for Entry<'_> {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            // Higher score is better; for equal scores a lexicographically
            // smaller word is better. `Reverse` below flips it for the heap.
            self.score
                .total_cmp(&other.score)
                .then_with(|| other.word.cmp(self.word))
        }
    }
    impl PartialOrd for Entry<'_> {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut heap: BinaryHeap<Reverse<Entry>> = BinaryHeap::with_capacity(k + 1);
    for i in 0..store.len() {
        if exclude.contains(&i) || store.is_zero_norm(i) {
            continue;
        }
        let score = score_f64(query_vec, store.row(i), metric);
        heap.push(Reverse(Entry {
            score,
            word: &store.words[i],
            index: i,
        }));
        if heap.len() > k {
            heap.pop();
        }
    }
    let mut out: Vec<Neighbor> = heap
        .into_iter()
        .map(|Reverse(e)| Neighbor {
            index: e.index,
            score: e.score,
        })
        .collect();
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| store.words[a.index].cmp(&store.words[b.index]))
    });
    out
}

/// Top-k nearest skills to a query string, excluding the query itself.
pub fn top_k(
    query: &str,
    k: usize,
    store: &EmbeddingStore,
    normalizer: &Normalizer,
) -> Result<Vec<Neighbor>, StoreError> {
    top_k_with(query, k, store, normalizer, Metric::Cosine)
}

pub fn top_k_with(
    query: &str,
    k: usize,
    store: &EmbeddingStore,
    normalizer: &Normalizer,
    metric: Metric,
) -> Result<Vec<Neighbor>, StoreError> {
    if k == 0 {
        return Err(StoreError::ZeroK);
    }
    let qi = store.resolve_or_hint(query, normalizer)?;
    if store.is_zero_norm(qi) {
        return Err(StoreError::ZeroNorm {
            skill: store.words[qi].clone(),
        });
    }
    let query_vec: Vec<f64> = store.row(qi).iter().map(|&x| x as f64).collect();
    Ok(rank(store, &query_vec, &[qi], k, metric))
}

/// Nearest skills to `v(b) − v(a) + v(c)`, excluding all three inputs.
pub fn analogy(
    a: &str,
    b: &str,
    c: &str,
    k: usize,
    store: &EmbeddingStore,
    normalizer: &Normalizer,
) -> Result<Vec<Neighbor>, StoreError> {
    analogy_with(a, b, c, k, store, normalizer, Metric::Cosine)
}

pub fn analogy_with(
    a: &str,
    b: &str,
    c: &str,
    k: usize,
    store: &EmbeddingStore,
    normalizer: &Normalizer,
    metric: Metric,
) -> Result<Vec<Neighbor>, StoreError> {
    if k == 0 {
        return Err(StoreError::ZeroK);
    }
    let ia = store.resolve_or_hint(a, normalizer)?;
    let ib = store.resolve_or_hint(b, normalizer)?;
    let ic = store.resolve_or_hint(c, normalizer)?;
    let dim = store.dim();
    let mut target = vec![0.0f64; dim];
    for col in 0..dim {
        target[col] = store.row(ib)[col] as f64 - store.row(ia)[col] as f64
            + store.row(ic)[col] as f64;
    }
    if metric == Metric::Cosine && target.iter().all(|&x| x == 0.0) {
        return Err(StoreError::ZeroNorm {
            skill: format!("analogy target {b} - {a} + {c}"),
        });
    }
    Ok(rank(store, &target, &[ia, ib, ic], k, metric))
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
