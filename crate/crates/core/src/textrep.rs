//! Text representations: tokenization, TF-IDF sparse vectors, smooth
//! inverse-frequency (SIF) averaged word vectors, hybrid text/link
//! concatenation and cosine similarity.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::corpus::{Corpus, Document};

/// Default SIF smoothing constant.
pub const DEFAULT_SMOOTHING: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("alpha must lie in [0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("non-finite value in vector")]
    NonFinite,
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("embedding file {path}: line {line}: {message}")]
    EmbeddingFormat { path: String, line: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Sparse vector of `(term id, weight)` pairs, strictly increasing ids, no zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Builds from arbitrary entries: duplicates are summed, zeros dropped.
    pub fn from_entries(entries: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (id, w) in entries {
            *acc.entry(id).or_insert(0.0) += w;
        }
        Self {
            entries: acc.into_iter().filter(|&(_, w)| w != 0.0).collect(),
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn get(&self, term: u32) -> f64 {
        self.entries
            .binary_search_by_key(&term, |&(t, _)| t)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_entries(self.entries.iter().map(|&(t, w)| (t, w * factor)))
    }
}

/// Dense real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Result<Self, TextError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TextError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }

    /// Unit-length copy; the zero vector stays zero.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            self.clone()
        } else {
            self.scale(1.0 / n)
        }
    }
}

/// Inner-product space operations needed for cosine similarity.
pub trait VectorSpace {
    fn dot(&self, other: &Self) -> Result<f64, TextError>;
    fn norm(&self) -> f64;
}

impl VectorSpace for SparseVector {
    fn dot(&self, other: &Self) -> Result<f64, TextError> {
        let (mut i, mut j, mut sum) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    sum += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(sum)
    }

    fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }
}

impl VectorSpace for DenseVector {
    fn dot(&self, other: &Self) -> Result<f64, TextError> {
        if self.dim() != other.dim() {
            return Err(TextError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine<V: VectorSpace>(a: &V, b: &V) -> Result<f64, TextError> {
    let dot = a.dot(b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Term dictionary with document frequencies and unigram probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    ids: HashMap<String, u32>,
    doc_freq: Vec<usize>,
    term_count: Vec<u64>,
    total_tokens: u64,
    num_docs: usize,
}

impl Vocabulary {
    /// Builds from already tokenized documents. Term ids follow lexicographic order.
    pub fn from_token_lists(docs: &[Vec<String>]) -> Self {
        let mut counts: BTreeMap<&str, (usize, u64)> = BTreeMap::new();
        for tokens in docs {
            let mut seen: HashMap<&str, ()> = HashMap::new();
            for t in tokens {
                let entry = counts.entry(t.as_str()).or_insert((0, 0));
                entry.1 += 1;
                if seen.insert(t.as_str(), ()).is_none() {
                    entry.0 += 1;
                }
            }
        }
        let mut vocab = Self {
            terms: Vec::with_capacity(counts.len()),
            ids: HashMap::with_capacity(counts.len()),
            doc_freq: Vec::with_capacity(counts.len()),
            term_count: Vec::with_capacity(counts.len()),
            total_tokens: 0,
            num_docs: docs.len(),
        };
        for (i, (term, (df, count))) in counts.into_iter().enumerate() {
            vocab.terms.push(term.to_string());
            vocab.ids.insert(term.to_string(), i as u32);
            vocab.doc_freq.push(df);
            vocab.term_count.push(count);
            vocab.total_tokens += count;
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.ids.get(term).copied()
    }

    pub fn term(&self, id: u32) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.id(term).map(|i| self.doc_freq[i as usize]).unwrap_or(0)
    }

    /// `ln(N / df)`; zero for unknown terms.
    pub fn idf(&self, term: &str) -> f64 {
        self.id(term).map(|i| self.idf_by_id(i)).unwrap_or(0.0)
    }

    fn idf_by_id(&self, id: u32) -> f64 {
        (self.num_docs as f64 / self.doc_freq[id as usize] as f64).ln()
    }

    /// Unigram probability of a term over all corpus tokens; zero if unseen.
    pub fn probability(&self, term: &str) -> f64 {
        match self.id(term) {
            Some(i) if self.total_tokens > 0 => self.term_count[i as usize] as f64 / self.total_tokens as f64,
            _ => 0.0,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    /// TF-IDF vector of arbitrary text against this vocabulary; unknown terms are skipped.
    pub fn vectorize(&self, text: &str) -> SparseVector {
        self.vectorize_tokens(&tokenize(text))
    }

    pub fn vectorize_tokens(&self, tokens: &[String]) -> SparseVector {
        let mut tf: BTreeMap<u32, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(id) = self.id(t) {
                *tf.entry(id).or_insert(0.0) += 1.0;
            }
        }
        SparseVector::from_entries(tf.into_iter().map(|(id, count)| (id, count * self.idf_by_id(id))))
    }
}

/// Builds the vocabulary and one TF-IDF vector per document (ordinal order).
/// Weight is `count(t, d) * ln(N / df(t))`; text is title plus all sentences.
pub fn build_tfidf(corpus: &Corpus) -> Result<(Vocabulary, Vec<SparseVector>), TextError> {
    if corpus.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    let tokens: Vec<Vec<String>> = corpus.documents().iter().map(|d| tokenize(&d.full_text())).collect();
    let vocab = Vocabulary::from_token_lists(&tokens);
    let vectors = tokens.iter().map(|t| vocab.vectorize_tokens(t)).collect();
    Ok((vocab, vectors))
}

/// Word vectors used for SIF document embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, DenseVector>,
    smoothing: f64,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
            smoothing: DEFAULT_SMOOTHING,
        }
    }

    pub fn with_smoothing(mut self, a: f64) -> Self {
        self.smoothing = a;
        self
    }

    pub fn insert(&mut self, term: impl Into<String>, vector: DenseVector) -> Result<(), TextError> {
        if vector.dim() != self.dim {
            return Err(TextError::DimensionMismatch {
                left: self.dim,
                right: vector.dim(),
            });
        }
        self.vectors.insert(term.into(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<&DenseVector> {
        self.vectors.get(term)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseVector)> {
        self.vectors.iter().map(|(t, v)| (t.as_str(), v))
    }

    /// Parses `term v1 ... vd` lines. A leading `count dim` header is detected
    /// when the first line holds two integers and the next line has `dim + 1` fields.
    pub fn parse(text: &str, source: &str) -> Result<Self, TextError> {
        let lines: Vec<(usize, Vec<&str>)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
            .filter(|(_, f)| !f.is_empty())
            .collect();
        let err = |line: usize, message: String| TextError::EmbeddingFormat {
            path: source.to_string(),
            line,
            message,
        };
        let mut body = &lines[..];
        if let Some((_, first)) = lines.first() {
            if first.len() == 2 {
                if let (Ok(_), Ok(dim)) = (first[0].parse::<usize>(), first[1].parse::<usize>()) {
                    let next_arity = lines.get(1).map(|(_, f)| f.len());
                    if next_arity.is_none_or(|a| a == dim + 1) {
                        body = &lines[1..];
                    }
                }
            }
        }
        let Some((_, first)) = body.first() else {
            return Ok(Self::new(0));
        };
        let dim = first.len() - 1;
        if dim == 0 {
            return Err(err(body[0].0, "line has no vector components".into()));
        }
        let mut table = Self::new(dim);
        for (line, fields) in body {
            if fields.len() != dim + 1 {
                return Err(err(
                    *line,
                    format!("expected {} fields, found {}", dim + 1, fields.len()),
                ));
            }
            let values = fields[1..]
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(*line, e.to_string()))?;
            let vector = DenseVector::new(values).map_err(|_| err(*line, "non-finite component".into()))?;
            table.vectors.insert(fields[0].to_string(), vector);
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TextError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| TextError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Serializes with a `count dim` header, terms sorted.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.vectors.len(), self.dim);
        let sorted: BTreeMap<&String, &DenseVector> = self.vectors.iter().collect();
        for (term, vector) in sorted {
            out.push_str(term);
            for v in vector.as_slice() {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// SIF weighted average of the word vectors of `text`:
/// `(1/|T|) Σ a/(a + p(t)) · vec(t)` over the in-table tokens `T`.
pub fn sif_embed_text(text: &str, vocab: &Vocabulary, table: &EmbeddingTable) -> DenseVector {
    let a = table.smoothing();
    let mut sum = vec![0.0; table.dim()];
    let mut count = 0usize;
    for token in tokenize(text) {
        let Some(vector) = table.get(&token) else {
            continue;
        };
        let weight = a / (a + vocab.probability(&token));
        for (s, v) in sum.iter_mut().zip(vector.as_slice()) {
            *s += weight * v;
        }
        count += 1;
    }
    if count > 0 {
        let inv = 1.0 / count as f64;
        sum.iter_mut().for_each(|s| *s *= inv);
    }
    DenseVector(sum)
}

pub fn sif_embed(doc: &Document, vocab: &Vocabulary, table: &EmbeddingTable) -> DenseVector {
    sif_embed_text(&doc.full_text(), vocab, table)
}

/// Removes the projection on the first principal direction (uncentered) of
/// the given vectors. Power iteration on `XᵀX`; no-op for all-zero input.
pub fn remove_common_component(vectors: &mut [DenseVector]) {
    let Some(dim) = vectors.first().map(DenseVector::dim) else {
        return;
    };
    let mut u = vec![1.0 / (dim as f64).sqrt(); dim];
    for _ in 0..200 {
        let mut next = vec![0.0; dim];
        for v in vectors.iter() {
            let proj: f64 = v.0.iter().zip(&u).map(|(a, b)| a * b).sum();
            for (n, x) in next.iter_mut().zip(&v.0) {
                *n += proj * x;
            }
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return;
        }
        next.iter_mut().for_each(|x| *x /= norm);
        let delta: f64 = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).sum();
        u = next;
        if delta < 1e-12 {
            break;
        }
    }
    for v in vectors.iter_mut() {
        let proj: f64 = v.0.iter().zip(&u).map(|(a, b)| a * b).sum();
        for (x, d) in v.0.iter_mut().zip(&u) {
            *x -= proj * d;
        }
    }
}

pub const DEFAULT_ALPHA: f64 = 0.5;

/// `[(1 - alpha) · text/‖text‖ ; alpha · link/‖link‖]`, zero parts stay zero.
pub fn hybrid_concat(text: &DenseVector, link: &DenseVector, alpha: f64) -> Result<DenseVector, TextError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(TextError::AlphaOutOfRange(alpha));
    }
    let mut out = text.normalized().scale(1.0 - alpha).0;
    out.extend(link.normalized().scale(alpha).0);
    DenseVector::new(out)
}

/// The `k` nearest documents to `seed` by cosine, seed excluded, ties by ascending id.
pub fn top_k_neighbors<V: VectorSpace>(
    seed: &str,
    vectors: &BTreeMap<String, V>,
    k: usize,
) -> Result<Vec<(String, f64)>, TextError> {
    if k == 0 {
        return Err(TextError::ZeroK);
    }
    let query = vectors
        .get(seed)
        .ok_or_else(|| TextError::UnknownDocument(seed.to_string()))?;
    let mut scored = Vec::with_capacity(vectors.len());
    for (id, v) in vectors {
        if id != seed {
            scored.push((id.clone(), cosine(query, v)?));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}
