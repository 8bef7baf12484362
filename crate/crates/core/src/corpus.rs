//! Document collection: JSONL ingestion, validation, persistence and lookup.
//!
//! A [`Corpus`] is immutable once built. Documents keep their verbatim text;
//! normalization happens in [`crate::textrep`].

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// On-disk layout version written to the manifest.
pub const LAYOUT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DOCUMENTS_FILE: &str = "documents.jsonl";
const LAYOUT_FORMAT: &str = "contextrec-corpus";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate document id {id:?} on lines {first_line} and {line}")]
    DuplicateId { id: String, first_line: usize, line: usize },
    #[error("line {line}: document {id:?}: {message}")]
    Invalid { line: usize, id: String, message: String },
    #[error(
        "line {line}: document {id:?}: citation to {target:?} points at \
         section {section}, paragraph {paragraph}, sentence {sentence} which does not exist"
    )]
    MarkerOutOfBounds {
        line: usize,
        id: String,
        target: String,
        section: usize,
        paragraph: usize,
        sentence: usize,
    },
    #[error("invalid corpus layout in {dir}: {message}")]
    Layout { dir: String, message: String },
    #[error("unsupported corpus layout version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corpus is corrupt: checksum mismatch (manifest {expected}, documents {found})")]
    Checksum { expected: String, found: String },
}

/// A section of a document: heading plus paragraphs of pre-segmented sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    #[serde(default)]
    pub heading: String,
    pub paragraphs: Vec<Vec<String>>,
}

/// Zero-based address of a sentence inside a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub section: usize,
    pub paragraph: usize,
    pub sentence: usize,
}

/// An in-text citation of `target` at a sentence position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationMarker {
    pub target: String,
    pub section: usize,
    pub paragraph: usize,
    pub sentence: usize,
    /// Set when `target` is not part of the corpus. Recomputed on every
    /// corpus build, never read from input.
    #[serde(skip)]
    pub dangling: bool,
}

impl CitationMarker {
    pub fn new(target: impl Into<String>, section: usize, paragraph: usize, sentence: usize) -> Self {
        Self {
            target: target.into(),
            section,
            paragraph,
            sentence,
            dangling: false,
        }
    }

    pub fn position(&self) -> Position {
        Position {
            section: self.section,
            paragraph: self.paragraph,
            sentence: self.sentence,
        }
    }
}

/// A curated statement: the owning document is similar to `target` in `context`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub context: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub sections: Vec<Section>,
    #[serde(default)]
    pub citations: Vec<CitationMarker>,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
}

impl Document {
    pub fn sentence(&self, pos: Position) -> Option<&str> {
        self.sections
            .get(pos.section)?
            .paragraphs
            .get(pos.paragraph)?
            .get(pos.sentence)
            .map(String::as_str)
    }

    /// All sentences in document order.
    pub fn sentences(&self) -> impl Iterator<Item = &str> {
        self.sections
            .iter()
            .flat_map(|s| s.paragraphs.iter())
            .flat_map(|p| p.iter())
            .map(String::as_str)
    }

    /// Title followed by every sentence, space separated.
    pub fn full_text(&self) -> String {
        let mut text = self.title.clone();
        for sentence in self.sentences() {
            if !text.is_empty() {
                text.push(' ');
            }
            text.push_str(sentence);
        }
        text
    }

    fn validate(&self, line: usize) -> Result<(), CorpusError> {
        let invalid = |message: String| CorpusError::Invalid {
            line,
            id: self.id.clone(),
            message,
        };
        if self.id.trim().is_empty() {
            return Err(invalid("empty document id".into()));
        }
        if self.sections.is_empty() {
            return Err(invalid("document has no sections".into()));
        }
        for (si, section) in self.sections.iter().enumerate() {
            if section.paragraphs.is_empty() {
                return Err(invalid(format!("section {si} has no paragraphs")));
            }
            for (pi, paragraph) in section.paragraphs.iter().enumerate() {
                if paragraph.is_empty() {
                    return Err(invalid(format!("section {si} paragraph {pi} has no sentences")));
                }
                if let Some(ti) = paragraph.iter().position(|s| s.trim().is_empty()) {
                    return Err(invalid(format!("section {si} paragraph {pi} sentence {ti} is empty")));
                }
            }
        }
        for marker in &self.citations {
            if self.sentence(marker.position()).is_none() {
                return Err(CorpusError::MarkerOutOfBounds {
                    line,
                    id: self.id.clone(),
                    target: marker.target.clone(),
                    section: marker.section,
                    paragraph: marker.paragraph,
                    sentence: marker.sentence,
                });
            }
        }
        Ok(())
    }
}

/// Counters produced by [`Corpus::stats`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub docs: usize,
    pub sections: usize,
    pub paragraphs: usize,
    pub sentences: usize,
    pub citations: usize,
    pub dangling: usize,
    pub annotations: usize,
}

/// Summary emitted by ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub docs: usize,
    pub citations: usize,
    pub dangling: usize,
}

/// Immutable, validated document collection with a dense ordinal index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    ordinals: HashMap<String, usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    documents: usize,
    checksum: String,
}

impl Corpus {
    /// Builds a corpus from in-memory documents, applying the same validation
    /// as ingestion. Line numbers in errors are 1-based positions in `documents`.
    pub fn from_documents(documents: Vec<Document>) -> Result<Self, CorpusError> {
        let numbered = documents.into_iter().enumerate().map(|(i, d)| (i + 1, d));
        Self::build(numbered)
    }

    fn build(documents: impl IntoIterator<Item = (usize, Document)>) -> Result<Self, CorpusError> {
        let mut docs = Vec::new();
        let mut ordinals = HashMap::new();
        let mut lines: Vec<usize> = Vec::new();
        for (line, doc) in documents {
            doc.validate(line)?;
            if let Some(&prev) = ordinals.get(&doc.id) {
                return Err(CorpusError::DuplicateId {
                    id: doc.id,
                    first_line: lines[prev],
                    line,
                });
            }
            ordinals.insert(doc.id.clone(), docs.len());
            lines.push(line);
            docs.push(doc);
        }
        for doc in &mut docs {
            for marker in &mut doc.citations {
                marker.dangling = !ordinals.contains_key(&marker.target);
            }
        }
        Ok(Self {
            documents: docs,
            ordinals,
        })
    }

    /// Parses JSONL text, one document per non-blank line.
    pub fn from_jsonl_str(text: &str) -> Result<Self, CorpusError> {
        let mut records = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let doc: Document = serde_json::from_str(raw).map_err(|e| CorpusError::Malformed {
                line,
                message: e.to_string(),
            })?;
            records.push((line, doc));
        }
        Self::build(records)
    }

    /// Reads a JSONL file and returns the corpus plus an ingestion report.
    pub fn ingest_jsonl(path: impl AsRef<Path>) -> Result<(Self, IngestReport), CorpusError> {
        let path = path.as_ref();
        let io_err = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = fs::File::open(path).map_err(io_err)?;
        let mut text = String::new();
        for line in BufReader::new(file).lines() {
            text.push_str(&line.map_err(io_err)?);
            text.push('\n');
        }
        let corpus = Self::from_jsonl_str(&text)?;
        let report = corpus.report();
        Ok((corpus, report))
    }

    pub fn report(&self) -> IngestReport {
        let stats = self.stats();
        IngestReport {
            docs: stats.docs,
            citations: stats.citations,
            dangling: stats.dangling,
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.ordinals.get(id).map(|&i| &self.documents[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ordinals.contains_key(id)
    }

    pub fn ordinal(&self, id: &str) -> Option<usize> {
        self.ordinals.get(id).copied()
    }

    pub fn by_ordinal(&self, ordinal: usize) -> Option<&Document> {
        self.documents.get(ordinal)
    }

    /// Documents in ordinal (ingestion) order.
    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.id.as_str())
    }

    pub fn stats(&self) -> CorpusStats {
        let mut stats = CorpusStats {
            docs: self.documents.len(),
            ..CorpusStats::default()
        };
        for doc in &self.documents {
            stats.sections += doc.sections.len();
            for section in &doc.sections {
                stats.paragraphs += section.paragraphs.len();
                stats.sentences += section.paragraphs.iter().map(Vec::len).sum::<usize>();
            }
            stats.citations += doc.citations.len();
            stats.dangling += doc.citations.iter().filter(|m| m.dangling).count();
            stats.annotations += doc.annotations.len();
        }
        stats
    }

    fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for doc in &self.documents {
            // Document serialization cannot fail: plain strings and integers.
            out.push_str(&serde_json::to_string(doc).expect("document serializes"));
            out.push('\n');
        }
        out
    }

    /// Writes `manifest.json` and `documents.jsonl` into `dir`, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), CorpusError> {
        let dir = dir.as_ref();
        let io_err = |path: &Path| {
            let path = path.display().to_string();
            move |source| CorpusError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let body = self.to_jsonl();
        let manifest = Manifest {
            format: LAYOUT_FORMAT.to_string(),
            version: LAYOUT_VERSION,
            documents: self.documents.len(),
            checksum: checksum(body.as_bytes()),
        };
        let docs_path = dir.join(DOCUMENTS_FILE);
        fs::write(&docs_path, body).map_err(io_err(&docs_path))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        let mut file = fs::File::create(&manifest_path).map_err(io_err(&manifest_path))?;
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        writeln!(file, "{json}").map_err(io_err(&manifest_path))?;
        Ok(())
    }

    /// Loads a corpus written by [`Corpus::save`], verifying version and checksum.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let dir = dir.as_ref();
        let layout = |message: String| CorpusError::Layout {
            dir: dir.display().to_string(),
            message,
        };
        let manifest_path = dir.join(MANIFEST_FILE);
        if !manifest_path.is_file() {
            return Err(layout(format!("missing {MANIFEST_FILE}")));
        }
        let raw = fs::read_to_string(&manifest_path).map_err(|source| CorpusError::Io {
            path: manifest_path.display().to_string(),
            source,
        })?;
        let manifest: Manifest = serde_json::from_str(&raw).map_err(|e| layout(format!("unreadable manifest: {e}")))?;
        if manifest.format != LAYOUT_FORMAT {
            return Err(layout(format!("unknown format {:?}", manifest.format)));
        }
        if manifest.version != LAYOUT_VERSION {
            return Err(CorpusError::VersionMismatch {
                found: manifest.version,
                expected: LAYOUT_VERSION,
            });
        }
        let docs_path = dir.join(DOCUMENTS_FILE);
        let body = fs::read(&docs_path).map_err(|source| CorpusError::Io {
            path: docs_path.display().to_string(),
            source,
        })?;
        let found = checksum(&body);
        if found != manifest.checksum {
            return Err(CorpusError::Checksum {
                expected: manifest.checksum,
                found,
            });
        }
        let text = String::from_utf8(body).map_err(|e| layout(format!("documents not UTF-8: {e}")))?;
        let corpus = Self::from_jsonl_str(&text)?;
        if corpus.len() != manifest.documents {
            return Err(layout(format!(
                "manifest lists {} documents, found {}",
                manifest.documents,
                corpus.len()
            )));
        }
        Ok(corpus)
    }
}

fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
