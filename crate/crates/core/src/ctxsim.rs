//! The contextual similarity relation `sim(seed, target, context) ∈ [0, 1]`.
//!
//! Scored context edges come from four sources (curated annotations,
//! section-level text similarity, keyword rules over citation sentences and
//! the pair classifier) and are merged into one [`ContextGraph`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::linkrep::CitationGraph;
use crate::pairclass::{self, PairError, SoftmaxModel, NONE_LABEL};
use crate::textrep::{self, DenseVector, SparseVector, Vocabulary};

#[derive(Debug, Error)]
pub enum CtxError {
    #[error("invalid context set: {0}")]
    InvalidContextSet(String),
    #[error("unknown context {0:?}")]
    UnknownContext(String),
    #[error("edge relates {0:?} to itself")]
    SelfEdge(String),
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("edge has no provenance")]
    MissingProvenance,
    #[error("context sets differ: {left} vs {right}")]
    ContextSetMismatch { left: ContextSet, right: ContextSet },
    #[error("model classes {found:?} do not match contexts plus \"none\" ({expected:?})")]
    ClassSetMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("invalid heading pattern {pattern:?}: {message}")]
    BadPattern { pattern: String, message: String },
    #[error("nothing to merge")]
    EmptyMerge,
    #[error("{source_name}: line {line}: {message}")]
    Format {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Pair(#[from] PairError),
}

/// Ordered, non-empty set of distinct context labels; "none" is reserved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ContextSet {
    labels: Vec<String>,
}

impl ContextSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self, CtxError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(CtxError::InvalidContextSet("no contexts".into()));
        }
        let mut seen = BTreeSet::new();
        for label in &labels {
            if label.trim().is_empty() || label.chars().any(char::is_whitespace) {
                return Err(CtxError::InvalidContextSet(format!("bad label {label:?}")));
            }
            if label == NONE_LABEL {
                return Err(CtxError::InvalidContextSet(format!("{NONE_LABEL:?} is reserved")));
            }
            if !seen.insert(label.as_str()) {
                return Err(CtxError::InvalidContextSet(format!("duplicate label {label:?}")));
            }
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn check(&self, label: &str) -> Result<(), CtxError> {
        if self.contains(label) {
            Ok(())
        } else {
            Err(CtxError::UnknownContext(label.to_string()))
        }
    }
}

impl TryFrom<Vec<String>> for ContextSet {
    type Error = CtxError;
    fn try_from(labels: Vec<String>) -> Result<Self, CtxError> {
        Self::new(labels)
    }
}

impl From<ContextSet> for Vec<String> {
    fn from(set: ContextSet) -> Self {
        set.labels
    }
}

impl fmt::Display for ContextSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.labels.join(", "))
    }
}

/// Which construction path asserted an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Annotation,
    Segment,
    CitationContext,
    Classifier,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Annotation => "annotation",
            Provenance::Segment => "segment",
            Provenance::CitationContext => "citation-context",
            Provenance::Classifier => "classifier",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEdge {
    #[serde(rename = "s")]
    pub source: String,
    #[serde(rename = "t")]
    pub target: String,
    #[serde(rename = "c")]
    pub context: String,
    pub score: f64,
    #[serde(rename = "prov")]
    pub provenance: BTreeSet<Provenance>,
}

impl ContextEdge {
    pub fn new(
        source: impl Into<String>,
        target: impl Into<String>,
        context: impl Into<String>,
        score: f64,
        provenance: Provenance,
    ) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            context: context.into(),
            score,
            provenance: BTreeSet::from([provenance]),
        }
    }
}

type EdgeKey = (String, String, String);

/// Directed edge store with symmetric lookup, indexed by source, target and context.
/// At most one edge per (source, target, context); repeated inserts keep the
/// maximum score and the union of provenances.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextGraph {
    contexts: ContextSet,
    edges: BTreeMap<EdgeKey, ContextEdge>,
    by_source: BTreeMap<String, BTreeSet<EdgeKey>>,
    by_target: BTreeMap<String, BTreeSet<EdgeKey>>,
    by_context: BTreeMap<String, BTreeSet<EdgeKey>>,
}

impl ContextGraph {
    pub fn new(contexts: ContextSet) -> Self {
        Self {
            contexts,
            edges: BTreeMap::new(),
            by_source: BTreeMap::new(),
            by_target: BTreeMap::new(),
            by_context: BTreeMap::new(),
        }
    }

    pub fn contexts(&self) -> &ContextSet {
        &self.contexts
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn insert(&mut self, edge: ContextEdge) -> Result<(), CtxError> {
        if edge.source == edge.target {
            return Err(CtxError::SelfEdge(edge.source));
        }
        self.contexts.check(&edge.context)?;
        if !(0.0..=1.0).contains(&edge.score) {
            return Err(CtxError::ScoreOutOfRange(edge.score));
        }
        if edge.provenance.is_empty() {
            return Err(CtxError::MissingProvenance);
        }
        let key = (edge.source.clone(), edge.target.clone(), edge.context.clone());
        if let Some(existing) = self.edges.get_mut(&key) {
            existing.score = existing.score.max(edge.score);
            existing.provenance.extend(edge.provenance);
            return Ok(());
        }
        self.by_source.entry(key.0.clone()).or_default().insert(key.clone());
        self.by_target.entry(key.1.clone()).or_default().insert(key.clone());
        self.by_context.entry(key.2.clone()).or_default().insert(key.clone());
        self.edges.insert(key, edge);
        Ok(())
    }

    /// All edges ordered by (source, target, context).
    pub fn edges(&self) -> impl Iterator<Item = &ContextEdge> {
        self.edges.values()
    }

    fn via<'a>(
        &'a self,
        index: &'a BTreeMap<String, BTreeSet<EdgeKey>>,
        key: &str,
    ) -> impl Iterator<Item = &'a ContextEdge> {
        index.get(key).into_iter().flatten().map(move |k| &self.edges[k])
    }

    pub fn edges_from(&self, source: &str) -> impl Iterator<Item = &ContextEdge> {
        self.via(&self.by_source, source)
    }

    pub fn edges_to(&self, target: &str) -> impl Iterator<Item = &ContextEdge> {
        self.via(&self.by_target, target)
    }

    pub fn edges_in(&self, context: &str) -> impl Iterator<Item = &ContextEdge> {
        self.via(&self.by_context, context)
    }

    pub fn edge(&self, source: &str, target: &str, context: &str) -> Option<&ContextEdge> {
        self.edges
            .get(&(source.to_string(), target.to_string(), context.to_string()))
    }

    /// Maximum stored score over both directions; 0 when no edge exists.
    pub fn sim(&self, seed: &str, target: &str, context: &str) -> Result<f64, CtxError> {
        self.contexts.check(context)?;
        Ok(self.sim_unchecked(seed, target, context))
    }

    fn sim_unchecked(&self, seed: &str, target: &str, context: &str) -> f64 {
        [self.edge(seed, target, context), self.edge(target, seed, context)]
            .into_iter()
            .flatten()
            .map(|e| e.score)
            .fold(0.0, f64::max)
    }

    /// Provenances of the edges between two documents in one context, both directions.
    pub fn provenance_between(&self, a: &str, b: &str, context: &str) -> BTreeSet<Provenance> {
        [self.edge(a, b, context), self.edge(b, a, context)]
            .into_iter()
            .flatten()
            .flat_map(|e| e.provenance.iter().copied())
            .collect()
    }

    /// Contexts with nonzero similarity, by descending score then label.
    pub fn contexts_between(&self, seed: &str, target: &str) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .contexts
            .labels()
            .iter()
            .map(|c| (c.clone(), self.sim_unchecked(seed, target, c)))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// Documents linked to `doc` in `context` with their symmetric similarity.
    pub fn neighbors(&self, doc: &str, context: &str) -> BTreeMap<String, f64> {
        let mut out: BTreeMap<String, f64> = BTreeMap::new();
        let outgoing = self.edges_from(doc).map(|e| (&e.target, e));
        let incoming = self.edges_to(doc).map(|e| (&e.source, e));
        for (other, edge) in outgoing.chain(incoming) {
            if edge.context == context {
                let slot = out.entry(other.clone()).or_insert(0.0);
                *slot = slot.max(edge.score);
            }
        }
        out
    }

    /// Union of graphs over the same context set; see [`ContextGraph::insert`].
    pub fn merge<'a>(graphs: impl IntoIterator<Item = &'a ContextGraph>) -> Result<ContextGraph, CtxError> {
        let mut iter = graphs.into_iter();
        let first = iter.next().ok_or(CtxError::EmptyMerge)?;
        let mut merged = first.clone();
        for g in iter {
            if g.contexts != merged.contexts {
                return Err(CtxError::ContextSetMismatch {
                    left: merged.contexts.clone(),
                    right: g.contexts.clone(),
                });
            }
            for edge in g.edges() {
                merged.insert(edge.clone())?;
            }
        }
        Ok(merged)
    }

    /// One JSON object per edge: `{"s", "t", "c", "score", "prov"}`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for edge in self.edges() {
            out.push_str(&serde_json::to_string(edge).expect("edge serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, contexts: ContextSet, source_name: &str) -> Result<Self, CtxError> {
        let mut graph = Self::new(contexts);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let edge: ContextEdge = serde_json::from_str(line).map_err(|e| CtxError::Format {
                source_name: source_name.to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            graph.insert(edge)?;
        }
        Ok(graph)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CtxError> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|source| CtxError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>, contexts: ContextSet) -> Result<Self, CtxError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CtxError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_jsonl(&text, contexts, &path.display().to_string())
    }
}

/// Ordered heading rules mapping section headings to contexts.
#[derive(Debug, Clone)]
pub struct HeadingMap {
    rules: Vec<(Regex, String)>,
}

impl HeadingMap {
    /// Patterns are case-insensitive regular expressions matched anywhere in
    /// the heading, so a plain word acts as a substring test. Rules are ordered
    /// by context-set order, then pattern order.
    pub fn new(patterns: &BTreeMap<String, Vec<String>>, contexts: &ContextSet) -> Result<Self, CtxError> {
        for label in patterns.keys() {
            contexts.check(label)?;
        }
        let mut rules = Vec::new();
        for label in contexts.labels() {
            for pattern in patterns.get(label).into_iter().flatten() {
                let regex =
                    RegexBuilder::new(pattern)
                        .case_insensitive(true)
                        .build()
                        .map_err(|e| CtxError::BadPattern {
                            pattern: pattern.clone(),
                            message: e.to_string(),
                        })?;
                rules.push((regex, label.clone()));
            }
        }
        Ok(Self { rules })
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Every context with at least one rule matching `heading`.
    pub fn contexts_for(&self, heading: &str) -> BTreeSet<&str> {
        self.rules
            .iter()
            .filter(|(re, _)| re.is_match(heading))
            .map(|(_, label)| label.as_str())
            .collect()
    }
}

/// Keyword lists per context for citation-sentence rules.
#[derive(Debug, Clone, Default)]
pub struct KeywordRules {
    rules: Vec<(String, Vec<Vec<String>>)>,
}

impl KeywordRules {
    /// Keywords are tokenized like document text; a multi-token keyword must
    /// occur as a contiguous phrase.
    pub fn new(keywords: &BTreeMap<String, Vec<String>>, contexts: &ContextSet) -> Result<Self, CtxError> {
        for label in keywords.keys() {
            contexts.check(label)?;
        }
        let rules = contexts
            .labels()
            .iter()
            .filter_map(|label| {
                let phrases: Vec<Vec<String>> = keywords
                    .get(label)?
                    .iter()
                    .map(|k| textrep::tokenize(k))
                    .filter(|t| !t.is_empty())
                    .collect();
                (!phrases.is_empty()).then(|| (label.clone(), phrases))
            })
            .collect();
        Ok(Self { rules })
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Contexts with at least one keyword present in the tokenized sentence.
    pub fn matching(&self, sentence: &str) -> Vec<&str> {
        let tokens = textrep::tokenize(sentence);
        self.rules
            .iter()
            .filter(|(_, phrases)| {
                phrases
                    .iter()
                    .any(|p| tokens.windows(p.len()).any(|w| w == p.as_slice()))
            })
            .map(|(label, _)| label.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Minimum segment cosine for a segment edge.
    pub segment_tau: f64,
    /// Minimum class probability for a classifier edge.
    pub classifier_tau: f64,
    /// Default similarity threshold for analogical queries.
    pub tau_sim: f64,
    /// Default dissimilarity threshold for analogical queries.
    pub tau_dis: f64,
    /// TF-IDF neighbors per document in candidate pair enumeration.
    pub candidate_neighbors: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            segment_tau: 0.3,
            classifier_tau: 0.5,
            tau_sim: 0.5,
            tau_dis: 0.2,
            candidate_neighbors: 10,
        }
    }
}

/// The JSON context configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextConfig {
    pub contexts: ContextSet,
    #[serde(default)]
    pub headings: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub citation_keywords: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn string_lists(entries: &[(&str, &[&str])]) -> BTreeMap<String, Vec<String>> {
    entries
        .iter()
        .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
        .collect()
}

impl ContextConfig {
    /// Two contexts: `method` and `resource`.
    pub fn method_resource() -> Self {
        Self {
            contexts: ContextSet::new(["method", "resource"]).expect("valid labels"),
            headings: string_lists(&[
                ("method", &["method", "approach"]),
                ("resource", &["data", "resource", "corpus"]),
            ]),
            citation_keywords: string_lists(&[
                ("method", &["method", "approach", "algorithm", "technique"]),
                ("resource", &["dataset", "data", "corpus", "resource"]),
            ]),
            thresholds: Thresholds::default(),
        }
    }

    /// Four contexts for scholarly articles: background, method, resource, findings.
    pub fn scholarly() -> Self {
        Self {
            contexts: ContextSet::new(["background", "method", "resource", "findings"]).expect("valid labels"),
            headings: string_lists(&[
                (
                    "background",
                    &["introduction", "background", "related work", "motivation"],
                ),
                ("method", &["method", "approach", "model", "algorithm"]),
                ("resource", &["data", "dataset", "corpus", "resource", "material"]),
                (
                    "findings",
                    &["result", "finding", "discussion", "conclusion", "evaluation"],
                ),
            ]),
            citation_keywords: string_lists(&[
                ("background", &["background", "previously", "prior work", "survey"]),
                ("method", &["method", "approach", "algorithm", "technique"]),
                ("resource", &["dataset", "data", "corpus", "resource"]),
                ("findings", &["result", "findings", "showed", "reported"]),
            ]),
            thresholds: Thresholds::default(),
        }
    }

    pub fn heading_map(&self) -> Result<HeadingMap, CtxError> {
        HeadingMap::new(&self.headings, &self.contexts)
    }

    pub fn keyword_rules(&self) -> Result<KeywordRules, CtxError> {
        KeywordRules::new(&self.citation_keywords, &self.contexts)
    }

    /// Checks that every referenced label exists and every pattern compiles.
    pub fn validate(&self) -> Result<(), CtxError> {
        self.heading_map()?;
        self.keyword_rules()?;
        Ok(())
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self, CtxError> {
        let config: Self = serde_json::from_str(text).map_err(|e| CtxError::Format {
            source_name: source_name.to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CtxError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CtxError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// One edge per annotation, score 1.0.
pub fn from_annotations(corpus: &Corpus, contexts: &ContextSet) -> Result<ContextGraph, CtxError> {
    let mut graph = ContextGraph::new(contexts.clone());
    for doc in corpus.documents() {
        for a in &doc.annotations {
            graph.insert(ContextEdge::new(
                &doc.id,
                &a.target,
                &a.context,
                1.0,
                Provenance::Annotation,
            ))?;
        }
    }
    Ok(graph)
}

/// Unordered document pairs `(a, b)` with `a < b`, both in the corpus.
pub type CandidatePairs = BTreeSet<(String, String)>;

fn ordered(a: &str, b: &str) -> (String, String) {
    if a < b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Every unordered pair of corpus documents.
pub fn all_pairs(corpus: &Corpus) -> CandidatePairs {
    let ids: Vec<&str> = corpus.ids().collect();
    let mut out = CandidatePairs::new();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            out.insert(ordered(a, b));
        }
    }
    out
}

/// Pairs linked by a citation (either direction) plus each document's
/// `neighbors` nearest TF-IDF documents.
pub fn linked_and_neighbor_pairs(
    corpus: &Corpus,
    graph: &CitationGraph,
    tfidf: &[SparseVector],
    neighbors: usize,
) -> CandidatePairs {
    let mut out = CandidatePairs::new();
    for (citing, links) in graph.citing_docs() {
        for l in links {
            if l.doc != citing && corpus.contains(&l.doc) {
                out.insert(ordered(citing, &l.doc));
            }
        }
    }
    if neighbors > 0 {
        let vectors: BTreeMap<String, SparseVector> =
            corpus.ids().map(str::to_string).zip(tfidf.iter().cloned()).collect();
        for id in vectors.keys() {
            // seed is present and k > 0, so the search cannot fail
            let near = textrep::top_k_neighbors(id, &vectors, neighbors).expect("known seed");
            for (other, _) in near {
                out.insert(ordered(id, &other));
            }
        }
    }
    out
}

/// Section text of `doc` whose heading maps to `context`, or `None` when no
/// heading matches.
pub fn segment_text(doc: &crate::corpus::Document, map: &HeadingMap, context: &str) -> Option<String> {
    let parts: Vec<&str> = doc
        .sections
        .iter()
        .filter(|s| map.contexts_for(&s.heading).contains(context))
        .flat_map(|s| s.paragraphs.iter().flatten().map(String::as_str))
        .collect();
    (!parts.is_empty()).then(|| parts.join(" "))
}

/// Segment-level similarity: per context, cosine between the TF-IDF vectors
/// of the two documents' matching sections; edge iff score ≥ `tau`.
pub fn from_segments(
    corpus: &Corpus,
    map: &HeadingMap,
    vocab: &Vocabulary,
    tau: f64,
    pairs: &CandidatePairs,
    contexts: &ContextSet,
) -> Result<ContextGraph, CtxError> {
    let mut graph = ContextGraph::new(contexts.clone());
    for context in contexts.labels() {
        let segments: BTreeMap<&str, SparseVector> = corpus
            .documents()
            .iter()
            .filter_map(|d| segment_text(d, map, context).map(|t| (d.id.as_str(), vocab.vectorize(&t))))
            .collect();
        for (a, b) in pairs {
            let (Some(va), Some(vb)) = (segments.get(a.as_str()), segments.get(b.as_str())) else {
                continue;
            };
            let score = textrep::cosine(va, vb).expect("sparse cosine").clamp(0.0, 1.0);
            if score >= tau {
                graph.insert(ContextEdge::new(a, b, context, score, Provenance::Segment))?;
            }
        }
    }
    Ok(graph)
}

/// For every citation marker, the sentence holding it is matched against the
/// keyword rules; exactly one matching context yields a citing→cited edge.
pub fn from_citation_contexts(
    corpus: &Corpus,
    graph: &CitationGraph,
    rules: &KeywordRules,
    contexts: &ContextSet,
) -> Result<ContextGraph, CtxError> {
    let mut out = ContextGraph::new(contexts.clone());
    for (citing, links) in graph.citing_docs() {
        let Some(doc) = corpus.get(citing) else {
            continue;
        };
        for link in links.iter().filter(|l| l.doc != citing) {
            let Some(sentence) = doc.sentence(link.position) else {
                continue;
            };
            if let [context] = rules.matching(sentence)[..] {
                out.insert(ContextEdge::new(
                    citing,
                    &link.doc,
                    context,
                    1.0,
                    Provenance::CitationContext,
                ))?;
            }
        }
    }
    Ok(out)
}

/// Classifier edges: for each candidate pair `(a, b)`, one edge `a → b` per
/// context whose predicted probability reaches `tau`. Pairs lacking a vector
/// are skipped.
pub fn from_classifier(
    model: &SoftmaxModel,
    doc_vectors: &BTreeMap<String, DenseVector>,
    pairs: &CandidatePairs,
    contexts: &ContextSet,
    tau: f64,
) -> Result<ContextGraph, CtxError> {
    let expected = pairclass::class_labels(contexts);
    if model.classes() != expected.as_slice() {
        return Err(CtxError::ClassSetMismatch {
            expected,
            found: model.classes().to_vec(),
        });
    }
    let mut graph = ContextGraph::new(contexts.clone());
    for (a, b) in pairs {
        let (Some(va), Some(vb)) = (doc_vectors.get(a), doc_vectors.get(b)) else {
            continue;
        };
        let probs = model.predict(va, vb)?;
        for (label, &p) in contexts.labels().iter().zip(&probs) {
            if p >= tau {
                graph.insert(ContextEdge::new(a, b, label, p, Provenance::Classifier))?;
            }
        }
    }
    Ok(graph)
}
