//! Engine directory layout and the pipeline steps that fill it.
//!
//! Every artifact lives under one directory:
//!
//! | file                  | written by      |
//! |-----------------------|-----------------|
//! | `manifest.json`, `documents.jsonl` | `ingest` |
//! | `config.json`         | `ingest`        |
//! | `index.json`, `weighted_graph.txt` | `index` |
//! | `graph_embedding.txt` | `embed-graph`   |
//! | `word_vectors.txt`, `model.txt` | `train` |
//! | `context_graph.jsonl` | `build-context` |

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use contextrec::ctxsim::{self, CandidatePairs, ContextConfig};
use contextrec::linkrep::{self, CitationGraph, EmbeddingConfig, GraphEmbedding, WeightedGraph};
use contextrec::pairclass::{self, LabeledPair, SoftmaxModel, TrainConfig, NONE_LABEL};
use contextrec::textrep::{self, EmbeddingTable, DEFAULT_ALPHA};
use contextrec::{ContextGraph, Corpus, Provenance};
use serde::{Deserialize, Serialize};

pub const CONFIG_FILE: &str = "config.json";
pub const INDEX_FILE: &str = "index.json";
pub const WEIGHTED_GRAPH_FILE: &str = "weighted_graph.txt";
pub const GRAPH_EMBEDDING_FILE: &str = "graph_embedding.txt";
pub const WORD_VECTORS_FILE: &str = "word_vectors.txt";
pub const MODEL_FILE: &str = "model.txt";
pub const CONTEXT_GRAPH_FILE: &str = "context_graph.jsonl";

/// Marks a failure of the tool itself rather than of its input.
#[derive(Debug)]
pub struct Internal(pub String);

impl fmt::Display for Internal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Internal {}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Internal(format!("cannot write {}: {e}", path.display())).into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateStrategy {
    /// Every unordered document pair.
    All,
    /// Citation-linked pairs plus each document's nearest TF-IDF neighbors.
    #[default]
    Linked,
}

/// Pipeline settings stored next to the context configuration in `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSettings {
    /// Word-vector file used by `train`; relative paths resolve against the config file.
    pub embeddings: Option<PathBuf>,
    pub candidates: CandidateStrategy,
    /// Sampled "none" pairs per labeled pair.
    pub negative_ratio: f64,
    /// Weight of the link part in hybrid document vectors.
    pub alpha: f64,
    pub graph_embedding: EmbeddingConfig,
    pub training: TrainConfig,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            embeddings: None,
            candidates: CandidateStrategy::default(),
            negative_ratio: 1.0,
            alpha: DEFAULT_ALPHA,
            graph_embedding: EmbeddingConfig::default(),
            training: TrainConfig::default(),
        }
    }
}

/// `config.json`: the context configuration plus pipeline settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineSettings {
    pub context: ContextConfig,
    pub pipeline: PipelineSettings,
}

impl EngineSettings {
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let context = ContextConfig::parse(text, &source.display().to_string())?;
        let mut pipeline: PipelineSettings =
            serde_json::from_str(text).with_context(|| format!("invalid pipeline settings in {}", source.display()))?;
        if let (Some(path), Some(base)) = (&pipeline.embeddings, source.parent()) {
            if path.is_relative() {
                pipeline.embeddings = Some(base.join(path));
            }
        }
        if !(pipeline.negative_ratio >= 0.0 && pipeline.negative_ratio.is_finite()) {
            bail!("negative_ratio must be a non-negative number");
        }
        if !(0.0..=1.0).contains(&pipeline.alpha) {
            bail!("alpha must lie in [0, 1]");
        }
        Ok(Self { context, pipeline })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text, path)
    }

    pub fn to_json(&self) -> String {
        let mut value = serde_json::to_value(&self.context).expect("config serializes");
        let extra = serde_json::to_value(&self.pipeline).expect("settings serialize");
        if let (Some(obj), Some(more)) = (value.as_object_mut(), extra.as_object()) {
            for (k, v) in more {
                if !v.is_null() {
                    obj.insert(k.clone(), v.clone());
                }
            }
        }
        serde_json::to_string_pretty(&value).expect("json") + "\n"
    }
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            context: ContextConfig::method_resource(),
            pipeline: PipelineSettings::default(),
        }
    }
}

/// An engine directory on disk.
#[derive(Debug, Clone)]
pub struct EngineDir {
    root: PathBuf,
}

impl EngineDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }

    fn require(&self, file: &str, step: &str) -> Result<PathBuf> {
        let path = self.path(file);
        if !path.is_file() {
            bail!("{} is missing; run `{step}` first", path.display());
        }
        Ok(path)
    }

    pub fn corpus(&self) -> Result<Corpus> {
        self.require(contextrec::corpus::MANIFEST_FILE, "ingest")?;
        Ok(Corpus::load(&self.root)?)
    }

    /// Settings from `override_path`, else `<dir>/config.json`.
    pub fn settings(&self, override_path: Option<&Path>) -> Result<EngineSettings> {
        match override_path {
            Some(p) => EngineSettings::load(p),
            None => EngineSettings::load(&self.require(CONFIG_FILE, "ingest")?),
        }
    }

    pub fn weighted_graph(&self) -> Result<WeightedGraph> {
        let path = self.require(WEIGHTED_GRAPH_FILE, "index")?;
        let text = fs::read_to_string(&path)?;
        WeightedGraph::from_export_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn graph_embedding(&self) -> Result<Option<GraphEmbedding>> {
        let path = self.path(GRAPH_EMBEDDING_FILE);
        if !path.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        Ok(Some(
            GraphEmbedding::parse(&text).with_context(|| format!("in {}", path.display()))?,
        ))
    }

    pub fn context_graph(&self, settings: &EngineSettings) -> Result<ContextGraph> {
        let path = self.require(CONTEXT_GRAPH_FILE, "build-context")?;
        Ok(ContextGraph::load(path, settings.context.contexts.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub documents: usize,
    pub citations: usize,
    pub dangling: usize,
}

pub fn ingest(input: &Path, dir: &EngineDir, config: Option<&Path>) -> Result<IngestSummary> {
    let settings = match config {
        Some(p) => EngineSettings::load(p)?,
        None => EngineSettings::default(),
    };
    let (corpus, report) = Corpus::ingest_jsonl(input)?;
    // annotation labels must belong to the configured contexts
    ctxsim::from_annotations(&corpus, &settings.context.contexts)?;
    fs::create_dir_all(dir.root()).map_err(|e| Internal(format!("cannot create {}: {e}", dir.root().display())))?;
    corpus.save(dir.root()).map_err(|e| Internal(e.to_string()))?;
    write_file(&dir.path(CONFIG_FILE), settings.to_json())?;
    Ok(IngestSummary {
        documents: report.docs,
        citations: report.citations,
        dangling: report.dangling,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub documents: usize,
    pub vocabulary: usize,
    pub citation_nodes: usize,
    pub citation_edges: usize,
    pub weighted_edges: usize,
}

/// Builds the TF-IDF vocabulary and citation graph, writes the CPI-weighted graph.
pub fn index(dir: &EngineDir) -> Result<IndexSummary> {
    let corpus = dir.corpus()?;
    let (vocab, _) = textrep::build_tfidf(&corpus)?;
    let graph = CitationGraph::build(&corpus);
    let weighted = WeightedGraph::from_citations(&graph);
    write_file(&dir.path(WEIGHTED_GRAPH_FILE), weighted.to_export_string())?;
    let summary = IndexSummary {
        documents: corpus.len(),
        vocabulary: vocab.len(),
        citation_nodes: graph.nodes().len(),
        citation_edges: graph.edge_count(),
        weighted_edges: weighted.len(),
    };
    write_file(&dir.path(INDEX_FILE), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedSummary {
    pub nodes: usize,
    pub dims: usize,
}

pub fn embed_graph(dir: &EngineDir, config: &EmbeddingConfig) -> Result<EmbedSummary> {
    let weighted = dir.weighted_graph()?;
    if weighted.is_empty() {
        bail!("the weighted citation graph has no edges; nothing to embed");
    }
    let embedding = linkrep::train_graph_embedding(&weighted, config)?;
    write_file(&dir.path(GRAPH_EMBEDDING_FILE), embedding.to_text())?;
    Ok(EmbedSummary {
        nodes: embedding.vectors.len(),
        dims: embedding.dim,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub labeled_pairs: usize,
    pub negative_pairs: usize,
    pub final_loss: f64,
    pub metrics: pairclass::Metrics,
}

pub fn train(dir: &EngineDir, pairs_path: &Path, embeddings: Option<&Path>) -> Result<TrainSummary> {
    let corpus = dir.corpus()?;
    let settings = dir.settings(None)?;
    let pipeline = &settings.pipeline;
    let vectors_path = embeddings
        .map(Path::to_path_buf)
        .or_else(|| pipeline.embeddings.clone())
        .context("no word vectors: pass --embeddings or set \"embeddings\" in config.json")?;
    let table = EmbeddingTable::load(&vectors_path)?;
    let mut pairs = pairclass::read_pairs(pairs_path)?;
    for p in &pairs {
        for id in [&p.a, &p.b] {
            if !corpus.contains(id) {
                bail!("pair references unknown document {id:?}");
            }
        }
    }
    let labeled = pairs.len();
    let positives = pairs.iter().filter(|p| p.label != NONE_LABEL).count();
    let wanted = (pipeline.negative_ratio * positives as f64).round() as usize;
    let ids: Vec<String> = corpus.ids().map(str::to_string).collect();
    let negatives: Vec<LabeledPair> = pairclass::sample_negative_pairs(&ids, &pairs, wanted, pipeline.training.seed);
    let negative_pairs = negatives.len();
    pairs.extend(negatives);

    let (vocab, _) = textrep::build_tfidf(&corpus)?;
    let graph = dir.graph_embedding()?;
    let doc_vectors = pairclass::build_doc_vectors(&corpus, &vocab, &table, graph.as_ref(), pipeline.alpha)?;
    let outcome = pairclass::train(&pairs, &doc_vectors, &settings.context.contexts, &pipeline.training)?;
    let metrics = pairclass::evaluate(&outcome.model, &pairs, &doc_vectors)?;
    write_file(&dir.path(WORD_VECTORS_FILE), table.to_text())?;
    outcome
        .model
        .save(dir.path(MODEL_FILE))
        .map_err(|e| Internal(e.to_string()))?;
    Ok(TrainSummary {
        labeled_pairs: labeled,
        negative_pairs,
        final_loss: outcome.final_loss,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSummary {
    pub edges: usize,
    /// Edge count per source before merging.
    pub by_source: BTreeMap<String, usize>,
}

/// Runs every edge source enabled by the directory contents and merges them.
/// Classifier edges need `model.txt` and `word_vectors.txt` from `train`.
pub fn build_context(dir: &EngineDir) -> Result<ContextSummary> {
    let corpus = dir.corpus()?;
    let settings = dir.settings(None)?;
    let config = &settings.context;
    let contexts = &config.contexts;
    let (vocab, tfidf) = textrep::build_tfidf(&corpus)?;
    let citations = CitationGraph::build(&corpus);
    let pairs: CandidatePairs = match settings.pipeline.candidates {
        CandidateStrategy::All => ctxsim::all_pairs(&corpus),
        CandidateStrategy::Linked => {
            ctxsim::linked_and_neighbor_pairs(&corpus, &citations, &tfidf, config.thresholds.candidate_neighbors)
        }
    };

    let mut parts: Vec<(Provenance, ContextGraph)> = vec![
        (Provenance::Annotation, ctxsim::from_annotations(&corpus, contexts)?),
        (
            Provenance::Segment,
            ctxsim::from_segments(
                &corpus,
                &config.heading_map()?,
                &vocab,
                config.thresholds.segment_tau,
                &pairs,
                contexts,
            )?,
        ),
        (
            Provenance::CitationContext,
            ctxsim::from_citation_contexts(&corpus, &citations, &config.keyword_rules()?, contexts)?,
        ),
    ];
    let model_path = dir.path(MODEL_FILE);
    if model_path.is_file() {
        let model = SoftmaxModel::load(&model_path)?;
        let table = EmbeddingTable::load(dir.require(WORD_VECTORS_FILE, "train")?)?;
        let graph = dir.graph_embedding()?;
        let doc_vectors =
            pairclass::build_doc_vectors(&corpus, &vocab, &table, graph.as_ref(), settings.pipeline.alpha)?;
        parts.push((
            Provenance::Classifier,
            ctxsim::from_classifier(&model, &doc_vectors, &pairs, contexts, config.thresholds.classifier_tau)?,
        ));
    }
    let by_source = parts.iter().map(|(p, g)| (p.as_str().to_string(), g.len())).collect();
    let merged = ContextGraph::merge(parts.iter().map(|(_, g)| g))?;
    merged
        .save(dir.path(CONTEXT_GRAPH_FILE))
        .map_err(|e| Internal(e.to_string()))?;
    Ok(ContextSummary {
        edges: merged.len(),
        by_source,
    })
}

/// Loaded, immutable state for queries.
#[derive(Debug, Clone)]
pub struct Engine {
    pub corpus: Corpus,
    pub graph: ContextGraph,
    pub settings: EngineSettings,
}

impl Engine {
    pub fn open(dir: &EngineDir) -> Result<Self> {
        let corpus = dir.corpus()?;
        let settings = dir.settings(None)?;
        let graph = dir.context_graph(&settings)?;
        Ok(Self {
            corpus,
            graph,
            settings,
        })
    }

    pub fn query_engine(&self) -> contextrec::QueryEngine<'_> {
        contextrec::QueryEngine::new(&self.corpus, &self.graph)
    }
}
