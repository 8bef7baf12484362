//! Link-based similarity over the citation graph.
//!
//! Bibliographic coupling counts shared references, co-citation counts shared
//! citing documents, and the co-citation proximity index (CPI) weights each
//! co-citing document by how close its two citation markers sit.
//! The CPI-weighted graph feeds weighted random walks and skip-gram training.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Position};
use crate::sgd::{self, LinearDecay, SeededRng};
use crate::textrep::{DenseVector, EmbeddingTable, TextError};

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("similarity of {0:?} with itself is undefined")]
    SameNode(String),
    #[error("weighted graph has no edges")]
    EmptyGraph,
    #[error("invalid embedding config: {0}")]
    InvalidConfig(String),
    #[error("weighted graph line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Text(#[from] TextError),
}

/// One citation marker seen from either end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub doc: String,
    pub position: Position,
}

/// Directed multigraph of citation markers, indexed in both directions.
/// Dangling targets appear as pseudo-nodes with in-edges only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CitationGraph {
    out_edges: BTreeMap<String, Vec<Link>>,
    in_edges: BTreeMap<String, Vec<Link>>,
}

/// How close two citation markers sit inside the citing document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProximityLevel {
    SameSentence,
    SameParagraph,
    SameSection,
    SameDocument,
}

impl ProximityLevel {
    pub const ALL: [ProximityLevel; 4] = [
        ProximityLevel::SameSentence,
        ProximityLevel::SameParagraph,
        ProximityLevel::SameSection,
        ProximityLevel::SameDocument,
    ];

    pub fn weight(self) -> f64 {
        match self {
            ProximityLevel::SameSentence => 1.0,
            ProximityLevel::SameParagraph => 0.5,
            ProximityLevel::SameSection => 0.25,
            ProximityLevel::SameDocument => 0.125,
        }
    }

    /// Closest structural container shared by two marker positions.
    pub fn between(a: Position, b: Position) -> Self {
        if a.section != b.section {
            ProximityLevel::SameDocument
        } else if a.paragraph != b.paragraph {
            ProximityLevel::SameSection
        } else if a.sentence != b.sentence {
            ProximityLevel::SameParagraph
        } else {
            ProximityLevel::SameSentence
        }
    }
}

/// A count-based measure and its normalized form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountScore {
    pub count: usize,
    pub normalized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CpiScore {
    pub raw: f64,
    pub normalized: f64,
}

impl CitationGraph {
    pub fn build(corpus: &Corpus) -> Self {
        let mut graph = Self::default();
        for doc in corpus.documents() {
            let out = graph.out_edges.entry(doc.id.clone()).or_default();
            for m in &doc.citations {
                out.push(Link {
                    doc: m.target.clone(),
                    position: m.position(),
                });
            }
            for m in &doc.citations {
                graph.in_edges.entry(m.target.clone()).or_default().push(Link {
                    doc: doc.id.clone(),
                    position: m.position(),
                });
            }
        }
        graph
    }

    pub fn contains(&self, id: &str) -> bool {
        self.out_edges.contains_key(id) || self.in_edges.contains_key(id)
    }

    /// Every node: corpus documents plus cited ids.
    pub fn nodes(&self) -> BTreeSet<&str> {
        self.out_edges
            .keys()
            .chain(self.in_edges.keys())
            .map(String::as_str)
            .collect()
    }

    pub fn out_links(&self, id: &str) -> &[Link] {
        self.out_edges.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn in_links(&self, id: &str) -> &[Link] {
        self.in_edges.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.values().map(Vec::len).sum()
    }

    /// Citing documents (sources with at least one out-edge), in id order.
    pub fn citing_docs(&self) -> impl Iterator<Item = (&str, &[Link])> {
        self.out_edges
            .iter()
            .filter(|(_, links)| !links.is_empty())
            .map(|(id, links)| (id.as_str(), links.as_slice()))
    }

    /// Distinct cited ids of `id`, self-citations excluded.
    pub fn references(&self, id: &str) -> BTreeSet<&str> {
        self.out_links(id)
            .iter()
            .map(|l| l.doc.as_str())
            .filter(|&t| t != id)
            .collect()
    }

    /// Distinct documents citing `id`, self-citations excluded.
    pub fn citing(&self, id: &str) -> BTreeSet<&str> {
        self.in_links(id)
            .iter()
            .map(|l| l.doc.as_str())
            .filter(|&s| s != id)
            .collect()
    }

    fn check_pair(&self, a: &str, b: &str) -> Result<(), LinkError> {
        for id in [a, b] {
            if !self.contains(id) {
                return Err(LinkError::UnknownNode(id.to_string()));
            }
        }
        if a == b {
            return Err(LinkError::SameNode(a.to_string()));
        }
        Ok(())
    }

    pub fn bibliographic_coupling(&self, a: &str, b: &str) -> Result<CountScore, LinkError> {
        self.check_pair(a, b)?;
        let (ra, rb) = (self.references(a), self.references(b));
        Ok(cosine_count(ra.intersection(&rb).count(), ra.len(), rb.len()))
    }

    pub fn cocitation(&self, a: &str, b: &str) -> Result<CountScore, LinkError> {
        self.check_pair(a, b)?;
        let (ca, cb) = (self.citing(a), self.citing(b));
        Ok(cosine_count(ca.intersection(&cb).count(), ca.len(), cb.len()))
    }

    /// Sum over co-citing documents of the best proximity weight between a
    /// marker to `a` and a marker to `b`; normalized is the mean contribution.
    pub fn cpi(&self, a: &str, b: &str) -> Result<CpiScore, LinkError> {
        self.check_pair(a, b)?;
        let (ca, cb) = (self.citing(a), self.citing(b));
        let mut raw = 0.0;
        let mut cociting = 0usize;
        for z in ca.intersection(&cb) {
            let links = self.out_links(z);
            let to_a = links.iter().filter(|l| l.doc == a).map(|l| l.position);
            let best = to_a
                .flat_map(|pa| {
                    links
                        .iter()
                        .filter(|l| l.doc == b)
                        .map(move |l| ProximityLevel::between(pa, l.position).weight())
                })
                .fold(0.0, f64::max);
            raw += best;
            cociting += 1;
        }
        let normalized = if cociting == 0 { 0.0 } else { raw / cociting as f64 };
        Ok(CpiScore { raw, normalized })
    }
}

fn cosine_count(shared: usize, na: usize, nb: usize) -> CountScore {
    let normalized = if na == 0 || nb == 0 {
        0.0
    } else {
        (shared as f64 / ((na * nb) as f64).sqrt()).min(1.0)
    };
    CountScore {
        count: shared,
        normalized,
    }
}

/// Undirected graph over co-cited ids weighted by raw CPI.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedGraph {
    edges: BTreeMap<(String, String), f64>,
}

impl WeightedGraph {
    /// Accumulates per citing document over its own marker pairs only.
    pub fn from_citations(graph: &CitationGraph) -> Self {
        let mut edges: BTreeMap<(String, String), f64> = BTreeMap::new();
        for (citing, links) in graph.citing_docs() {
            let mut by_target: BTreeMap<&str, Vec<Position>> = BTreeMap::new();
            for l in links.iter().filter(|l| l.doc != citing) {
                by_target.entry(l.doc.as_str()).or_default().push(l.position);
            }
            let targets: Vec<(&str, Vec<Position>)> = by_target.into_iter().collect();
            for (i, (ta, pa)) in targets.iter().enumerate() {
                for (tb, pb) in &targets[i + 1..] {
                    let best = pa
                        .iter()
                        .flat_map(|&x| pb.iter().map(move |&y| ProximityLevel::between(x, y).weight()))
                        .fold(0.0, f64::max);
                    *edges.entry((ta.to_string(), tb.to_string())).or_insert(0.0) += best;
                }
            }
        }
        Self { edges }
    }

    /// Builds from explicit edges; endpoints are ordered, weights for repeated
    /// pairs are summed, self-loops and non-positive weights are rejected.
    pub fn from_edges<S: Into<String>>(edges: impl IntoIterator<Item = (S, S, f64)>) -> Result<Self, LinkError> {
        let mut map = BTreeMap::new();
        for (i, (a, b, w)) in edges.into_iter().enumerate() {
            let (a, b) = (a.into(), b.into());
            if a == b || w <= 0.0 || !w.is_finite() {
                return Err(LinkError::Format {
                    line: i + 1,
                    message: format!("invalid edge {a} {b} {w}"),
                });
            }
            let key = if a < b { (a, b) } else { (b, a) };
            *map.entry(key).or_insert(0.0) += w;
        }
        Ok(Self { edges: map })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<f64> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.get(&(key.0.to_string(), key.1.to_string())).copied()
    }

    /// Edges as `(a, b, weight)` with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.edges.iter().map(|((a, b), &w)| (a.as_str(), b.as_str(), w))
    }

    /// `id_a id_b weight` lines, weight with six decimals, lines sorted.
    pub fn to_export_string(&self) -> String {
        let mut lines: Vec<String> = self.edges().map(|(a, b, w)| format!("{a} {b} {w:.6}")).collect();
        lines.sort();
        let mut out = lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }

    pub fn from_export_str(text: &str) -> Result<Self, LinkError> {
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let err = |message: String| LinkError::Format { line: i + 1, message };
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let w: f64 = fields[2].parse().map_err(|e| err(format!("bad weight: {e}")))?;
            edges.push((fields[0].to_string(), fields[1].to_string(), w));
        }
        Self::from_edges(edges)
    }
}

/// Training parameters for walk-based node embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub dims: usize,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            dims: 64,
            walks_per_node: 10,
            walk_length: 40,
            window: 5,
            negatives: 5,
            epochs: 1,
            learning_rate: 0.025,
            seed: 42,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), LinkError> {
        let bad = |m: &str| Err(LinkError::InvalidConfig(m.to_string()));
        if self.dims < 2 {
            return bad("dims must be at least 2");
        }
        if self.walks_per_node == 0 || self.walk_length == 0 {
            return bad("walks_per_node and walk_length must be positive");
        }
        if self.window == 0 || self.epochs == 0 {
            return bad("window and epochs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive and finite");
        }
        Ok(())
    }
}

/// Adjacency view of a [`WeightedGraph`] with dense node indices.
#[derive(Debug, Clone)]
pub struct WalkGraph {
    nodes: Vec<String>,
    neighbors: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
}

impl WalkGraph {
    pub fn new(graph: &WeightedGraph) -> Self {
        let nodes: Vec<String> = graph
            .edges()
            .flat_map(|(a, b, _)| [a, b])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_string)
            .collect();
        let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
        for (a, b, w) in graph.edges() {
            let (ia, ib) = (index[a], index[b]);
            adj[ia].push((ib, w));
            adj[ib].push((ia, w));
        }
        let mut neighbors = Vec::with_capacity(nodes.len());
        let mut cumulative = Vec::with_capacity(nodes.len());
        for mut list in adj {
            list.sort_by_key(|&(n, _)| n);
            let mut acc = 0.0;
            cumulative.push(
                list.iter()
                    .map(|&(_, w)| {
                        acc += w;
                        acc
                    })
                    .collect(),
            );
            neighbors.push(list.into_iter().map(|(n, _)| n).collect());
        }
        Self {
            nodes,
            neighbors,
            cumulative,
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(id)).ok()
    }

    /// Samples a neighbor of `node` with probability proportional to edge weight.
    pub fn step(&self, node: usize, rng: &mut SeededRng) -> Option<usize> {
        let cum = &self.cumulative[node];
        let total = *cum.last()?;
        let r = rng.gen::<f64>() * total;
        let i = cum.partition_point(|&c| c <= r).min(cum.len() - 1);
        Some(self.neighbors[node][i])
    }

    /// `walks_per_node` passes over a shuffled node order; each walk takes
    /// `walk_length` steps.
    pub fn walks(&self, walks_per_node: usize, walk_length: usize, rng: &mut SeededRng) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        let mut walks = Vec::with_capacity(walks_per_node * order.len());
        for _ in 0..walks_per_node {
            order.shuffle(rng);
            for &start in &order {
                let mut walk = Vec::with_capacity(walk_length + 1);
                walk.push(start);
                let mut current = start;
                for _ in 0..walk_length {
                    match self.step(current, rng) {
                        Some(next) => {
                            walk.push(next);
                            current = next;
                        }
                        None => break,
                    }
                }
                walks.push(walk);
            }
        }
        walks
    }
}

/// Node vectors produced by [`train_graph_embedding`].
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEmbedding {
    pub dim: usize,
    pub vectors: BTreeMap<String, DenseVector>,
}

impl GraphEmbedding {
    pub fn get(&self, id: &str) -> Option<&DenseVector> {
        self.vectors.get(id)
    }

    /// Same text layout as word-vector files, with a header.
    pub fn to_text(&self) -> String {
        let mut table = EmbeddingTable::new(self.dim);
        for (id, v) in &self.vectors {
            // dimensions are uniform by construction
            table.insert(id.clone(), v.clone()).expect("uniform dimension");
        }
        table.to_text()
    }

    pub fn parse(text: &str) -> Result<Self, LinkError> {
        let table = EmbeddingTable::parse(text, "graph embedding")?;
        let vectors = table.iter().map(|(id, v)| (id.to_string(), v.clone())).collect();
        Ok(Self {
            dim: table.dim(),
            vectors,
        })
    }
}

/// Weighted random walks followed by skip-gram with negative sampling.
/// Single-threaded and fully determined by `config.seed`.
pub fn train_graph_embedding(graph: &WeightedGraph, config: &EmbeddingConfig) -> Result<GraphEmbedding, LinkError> {
    config.validate()?;
    if graph.is_empty() {
        return Err(LinkError::EmptyGraph);
    }
    let mut rng = sgd::seeded(config.seed);
    let walk_graph = WalkGraph::new(graph);
    let walks = walk_graph.walks(config.walks_per_node, config.walk_length, &mut rng);
    let n = walk_graph.nodes().len();
    let d = config.dims;

    let mut input: Vec<f64> = (0..n * d).map(|_| (rng.gen::<f64>() - 0.5) / d as f64).collect();
    let mut output = vec![0.0; n * d];

    let mut freq = vec![0.0f64; n];
    walks.iter().flatten().for_each(|&v| freq[v] += 1.0);
    let mut acc = 0.0;
    let noise: Vec<f64> = freq
        .iter()
        .map(|f| {
            acc += f.powf(0.75);
            acc
        })
        .collect();
    let noise_total = acc;
    let sample_noise = |rng: &mut SeededRng| {
        let r = rng.gen::<f64>() * noise_total;
        noise.partition_point(|&c| c <= r).min(n - 1)
    };

    let positions: u64 = walks.iter().map(|w| w.len() as u64).sum();
    let schedule = LinearDecay::new(config.learning_rate, 1e-4, positions * config.epochs as u64);
    let mut step = 0u64;
    let mut grad = vec![0.0; d];
    let mut targets: Vec<(usize, f64)> = Vec::with_capacity(config.negatives + 1);

    for _ in 0..config.epochs {
        for walk in &walks {
            for (i, &center) in walk.iter().enumerate() {
                let lr = schedule.at(step);
                step += 1;
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window).min(walk.len() - 1);
                for (j, &context) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    targets.clear();
                    targets.push((context, 1.0));
                    for _ in 0..config.negatives {
                        let neg = sample_noise(&mut rng);
                        if neg != context {
                            targets.push((neg, 0.0));
                        }
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let h = &input[center * d..(center + 1) * d];
                    for &(t, label) in &targets {
                        let out = &mut output[t * d..(t + 1) * d];
                        let score: f64 = h.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
                        let g = (label - sgd::sigmoid(score)) * lr;
                        for k in 0..d {
                            grad[k] += g * out[k];
                            out[k] += g * h[k];
                        }
                    }
                    let h = &mut input[center * d..(center + 1) * d];
                    h.iter_mut().zip(&grad).for_each(|(x, g)| *x += g);
                }
            }
        }
    }

    let mut vectors = BTreeMap::new();
    for (i, id) in walk_graph.nodes().iter().enumerate() {
        vectors.insert(id.clone(), DenseVector::new(input[i * d..(i + 1) * d].to_vec())?);
    }
    Ok(GraphEmbedding { dim: d, vectors })
}
