//! Random instance generators and brute-force reference implementations.
//!
//! Compiled only for tests and behind the `testkit` feature. The reference
//! functions work from raw documents and edge lists and never call the
//! indexes they are compared against.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Annotation, CitationMarker, Corpus, Document, Section};
use crate::ctxsim::{ContextEdge, ContextGraph, ContextSet, Provenance};
use crate::queryeng::AnalogicalQuery;
use crate::sgd::SeededRng;

pub const WORDS: &[&str] = &[
    "graph",
    "citation",
    "method",
    "data",
    "model",
    "vector",
    "learning",
    "network",
    "corpus",
    "query",
    "entity",
    "author",
    "venue",
    "topic",
    "kernel",
    "margin",
    "cluster",
    "embedding",
    "ranking",
    "index",
    "the",
    "of",
    "a",
    "neural",
    "semantic",
    "retrieval",
    "scholarly",
    "evaluation",
    "benchmark",
    "survey",
];

pub const HEADINGS: &[&str] = &["Introduction", "Method", "Approach", "Data", "Results", "Related work"];

/// Knobs for [`random_corpus`].
#[derive(Debug, Clone)]
pub struct CorpusShape {
    pub docs: usize,
    pub max_citations: usize,
    pub max_sections: usize,
    pub max_paragraphs: usize,
    pub max_sentences: usize,
    pub sentence_words: usize,
    /// Number of extra ids that may be cited but are not in the corpus.
    pub dangling_pool: usize,
    /// Probability that a citation points at the citing document itself.
    pub self_cite: f64,
}

impl Default for CorpusShape {
    fn default() -> Self {
        Self {
            docs: 20,
            max_citations: 10,
            max_sections: 3,
            max_paragraphs: 3,
            max_sentences: 3,
            sentence_words: 8,
            dangling_pool: 3,
            self_cite: 0.02,
        }
    }
}

pub fn doc_id(i: usize) -> String {
    format!("d{i:03}")
}

fn sentence(rng: &mut SeededRng, words: usize) -> String {
    let n = rng.gen_range(1..=words);
    (0..n)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
        + "."
}

/// A valid random corpus with ids `d000..`, random structure and citations.
pub fn random_corpus(rng: &mut SeededRng, shape: &CorpusShape) -> Corpus {
    let ids: Vec<String> = (0..shape.docs).map(doc_id).collect();
    let dangling: Vec<String> = (0..shape.dangling_pool).map(|i| format!("x{i:02}")).collect();
    let mut documents = Vec::with_capacity(shape.docs);
    for id in &ids {
        let sections: Vec<Section> = (0..rng.gen_range(1..=shape.max_sections))
            .map(|_| Section {
                heading: HEADINGS.choose(rng).unwrap().to_string(),
                paragraphs: (0..rng.gen_range(1..=shape.max_paragraphs))
                    .map(|_| {
                        (0..rng.gen_range(1..=shape.max_sentences))
                            .map(|_| sentence(rng, shape.sentence_words))
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        let mut citations = Vec::new();
        for _ in 0..rng.gen_range(0..=shape.max_citations) {
            let target = if rng.gen_bool(shape.self_cite) {
                id.clone()
            } else if !dangling.is_empty() && rng.gen_bool(0.1) {
                dangling.choose(rng).unwrap().clone()
            } else {
                ids.choose(rng).unwrap().clone()
            };
            let s = rng.gen_range(0..sections.len());
            let p = rng.gen_range(0..sections[s].paragraphs.len());
            let t = rng.gen_range(0..sections[s].paragraphs[p].len());
            citations.push(CitationMarker::new(target, s, p, t));
        }
        documents.push(Document {
            id: id.clone(),
            title: sentence(rng, 5),
            sections,
            citations,
            annotations: Vec::new(),
        });
    }
    Corpus::from_documents(documents).expect("generated corpus is valid")
}

/// Adds random annotations (never self-edges) over `contexts`.
pub fn annotate(rng: &mut SeededRng, corpus: &Corpus, contexts: &ContextSet, per_doc: usize) -> Corpus {
    let ids: Vec<String> = corpus.ids().map(str::to_string).collect();
    let docs = corpus
        .documents()
        .iter()
        .cloned()
        .map(|mut d| {
            for _ in 0..rng.gen_range(0..=per_doc) {
                let target = ids.choose(rng).unwrap();
                if *target != d.id {
                    d.annotations.push(Annotation {
                        context: contexts.labels().choose(rng).unwrap().clone(),
                        target: target.clone(),
                    });
                }
            }
            d
        })
        .collect();
    Corpus::from_documents(docs).expect("annotated corpus is valid")
}

/// Minimal one-sentence corpus over the given ids.
pub fn plain_corpus(ids: &[String]) -> Corpus {
    let docs = ids
        .iter()
        .map(|id| Document {
            id: id.clone(),
            title: format!("title of {id}"),
            sections: vec![Section {
                heading: String::new(),
                paragraphs: vec![vec![format!("text of {id}.")]],
            }],
            citations: Vec::new(),
            annotations: Vec::new(),
        })
        .collect();
    Corpus::from_documents(docs).expect("plain corpus is valid")
}

/// Random context graph over `ids`. Scores are drawn from a small grid so ties
/// occur often. Both directions of a pair may carry an edge.
pub fn random_context_graph(rng: &mut SeededRng, ids: &[String], contexts: &ContextSet, density: f64) -> ContextGraph {
    const GRID: [f64; 6] = [0.1, 0.2, 0.4, 0.5, 0.8, 1.0];
    const PROVS: [Provenance; 4] = [
        Provenance::Annotation,
        Provenance::Segment,
        Provenance::CitationContext,
        Provenance::Classifier,
    ];
    let mut graph = ContextGraph::new(contexts.clone());
    for a in ids {
        for b in ids {
            if a == b {
                continue;
            }
            for c in contexts.labels() {
                if rng.gen_bool(density) {
                    let score = if rng.gen_bool(0.5) {
                        *GRID.choose(rng).unwrap()
                    } else {
                        rng.gen_range(0.0..=1.0)
                    };
                    let prov = *PROVS.choose(rng).unwrap();
                    graph.insert(ContextEdge::new(a, b, c, score, prov)).unwrap();
                }
            }
        }
    }
    graph
}

/// Random valid query over `ids` and `contexts`.
pub fn random_query(rng: &mut SeededRng, ids: &[String], contexts: &ContextSet) -> AnalogicalQuery {
    let mut q = AnalogicalQuery::new(ids.choose(rng).unwrap().clone());
    loop {
        q.require.clear();
        q.exclude.clear();
        for c in contexts.labels() {
            match rng.gen_range(0..3) {
                0 => q.require.push(c.clone()),
                1 => q.exclude.push(c.clone()),
                _ => {}
            }
        }
        if !q.require.is_empty() || !q.exclude.is_empty() {
            break;
        }
    }
    q.k = rng.gen_range(1..=ids.len() + 2);
    q.tau_sim = [0.0, 0.1, 0.3, 0.5, 0.8, 1.0][rng.gen_range(0..6)];
    q.tau_dis = [0.0, 0.1, 0.2, 0.5, 1.0][rng.gen_range(0..5)];
    q
}

// ---------------------------------------------------------------------------
// Reference implementations.

fn reference_set<'a>(corpus: &'a Corpus, id: &str) -> BTreeSet<&'a str> {
    corpus
        .get(id)
        .map(|d| {
            d.citations
                .iter()
                .map(|m| m.target.as_str())
                .filter(|t| *t != id)
                .collect()
        })
        .unwrap_or_default()
}

fn citer_set<'a>(corpus: &'a Corpus, id: &str) -> BTreeSet<&'a str> {
    corpus
        .documents()
        .iter()
        .filter(|d| d.id != id && d.citations.iter().any(|m| m.target == id))
        .map(|d| d.id.as_str())
        .collect()
}

fn normalize(shared: usize, na: usize, nb: usize) -> f64 {
    if na == 0 || nb == 0 {
        0.0
    } else {
        shared as f64 / ((na * nb) as f64).sqrt()
    }
}

/// Shared distinct references, and the count over sqrt of the set sizes.
pub fn oracle_coupling(corpus: &Corpus, a: &str, b: &str) -> (usize, f64) {
    let (ra, rb) = (reference_set(corpus, a), reference_set(corpus, b));
    let shared = ra.iter().filter(|x| rb.contains(*x)).count();
    (shared, normalize(shared, ra.len(), rb.len()))
}

/// Distinct documents citing both, and the normalized form.
pub fn oracle_cocitation(corpus: &Corpus, a: &str, b: &str) -> (usize, f64) {
    let (ca, cb) = (citer_set(corpus, a), citer_set(corpus, b));
    let shared = ca.iter().filter(|x| cb.contains(*x)).count();
    (shared, normalize(shared, ca.len(), cb.len()))
}

pub fn oracle_proximity(a: &CitationMarker, b: &CitationMarker) -> f64 {
    if a.section != b.section {
        0.125
    } else if a.paragraph != b.paragraph {
        0.25
    } else if a.sentence != b.sentence {
        0.5
    } else {
        1.0
    }
}

/// Raw CPI: for every other document citing both, the closest marker pair.
pub fn oracle_cpi(corpus: &Corpus, a: &str, b: &str) -> f64 {
    let mut total = 0.0;
    for z in corpus.documents() {
        if z.id == a || z.id == b {
            continue;
        }
        let mut best = 0.0f64;
        for ma in z.citations.iter().filter(|m| m.target == a) {
            for mb in z.citations.iter().filter(|m| m.target == b) {
                best = best.max(oracle_proximity(ma, mb));
            }
        }
        total += best;
    }
    total
}

/// Symmetric max over both stored directions, 0 without an edge.
pub fn oracle_sim(edges: &[ContextEdge], a: &str, b: &str, c: &str) -> f64 {
    edges
        .iter()
        .filter(|e| e.context == c && ((e.source == a && e.target == b) || (e.source == b && e.target == a)))
        .map(|e| e.score)
        .fold(0.0, f64::max)
}

/// Filter every corpus document, then sort by (score desc, id asc), then truncate.
pub fn oracle_answer(corpus: &Corpus, graph: &ContextGraph, q: &AnalogicalQuery) -> Vec<(String, f64)> {
    let edges: Vec<ContextEdge> = graph.edges().cloned().collect();
    let mut out = Vec::new();
    for d in corpus.ids() {
        if d == q.seed {
            continue;
        }
        let req: Vec<f64> = q.require.iter().map(|c| oracle_sim(&edges, &q.seed, d, c)).collect();
        let exc: Vec<f64> = q.exclude.iter().map(|c| oracle_sim(&edges, &q.seed, d, c)).collect();
        if req.iter().all(|&s| s >= q.tau_sim) && exc.iter().all(|&s| s < q.tau_dis) {
            let score = if req.is_empty() {
                1.0 - exc.iter().cloned().fold(0.0, f64::max)
            } else {
                req.iter().sum::<f64>() / req.len() as f64
            };
            out.push((d.to_string(), score));
        }
    }
    sort_ranked(&mut out);
    out.truncate(q.k);
    out
}

pub fn sort_ranked(list: &mut [(String, f64)]) {
    list.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
}

/// Enumerates every path of length one or two from `seed` inside context `c`.
pub fn oracle_focused(corpus: &Corpus, graph: &ContextGraph, seed: &str, c: &str, k: usize) -> Vec<(String, f64)> {
    let edges: Vec<ContextEdge> = graph.edges().cloned().collect();
    let mut nodes: BTreeSet<String> = BTreeSet::new();
    for e in &edges {
        nodes.insert(e.source.clone());
        nodes.insert(e.target.clone());
    }
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for d in corpus.ids().filter(|d| *d != seed) {
        let mut s = oracle_sim(&edges, seed, d, c);
        for m in &nodes {
            if m == seed || m == d {
                continue;
            }
            s = s.max(oracle_sim(&edges, seed, m, c) * oracle_sim(&edges, m, d, c));
        }
        if s > 0.0 {
            best.insert(d.to_string(), s);
        }
    }
    let mut out: Vec<(String, f64)> = best.into_iter().collect();
    sort_ranked(&mut out);
    out.truncate(k);
    out
}

/// Dense cosine over an explicit dimension.
pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Naive per-class precision, recall and F1 plus macro-F1 over classes that
/// occur in the truth or the predictions.
pub fn oracle_macro_f1(outcomes: &[(usize, usize)], classes: usize) -> (f64, Vec<(f64, f64, f64)>) {
    let mut per = Vec::new();
    let mut f1s = Vec::new();
    for c in 0..classes {
        let tp = outcomes.iter().filter(|(t, p)| *t == c && *p == c).count() as f64;
        let fp = outcomes.iter().filter(|(t, p)| *t != c && *p == c).count() as f64;
        let fn_ = outcomes.iter().filter(|(t, p)| *t == c && *p != c).count() as f64;
        let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
        let recall = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per.push((precision, recall, f1));
        if tp + fp + fn_ > 0.0 {
            f1s.push(f1);
        }
    }
    let macro_f1 = if f1s.is_empty() {
        0.0
    } else {
        f1s.iter().sum::<f64>() / f1s.len() as f64
    };
    (macro_f1, per)
}
