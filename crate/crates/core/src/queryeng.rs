//! Analogical queries and recommendation strategies over a [`ContextGraph`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::ctxsim::{ContextGraph, ContextSet, Provenance, Thresholds};

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum QueryError {
    #[error("query has no seed=<id> term")]
    MissingSeed,
    #[error("query repeats {0}")]
    Repeated(String),
    #[error("unknown context {0:?}")]
    UnknownContext(String),
    #[error("query requires or excludes no context")]
    NoContexts,
    #[error("context {0:?} is both required and excluded")]
    Conflict(String),
    #[error("unrecognized query term {0:?}")]
    BadTerm(String),
    #[error("invalid value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("unknown document {0:?}")]
    UnknownSeed(String),
}

/// "Similar to `seed` in every `require` context, dissimilar in every `exclude` context."
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogicalQuery {
    pub seed: String,
    #[serde(default)]
    pub require: Vec<String>,
    #[serde(default)]
    pub exclude: Vec<String>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_tau_sim")]
    pub tau_sim: f64,
    #[serde(default = "default_tau_dis")]
    pub tau_dis: f64,
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_tau_sim() -> f64 {
    Thresholds::default().tau_sim
}

fn default_tau_dis() -> f64 {
    Thresholds::default().tau_dis
}

impl AnalogicalQuery {
    pub fn new(seed: impl Into<String>) -> Self {
        Self {
            seed: seed.into(),
            require: Vec::new(),
            exclude: Vec::new(),
            k: DEFAULT_K,
            tau_sim: default_tau_sim(),
            tau_dis: default_tau_dis(),
        }
    }

    pub fn require(mut self, context: impl Into<String>) -> Self {
        self.require.push(context.into());
        self
    }

    pub fn exclude(mut self, context: impl Into<String>) -> Self {
        self.exclude.push(context.into());
        self
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn thresholds(mut self, tau_sim: f64, tau_dis: f64) -> Self {
        self.tau_sim = tau_sim;
        self.tau_dis = tau_dis;
        self
    }

    pub fn validate(&self, contexts: &ContextSet) -> Result<(), QueryError> {
        if self.seed.is_empty() {
            return Err(QueryError::MissingSeed);
        }
        for c in self.require.iter().chain(&self.exclude) {
            if !contexts.contains(c) {
                return Err(QueryError::UnknownContext(c.clone()));
            }
        }
        if let Some(c) = self.require.iter().find(|c| self.exclude.contains(c)) {
            return Err(QueryError::Conflict(c.clone()));
        }
        if self.require.is_empty() && self.exclude.is_empty() {
            return Err(QueryError::NoContexts);
        }
        if self.k == 0 {
            return Err(QueryError::BadValue {
                key: "k".into(),
                value: "0".into(),
            });
        }
        for (key, v) in [("tau_sim", self.tau_sim), ("tau_dis", self.tau_dis)] {
            if !v.is_finite() {
                return Err(QueryError::BadValue {
                    key: key.into(),
                    value: v.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Parses `seed=<id> (+<ctx>|-<ctx>)+ [k=<int>] [tau_sim=<f>] [tau_dis=<f>]`.
pub fn parse_query(text: &str, contexts: &ContextSet) -> Result<AnalogicalQuery, QueryError> {
    parse_query_with(text, contexts, &Thresholds::default())
}

/// [`parse_query`] with thresholds taken from `defaults` when the text omits them.
pub fn parse_query_with(
    text: &str,
    contexts: &ContextSet,
    defaults: &Thresholds,
) -> Result<AnalogicalQuery, QueryError> {
    let mut seed: Option<String> = None;
    let mut query = AnalogicalQuery::new("").thresholds(defaults.tau_sim, defaults.tau_dis);
    let mut seen_keys = BTreeSet::new();
    for term in text.split_whitespace() {
        if let Some(ctx) = term.strip_prefix('+') {
            if !query.require.iter().any(|c| c == ctx) {
                query.require.push(ctx.to_string());
            }
            continue;
        }
        if let Some(ctx) = term.strip_prefix('-') {
            if !query.exclude.iter().any(|c| c == ctx) {
                query.exclude.push(ctx.to_string());
            }
            continue;
        }
        let Some((key, value)) = term.split_once('=') else {
            return Err(QueryError::BadTerm(term.to_string()));
        };
        if !seen_keys.insert(key.to_string()) {
            return Err(QueryError::Repeated(key.to_string()));
        }
        let bad = || QueryError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        match key {
            "seed" if !value.is_empty() => seed = Some(value.to_string()),
            "seed" => return Err(QueryError::MissingSeed),
            "k" => query.k = value.parse().map_err(|_| bad())?,
            "tau_sim" => query.tau_sim = value.parse().map_err(|_| bad())?,
            "tau_dis" => query.tau_dis = value.parse().map_err(|_| bad())?,
            _ => return Err(QueryError::BadTerm(term.to_string())),
        }
    }
    query.seed = seed.ok_or(QueryError::MissingSeed)?;
    query.validate(contexts)?;
    Ok(query)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedContext {
    pub context: String,
    pub sim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationItem {
    pub id: String,
    pub title: String,
    pub score: f64,
    pub matched: Vec<MatchedContext>,
    pub provenance: BTreeSet<Provenance>,
}

/// Read-only query surface over a corpus and its context graph.
/// Results only ever contain corpus documents.
#[derive(Debug, Clone, Copy)]
pub struct QueryEngine<'a> {
    corpus: &'a Corpus,
    graph: &'a ContextGraph,
}

fn rank(items: &mut Vec<RecommendationItem>, k: usize) {
    items.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
    items.truncate(k);
}

impl<'a> QueryEngine<'a> {
    pub fn new(corpus: &'a Corpus, graph: &'a ContextGraph) -> Self {
        Self { corpus, graph }
    }

    pub fn contexts(&self) -> &'a ContextSet {
        self.graph.contexts()
    }

    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }

    pub fn graph(&self) -> &'a ContextGraph {
        self.graph
    }

    fn check_seed(&self, seed: &str) -> Result<(), QueryError> {
        if self.corpus.contains(seed) {
            Ok(())
        } else {
            Err(QueryError::UnknownSeed(seed.to_string()))
        }
    }

    fn item(
        &self,
        id: &str,
        score: f64,
        matched: Vec<MatchedContext>,
        provenance: BTreeSet<Provenance>,
    ) -> RecommendationItem {
        RecommendationItem {
            id: id.to_string(),
            title: self.corpus.get(id).map(|d| d.title.clone()).unwrap_or_default(),
            score,
            matched,
            provenance,
        }
    }

    /// Keeps every document with `sim ≥ tau_sim` in all required contexts and
    /// `sim < tau_dis` in all excluded ones. Score is the mean required
    /// similarity, or `1 − max excluded similarity` without required contexts.
    pub fn answer(&self, q: &AnalogicalQuery) -> Result<Vec<RecommendationItem>, QueryError> {
        q.validate(self.contexts())?;
        self.check_seed(&q.seed)?;
        let mut items = Vec::new();
        for doc in self.corpus.documents() {
            let id = doc.id.as_str();
            if id == q.seed {
                continue;
            }
            let sim = |c: &str| self.graph.sim(&q.seed, id, c).expect("validated context");
            let required: Vec<f64> = q.require.iter().map(|c| sim(c)).collect();
            if required.iter().any(|&s| s < q.tau_sim) {
                continue;
            }
            let excluded: Vec<f64> = q.exclude.iter().map(|c| sim(c)).collect();
            if excluded.iter().any(|&s| s >= q.tau_dis) {
                continue;
            }
            let score = if required.is_empty() {
                1.0 - excluded.iter().copied().fold(0.0, f64::max)
            } else {
                required.iter().sum::<f64>() / required.len() as f64
            };
            let matched = q
                .require
                .iter()
                .zip(&required)
                .map(|(c, &s)| MatchedContext {
                    context: c.clone(),
                    sim: s,
                })
                .collect();
            let provenance = q
                .require
                .iter()
                .flat_map(|c| self.graph.provenance_between(&q.seed, id, c))
                .collect();
            items.push(self.item(id, score, matched, provenance));
        }
        rank(&mut items, q.k);
        Ok(items)
    }

    /// Neighbors of `seed` in `context` restricted to corpus documents, ranked.
    fn ranked_neighbors(&self, seed: &str, context: &str) -> Vec<(String, f64)> {
        let mut list: Vec<(String, f64)> = self
            .graph
            .neighbors(seed, context)
            .into_iter()
            .filter(|(id, s)| *s > 0.0 && id != seed && self.corpus.contains(id))
            .collect();
        list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        list
    }

    /// Round-robin over contexts. Each round serves every context that still
    /// has an unseen neighbor once, picking at each step the context whose
    /// best remaining neighbor scores highest. A document is returned once,
    /// under the first context that takes it.
    pub fn recommend_diverse(&self, seed: &str, k: usize) -> Result<Vec<RecommendationItem>, QueryError> {
        self.check_seed(seed)?;
        let contexts = self.contexts().labels();
        let lists: Vec<Vec<(String, f64)>> = contexts.iter().map(|c| self.ranked_neighbors(seed, c)).collect();
        let mut cursor = vec![0usize; lists.len()];
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut served = vec![false; lists.len()];
        let mut items = Vec::new();
        while items.len() < k {
            for (ci, list) in lists.iter().enumerate() {
                while cursor[ci] < list.len() && seen.contains(&list[cursor[ci]].0) {
                    cursor[ci] += 1;
                }
            }
            let pick = |served: &[bool]| {
                (0..lists.len())
                    .filter(|&ci| !served[ci] && cursor[ci] < lists[ci].len())
                    .max_by(|&x, &y| {
                        let (sx, sy) = (lists[x][cursor[x]].1, lists[y][cursor[y]].1);
                        sx.total_cmp(&sy).then_with(|| y.cmp(&x))
                    })
            };
            let chosen = match pick(&served) {
                Some(ci) => ci,
                None => {
                    served.iter_mut().for_each(|s| *s = false);
                    match pick(&served) {
                        Some(ci) => ci,
                        None => break,
                    }
                }
            };
            let (id, score) = lists[chosen][cursor[chosen]].clone();
            let context = &contexts[chosen];
            served[chosen] = true;
            seen.insert(id.clone());
            let provenance = self.graph.provenance_between(seed, &id, context);
            let matched = vec![MatchedContext {
                context: context.clone(),
                sim: score,
            }];
            items.push(self.item(&id, score, matched, provenance));
        }
        Ok(items)
    }

    /// One- and two-hop neighbors of `seed` within a single context. A two-hop
    /// path scores the product of its hops; each document keeps its best path.
    pub fn recommend_focused(
        &self,
        seed: &str,
        context: &str,
        k: usize,
    ) -> Result<Vec<RecommendationItem>, QueryError> {
        self.check_seed(seed)?;
        if !self.contexts().contains(context) {
            return Err(QueryError::UnknownContext(context.to_string()));
        }
        let first = self.graph.neighbors(seed, context);
        let mut best: BTreeMap<String, f64> = first.clone();
        for (mid, &s1) in &first {
            for (doc, s2) in self.graph.neighbors(mid, context) {
                if doc == seed {
                    continue;
                }
                let slot = best.entry(doc).or_insert(0.0);
                *slot = slot.max(s1 * s2);
            }
        }
        let mut items: Vec<RecommendationItem> = best
            .into_iter()
            .filter(|(id, s)| *s > 0.0 && id != seed && self.corpus.contains(id))
            .map(|(id, score)| {
                let provenance = self.graph.provenance_between(seed, &id, context);
                let matched = vec![MatchedContext {
                    context: context.to_string(),
                    sim: score,
                }];
                self.item(&id, score, matched, provenance)
            })
            .collect();
        rank(&mut items, k);
        Ok(items)
    }
}
