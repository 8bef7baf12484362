//! Contextual document similarity for literature recommendation.
//!
//! Document similarity is a triple: a seed document, a target document and
//! the context (method, resource, ...) in which they are similar. The crate
//! builds that relation from a citation-bearing corpus and answers
//! analogical queries such as "same resource, different method".
//!
//! Pipeline:
//!
//! 1. [`corpus`] ingests and persists pre-segmented documents.
//! 2. [`textrep`] and [`linkrep`] provide the one-score baselines (TF-IDF,
//!    SIF embeddings, bibliographic coupling, co-citation, CPI) and the
//!    CPI-weighted graph embedding.
//! 3. [`pairclass`] classifies document pairs into contexts.
//! 4. [`ctxsim`] merges annotation, segment, citation-context and classifier
//!    edges into a [`ctxsim::ContextGraph`].
//! 5. [`queryeng`] answers analogical, diverse and focused queries.

pub mod corpus;
pub mod ctxsim;
pub mod linkrep;
pub mod pairclass;
pub mod queryeng;
pub mod sgd;
#[cfg(any(test, feature = "testkit"))]
pub mod testkit;
pub mod textrep;

pub use corpus::{Corpus, Document};
pub use ctxsim::{ContextConfig, ContextEdge, ContextGraph, ContextSet, Provenance};
pub use queryeng::{AnalogicalQuery, QueryEngine, RecommendationItem};
