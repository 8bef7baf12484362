use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use contextrec::corpus::{Annotation, Document, Section};
use contextrec::ctxsim::{
    all_pairs, from_annotations, from_citation_contexts, from_classifier, from_segments, linked_and_neighbor_pairs,
    CtxError,
};
use contextrec::linkrep::CitationGraph;
use contextrec::pairclass::SoftmaxModel;
use contextrec::sgd::seeded;
use contextrec::testkit::{doc_id, oracle_cosine, random_context_graph, random_corpus, CorpusShape};
use contextrec::textrep::{build_tfidf, tokenize, DenseVector, SparseVector};
use contextrec::{ContextConfig, ContextEdge, ContextGraph, ContextSet, Corpus, Provenance};
use rand::Rng;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn micro() -> (Corpus, ContextConfig) {
    let (corpus, _) = Corpus::ingest_jsonl(fixture("micro.jsonl")).unwrap();
    (corpus, ContextConfig::load(fixture("contexts.json")).unwrap())
}

fn triples(g: &ContextGraph) -> BTreeSet<(String, String, String)> {
    g.edges()
        .map(|e| (e.source.clone(), e.target.clone(), e.context.clone()))
        .collect()
}

fn assert_well_formed(g: &ContextGraph) {
    for e in g.edges() {
        assert_ne!(e.source, e.target);
        assert!(g.contexts().contains(&e.context));
        assert!((0.0..=1.0).contains(&e.score));
        assert!(!e.provenance.is_empty());
    }
}

fn dense(v: &SparseVector, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for &(i, w) in v.entries() {
        out[i as usize] = w;
    }
    out
}

#[test]
fn micro_annotations_give_two_edges() {
    let (corpus, config) = micro();
    let g = from_annotations(&corpus, &config.contexts).unwrap();
    assert_eq!(g.len(), 2);
    assert_eq!(g.sim("zhao2013", "cortes1995", "method").unwrap(), 1.0);
    assert_eq!(g.sim("cortes1995", "zhao2013", "method").unwrap(), 1.0);
    assert_eq!(g.sim("zhao2013", "farber2019", "resource").unwrap(), 1.0);
    assert_eq!(g.sim("zhao2013", "cortes1995", "resource").unwrap(), 0.0);
    assert_eq!(g.sim("zhao2013", "farber2019", "method").unwrap(), 0.0);
    assert_eq!(
        g.contexts_between("zhao2013", "farber2019"),
        vec![("resource".to_string(), 1.0)]
    );
    assert!(g.contexts_between("cortes1995", "farber2019").is_empty());
    assert!(matches!(
        g.sim("zhao2013", "cortes1995", "outcome"),
        Err(CtxError::UnknownContext(_))
    ));
}

#[test]
fn micro_citation_context_agrees_with_annotation() {
    let (corpus, config) = micro();
    let cites = CitationGraph::build(&corpus);
    let g = from_citation_contexts(&corpus, &cites, &config.keyword_rules().unwrap(), &config.contexts).unwrap();
    let expected: BTreeSet<_> = [("zhao2013".to_string(), "cortes1995".to_string(), "method".to_string())].into();
    assert_eq!(triples(&g), expected);
    let merged = ContextGraph::merge([&from_annotations(&corpus, &config.contexts).unwrap(), &g]).unwrap();
    let edge = merged.edge("zhao2013", "cortes1995", "method").unwrap();
    assert_eq!(
        edge.provenance,
        BTreeSet::from([Provenance::Annotation, Provenance::CitationContext])
    );
}

#[test]
fn corpus_without_annotations_gives_empty_graph() {
    let corpus = random_corpus(&mut seeded(1), &CorpusShape::default());
    let g = from_annotations(&corpus, &ContextSet::new(["method"]).unwrap()).unwrap();
    assert!(g.is_empty());
}

#[test]
fn unknown_annotation_context_is_an_error() {
    let (corpus, _) = micro();
    let mut docs = corpus.documents().to_vec();
    docs[0].annotations.push(Annotation {
        context: "outcome".into(),
        target: "farber2019".into(),
    });
    let corpus = Corpus::from_documents(docs).unwrap();
    let contexts = ContextSet::new(["method", "resource"]).unwrap();
    assert!(matches!(
        from_annotations(&corpus, &contexts),
        Err(CtxError::UnknownContext(_))
    ));
}

fn doc_with_sections(id: &str, sections: &[(&str, &str)]) -> Document {
    Document {
        id: id.into(),
        title: String::new(),
        sections: sections
            .iter()
            .map(|(h, t)| Section {
                heading: h.to_string(),
                paragraphs: vec![vec![t.to_string()]],
            })
            .collect(),
        citations: Vec::new(),
        annotations: Vec::new(),
    }
}

#[test]
fn identical_method_sections_score_one() {
    let corpus = Corpus::from_documents(vec![
        doc_with_sections(
            "a",
            &[("Intro", "alpha beta."), ("Our Method", "kernel margin solver.")],
        ),
        doc_with_sections("b", &[("Intro", "gamma delta."), ("METHOD", "kernel margin solver.")]),
        doc_with_sections("c", &[("Intro", "alpha gamma."), ("Results", "kernel tables.")]),
    ])
    .unwrap();
    let config = ContextConfig::method_resource();
    let (vocab, _) = build_tfidf(&corpus).unwrap();
    let g = from_segments(
        &corpus,
        &config.heading_map().unwrap(),
        &vocab,
        0.3,
        &all_pairs(&corpus),
        &config.contexts,
    )
    .unwrap();
    assert_eq!(g.len(), 1);
    let e = g.edge("a", "b", "method").unwrap();
    assert!((e.score - 1.0).abs() < 1e-9);
    assert!(g.edges().all(|e| e.source != "c" && e.target != "c"));
}

/// Segment text by plain lowercase substring match on the heading.
fn oracle_segment(doc: &Document, patterns: &[String]) -> Option<String> {
    let parts: Vec<&str> = doc
        .sections
        .iter()
        .filter(|s| patterns.iter().any(|p| s.heading.to_lowercase().contains(p.as_str())))
        .flat_map(|s| s.paragraphs.iter().flatten().map(String::as_str))
        .collect();
    (!parts.is_empty()).then(|| parts.join(" "))
}

#[test]
fn segments_match_all_pairs_oracle() {
    let mut rng = seeded(41);
    let config = ContextConfig::method_resource();
    let tau = 0.3;
    for _ in 0..10 {
        let corpus = random_corpus(
            &mut rng,
            &CorpusShape {
                docs: 20,
                ..CorpusShape::default()
            },
        );
        let (vocab, _) = build_tfidf(&corpus).unwrap();
        let g = from_segments(
            &corpus,
            &config.heading_map().unwrap(),
            &vocab,
            tau,
            &all_pairs(&corpus),
            &config.contexts,
        )
        .unwrap();
        assert_well_formed(&g);
        let mut expected: BTreeMap<(String, String, String), f64> = BTreeMap::new();
        for c in config.contexts.labels() {
            let patterns = &config.headings[c];
            let docs = corpus.documents();
            for (i, a) in docs.iter().enumerate() {
                for b in &docs[i + 1..] {
                    let (Some(ta), Some(tb)) = (oracle_segment(a, patterns), oracle_segment(b, patterns)) else {
                        continue;
                    };
                    let va = dense(&vocab.vectorize(&ta), vocab.len());
                    let vb = dense(&vocab.vectorize(&tb), vocab.len());
                    let score = oracle_cosine(&va, &vb);
                    if score >= tau {
                        let (s, t) = if a.id < b.id { (&a.id, &b.id) } else { (&b.id, &a.id) };
                        expected.insert((s.clone(), t.clone(), c.clone()), score);
                    }
                }
            }
        }
        assert_eq!(triples(&g), expected.keys().cloned().collect());
        for (key, score) in expected {
            assert!((g.edge(&key.0, &key.1, &key.2).unwrap().score - score).abs() < 1e-9);
        }
    }
}

fn phrase_in(tokens: &[String], phrase: &str) -> bool {
    let p = tokenize(phrase);
    !p.is_empty() && tokens.windows(p.len()).any(|w| w == p.as_slice())
}

#[test]
fn citation_contexts_match_rescan_oracle() {
    let mut rng = seeded(42);
    let config = ContextConfig::method_resource();
    let rules = config.keyword_rules().unwrap();
    for _ in 0..30 {
        let corpus = random_corpus(
            &mut rng,
            &CorpusShape {
                docs: 15,
                ..CorpusShape::default()
            },
        );
        let g = from_citation_contexts(&corpus, &CitationGraph::build(&corpus), &rules, &config.contexts).unwrap();
        assert_well_formed(&g);
        let mut expected = BTreeSet::new();
        for d in corpus.documents() {
            for m in d.citations.iter().filter(|m| m.target != d.id) {
                let sentence = &d.sections[m.section].paragraphs[m.paragraph][m.sentence];
                let tokens = tokenize(sentence);
                let hits: Vec<&String> = config
                    .contexts
                    .labels()
                    .iter()
                    .filter(|c| config.citation_keywords[*c].iter().any(|k| phrase_in(&tokens, k)))
                    .collect();
                if let [c] = hits[..] {
                    expected.insert((d.id.clone(), m.target.clone(), c.clone()));
                }
            }
        }
        assert_eq!(triples(&g), expected);
        assert!(g.edges().all(|e| e.score == 1.0));
    }
}

#[test]
fn ambiguous_sentence_emits_nothing() {
    let mut citing = doc_with_sections("a", &[("Body", "We reuse the method and the dataset of b.")]);
    citing
        .citations
        .push(contextrec::corpus::CitationMarker::new("b", 0, 0, 0));
    let corpus = Corpus::from_documents(vec![citing, doc_with_sections("b", &[("Body", "Text.")])]).unwrap();
    let config = ContextConfig::method_resource();
    let g = from_citation_contexts(
        &corpus,
        &CitationGraph::build(&corpus),
        &config.keyword_rules().unwrap(),
        &config.contexts,
    )
    .unwrap();
    assert!(g.is_empty());
}

#[test]
fn classifier_scores_equal_predictions() {
    let mut rng = seeded(43);
    let contexts = ContextSet::new(["method", "resource"]).unwrap();
    let dim = 3;
    let mut model = SoftmaxModel::zeros(&contexts, 4 * dim);
    model
        .weights_mut()
        .iter_mut()
        .for_each(|w| *w = rng.gen_range(-2.0..2.0));
    model.bias_mut().iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
    let ids: Vec<String> = (0..15).map(doc_id).collect();
    let vectors: BTreeMap<String, DenseVector> = ids
        .iter()
        .map(|id| {
            (
                id.clone(),
                DenseVector::new((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
            )
        })
        .collect();
    let corpus = contextrec::testkit::plain_corpus(&ids);
    let pairs = all_pairs(&corpus);
    assert!(pairs.len() >= 100);
    let tau = 0.4;
    let g = from_classifier(&model, &vectors, &pairs, &contexts, tau).unwrap();
    assert_well_formed(&g);
    for (a, b) in &pairs {
        let p = model.predict(&vectors[a], &vectors[b]).unwrap();
        for (i, c) in contexts.labels().iter().enumerate() {
            match g.edge(a, b, c) {
                Some(e) => {
                    assert_eq!(e.score, p[i]);
                    assert_eq!(e.provenance, BTreeSet::from([Provenance::Classifier]));
                }
                None => assert!(p[i] < tau),
            }
        }
    }
    let other = SoftmaxModel::zeros(&ContextSet::new(["method"]).unwrap(), 4 * dim);
    assert!(matches!(
        from_classifier(&other, &vectors, &pairs, &contexts, tau),
        Err(CtxError::ClassSetMismatch { .. })
    ));
}

fn random_graphs(seed: u64, n: usize) -> Vec<ContextGraph> {
    let mut rng = seeded(seed);
    let ids: Vec<String> = (0..10).map(doc_id).collect();
    let contexts = ContextSet::new(["method", "resource", "findings"]).unwrap();
    (0..n)
        .map(|_| random_context_graph(&mut rng, &ids, &contexts, 0.15))
        .collect()
}

#[test]
fn merge_is_order_independent_and_idempotent() {
    for seed in 0..20 {
        let gs = random_graphs(seed, 3);
        let (a, b, c) = (&gs[0], &gs[1], &gs[2]);
        assert_eq!(
            ContextGraph::merge([a, b]).unwrap(),
            ContextGraph::merge([b, a]).unwrap()
        );
        assert_eq!(
            ContextGraph::merge([a, b, c]).unwrap(),
            ContextGraph::merge([c, a, b]).unwrap()
        );
        assert_eq!(ContextGraph::merge([a, a]).unwrap(), *a);
        let empty = ContextGraph::new(a.contexts().clone());
        assert_eq!(ContextGraph::merge([&empty, a]).unwrap(), *a);
        assert_well_formed(&ContextGraph::merge([a, b, c]).unwrap());
    }
}

#[test]
fn merge_keeps_max_score_and_all_provenances() {
    let contexts = ContextSet::new(["method"]).unwrap();
    let mut x = ContextGraph::new(contexts.clone());
    x.insert(ContextEdge::new("a", "b", "method", 0.6, Provenance::Classifier))
        .unwrap();
    let mut y = ContextGraph::new(contexts.clone());
    y.insert(ContextEdge::new("a", "b", "method", 1.0, Provenance::Annotation))
        .unwrap();
    let m = ContextGraph::merge([&x, &y]).unwrap();
    assert_eq!(m.len(), 1);
    let e = m.edge("a", "b", "method").unwrap();
    assert_eq!(e.score, 1.0);
    assert_eq!(
        e.provenance,
        BTreeSet::from([Provenance::Annotation, Provenance::Classifier])
    );
    let z = ContextGraph::new(ContextSet::new(["resource"]).unwrap());
    assert!(matches!(
        ContextGraph::merge([&x, &z]),
        Err(CtxError::ContextSetMismatch { .. })
    ));
    assert!(matches!(
        ContextGraph::merge(std::iter::empty()),
        Err(CtxError::EmptyMerge)
    ));
}

#[test]
fn invalid_edges_are_rejected() {
    let mut g = ContextGraph::new(ContextSet::new(["method"]).unwrap());
    assert!(matches!(
        g.insert(ContextEdge::new("a", "a", "method", 0.5, Provenance::Segment)),
        Err(CtxError::SelfEdge(_))
    ));
    assert!(matches!(
        g.insert(ContextEdge::new("a", "b", "method", 1.5, Provenance::Segment)),
        Err(CtxError::ScoreOutOfRange(_))
    ));
    assert!(g
        .insert(ContextEdge::new("a", "b", "other", 0.5, Provenance::Segment))
        .is_err());
    assert!(g.is_empty());
}

#[test]
fn indexes_agree() {
    for g in random_graphs(50, 10) {
        let all: BTreeSet<_> = triples(&g);
        let key = |e: &ContextEdge| (e.source.clone(), e.target.clone(), e.context.clone());
        let nodes: BTreeSet<String> = g.edges().flat_map(|e| [e.source.clone(), e.target.clone()]).collect();
        let by_source: BTreeSet<_> = nodes.iter().flat_map(|n| g.edges_from(n).map(key)).collect();
        let by_target: BTreeSet<_> = nodes.iter().flat_map(|n| g.edges_to(n).map(key)).collect();
        let by_context: BTreeSet<_> = g
            .contexts()
            .labels()
            .iter()
            .flat_map(|c| g.edges_in(c).map(key))
            .collect();
        assert_eq!(by_source, all);
        assert_eq!(by_target, all);
        assert_eq!(by_context, all);
    }
}

#[test]
fn sim_is_symmetric_bounded_and_matches_contexts_between() {
    for g in random_graphs(60, 10) {
        let ids: Vec<String> = (0..10).map(doc_id).collect();
        for a in &ids {
            for b in &ids {
                let mut expected = Vec::new();
                for c in g.contexts().labels() {
                    let s = g.sim(a, b, c).unwrap();
                    assert_eq!(s, g.sim(b, a, c).unwrap());
                    assert!((0.0..=1.0).contains(&s));
                    if s > 0.0 {
                        expected.push((c.clone(), s));
                    }
                }
                expected.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
                assert_eq!(g.contexts_between(a, b), expected);
            }
        }
    }
}

#[test]
fn jsonl_round_trip() {
    for g in random_graphs(70, 5) {
        let text = g.to_jsonl();
        assert_eq!(ContextGraph::from_jsonl(&text, g.contexts().clone(), "mem").unwrap(), g);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for field in ["s", "t", "c", "score", "prov"] {
            assert!(first.get(field).is_some(), "missing {field}");
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.jsonl");
        g.save(&path).unwrap();
        assert_eq!(ContextGraph::load(&path, g.contexts().clone()).unwrap(), g);
    }
}

#[test]
fn candidate_pairs_cover_citation_links() {
    let mut rng = seeded(44);
    let corpus = random_corpus(
        &mut rng,
        &CorpusShape {
            docs: 25,
            ..CorpusShape::default()
        },
    );
    let cites = CitationGraph::build(&corpus);
    let (_, tfidf) = build_tfidf(&corpus).unwrap();
    let pairs = linked_and_neighbor_pairs(&corpus, &cites, &tfidf, 3);
    for d in corpus.documents() {
        for m in &d.citations {
            if m.target != d.id && corpus.contains(&m.target) {
                let key = if d.id < m.target {
                    (d.id.clone(), m.target.clone())
                } else {
                    (m.target.clone(), d.id.clone())
                };
                assert!(pairs.contains(&key));
            }
        }
    }
    assert!(pairs
        .iter()
        .all(|(a, b)| a < b && corpus.contains(a) && corpus.contains(b)));
    assert!(pairs.is_subset(&all_pairs(&corpus)));
}

#[test]
fn config_files_parse() {
    let (_, config) = micro();
    assert_eq!(config.contexts.labels(), ["method", "resource"]);
    assert_eq!(config, ContextConfig::method_resource());
    assert!(ContextConfig::parse(r#"{"contexts": ["method"], "headings": {"resource": ["data"]}}"#, "mem").is_err());
    assert!(ContextConfig::parse(r#"{"contexts": ["method"], "headings": {"method": ["("]}}"#, "mem").is_err());
    ContextConfig::scholarly().validate().unwrap();
}
