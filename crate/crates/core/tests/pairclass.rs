use std::collections::BTreeMap;

use contextrec::pairclass::{
    class_labels, evaluate, metrics_from_predictions, sample_negative_pairs, symmetrized_examples, train, Example,
    LabeledPair, SoftmaxModel, TrainConfig,
};
use contextrec::sgd::{seeded, SeededRng};
use contextrec::testkit::oracle_macro_f1;
use contextrec::textrep::DenseVector;
use contextrec::ContextSet;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

const DIM: usize = 4;

fn contexts() -> ContextSet {
    ContextSet::new(["method", "resource"]).unwrap()
}

/// Two Gaussian clusters, sigma 0.1, centres 5 apart. Each pair draws both
/// documents from its class cluster.
struct Separable {
    pairs: Vec<LabeledPair>,
    vectors: BTreeMap<String, DenseVector>,
}

fn separable(rng: &mut SeededRng, per_class: usize, tag: &str) -> Separable {
    let noise = Normal::new(0.0, 0.1).unwrap();
    let centre = |label: &str| -> [f64; DIM] {
        // distance between the two centres is 5
        if label == "method" {
            [2.5, 0.0, 0.0, 0.0]
        } else {
            [-2.5, 0.0, 0.0, 0.0]
        }
    };
    let mut out = Separable {
        pairs: Vec::new(),
        vectors: BTreeMap::new(),
    };
    for label in ["method", "resource"] {
        for i in 0..per_class {
            let mut draw = |side: &str| {
                let id = format!("{tag}-{label}-{i}-{side}");
                let v: Vec<f64> = centre(label).iter().map(|c| c + noise.sample(rng)).collect();
                out.vectors.insert(id.clone(), DenseVector::new(v).unwrap());
                id
            };
            let (a, b) = (draw("a"), draw("b"));
            out.pairs.push(LabeledPair::new(a, b, label));
        }
    }
    out
}

fn random_model(rng: &mut SeededRng, dim: usize) -> SoftmaxModel {
    let mut m = SoftmaxModel::zeros(&contexts(), dim);
    m.weights_mut().iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
    m.bias_mut().iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
    m
}

fn random_examples(rng: &mut SeededRng, n: usize, dim: usize, classes: usize) -> Vec<Example> {
    (0..n)
        .map(|_| Example {
            features: (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            class: rng.gen_range(0..classes),
        })
        .collect()
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = seeded(31);
    let h = 1e-5;
    for sample in 0..10 {
        let feature_dim = 4 * (1 + sample % 3);
        let mut model = random_model(&mut rng, feature_dim);
        let batch = random_examples(&mut rng, 8, feature_dim, 3);
        let l2 = [0.0, 1e-3, 0.5][sample % 3];
        let (_, grad) = model.loss_and_gradient(&batch, l2);
        for i in 0..model.weights().len() {
            let orig = model.weights()[i];
            model.weights_mut()[i] = orig + h;
            let up = model.loss_and_gradient(&batch, l2).0;
            model.weights_mut()[i] = orig - h;
            let down = model.loss_and_gradient(&batch, l2).0;
            model.weights_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            assert!(
                relative_error(grad.weights[i], numeric) < 1e-4,
                "w[{i}] {} vs {numeric}",
                grad.weights[i]
            );
        }
        for i in 0..model.bias().len() {
            let orig = model.bias()[i];
            model.bias_mut()[i] = orig + h;
            let up = model.loss_and_gradient(&batch, l2).0;
            model.bias_mut()[i] = orig - h;
            let down = model.loss_and_gradient(&batch, l2).0;
            model.bias_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            assert!(relative_error(grad.bias[i], numeric) < 1e-4);
        }
    }
}

#[test]
fn separable_set_is_learned() {
    let mut rng = seeded(32);
    let train_set = separable(&mut rng, 200, "train");
    let held = separable(&mut rng, 100, "held");
    let outcome = train(
        &train_set.pairs,
        &train_set.vectors,
        &contexts(),
        &TrainConfig::default(),
    )
    .unwrap();
    let train_metrics = evaluate(&outcome.model, &train_set.pairs, &train_set.vectors).unwrap();
    let held_metrics = evaluate(&outcome.model, &held.pairs, &held.vectors).unwrap();
    assert!(
        train_metrics.accuracy >= 0.95,
        "train accuracy {}",
        train_metrics.accuracy
    );
    assert!(
        held_metrics.accuracy >= 0.90,
        "held-out accuracy {}",
        held_metrics.accuracy
    );

    // soft symmetry on held-out pairs
    let mut gap = 0.0;
    let mut n = 0.0;
    for p in &held.pairs {
        let (va, vb) = (&held.vectors[&p.a], &held.vectors[&p.b]);
        let ab = outcome.model.predict(va, vb).unwrap();
        let ba = outcome.model.predict(vb, va).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            gap += (x - y).abs();
            n += 1.0;
        }
    }
    assert!(gap / n <= 0.1, "mean asymmetry {}", gap / n);
}

#[test]
fn training_is_deterministic() {
    let mut rng = seeded(33);
    let data = separable(&mut rng, 30, "det");
    let config = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let a = train(&data.pairs, &data.vectors, &contexts(), &config).unwrap();
    let b = train(&data.pairs, &data.vectors, &contexts(), &config).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.model.to_text(), b.model.to_text());
    assert_eq!(a.loss_history, b.loss_history);
}

#[test]
fn huge_l2_collapses_weights() {
    let mut rng = seeded(34);
    let data = separable(&mut rng, 50, "l2");
    let config = TrainConfig {
        l2: 1e6,
        epochs: 20,
        ..TrainConfig::default()
    };
    let outcome = train(&data.pairs, &data.vectors, &contexts(), &config).unwrap();
    assert!(
        outcome.model.weight_norm() < 1e-2,
        "norm {}",
        outcome.model.weight_norm()
    );
    assert!(outcome.model.weights().iter().all(|w| w.is_finite()));
}

#[test]
fn full_batch_loss_is_non_increasing() {
    let mut rng = seeded(35);
    let mut vectors = BTreeMap::new();
    let mut pairs = Vec::new();
    let labels = ["method", "resource", "none"];
    for i in 0..40 {
        for side in ["a", "b"] {
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            vectors.insert(format!("{i}{side}"), DenseVector::new(v).unwrap());
        }
        pairs.push(LabeledPair::new(format!("{i}a"), format!("{i}b"), labels[i % 3]));
    }
    let config = TrainConfig {
        learning_rate: 0.05,
        epochs: 200,
        batch_size: 2 * pairs.len(),
        l2: 1e-2,
        seed: 1,
    };
    let outcome = train(&pairs, &vectors, &contexts(), &config).unwrap();
    for w in outcome.loss_history.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "loss rose from {} to {}", w[0], w[1]);
    }
    assert!(outcome.final_loss < outcome.loss_history[0]);
}

#[test]
fn constant_predictor_metrics() {
    let labels = vec!["x".to_string(), "y".to_string()];
    let outcomes = vec![(0, 0), (0, 0), (1, 0), (1, 0)];
    let m = metrics_from_predictions(&labels, &outcomes);
    assert_eq!(m.accuracy, 0.5);
    assert!((m.macro_f1 - 1.0 / 3.0).abs() < 1e-12);
    let perfect = metrics_from_predictions(&labels, &[(0, 0), (1, 1)]);
    assert_eq!(perfect.accuracy, 1.0);
    assert_eq!(perfect.confusion, vec![vec![1, 0], vec![0, 1]]);
}

#[test]
fn metrics_match_naive_oracle() {
    let mut rng = seeded(36);
    for _ in 0..20 {
        let classes = rng.gen_range(2..5);
        let labels: Vec<String> = (0..classes).map(|c| format!("c{c}")).collect();
        let outcomes: Vec<(usize, usize)> = (0..rng.gen_range(1..60))
            .map(|_| (rng.gen_range(0..classes), rng.gen_range(0..classes)))
            .collect();
        let m = metrics_from_predictions(&labels, &outcomes);
        let (macro_f1, per) = oracle_macro_f1(&outcomes, classes);
        assert!((m.macro_f1 - macro_f1).abs() < 1e-12);
        for cm in &m.per_class {
            let c = labels.iter().position(|l| *l == cm.label).unwrap();
            assert!((cm.precision - per[c].0).abs() < 1e-12);
            assert!((cm.recall - per[c].1).abs() < 1e-12);
            assert!((cm.f1 - per[c].2).abs() < 1e-12);
        }
        let correct = outcomes.iter().filter(|(t, p)| t == p).count();
        assert!((m.accuracy - correct as f64 / outcomes.len() as f64).abs() < 1e-12);
        for (t, row) in m.confusion.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                assert_eq!(n, outcomes.iter().filter(|o| **o == (t, p)).count());
            }
        }
    }
}

#[test]
fn model_text_round_trip() {
    let mut rng = seeded(37);
    let model = random_model(&mut rng, 8);
    let parsed = SoftmaxModel::parse(&model.to_text(), "mem").unwrap();
    assert_eq!(parsed, model);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.txt");
    model.save(&path).unwrap();
    assert_eq!(SoftmaxModel::load(&path).unwrap(), model);
}

#[test]
fn symmetrized_examples_double_the_pairs() {
    let mut rng = seeded(38);
    let data = separable(&mut rng, 5, "sym");
    let examples = symmetrized_examples(&data.pairs, &data.vectors, &class_labels(&contexts())).unwrap();
    assert_eq!(examples.len(), 2 * data.pairs.len());
    for pair in examples.chunks(2) {
        assert_eq!(pair[0].class, pair[1].class);
        assert_eq!(&pair[0].features[..DIM], &pair[1].features[DIM..2 * DIM]);
    }
}

#[test]
fn negative_sampling_avoids_labeled_pairs() {
    let ids: Vec<String> = (0..10).map(|i| format!("n{i}")).collect();
    let existing = vec![
        LabeledPair::new("n0", "n1", "method"),
        LabeledPair::new("n3", "n2", "resource"),
    ];
    let sampled = sample_negative_pairs(&ids, &existing, 20, 5);
    assert_eq!(sampled.len(), 20);
    let mut keys: Vec<(String, String)> = sampled
        .iter()
        .map(|p| {
            if p.a < p.b {
                (p.a.clone(), p.b.clone())
            } else {
                (p.b.clone(), p.a.clone())
            }
        })
        .collect();
    assert!(!keys.contains(&("n0".into(), "n1".into())));
    assert!(!keys.contains(&("n2".into(), "n3".into())));
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 20);
    assert!(sampled.iter().all(|p| p.label == "none" && p.a != p.b));
    assert_eq!(sample_negative_pairs(&ids, &existing, 20, 5), sampled);
    // only 45 - 2 unordered pairs exist
    assert_eq!(sample_negative_pairs(&ids, &existing, 1000, 5).len(), 43);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn probabilities_form_a_distribution(
        seed in any::<u64>(),
        va in prop::collection::vec(-50.0f64..50.0, 3),
        vb in prop::collection::vec(-50.0f64..50.0, 3),
        scale in 0.0f64..20.0,
    ) {
        let mut rng = seeded(seed);
        let mut model = random_model(&mut rng, 12);
        model.weights_mut().iter_mut().for_each(|w| *w *= scale);
        let p = model
            .predict(&DenseVector::new(va).unwrap(), &DenseVector::new(vb).unwrap())
            .unwrap();
        prop_assert_eq!(p.len(), 3);
        prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}
