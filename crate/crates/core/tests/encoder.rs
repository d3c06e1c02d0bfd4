mod common;

use common::{doc, marker_corpus, marker_vocabulary};
use pacte::corpus::{Corpus, Side, Vocabulary};
use pacte::encoder::{
    evaluate_classifier, gradient_check, train_partisanship, ClassificationMetrics, EncoderConfig,
    EncoderModel, LabelMode, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_config(vocab: &Vocabulary) -> EncoderConfig {
    EncoderConfig {
        d_model: 8,
        n_heads: 1,
        n_layers: 1,
        ffn_dim: 16,
        max_len: 16,
        init_std: 0.5,
        ..EncoderConfig::for_vocabulary(vocab)
    }
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let vocab = Vocabulary::from_tokens(["a", "b", "c", "d"]);
    let docs = [
        doc("x", Side::Liberal, &["a", "b", "c", "a"]),
        doc("y", Side::Conservative, &["d", "c", "zz"]),
    ];
    for seed in 0..3 {
        let model = EncoderModel::new(tiny_config(&vocab), vocab.clone(), seed).unwrap();
        for (name, rel) in gradient_check(&model, &docs, 1e-5).unwrap() {
            assert!(rel < 1e-4, "seed {seed}: {name} relative error {rel:e}");
        }
    }
}

#[test]
fn multi_head_multi_layer_gradient() {
    let vocab = Vocabulary::from_tokens(["a", "b", "c"]);
    let config = EncoderConfig {
        d_model: 8,
        n_heads: 2,
        n_layers: 2,
        ffn_dim: 12,
        max_len: 8,
        init_std: 0.4,
        ..EncoderConfig::for_vocabulary(&vocab)
    };
    let model = EncoderModel::new(config, vocab, 7).unwrap();
    let docs = [
        doc("x", Side::Liberal, &["a", "b", "c"]),
        doc("y", Side::Conservative, &["c", "c", "a", "b", "b"]),
    ];
    for (name, rel) in gradient_check(&model, &docs, 1e-5).unwrap() {
        assert!(rel < 1e-4, "{name} relative error {rel:e}");
    }
}

fn small_config(vocab: &Vocabulary) -> EncoderConfig {
    EncoderConfig {
        d_model: 32,
        n_heads: 4,
        n_layers: 2,
        ffn_dim: 64,
        max_len: 32,
        ..EncoderConfig::for_vocabulary(vocab)
    }
}

#[test]
fn learns_marker_token() {
    let train = marker_corpus(200, 20, 1, "t");
    let val = marker_corpus(100, 20, 2, "v");
    let tc = TrainConfig {
        learning_rate: 1e-3,
        batch_size: 16,
        epochs: 30,
        seed: 0,
        ..Default::default()
    };
    let out = train_partisanship(
        small_config(&marker_vocabulary()),
        marker_vocabulary(),
        &train,
        &val,
        &tc,
    )
    .unwrap();
    let f1 = evaluate_classifier(&out.model, &val).unwrap().f1;
    assert!(
        f1 >= 0.95,
        "validation F1 {f1}, history {:?}",
        out.epochs.iter().map(|e| e.train_loss).collect::<Vec<_>>()
    );
    assert_eq!(out.epochs.len(), 30);
}

/// Full-batch steps, so the per-epoch loss is that of one fixed training batch.
#[test]
fn default_learning_rate_loss_does_not_increase() {
    let mut monotone = 0;
    for seed in 0..5 {
        let train = marker_corpus(200, 20, 100 + seed, "t");
        let tc = TrainConfig {
            epochs: 5,
            seed,
            batch_size: train.len(),
            ..Default::default()
        };
        let out = train_partisanship(
            small_config(&marker_vocabulary()),
            marker_vocabulary(),
            &train,
            &Corpus::default(),
            &tc,
        )
        .unwrap();
        let losses: Vec<f64> = std::iter::once(out.initial_train_loss)
            .chain(out.epochs.iter().map(|e| e.train_loss))
            .collect();
        if losses.windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
    }
    assert!(monotone >= 4, "{monotone}/5 seeds non-increasing");
}

#[test]
fn training_is_deterministic_and_none_mode_is_identity() {
    let train = marker_corpus(40, 10, 5, "t");
    let val = marker_corpus(20, 10, 6, "v");
    let vocab = marker_vocabulary();
    let tc = TrainConfig {
        learning_rate: 1e-3,
        batch_size: 8,
        epochs: 2,
        seed: 9,
        ..Default::default()
    };
    let a = train_partisanship(small_config(&vocab), vocab.clone(), &train, &val, &tc).unwrap();
    let b = train_partisanship(small_config(&vocab), vocab.clone(), &train, &val, &tc).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.epochs, b.epochs);

    let none = TrainConfig {
        label_mode: LabelMode::None,
        ..tc
    };
    let out = train_partisanship(small_config(&vocab), vocab.clone(), &train, &val, &none).unwrap();
    let fresh = EncoderModel::new(small_config(&vocab), vocab, 9).unwrap();
    assert_eq!(out.model, fresh);
    assert!(out.epochs.is_empty());
}

#[test]
fn coin_predictions_have_chance_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let actual: Vec<bool> = (0..1000).map(|i| i % 2 == 0).collect();
    let predicted: Vec<bool> = (0..1000).map(|_| rng.random_bool(0.5)).collect();
    let m = ClassificationMetrics::from_predictions(&predicted, &actual).unwrap();
    assert!((m.accuracy - 0.5).abs() <= 0.05, "{}", m.accuracy);
}
