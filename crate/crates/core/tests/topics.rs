mod common;

use common::{matched_overlap, recovery_spec};
use pacte::corpus::build_vocabulary;
use pacte::topics::{generate_synthetic_corpus, select_k, train_lda, LdaConfig, DEFAULT_EPSILON};

fn config(seed: u64) -> LdaConfig {
    LdaConfig {
        k: 3,
        iterations: 500,
        seed,
        ..LdaConfig::default()
    }
}

#[test]
fn recovers_planted_topics() {
    let mut good = 0;
    for seed in 0..5 {
        let planted = generate_synthetic_corpus(&recovery_spec(seed)).unwrap();
        let vocab = build_vocabulary(&planted.corpus, 1, 1.0).unwrap();
        let model = train_lda(&planted.corpus, &vocab, &config(seed)).unwrap();
        let overlap = matched_overlap(&planted, &model, &vocab, 5);
        if overlap.iter().all(|&o| o >= 0.8) {
            good += 1;
        }
    }
    assert!(good >= 4, "recovered in {good}/5 seeds");
}

#[test]
fn coherence_selects_planted_k() {
    let mut hits = 0;
    for seed in 0..5 {
        let planted = generate_synthetic_corpus(&recovery_spec(seed)).unwrap();
        let vocab = build_vocabulary(&planted.corpus, 1, 1.0).unwrap();
        let (best, scores) = select_k(
            &planted.corpus,
            &vocab,
            2,
            6,
            &config(seed),
            10,
            DEFAULT_EPSILON,
        )
        .unwrap();
        assert_eq!(
            scores.iter().map(|s| s.k).collect::<Vec<_>>(),
            [2, 3, 4, 5, 6]
        );
        hits += usize::from(best.k == 3);
    }
    assert!(hits >= 4, "selected K = 3 in {hits}/5 seeds");
}

#[test]
fn same_seed_same_model() {
    let planted = generate_synthetic_corpus(&recovery_spec(7)).unwrap();
    let vocab = build_vocabulary(&planted.corpus, 1, 1.0).unwrap();
    let cfg = LdaConfig {
        iterations: 50,
        ..config(7)
    };
    let a = train_lda(&planted.corpus, &vocab, &cfg).unwrap();
    let b = train_lda(&planted.corpus, &vocab, &cfg).unwrap();
    assert_eq!(a.phi, b.phi);
    assert_eq!(a.theta, b.theta);
}
