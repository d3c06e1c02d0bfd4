mod common;

use std::collections::BTreeSet;

use common::oracles::pca_oracle;
use ndarray::{Array1, Array2};
use pacte::corpus::Side;
use pacte::encoder::ContextualEncoding;
use pacte::polarization::{
    cc_topic_embedding, dc_keyword_embedding, dc_topic_embedding, pca_project, polarization_score,
    rank_topics, CcTopicEmbedding, PolarizationScore,
};
use pacte::topics::{DocWeight, Keyword, TopicDocs, TopicKeywords};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cc(side: Side, v: Vec<f64>) -> CcTopicEmbedding {
    CcTopicEmbedding {
        side,
        topic_id: 0,
        vector: Array1::from(v),
        contributing_docs: vec![],
    }
}

fn nonzero_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, dim)
        .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
}

fn pair_of_vecs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..12).prop_flat_map(|d| (nonzero_vec(d), nonzero_vec(d)))
}

proptest! {
    #[test]
    fn self_and_opposite(v in (1usize..16).prop_flat_map(nonzero_vec)) {
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let same = polarization_score(&cc(Side::Liberal, v.clone()), &cc(Side::Conservative, v.clone())).unwrap();
        let opp = polarization_score(&cc(Side::Liberal, v), &cc(Side::Conservative, neg)).unwrap();
        prop_assert!(same.beta.abs() < 1e-12);
        prop_assert!((opp.beta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta_scale_invariant((l, r) in pair_of_vecs(), a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        let base = polarization_score(&cc(Side::Liberal, l.clone()), &cc(Side::Conservative, r.clone())).unwrap();
        let la: Vec<f64> = l.iter().map(|x| x * a).collect();
        let rb: Vec<f64> = r.iter().map(|x| x * b).collect();
        let scaled = polarization_score(&cc(Side::Liberal, la), &cc(Side::Conservative, rb)).unwrap();
        prop_assert!((base.beta - scaled.beta).abs() <= 1e-9);
        prop_assert!((0.0..=1.0).contains(&base.beta));
        prop_assert_eq!(base.beta, 0.5 * (1.0 - base.cosine));
    }

    #[test]
    fn ranking_respects_beta_order(betas in prop::collection::vec(0.0f64..1.0, 1..20), ties in prop::collection::vec(0usize..3, 1..20)) {
        // a few forced ties
        let scores: Vec<PolarizationScore> = betas
            .iter()
            .enumerate()
            .map(|(t, &b)| {
                let b = if ties.get(t) == Some(&0) { 0.5 } else { b };
                PolarizationScore::from_cosine(t, 1.0 - 2.0 * b)
            })
            .collect();
        let ranking = rank_topics(("l".into(), "r".into()), &scores, &BTreeSet::new());
        prop_assert_eq!(ranking.entries.len(), scores.len());
        for w in ranking.entries.windows(2) {
            prop_assert!(w[0].beta > w[1].beta || (w[0].beta == w[1].beta && w[0].topic_id < w[1].topic_id));
        }
    }
}

/// Random encoding over a small token alphabet plus the keyword list.
fn random_case(seed: u64) -> (Vec<ContextualEncoding>, TopicKeywords, TopicDocs) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(2..6);
    let alphabet = ["k0", "k1", "k2", "k3", "x", "y"];
    let raw: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let keywords = TopicKeywords {
        topic_id: 0,
        entries: raw
            .iter()
            .enumerate()
            .map(|(i, w)| Keyword {
                token: format!("k{i}"),
                weight: w / total,
            })
            .collect(),
        raw_mass: 1.0,
    };
    let n_docs = rng.random_range(1..6);
    let encodings: Vec<ContextualEncoding> = (0..n_docs)
        .map(|d| {
            let len = rng.random_range(1..10);
            let tokens: Vec<String> = (0..len)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())].to_string())
                .collect();
            ContextualEncoding {
                doc_id: format!("d{d}"),
                tokens,
                token_vectors: Array2::from_shape_fn((len, dim), |_| rng.random_range(-5.0..5.0)),
                pooled: Array1::from_shape_fn(dim, |_| rng.random_range(-5.0..5.0)),
            }
        })
        .collect();
    let q: Vec<f64> = (0..n_docs).map(|_| rng.random_range(0.01..1.0)).collect();
    let qt: f64 = q.iter().sum();
    let docs = TopicDocs {
        topic_id: 0,
        side: Side::Liberal,
        entries: q
            .iter()
            .enumerate()
            .map(|(i, w)| DocWeight {
                doc_id: format!("d{i}"),
                weight: w / qt,
            })
            .collect(),
    };
    (encodings, keywords, docs)
}

fn within_hull(point: &Array1<f64>, hull: &[Array1<f64>], rng: &mut ChaCha8Rng) -> bool {
    // support-function test along random directions plus the coordinate axes
    let dim = point.len();
    let mut dirs: Vec<Array1<f64>> = (0..dim)
        .flat_map(|i| {
            let mut e = Array1::zeros(dim);
            e[i] = 1.0;
            [e.clone(), -e]
        })
        .collect();
    dirs.extend((0..32).map(|_| Array1::from_shape_fn(dim, |_| rng.random_range(-1.0..1.0))));
    dirs.iter().all(|u| {
        let p = u.dot(point);
        let max = hull
            .iter()
            .map(|h| u.dot(h))
            .fold(f64::NEG_INFINITY, f64::max);
        p <= max + 1e-9
    })
}

#[test]
fn embeddings_are_convex_combinations_and_two_stage_is_linear() {
    let mut checked = 0;
    for seed in 0..300 {
        let (encodings, keywords, docs) = random_case(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 10_000);
        let dc: Vec<_> = encodings
            .iter()
            .map(|e| dc_topic_embedding(e, &keywords))
            .collect();
        for (enc, emb) in encodings.iter().zip(&dc) {
            if let Some(emb) = emb {
                let hull: Vec<Array1<f64>> = emb
                    .used_keywords
                    .iter()
                    .map(|(k, _)| dc_keyword_embedding(enc, k).unwrap())
                    .collect();
                assert!(within_hull(&emb.vector, &hull, &mut rng), "seed {seed}");
                let sum: f64 = emb.used_keywords.iter().map(|k| k.1).sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
        let Ok(cc) = cc_topic_embedding(&dc, &docs) else {
            assert!(dc.iter().all(Option::is_none));
            continue;
        };
        let hull: Vec<Array1<f64>> = dc.iter().flatten().map(|d| d.vector.clone()).collect();
        assert!(within_hull(&cc.vector, &hull, &mut rng), "seed {seed}");

        // direct single-stage sum with combined weights q'_j * p'_jk
        let q_total: f64 = docs
            .entries
            .iter()
            .zip(&dc)
            .filter(|(_, d)| d.is_some())
            .map(|(e, _)| e.weight)
            .sum();
        let mut direct = Array1::zeros(cc.vector.len());
        for ((entry, emb), enc) in docs.entries.iter().zip(&dc).zip(&encodings) {
            let Some(emb) = emb else { continue };
            for (token, p) in &emb.used_keywords {
                // recompute the keyword mean independently
                let rows: Vec<_> = enc
                    .tokens
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| *t == token)
                    .map(|(i, _)| i)
                    .collect();
                let mean = rows
                    .iter()
                    .fold(Array1::zeros(direct.len()), |acc: Array1<f64>, &i| {
                        acc + enc.token_vectors.row(i)
                    })
                    / rows.len() as f64;
                direct.scaled_add(entry.weight / q_total * p, &mean);
            }
        }
        assert!(
            (&direct - &cc.vector).iter().all(|d| d.abs() <= 1e-9),
            "seed {seed}"
        );
        checked += 1;
    }
    assert!(checked > 100);
}

#[test]
fn per_side_rescaling_keeps_ranking() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let topics: Vec<(Vec<f64>, Vec<f64>)> = (0..8)
        .map(|_| {
            (
                (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(),
                (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    let score_all = |a: f64, b: f64| -> Vec<PolarizationScore> {
        topics
            .iter()
            .enumerate()
            .map(|(t, (l, r))| {
                let mut left = cc(Side::Liberal, l.iter().map(|x| x * a).collect());
                let mut right = cc(Side::Conservative, r.iter().map(|x| x * b).collect());
                left.topic_id = t;
                right.topic_id = t;
                polarization_score(&left, &right).unwrap()
            })
            .collect()
    };
    let pair = ("l".to_string(), "r".to_string());
    let base = rank_topics(pair.clone(), &score_all(1.0, 1.0), &BTreeSet::new());
    let scaled = rank_topics(pair, &score_all(37.0, 0.02), &BTreeSet::new());
    assert_eq!(base.topic_ids(), scaled.topic_ids());
}

#[test]
fn pca_matches_jacobi_oracle() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let matrix = Array2::from_shape_fn((10, 5), |(i, j)| rows[i][j]);
        let ours = pca_project(&matrix, 2).unwrap();
        let oracle = pca_oracle(&rows, 2);
        for (i, row) in oracle.iter().enumerate() {
            for (c, expected) in row.iter().enumerate() {
                let diff = (ours.coordinates[[i, c]] - expected).abs();
                assert!(diff < 1e-6, "seed {seed} row {i} comp {c}: {diff:e}");
            }
        }
    }
}

#[test]
fn keyword_beyond_truncation_is_absent() {
    let enc = ContextualEncoding {
        doc_id: "d".into(),
        tokens: vec!["a".into(), "b".into()],
        token_vectors: Array2::zeros((2, 3)),
        pooled: Array1::zeros(3),
    };
    // the document had "late" after position max_len - 1; the encoding no longer does
    assert!(dc_keyword_embedding(&enc, "late").is_none());
}
