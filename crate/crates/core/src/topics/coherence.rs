use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{top_keywords, train_lda, LdaConfig, LdaModel, Result, TopicError};
use crate::corpus::{Corpus, Vocabulary};

pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Mean pairwise NPMI of each topic's top keywords, averaged over topics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceScore {
    pub k: usize,
    pub value: f64,
    pub per_topic: Vec<f64>,
}

/// Normalized PMI from document frequencies over `n_docs` documents.
fn npmi(df_i: usize, df_j: usize, df_ij: usize, n_docs: usize, eps: f64) -> f64 {
    if df_ij == n_docs {
        // both words in every document: the perfect-association limit
        return 1.0;
    }
    let n = n_docs as f64;
    let p_ij = df_ij as f64 / n + eps;
    let p_i = df_i as f64 / n + eps;
    let p_j = df_j as f64 / n + eps;
    let value = (p_ij / (p_i * p_j)).ln() / -p_ij.ln();
    value.clamp(-1.0, 1.0)
}

pub fn coherence_npmi(
    model: &LdaModel,
    vocab: &Vocabulary,
    corpus: &Corpus,
    m: usize,
    epsilon: f64,
) -> Result<CoherenceScore> {
    if m < 2 {
        return Err(TopicError::Config(
            "coherence needs at least 2 keywords per topic".into(),
        ));
    }
    if corpus.is_empty() {
        return Err(TopicError::Config(
            "coherence needs a non-empty corpus".into(),
        ));
    }
    let m = m.min(model.vocab_size());
    let doc_sets: Vec<HashSet<u32>> = corpus
        .iter()
        .map(|d| vocab.encode(&d.tokens).into_iter().collect())
        .collect();
    let n_docs = doc_sets.len();
    let df = |w: u32| doc_sets.iter().filter(|s| s.contains(&w)).count();
    let co_df = |a: u32, b: u32| {
        doc_sets
            .iter()
            .filter(|s| s.contains(&a) && s.contains(&b))
            .count()
    };

    let per_topic = (0..model.k)
        .map(|t| {
            let ids: Vec<u32> = top_keywords(model, vocab, t, m)?
                .tokens()
                .map(|tok| vocab.index_of(tok).expect("keyword comes from vocab"))
                .collect();
            let dfs: Vec<usize> = ids.iter().map(|&w| df(w)).collect();
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for i in 0..ids.len() {
                for j in i + 1..ids.len() {
                    sum += npmi(dfs[i], dfs[j], co_df(ids[i], ids[j]), n_docs, epsilon);
                    pairs += 1;
                }
            }
            Ok(sum / pairs as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let value = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
    Ok(CoherenceScore {
        k: model.k,
        value,
        per_topic,
    })
}

/// Trains one model per K in `[k_min, k_max]` (in parallel) and returns the
/// most coherent one together with the full score table. Ties go to the
/// smaller K.
pub fn select_k(
    corpus: &Corpus,
    vocab: &Vocabulary,
    k_min: usize,
    k_max: usize,
    config: &LdaConfig,
    m: usize,
    epsilon: f64,
) -> Result<(LdaModel, Vec<CoherenceScore>)> {
    if k_min < 2 || k_min > k_max {
        return Err(TopicError::Config(format!(
            "K grid must satisfy 2 <= k_min <= k_max, got [{k_min}, {k_max}]"
        )));
    }
    let runs = (k_min..=k_max)
        .into_par_iter()
        .map(|k| {
            let model = train_lda(corpus, vocab, &config.with_k(k))?;
            let score = coherence_npmi(&model, vocab, corpus, m, epsilon)?;
            log::info!("K = {k}: NPMI coherence {:.4}", score.value);
            Ok((model, score))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, (_, score)) in runs.iter().enumerate() {
        if score.value > runs[best].1.value {
            best = i;
        }
    }
    let scores = runs.iter().map(|(_, s)| s.clone()).collect();
    let model = runs.into_iter().nth(best).map(|(m, _)| m).unwrap();
    Ok((model, scores))
}
