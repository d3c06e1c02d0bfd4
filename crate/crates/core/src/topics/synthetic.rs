use chrono::NaiveDate;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::{Result, TopicError};
use crate::corpus::{Corpus, Document, Side};

/// Parameters of a planted-topic corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub k: usize,
    pub v: usize,
    pub d: usize,
    pub doc_len: usize,
    /// Dirichlet concentration of each document's topic mixture.
    pub alpha: f64,
    /// Dirichlet concentration of each topic's word weights within its block.
    pub beta: f64,
    pub seed: u64,
}

/// A generated corpus plus the distributions it was drawn from.
#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// K × V; column j is the word `words[j]`.
    pub true_phi: Array2<f64>,
    /// D × K; row i is document `i` of the corpus.
    pub true_theta: Array2<f64>,
    pub words: Vec<String>,
}

impl SyntheticCorpus {
    /// Indices of the `m` most probable words of a planted topic.
    pub fn true_top_words(&self, topic: usize, m: usize) -> Vec<usize> {
        let row = self.true_phi.row(topic);
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        order.truncate(m);
        order
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, concentration: f64, len: usize) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    let mut draw: Vec<f64> = (0..len).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draw.iter().sum();
    if total > 0.0 && total.is_finite() {
        draw.iter_mut().for_each(|x| *x /= total);
    } else {
        draw.iter_mut().for_each(|x| *x = 1.0 / len as f64);
    }
    draw
}

fn categorical(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Draws a corpus from the LDA generative process with planted, disjoint
/// topics: topic k puts all of its mass on the k-th contiguous block of the
/// vocabulary. Words are named `w000`, `w001`, … so lexicographic order
/// matches word index. Documents alternate liberal / conservative.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    let SyntheticSpec {
        k,
        v,
        d,
        doc_len,
        alpha,
        beta,
        seed,
    } = *spec;
    if k == 0 || v < k {
        return Err(TopicError::Config(format!(
            "need 1 <= K <= V, got K={k}, V={v}"
        )));
    }
    if doc_len == 0 {
        return Err(TopicError::Config(
            "doc_len must be positive (empty documents)".into(),
        ));
    }
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(TopicError::Config("concentrations must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = v.to_string().len().max(3);
    let words: Vec<String> = (0..v).map(|j| format!("w{j:0width$}")).collect();

    let block = v / k;
    let mut true_phi = Array2::zeros((k, v));
    for t in 0..k {
        let start = t * block;
        let end = if t + 1 == k { v } else { start + block };
        let weights = dirichlet(&mut rng, beta, end - start);
        for (j, w) in (start..end).zip(weights) {
            true_phi[[t, j]] = w;
        }
    }

    let mut true_theta = Array2::zeros((d, k));
    let date = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let mut docs = Vec::with_capacity(d);
    for i in 0..d {
        let mix = if k == 1 {
            vec![1.0]
        } else {
            dirichlet(&mut rng, alpha, k)
        };
        let tokens = (0..doc_len)
            .map(|_| {
                let t = categorical(&mut rng, &mix);
                let row = true_phi.row(t);
                words[categorical(&mut rng, row.as_slice().unwrap())].clone()
            })
            .collect();
        for (t, p) in mix.into_iter().enumerate() {
            true_theta[[i, t]] = p;
        }
        let side = if i % 2 == 0 {
            Side::Liberal
        } else {
            Side::Conservative
        };
        docs.push(Document {
            id: format!("doc{i:05}"),
            source: format!("synthetic-{side}"),
            side,
            date,
            raw_text: String::new(),
            tokens,
        });
    }
    Ok(SyntheticCorpus {
        corpus: Corpus::new(docs).expect("generated ids are unique"),
        true_phi,
        true_theta,
        words,
    })
}
