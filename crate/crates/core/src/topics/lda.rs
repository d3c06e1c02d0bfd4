use std::collections::HashMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Result, TopicError};
use crate::corpus::{Corpus, Vocabulary};

/// Collapsed Gibbs sampling settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub k: usize,
    /// Symmetric document-topic prior; `None` means `50 / K`.
    pub alpha: Option<f64>,
    /// Symmetric topic-word prior.
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Number of final sweeps whose counts are averaged into the point
    /// estimates. 1 uses the final sample only.
    pub average_last: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            k: 10,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            seed: 0,
            average_last: 1,
        }
    }
}

impl LdaConfig {
    pub fn with_k(&self, k: usize) -> Self {
        Self { k, ..self.clone() }
    }

    pub fn alpha_value(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

/// A trained topic model. Rows of `theta` follow `doc_ids`.
#[derive(Clone, Debug, PartialEq)]
pub struct LdaModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    /// K × V topic-word probabilities.
    pub phi: Array2<f64>,
    /// D × K document-topic probabilities.
    pub theta: Array2<f64>,
    pub doc_ids: Vec<String>,
    /// Per-token topic ids of the final sample (empty for a loaded model).
    pub assignments: Vec<Vec<u32>>,
    pub vocab_fingerprint: String,
    doc_index: HashMap<String, usize>,
}

impl LdaModel {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        k: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
        iterations: usize,
        phi: Array2<f64>,
        theta: Array2<f64>,
        doc_ids: Vec<String>,
        assignments: Vec<Vec<u32>>,
        vocab_fingerprint: String,
    ) -> Self {
        let doc_index = doc_ids
            .iter()
            .enumerate()
            .map(|(i, d)| (d.clone(), i))
            .collect();
        Self {
            k,
            alpha,
            beta,
            seed,
            iterations,
            phi,
            theta,
            doc_ids,
            assignments,
            vocab_fingerprint,
            doc_index,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.phi.ncols()
    }

    pub fn num_docs(&self) -> usize {
        self.theta.nrows()
    }

    /// Row of `theta` for a training document.
    pub fn doc_row(&self, doc_id: &str) -> Option<usize> {
        self.doc_index.get(doc_id).copied()
    }
}

/// Mutable state of one Gibbs chain.
pub(crate) struct GibbsChain<'a> {
    docs: &'a [Vec<u32>],
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    pub(crate) z: Vec<Vec<u32>>,
    /// D × K
    pub(crate) n_dk: Vec<u32>,
    /// K × V
    pub(crate) n_kw: Vec<u32>,
    pub(crate) n_k: Vec<u32>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl<'a> GibbsChain<'a> {
    pub(crate) fn new(
        docs: &'a [Vec<u32>],
        k: usize,
        v: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut n_dk = vec![0u32; docs.len() * k];
        let mut n_kw = vec![0u32; k * v];
        let mut n_k = vec![0u32; k];
        let z = docs
            .iter()
            .enumerate()
            .map(|(d, words)| {
                words
                    .iter()
                    .map(|&w| {
                        let t = rng.random_range(0..k);
                        n_dk[d * k + t] += 1;
                        n_kw[t * v + w as usize] += 1;
                        n_k[t] += 1;
                        t as u32
                    })
                    .collect()
            })
            .collect();
        Self {
            docs,
            k,
            v,
            alpha,
            beta,
            z,
            n_dk,
            n_kw,
            n_k,
            rng,
            weights: vec![0.0; k],
        }
    }

    /// Resamples every token once from its full conditional
    /// `(n_dk + α)(n_kw + β) / (n_k + Vβ)`.
    pub(crate) fn sweep(&mut self) {
        let (k, v) = (self.k, self.v);
        let v_beta = v as f64 * self.beta;
        for (d, words) in self.docs.iter().enumerate() {
            let row = d * k;
            for (i, &w) in words.iter().enumerate() {
                let w = w as usize;
                let old = self.z[d][i] as usize;
                self.n_dk[row + old] -= 1;
                self.n_kw[old * v + w] -= 1;
                self.n_k[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (self.n_dk[row + t] as f64 + self.alpha)
                        * (self.n_kw[t * v + w] as f64 + self.beta)
                        / (self.n_k[t] as f64 + v_beta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.weights.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.z[d][i] = new as u32;
                self.n_dk[row + new] += 1;
                self.n_kw[new * v + w] += 1;
                self.n_k[new] += 1;
            }
        }
    }

    /// Count-conservation check: Σ_k n_dk = |d| and Σ_w n_kw = n_k.
    #[cfg(test)]
    pub(crate) fn counts_conserved(&self) -> bool {
        let docs_ok = self.docs.iter().enumerate().all(|(d, words)| {
            self.n_dk[d * self.k..(d + 1) * self.k]
                .iter()
                .map(|&c| c as usize)
                .sum::<usize>()
                == words.len()
        });
        let topics_ok = (0..self.k)
            .all(|t| self.n_kw[t * self.v..(t + 1) * self.v].iter().sum::<u32>() == self.n_k[t]);
        docs_ok && topics_ok
    }
}

/// Trains LDA on the tokens of every document by collapsed Gibbs sampling.
/// Tokens outside `vocab` are ignored.
pub fn train_lda(corpus: &Corpus, vocab: &Vocabulary, config: &LdaConfig) -> Result<LdaModel> {
    let k = config.k;
    if k == 0 {
        return Err(TopicError::Config("K must be at least 1".into()));
    }
    if config.iterations == 0 {
        return Err(TopicError::Config("iterations must be at least 1".into()));
    }
    if config.average_last == 0 || config.average_last > config.iterations {
        return Err(TopicError::Config(format!(
            "average_last must lie in [1, iterations], got {}",
            config.average_last
        )));
    }
    let alpha = config.alpha_value();
    if !(alpha > 0.0 && config.beta > 0.0) {
        return Err(TopicError::Config("priors must be positive".into()));
    }
    let docs: Vec<Vec<u32>> = corpus
        .iter()
        .map(|doc| {
            let ids = vocab.encode(&doc.tokens);
            if ids.is_empty() {
                Err(TopicError::EmptyDocument(doc.id.clone()))
            } else {
                Ok(ids)
            }
        })
        .collect::<Result<_>>()?;
    if docs.is_empty() {
        return Err(TopicError::Config("corpus has no documents".into()));
    }
    let total_tokens: usize = docs.iter().map(Vec::len).sum();
    if k > total_tokens {
        return Err(TopicError::TooManyTopics {
            k,
            tokens: total_tokens,
        });
    }

    let v = vocab.len();
    let mut chain = GibbsChain::new(&docs, k, v, alpha, config.beta, config.seed);
    let mut acc_dk = vec![0.0f64; docs.len() * k];
    let mut acc_kw = vec![0.0f64; k * v];
    let first_kept = config.iterations - config.average_last;
    for it in 0..config.iterations {
        chain.sweep();
        if it >= first_kept {
            acc_dk
                .iter_mut()
                .zip(&chain.n_dk)
                .for_each(|(a, &c)| *a += c as f64);
            acc_kw
                .iter_mut()
                .zip(&chain.n_kw)
                .for_each(|(a, &c)| *a += c as f64);
        }
    }
    let samples = config.average_last as f64;

    let mut phi = Array2::zeros((k, v));
    for t in 0..k {
        let counts = &acc_kw[t * v..(t + 1) * v];
        let n_k: f64 = counts.iter().sum::<f64>() / samples;
        let denom = n_k + v as f64 * config.beta;
        for w in 0..v {
            phi[[t, w]] = (counts[w] / samples + config.beta) / denom;
        }
    }
    let mut theta = Array2::zeros((docs.len(), k));
    for (d, words) in docs.iter().enumerate() {
        let denom = words.len() as f64 + k as f64 * alpha;
        for t in 0..k {
            theta[[d, t]] = (acc_dk[d * k + t] / samples + alpha) / denom;
        }
    }

    Ok(LdaModel::from_parts(
        k,
        alpha,
        config.beta,
        config.seed,
        config.iterations,
        phi,
        theta,
        corpus.iter().map(|d| d.id.clone()).collect(),
        chain.z,
        vocab.fingerprint(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Side};
    use chrono::NaiveDate;

    fn doc(id: &str, tokens: &[&str]) -> Document {
        Document {
            id: id.into(),
            source: "s".into(),
            side: Side::Liberal,
            date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            raw_text: String::new(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn single_topic_closed_form() {
        let corpus = Corpus::new(vec![doc("d", &["a", "a", "a"])]).unwrap();
        let vocab = Vocabulary::from_tokens(["a", "b"]);
        let beta = 0.01;
        let config = LdaConfig {
            k: 1,
            alpha: Some(0.5),
            beta,
            iterations: 3,
            ..Default::default()
        };
        let model = train_lda(&corpus, &vocab, &config).unwrap();
        let v = 2.0;
        assert!((model.phi[[0, 0]] - (3.0 + beta) / (3.0 + v * beta)).abs() < 1e-15);
        assert!((model.phi[[0, 1]] - beta / (3.0 + v * beta)).abs() < 1e-15);
        assert_eq!(model.theta[[0, 0]], 1.0);
    }

    #[test]
    fn counts_conserved_after_every_sweep() {
        let docs: Vec<Vec<u32>> = (0..20)
            .map(|d| {
                (0..(5 + d % 7))
                    .map(|i| ((i * 7 + d) % 11) as u32)
                    .collect()
            })
            .collect();
        let mut chain = GibbsChain::new(&docs, 4, 11, 0.3, 0.05, 9);
        assert!(chain.counts_conserved());
        for _ in 0..25 {
            chain.sweep();
            assert!(chain.counts_conserved());
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let corpus = Corpus::new(vec![
            doc("a", &["x", "y", "x", "z"]),
            doc("b", &["y", "z", "z"]),
            doc("c", &["x", "w", "w", "y"]),
        ])
        .unwrap();
        let vocab = Vocabulary::from_tokens(["w", "x", "y", "z"]);
        let config = LdaConfig {
            k: 2,
            iterations: 50,
            seed: 7,
            ..Default::default()
        };
        let m1 = train_lda(&corpus, &vocab, &config).unwrap();
        let m2 = train_lda(&corpus, &vocab, &config).unwrap();
        assert_eq!(m1.assignments, m2.assignments);
        assert_eq!(m1.phi, m2.phi);
        assert_eq!(m1.theta, m2.theta);
    }

    #[test]
    fn rows_are_probability_vectors() {
        let corpus = Corpus::new(vec![
            doc("a", &["x", "y", "x", "z"]),
            doc("b", &["y", "z", "z"]),
        ])
        .unwrap();
        let vocab = Vocabulary::from_tokens(["w", "x", "y", "z"]);
        let config = LdaConfig {
            k: 3,
            iterations: 20,
            average_last: 5,
            ..Default::default()
        };
        let m = train_lda(&corpus, &vocab, &config).unwrap();
        for row in m.phi.rows().into_iter().chain(m.theta.rows()) {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn empty_document_is_named() {
        let corpus = Corpus::new(vec![doc("a", &["x"]), doc("oov", &["q"])]).unwrap();
        let vocab = Vocabulary::from_tokens(["x"]);
        let err = train_lda(
            &corpus,
            &vocab,
            &LdaConfig {
                k: 1,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, TopicError::EmptyDocument(id) if id == "oov"));
    }

    #[test]
    fn more_topics_than_tokens_rejected() {
        let corpus = Corpus::new(vec![doc("a", &["x", "x"])]).unwrap();
        let vocab = Vocabulary::from_tokens(["x"]);
        let err = train_lda(
            &corpus,
            &vocab,
            &LdaConfig {
                k: 3,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, TopicError::TooManyTopics { k: 3, tokens: 2 }));
    }
}
