use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Result};

pub const DEFAULT_MIN_COUNT: usize = 5;
pub const DEFAULT_THRESHOLD: f64 = 10.0;

const JOINER: char = '_';

/// Learned phrase table. A pair `(a, b)` is merged into `a_b` when it occurs
/// at least `min_count` times and scores at least `threshold` under
/// `(count(a,b) - min_count) * N / (count(a) * count(b))`, with `N` the total
/// token count of the training corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "BigramModelRepr", from = "BigramModelRepr")]
pub struct BigramModel {
    pub min_count: usize,
    pub threshold: f64,
    scored_pairs: HashMap<(String, String), f64>,
}

#[derive(Serialize, Deserialize)]
struct BigramModelRepr {
    min_count: usize,
    threshold: f64,
    pairs: Vec<(String, String, f64)>,
}

impl From<BigramModel> for BigramModelRepr {
    fn from(model: BigramModel) -> Self {
        let mut pairs: Vec<_> = model
            .scored_pairs
            .into_iter()
            .map(|((a, b), s)| (a, b, s))
            .collect();
        pairs.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
        Self {
            min_count: model.min_count,
            threshold: model.threshold,
            pairs,
        }
    }
}

impl From<BigramModelRepr> for BigramModel {
    fn from(repr: BigramModelRepr) -> Self {
        Self {
            min_count: repr.min_count,
            threshold: repr.threshold,
            scored_pairs: repr
                .pairs
                .into_iter()
                .map(|(a, b, s)| ((a, b), s))
                .collect(),
        }
    }
}

fn pairable(token: &str) -> bool {
    !token.contains(JOINER)
}

impl BigramModel {
    /// Counts unigrams and adjacent pairs over the corpus and keeps the pairs
    /// that pass both the count and the score threshold.
    pub fn learn(corpus: &Corpus, min_count: usize, threshold: f64) -> Result<Self> {
        if min_count < 1 {
            return Err(CorpusError::Config(
                "bigram min_count must be at least 1".into(),
            ));
        }
        let mut unigrams: HashMap<&str, usize> = HashMap::new();
        let mut pairs: HashMap<(&str, &str), usize> = HashMap::new();
        let mut total = 0usize;
        for doc in corpus {
            total += doc.tokens.len();
            for token in &doc.tokens {
                *unigrams.entry(token).or_default() += 1;
            }
            for w in doc.tokens.windows(2) {
                if pairable(&w[0]) && pairable(&w[1]) {
                    *pairs.entry((&w[0], &w[1])).or_default() += 1;
                }
            }
        }
        let n = total as f64;
        let scored_pairs = pairs
            .into_iter()
            .filter(|&(_, count)| count >= min_count)
            .filter_map(|((a, b), count)| {
                let score =
                    (count - min_count) as f64 * n / (unigrams[a] as f64 * unigrams[b] as f64);
                (score >= threshold).then(|| ((a.to_string(), b.to_string()), score))
            })
            .collect();
        Ok(Self {
            min_count,
            threshold,
            scored_pairs,
        })
    }

    pub fn score(&self, a: &str, b: &str) -> Option<f64> {
        self.scored_pairs
            .get(&(a.to_string(), b.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.scored_pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scored_pairs.is_empty()
    }

    /// Merges accepted pairs left to right without overlap.
    pub fn apply(&self, tokens: &[String]) -> Vec<String> {
        let mut out = Vec::with_capacity(tokens.len());
        let mut i = 0;
        while i < tokens.len() {
            if i + 1 < tokens.len() {
                let key = (tokens[i].clone(), tokens[i + 1].clone());
                if self.scored_pairs.contains_key(&key) {
                    out.push(format!("{}{JOINER}{}", key.0, key.1));
                    i += 2;
                    continue;
                }
            }
            out.push(tokens[i].clone());
            i += 1;
        }
        out
    }

    pub fn transform(&self, mut corpus: Corpus) -> Corpus {
        for doc in corpus.documents_mut() {
            doc.tokens = self.apply(&doc.tokens);
        }
        corpus
    }
}

/// Learns a [`BigramModel`] on the corpus and applies it.
pub fn bigram_transform(
    corpus: Corpus,
    min_count: usize,
    threshold: f64,
) -> Result<(BigramModel, Corpus)> {
    let model = BigramModel::learn(&corpus, min_count, threshold)?;
    let corpus = model.transform(corpus);
    Ok((model, corpus))
}
