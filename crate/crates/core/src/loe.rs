//! Leave-out estimator baseline: each document's token frequencies are scored
//! against party means computed without that document.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Document, Side};
use crate::topics::{top_documents, LdaModel, TopicError};

#[derive(Debug, Error)]
pub enum LoeError {
    #[error("document {0} has no tokens in the restricted vocabulary")]
    NoTokens(String),
    #[error("the {side} side has {count} documents; the leave-out estimate needs at least 2")]
    TooFewDocuments { side: Side, count: usize },
    #[error(transparent)]
    Topic(#[from] TopicError),
}

pub type Result<T, E = LoeError> = std::result::Result<T, E>;

/// Token counts of one document, restricted to a vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenFrequencyVector {
    pub doc_id: String,
    pub counts: BTreeMap<String, usize>,
    pub total: usize,
}

impl TokenFrequencyVector {
    pub fn frequency(&self, token: &str) -> f64 {
        self.counts
            .get(token)
            .map_or(0.0, |&c| c as f64 / self.total as f64)
    }

    /// Normalized frequencies; they sum to one.
    pub fn values(&self) -> BTreeMap<&str, f64> {
        self.counts
            .iter()
            .map(|(t, &c)| (t.as_str(), c as f64 / self.total as f64))
            .collect()
    }
}

pub fn token_frequency(doc: &Document, vocab: &BTreeSet<String>) -> Result<TokenFrequencyVector> {
    let mut counts = BTreeMap::new();
    for token in doc.tokens.iter().filter(|t| vocab.contains(t.as_str())) {
        *counts.entry(token.clone()).or_insert(0usize) += 1;
    }
    let total = counts.values().sum();
    if total == 0 {
        return Err(LoeError::NoTokens(doc.id.clone()));
    }
    Ok(TokenFrequencyVector {
        doc_id: doc.id.clone(),
        counts,
        total,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaveOutEstimate {
    /// In [0, 1].
    pub pi: f64,
    /// Each document's posterior of belonging to its own side.
    pub per_doc_posteriors: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaveOutResult {
    pub topic_id: usize,
    pub pi: f64,
    pub per_doc_posteriors: BTreeMap<String, f64>,
}

/// Dense frequency rows over a shared token index.
fn dense(docs: &[TokenFrequencyVector], index: &BTreeMap<&str, usize>) -> Vec<Vec<f64>> {
    docs.iter()
        .map(|d| {
            let mut row = vec![0.0; index.len()];
            for (t, &c) in &d.counts {
                row[index[t.as_str()]] = c as f64 / d.total as f64;
            }
            row
        })
        .collect()
}

/// Mean of `rows` except `skip`, accumulated as a running mean so that
/// identical rows average to themselves exactly.
fn mean_excluding(rows: &[Vec<f64>], skip: Option<usize>, width: usize) -> Vec<f64> {
    let mut mean = vec![0.0; width];
    let mut k = 0.0;
    for (i, row) in rows.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        k += 1.0;
        for (m, x) in mean.iter_mut().zip(row) {
            *m += (x - *m) / k;
        }
    }
    mean
}

/// `q_i · ρ` computed from integer counts.
fn dot_counts(
    doc: &TokenFrequencyVector,
    index: &BTreeMap<&str, usize>,
    weight: impl Fn(usize) -> f64,
) -> f64 {
    let sum: f64 = doc
        .counts
        .iter()
        .map(|(t, &c)| c as f64 * weight(index[t.as_str()]))
        .sum();
    sum / doc.total as f64
}

/// Average correct-side posterior over both sides. For document i the
/// posterior of a token being conservative is `R(w) / (R(w) + L(w))`, with
/// i's own side mean taken without i; 0/0 counts as 1/2.
pub fn leave_out_estimator(
    left: &[TokenFrequencyVector],
    right: &[TokenFrequencyVector],
) -> Result<LeaveOutEstimate> {
    for (side, docs) in [(Side::Liberal, left), (Side::Conservative, right)] {
        if docs.len() < 2 {
            return Err(LoeError::TooFewDocuments {
                side,
                count: docs.len(),
            });
        }
    }
    let tokens: BTreeSet<&str> = left
        .iter()
        .chain(right)
        .flat_map(|d| d.counts.keys().map(String::as_str))
        .collect();
    let index: BTreeMap<&str, usize> = tokens
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();
    let width = index.len();
    let l_rows = dense(left, &index);
    let r_rows = dense(right, &index);
    let l_full = mean_excluding(&l_rows, None, width);
    let r_full = mean_excluding(&r_rows, None, width);

    let rho = |l: &[f64], r: &[f64], w: usize| {
        let denom = r[w] + l[w];
        if denom == 0.0 {
            0.5
        } else {
            r[w] / denom
        }
    };

    let mut posteriors = BTreeMap::new();
    let mut left_sum = 0.0;
    for (i, doc) in left.iter().enumerate() {
        let l_out = mean_excluding(&l_rows, Some(i), width);
        let p = dot_counts(doc, &index, |w| 1.0 - rho(&l_out, &r_full, w));
        posteriors.insert(doc.doc_id.clone(), p);
        left_sum += p;
    }
    let mut right_sum = 0.0;
    for (i, doc) in right.iter().enumerate() {
        let r_out = mean_excluding(&r_rows, Some(i), width);
        let p = dot_counts(doc, &index, |w| rho(&l_full, &r_out, w));
        posteriors.insert(doc.doc_id.clone(), p);
        right_sum += p;
    }
    let pi = 0.5 * (left_sum / left.len() as f64 + right_sum / right.len() as f64);
    Ok(LeaveOutEstimate {
        pi: pi.clamp(0.0, 1.0),
        per_doc_posteriors: posteriors,
    })
}

/// The estimator on one topic: the top-`n` documents of each side, with the
/// vocabulary restricted to the tokens those documents contain.
pub fn loe_for_topic(
    model: &LdaModel,
    pair: &Corpus,
    topic: usize,
    n: usize,
) -> Result<LeaveOutResult> {
    let left_top = top_documents(model, pair, Side::Liberal, topic, n)?;
    let right_top = top_documents(model, pair, Side::Conservative, topic, n)?;
    let docs = |td: &crate::topics::TopicDocs| -> Vec<&Document> {
        td.entries
            .iter()
            .map(|e| {
                pair.get(&e.doc_id)
                    .expect("top documents come from the pair corpus")
            })
            .collect()
    };
    let (left_docs, right_docs) = (docs(&left_top), docs(&right_top));
    let vocab: BTreeSet<String> = left_docs
        .iter()
        .chain(&right_docs)
        .flat_map(|d| d.tokens.iter().cloned())
        .collect();
    let freq = |ds: &[&Document]| {
        ds.iter()
            .map(|d| token_frequency(d, &vocab))
            .collect::<Result<Vec<_>>>()
    };
    let estimate = leave_out_estimator(&freq(&left_docs)?, &freq(&right_docs)?)?;
    Ok(LeaveOutResult {
        topic_id: topic,
        pi: estimate.pi,
        per_doc_posteriors: estimate.per_doc_posteriors,
    })
}
