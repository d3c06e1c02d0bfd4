//! Annotation-driven evaluation: majority labels, corpus leaning, ground-truth
//! polarization, and recall of the most polarized topics.

mod annotations;
mod report;

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use annotations::{AnnotatedDoc, AnnotationSet, TopicAnnotations};
pub use report::{RecallCell, RecallTable};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("label value {0} is not one of -1, 0, 1")]
    InvalidLabel(i64),
    #[error("document {doc_id}: {count} labels, at least 3 required")]
    TooFewLabels { doc_id: String, count: usize },
    #[error("document {0}: no majority label and no resolution")]
    Unresolved(String),
    #[error("no labels to compute a leaning from")]
    NoLabels,
    #[error("topic {topic}: no annotations for source {source_name}")]
    MissingAnnotations { topic: usize, source_name: String },
    #[error("{labeled} labeled topics, cannot take the top {k}")]
    TooFewTopics { labeled: usize, k: usize },
    #[error("predicted ranking omits labeled topic {0}")]
    MissingPrediction(usize),
    #[error("empty recall table")]
    EmptyTable,
    #[error("duplicate annotation for topic {topic}, document {doc_id}")]
    Duplicate { topic: usize, doc_id: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

pub const TARGET_SIZE: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum StanceLabel {
    NoStance,
    Stance0,
    Stance1,
}

impl TryFrom<i64> for StanceLabel {
    type Error = EvalError;

    fn try_from(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(StanceLabel::NoStance),
            0 => Ok(StanceLabel::Stance0),
            1 => Ok(StanceLabel::Stance1),
            other => Err(EvalError::InvalidLabel(other)),
        }
    }
}

impl From<StanceLabel> for i64 {
    fn from(l: StanceLabel) -> i64 {
        match l {
            StanceLabel::NoStance => -1,
            StanceLabel::Stance0 => 0,
            StanceLabel::Stance1 => 1,
        }
    }
}

/// The value held by more than half of `labels`, else `resolution`.
pub fn majority_vote(
    doc_id: &str,
    labels: &[StanceLabel],
    resolution: Option<StanceLabel>,
) -> Result<StanceLabel> {
    if labels.len() < 3 {
        return Err(EvalError::TooFewLabels {
            doc_id: doc_id.to_string(),
            count: labels.len(),
        });
    }
    for candidate in [
        StanceLabel::NoStance,
        StanceLabel::Stance0,
        StanceLabel::Stance1,
    ] {
        if 2 * labels.iter().filter(|&&l| l == candidate).count() > labels.len() {
            return Ok(candidate);
        }
    }
    resolution.ok_or_else(|| EvalError::Unresolved(doc_id.to_string()))
}

/// Which documents count in the leaning denominator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeaningDenominator {
    /// Every annotated document, so no-stance labels dilute the leaning.
    #[default]
    AllAnnotated,
    /// Only documents labeled 0 or 1.
    StanceOnly,
}

/// `(N(1) - N(0)) / |D|`.
pub fn leaning(labels: &[StanceLabel], denominator: LeaningDenominator) -> Result<f64> {
    if labels.is_empty() {
        return Err(EvalError::NoLabels);
    }
    let n1 = labels
        .iter()
        .filter(|&&l| l == StanceLabel::Stance1)
        .count();
    let n0 = labels
        .iter()
        .filter(|&&l| l == StanceLabel::Stance0)
        .count();
    let d = match denominator {
        LeaningDenominator::AllAnnotated => labels.len(),
        LeaningDenominator::StanceOnly => n0 + n1,
    };
    if d == 0 {
        return Ok(0.0);
    }
    Ok((n1 as f64 - n0 as f64) / d as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicTruth {
    pub topic: usize,
    pub le_left: f64,
    pub le_right: f64,
    pub alpha: f64,
}

/// Ground-truth polarization of the labeled topics for one source pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub pair: (String, String),
    pub topics: Vec<TopicTruth>,
    /// Labeled topics by alpha descending, ties by topic id ascending.
    pub ranking: Vec<usize>,
}

impl GroundTruth {
    pub fn from_truths(pair: (String, String), mut topics: Vec<TopicTruth>) -> Self {
        topics.sort_by_key(|t| t.topic);
        let mut order: Vec<&TopicTruth> = topics.iter().collect();
        order.sort_by(|a, b| b.alpha.total_cmp(&a.alpha).then(a.topic.cmp(&b.topic)));
        let ranking = order.iter().map(|t| t.topic).collect();
        Self {
            pair,
            topics,
            ranking,
        }
    }

    /// Ground truth from alphas alone (leanings unknown, recorded as NaN).
    pub fn from_alphas(pair: (String, String), alphas: &[(usize, f64)]) -> Self {
        let topics = alphas
            .iter()
            .map(|&(topic, alpha)| TopicTruth {
                topic,
                le_left: f64::NAN,
                le_right: f64::NAN,
                alpha,
            })
            .collect();
        Self::from_truths(pair, topics)
    }

    /// Ground truth whose ranking is exactly `ranking`.
    pub fn from_ranking(pair: (String, String), ranking: &[usize]) -> Self {
        let n = ranking.len() as f64;
        let alphas: Vec<(usize, f64)> = ranking
            .iter()
            .enumerate()
            .map(|(i, &t)| (t, (n - i as f64) / n))
            .collect();
        Self::from_alphas(pair, &alphas)
    }

    pub fn labeled_topics(&self) -> BTreeSet<usize> {
        self.topics.iter().map(|t| t.topic).collect()
    }

    /// The top `TARGET_SIZE` topics.
    pub fn target(&self) -> Result<Vec<usize>> {
        self.top(TARGET_SIZE)
    }

    pub fn top(&self, k: usize) -> Result<Vec<usize>> {
        if k > self.ranking.len() {
            return Err(EvalError::TooFewTopics {
                labeled: self.ranking.len(),
                k,
            });
        }
        Ok(self.ranking[..k].to_vec())
    }
}

/// `alpha = |le_left - le_right| / 2` for every labeled topic.
pub fn gt_polarization_and_ranking(
    annotations: &AnnotationSet,
    pair: (&str, &str),
    denominator: LeaningDenominator,
) -> Result<GroundTruth> {
    let mut truths = Vec::new();
    for (&topic, ann) in annotations.topics() {
        let le = |source: &str| -> Result<f64> {
            let labels = ann.final_labels(source)?;
            if labels.is_empty() {
                return Err(EvalError::MissingAnnotations {
                    topic,
                    source_name: source.to_string(),
                });
            }
            leaning(&labels, denominator)
        };
        let le_left = le(pair.0)?;
        let le_right = le(pair.1)?;
        truths.push(TopicTruth {
            topic,
            le_left,
            le_right,
            alpha: (le_left - le_right).abs() / 2.0,
        });
    }
    Ok(GroundTruth::from_truths(
        (pair.0.to_string(), pair.1.to_string()),
        truths,
    ))
}

/// Share of the ground-truth top `k` found in the predicted top `k`, where
/// the prediction is first restricted to the labeled topics.
pub fn recall_at_k(predicted: &[usize], truth: &GroundTruth, k: usize) -> Result<f64> {
    Ok(recall_hits(predicted, truth, k)? as f64 / k as f64)
}

/// Numerator of [`recall_at_k`].
pub fn recall_hits(predicted: &[usize], truth: &GroundTruth, k: usize) -> Result<usize> {
    let labeled = truth.labeled_topics();
    if k == 0 || k > labeled.len() {
        return Err(EvalError::TooFewTopics {
            labeled: labeled.len(),
            k,
        });
    }
    let present: BTreeSet<usize> = predicted.iter().copied().collect();
    if let Some(&missing) = labeled.iter().find(|t| !present.contains(t)) {
        return Err(EvalError::MissingPrediction(missing));
    }
    let top_pred: BTreeSet<usize> = predicted
        .iter()
        .copied()
        .filter(|t| labeled.contains(t))
        .take(k)
        .collect();
    let target: BTreeSet<usize> = truth.top(k)?.into_iter().collect();
    Ok(top_pred.intersection(&target).count())
}

pub fn aggregate_recall(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(EvalError::EmptyTable);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
