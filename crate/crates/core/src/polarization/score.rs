use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{CcTopicEmbedding, PolarizationError, Result};

/// Norms below this make the cosine undefined.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarizationScore {
    #[serde(rename = "topic")]
    pub topic_id: usize,
    pub cosine: f64,
    pub beta: f64,
}

impl PolarizationScore {
    /// `beta = (1 - cosine) / 2`, with the cosine clamped to [-1, 1].
    pub fn from_cosine(topic_id: usize, cosine: f64) -> Self {
        let cosine = cosine.clamp(-1.0, 1.0);
        Self {
            topic_id,
            cosine,
            beta: 0.5 * (1.0 - cosine),
        }
    }
}

/// Cosine distance between the two sides' embeddings of a topic, mapped to
/// [0, 1].
pub fn polarization_score(
    left: &CcTopicEmbedding,
    right: &CcTopicEmbedding,
) -> Result<PolarizationScore> {
    if left.topic_id != right.topic_id {
        return Err(PolarizationError::TopicMismatch {
            left: left.topic_id,
            right: right.topic_id,
        });
    }
    if left.vector.len() != right.vector.len() {
        return Err(PolarizationError::DimMismatch {
            left: left.vector.len(),
            right: right.vector.len(),
        });
    }
    let (l, r) = (&left.vector, &right.vector);
    let nl = l.dot(l).sqrt();
    let nr = r.dot(r).sqrt();
    for (norm, side) in [(nl, left.side), (nr, right.side)] {
        // also rejects NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(norm >= ZERO_NORM) {
            return Err(PolarizationError::ZeroNorm {
                topic: left.topic_id,
                side,
                norm,
            });
        }
    }
    Ok(PolarizationScore::from_cosine(
        left.topic_id,
        l.dot(r) / (nl * nr),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicRanking {
    pub pair: (String, String),
    /// Most polarized first.
    pub entries: Vec<PolarizationScore>,
}

impl TopicRanking {
    pub fn topic_ids(&self) -> Vec<usize> {
        self.entries.iter().map(|s| s.topic_id).collect()
    }

    pub fn top(&self, k: usize) -> Vec<usize> {
        self.entries.iter().take(k).map(|s| s.topic_id).collect()
    }
}

/// Sorts by beta descending, ties by topic id ascending, omitting `exclude`.
pub fn rank_topics(
    pair: (String, String),
    scores: &[PolarizationScore],
    exclude: &BTreeSet<usize>,
) -> TopicRanking {
    let mut entries: Vec<PolarizationScore> = scores
        .iter()
        .filter(|s| !exclude.contains(&s.topic_id))
        .cloned()
        .collect();
    entries.sort_by(|a, b| b.beta.total_cmp(&a.beta).then(a.topic_id.cmp(&b.topic_id)));
    TopicRanking { pair, entries }
}

/// Serialized form of one variant's scores for a source pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub pair: [String; 2],
    pub variant: String,
    pub scores: Vec<PolarizationScore>,
    pub ranking: Vec<usize>,
}

impl ScoreReport {
    /// Scores in topic order plus the ranking.
    pub fn new(variant: &str, ranking: &TopicRanking) -> Self {
        let mut scores = ranking.entries.clone();
        scores.sort_by_key(|s| s.topic_id);
        Self {
            pair: [ranking.pair.0.clone(), ranking.pair.1.clone()],
            variant: variant.to_string(),
            scores,
            ranking: ranking.topic_ids(),
        }
    }
}
