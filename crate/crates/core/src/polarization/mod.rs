//! Topic embeddings per document and per side, the polarization score, topic
//! ranking, ablation variants and the 2-d projection used in reports.

mod embed;
mod pca;
mod score;
mod variant;

use thiserror::Error;

use crate::corpus::Side;
use crate::encoder::EncoderError;
use crate::topics::TopicError;

pub use embed::{
    cc_topic_embedding, dc_keyword_embedding, dc_topic_embedding, pooled_topic_embedding,
    CcTopicEmbedding, DcTopicEmbedding,
};
pub use pca::{pca_csv, pca_project, PcaPoint, Projection, PCA_MAX_ITERATIONS, PCA_TOLERANCE};
pub use score::{
    polarization_score, rank_topics, PolarizationScore, ScoreReport, TopicRanking, ZERO_NORM,
};
pub use variant::{
    run_variant, AggregationSettings, TopicDetail, VariantMode, VariantRun, DEFAULT_TOP_DOCUMENTS,
    DEFAULT_TOP_KEYWORDS,
};

#[derive(Debug, Error)]
pub enum PolarizationError {
    #[error("topic {topic} unrepresentable for the {side} side: none of its top documents contains a keyword")]
    Unrepresentable { topic: usize, side: Side },
    #[error("topic {topic}: {side} embedding has norm {norm:e}, cosine undefined")]
    ZeroNorm { topic: usize, side: Side, norm: f64 },
    #[error("comparing topic {left} with topic {right}")]
    TopicMismatch { left: usize, right: usize },
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("{found} document embeddings for {expected} top documents")]
    Misaligned { expected: usize, found: usize },
    #[error("PCA: {0}")]
    Pca(String),
    #[error("PCA component {component} did not converge (last change {residual:e})")]
    PcaNotConverged { component: usize, residual: f64 },
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

pub type Result<T, E = PolarizationError> = std::result::Result<T, E>;
