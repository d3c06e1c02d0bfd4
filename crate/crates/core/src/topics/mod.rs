//! LDA topic modeling over the combined corpus.
//!
//! A topic is exposed two ways: as a renormalized top-m keyword distribution
//! ([`top_keywords`]) and, per side, as a renormalized top-n distribution
//! over the most relevant documents ([`top_documents`]).

mod coherence;
mod lda;
mod persist;
mod ranking;
mod synthetic;

pub use coherence::{coherence_npmi, select_k, CoherenceScore, DEFAULT_EPSILON};
pub use lda::{train_lda, LdaConfig, LdaModel};
pub use ranking::{top_documents, top_keywords, DocWeight, Keyword, TopicDocs, TopicKeywords};
pub use synthetic::{generate_synthetic_corpus, SyntheticCorpus, SyntheticSpec};

use std::path::PathBuf;

use crate::corpus::Side;

#[derive(Debug, thiserror::Error)]
pub enum TopicError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("document {0:?} has no in-vocabulary tokens")]
    EmptyDocument(String),
    #[error("K = {k} exceeds the total token count {tokens}")]
    TooManyTopics { k: usize, tokens: usize },
    #[error("topic {topic} out of range (K = {k})")]
    TopicOutOfRange { topic: usize, k: usize },
    #[error("m = {m} exceeds the vocabulary size {v}")]
    TooManyKeywords { m: usize, v: usize },
    #[error("no {0} documents available")]
    EmptySide(Side),
    #[error("document {0:?} was not part of the topic model's training corpus")]
    UnknownDocument(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = TopicError> = std::result::Result<T, E>;
