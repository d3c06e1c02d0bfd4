//! Contextual encoders: a small transformer trained on the partisanship task,
//! and an importer for embeddings produced by an external model.

mod model;
mod persist;
mod store;
mod train;

use std::path::PathBuf;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Side, Vocabulary};
use model::Params;

pub use store::{
    write_embedding_store, EmbeddingStore, StoreEntry, INDEX_FILE, STORE_MAGIC, STORE_VERSION,
};
pub use train::{
    apply_label_mode, evaluate_classifier, split_by_topicality, train_partisanship,
    ClassificationMetrics, EpochMetrics, LabelMode, TrainConfig, TrainOutcome,
    DEFAULT_TOPICALITY_THRESHOLD,
};

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid encoder configuration: {0}")]
    Config(String),
    #[error("document {0} has no tokens")]
    EmptyDocument(String),
    #[error("training set contains only {0} documents")]
    SingleClass(Side),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },
    #[error("cannot evaluate on an empty corpus")]
    EmptyCorpus,
    #[error("document {0} is not in the embedding store")]
    MissingDocument(String),
    #[error("{path}: bad magic bytes or unsupported version")]
    BadHeader { path: PathBuf },
    #[error("{path}: dimension {found} differs from the declared {expected}")]
    DimMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{path}: {found} tokens, index declares {expected}")]
    TokenCountMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("document {doc_id}: stored tokens are not a prefix of the document tokens (first difference at position {position})")]
    TokenMismatch { doc_id: String, position: usize },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = EncoderError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> EncoderError + '_ {
    move |source| EncoderError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Id 0 is the pooled position, id 1 stands for out-of-vocabulary tokens.
pub const POOLED_ID: u32 = 0;
pub const UNKNOWN_ID: u32 = 1;
const RESERVED_IDS: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
    /// Includes the two reserved ids.
    pub vocab_size: usize,
    pub init_std: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            ffn_dim: 128,
            max_len: 256,
            vocab_size: RESERVED_IDS,
            init_std: 0.02,
        }
    }
}

impl EncoderConfig {
    /// Default sizes with the embedding table sized for `vocab`.
    pub fn for_vocabulary(vocab: &Vocabulary) -> Self {
        Self {
            vocab_size: vocab.len() + RESERVED_IDS,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(EncoderError::Config(m));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return fail(format!(
                "d_model ({}) must be a positive multiple of n_heads ({})",
                self.d_model, self.n_heads
            ));
        }
        if self.max_len < 2 {
            return fail(format!("max_len must be at least 2, got {}", self.max_len));
        }
        if self.ffn_dim == 0 {
            return fail("ffn_dim must be positive".into());
        }
        if self.vocab_size < RESERVED_IDS {
            return fail(format!("vocab_size must be at least {RESERVED_IDS}"));
        }
        if !(self.init_std.is_finite() && self.init_std > 0.0) {
            return fail("init_std must be positive".into());
        }
        Ok(())
    }
}

/// Final-layer states of one document.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextualEncoding {
    pub doc_id: String,
    /// The (possibly truncated) tokens, one per row of `token_vectors`.
    pub tokens: Vec<String>,
    pub token_vectors: Array2<f64>,
    pub pooled: Array1<f64>,
}

impl ContextualEncoding {
    pub fn dim(&self) -> usize {
        self.pooled.len()
    }
}

/// Anything that maps a tokenized document to contextual token vectors.
pub trait ContextEncoder: Sync {
    fn dim(&self) -> usize;
    fn name(&self) -> &str;
    fn encode(&self, doc: &Document) -> Result<ContextualEncoding>;
}

/// The built-in transformer together with its token table.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderModel {
    config: EncoderConfig,
    vocab: Vocabulary,
    params: Params,
}

impl EncoderModel {
    /// Fresh model with seeded N(0, init_std²) weights. The vocabulary must fit
    /// `config.vocab_size`.
    pub fn new(config: EncoderConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        config.validate()?;
        if vocab.len() + RESERVED_IDS != config.vocab_size {
            return Err(EncoderError::Config(format!(
                "vocab_size {} does not match {} tokens plus {RESERVED_IDS} reserved ids",
                config.vocab_size,
                vocab.len()
            )));
        }
        let params = Params::init(&config, seed);
        Ok(Self {
            config,
            vocab,
            params,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_values()
    }

    /// All parameters in a fixed order.
    pub fn parameters_flat(&self) -> Vec<f64> {
        self.params.flatten()
    }

    /// Input ids for a document: pooled id, then up to `max_len - 1` tokens.
    pub fn token_ids(&self, tokens: &[String]) -> Vec<u32> {
        let keep = tokens.len().min(self.config.max_len - 1);
        std::iter::once(POOLED_ID)
            .chain(tokens[..keep].iter().map(|t| {
                self.vocab
                    .index_of(t)
                    .map_or(UNKNOWN_ID, |i| i + RESERVED_IDS as u32)
            }))
            .collect()
    }

    /// Probability that the document is liberal.
    pub fn predict(&self, doc: &Document) -> Result<f64> {
        if doc.tokens.is_empty() {
            return Err(EncoderError::EmptyDocument(doc.id.clone()));
        }
        let cache = self
            .params
            .forward(&self.token_ids(&doc.tokens), self.config.n_heads);
        Ok(model::sigmoid(cache.logit))
    }
}

impl ContextEncoder for EncoderModel {
    fn dim(&self) -> usize {
        self.config.d_model
    }

    fn name(&self) -> &str {
        "builtin-transformer"
    }

    fn encode(&self, doc: &Document) -> Result<ContextualEncoding> {
        if doc.tokens.is_empty() {
            return Err(EncoderError::EmptyDocument(doc.id.clone()));
        }
        let ids = self.token_ids(&doc.tokens);
        let cache = self.params.forward(&ids, self.config.n_heads);
        let n = ids.len() - 1;
        Ok(ContextualEncoding {
            doc_id: doc.id.clone(),
            tokens: doc.tokens[..n].to_vec(),
            token_vectors: cache.output.slice(ndarray::s![1.., ..]).to_owned(),
            pooled: cache.output.row(0).to_owned(),
        })
    }
}

/// Finite-difference check of the analytic gradient of the mean BCE over
/// `docs`. Returns the relative error `|g_a - g_fd| / max(|g_a|, |g_fd|)` per
/// named parameter tensor, in Euclidean norm. The denominator is floored at
/// `GRADIENT_CHECK_FLOOR` so that tensors whose true gradient is zero (the key
/// bias, which softmax cancels) compare finite-difference noise against the
/// floor rather than against itself.
pub const GRADIENT_CHECK_FLOOR: f64 = 1e-6;

pub fn gradient_check(
    model: &EncoderModel,
    docs: &[Document],
    step: f64,
) -> Result<Vec<(String, f64)>> {
    let data = docs
        .iter()
        .map(|d| {
            if d.tokens.is_empty() {
                Err(EncoderError::EmptyDocument(d.id.clone()))
            } else {
                Ok((model.token_ids(&d.tokens), f64::from(d.side.label())))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let heads = model.config.n_heads;
    let loss_at = |p: &Params| -> f64 {
        data.iter()
            .map(|(ids, y)| model::bce_with_logit(p.forward(ids, heads).logit, *y).0)
            .sum::<f64>()
            / data.len() as f64
    };

    let mut analytic = Params::zeros(&model.config);
    for (ids, y) in &data {
        let cache = model.params.forward(ids, heads);
        let (_, dlogit) = model::bce_with_logit(cache.logit, *y);
        model.params.backward(&cache, dlogit, heads, &mut analytic);
    }
    analytic.scale(1.0 / data.len() as f64);

    let base = model.params.flatten();
    let mut probe = model.params.clone();
    let mut values = base.clone();
    let mut offset = 0;
    let mut report = Vec::new();
    for (name, grad) in analytic.buffers() {
        let mut diff2 = 0.0;
        let mut a2 = 0.0;
        let mut f2 = 0.0;
        for (j, &g) in grad.iter().enumerate() {
            let i = offset + j;
            values[i] = base[i] + step;
            probe.assign_flat(&values);
            let plus = loss_at(&probe);
            values[i] = base[i] - step;
            probe.assign_flat(&values);
            let minus = loss_at(&probe);
            values[i] = base[i];
            let fd = (plus - minus) / (2.0 * step);
            diff2 += (g - fd).powi(2);
            a2 += g * g;
            f2 += fd * fd;
        }
        offset += grad.len();
        let denom = a2.sqrt().max(f2.sqrt()).max(GRADIENT_CHECK_FLOOR);
        let rel = diff2.sqrt() / denom;
        report.push((name, rel));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    pub(crate) fn doc(id: &str, side: Side, tokens: &[&str]) -> Document {
        Document {
            id: id.into(),
            source: "s".into(),
            side,
            date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            raw_text: String::new(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    fn small_model(max_len: usize) -> EncoderModel {
        let vocab = Vocabulary::from_tokens(["a", "b", "c", "d", "e"]);
        let config = EncoderConfig {
            d_model: 8,
            n_heads: 2,
            n_layers: 2,
            ffn_dim: 16,
            max_len,
            init_std: 0.2,
            ..EncoderConfig::for_vocabulary(&vocab)
        };
        EncoderModel::new(config, vocab, 3).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(EncoderConfig::default().validate().is_ok());
        let bad_heads = EncoderConfig {
            n_heads: 3,
            ..Default::default()
        };
        assert!(bad_heads.validate().is_err());
        let short = EncoderConfig {
            max_len: 1,
            ..Default::default()
        };
        assert!(short.validate().is_err());
    }

    #[test]
    fn encode_is_deterministic_and_truncates() {
        let m = small_model(6);
        let d = doc(
            "x",
            Side::Liberal,
            &["a", "b", "zzz", "c", "d", "e", "a", "b"],
        );
        let e1 = m.encode(&d).unwrap();
        let e2 = m.encode(&d).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(e1.token_vectors.nrows(), 5);
        assert_eq!(e1.tokens, ["a", "b", "zzz", "c", "d"]);
        assert_eq!(e1.dim(), 8);
    }

    #[test]
    fn unknown_tokens_map_to_reserved_id() {
        let m = small_model(8);
        let ids = m.token_ids(&["a".into(), "nope".into(), "e".into()]);
        assert_eq!(ids, [POOLED_ID, 2, UNKNOWN_ID, 6]);
    }

    #[test]
    fn empty_document_rejected() {
        let m = small_model(8);
        assert!(matches!(
            m.encode(&doc("x", Side::Liberal, &[])),
            Err(EncoderError::EmptyDocument(_))
        ));
    }

    #[test]
    fn context_changes_token_vectors() {
        let m = small_model(16);
        let a = m
            .encode(&doc("x", Side::Liberal, &["a", "b", "c", "d", "e"]))
            .unwrap();
        let b = m
            .encode(&doc("x", Side::Liberal, &["e", "b", "c", "d", "a"]))
            .unwrap();
        // swapped tokens at 0 and 4: same token, different context and position
        assert_ne!(a.token_vectors.row(0), b.token_vectors.row(4));
        assert_ne!(a.token_vectors.row(4), b.token_vectors.row(0));
        // unchanged token at position 2 still sees a different context
        assert_ne!(a.token_vectors.row(2), b.token_vectors.row(2));
    }
}
