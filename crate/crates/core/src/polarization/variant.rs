use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    cc_topic_embedding, dc_topic_embedding, polarization_score, pooled_topic_embedding,
    CcTopicEmbedding, DcTopicEmbedding, PolarizationScore, Result,
};
use crate::corpus::{Corpus, Side, Vocabulary};
use crate::encoder::{ContextEncoder, ContextualEncoding, LabelMode};
use crate::topics::{top_documents, top_keywords, LdaModel, TopicKeywords};

pub const DEFAULT_TOP_KEYWORDS: usize = 10;
pub const DEFAULT_TOP_DOCUMENTS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantMode {
    /// Finetuned encoder, keyword-level topic embeddings.
    Pacte,
    /// Untrained encoder.
    NoFinetune,
    /// Encoder trained on permuted sides.
    ShuffledLabels,
    /// Pooled document vector in place of every topic embedding.
    DocEmbedding,
}

impl VariantMode {
    pub const ALL: [VariantMode; 4] = [
        VariantMode::Pacte,
        VariantMode::NoFinetune,
        VariantMode::ShuffledLabels,
        VariantMode::DocEmbedding,
    ];

    /// How the encoder must be trained for this variant.
    pub fn label_mode(self) -> LabelMode {
        match self {
            VariantMode::Pacte | VariantMode::DocEmbedding => LabelMode::TrueLabels,
            VariantMode::NoFinetune => LabelMode::None,
            VariantMode::ShuffledLabels => LabelMode::ShuffledLabels,
        }
    }

    /// Report label.
    pub fn name(self) -> &'static str {
        match self {
            VariantMode::Pacte => "PaCTE",
            VariantMode::NoFinetune => "PaCTE-noFT",
            VariantMode::ShuffledLabels => "PaCTE-PLS",
            VariantMode::DocEmbedding => "PaCTE-DE",
        }
    }
}

impl std::str::FromStr for VariantMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "pacte" => Ok(VariantMode::Pacte),
            "pacte-noft" | "no-finetune" | "noft" => Ok(VariantMode::NoFinetune),
            "pacte-pls" | "shuffled-labels" | "pls" => Ok(VariantMode::ShuffledLabels),
            "pacte-de" | "doc-embedding" | "de" => Ok(VariantMode::DocEmbedding),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationSettings {
    pub top_keywords: usize,
    pub top_documents: usize,
}

impl Default for AggregationSettings {
    fn default() -> Self {
        Self {
            top_keywords: DEFAULT_TOP_KEYWORDS,
            top_documents: DEFAULT_TOP_DOCUMENTS,
        }
    }
}

/// Everything computed for one topic of one variant.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicDetail {
    pub keywords: TopicKeywords,
    pub liberal: CcTopicEmbedding,
    pub conservative: CcTopicEmbedding,
    /// DC embeddings of the top documents that had one, both sides.
    pub documents: Vec<(Side, DcTopicEmbedding)>,
    pub score: PolarizationScore,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariantRun {
    pub mode: VariantMode,
    pub topics: Vec<TopicDetail>,
}

impl VariantRun {
    pub fn scores(&self) -> Vec<PolarizationScore> {
        self.topics.iter().map(|t| t.score.clone()).collect()
    }
}

/// Scores every topic of `lda` on `pair`, whose liberal and conservative
/// documents are the two sides being compared. The encoder is used as given;
/// training it according to `mode.label_mode()` is the caller's job.
pub fn run_variant(
    mode: VariantMode,
    pair: &Corpus,
    lda: &LdaModel,
    vocab: &Vocabulary,
    encoder: &dyn ContextEncoder,
    settings: &AggregationSettings,
) -> Result<VariantRun> {
    let m = settings.top_keywords.min(lda.vocab_size());
    let plans = (0..lda.k)
        .map(|t| {
            let keywords = top_keywords(lda, vocab, t, m)?;
            let docs = Side::BOTH
                .iter()
                .map(|&side| top_documents(lda, pair, side, t, settings.top_documents))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok((keywords, docs))
        })
        .collect::<Result<Vec<_>>>()?;

    let needed: BTreeSet<String> = plans
        .iter()
        .flat_map(|(_, docs)| {
            docs.iter()
                .flat_map(|d| d.entries.iter().map(|e| e.doc_id.clone()))
        })
        .collect();
    let encodings: BTreeMap<String, ContextualEncoding> = needed
        .into_par_iter()
        .map(|id| {
            let doc = pair
                .get(&id)
                .expect("top documents come from the pair corpus");
            Ok((id, encoder.encode(doc)?))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();

    let topics = plans
        .into_par_iter()
        .map(|(keywords, docs)| {
            let mut documents = Vec::new();
            let mut cc = Vec::with_capacity(2);
            for td in &docs {
                let dc: Vec<Option<DcTopicEmbedding>> = td
                    .entries
                    .iter()
                    .map(|e| {
                        let enc = &encodings[e.doc_id.as_str()];
                        match mode {
                            VariantMode::DocEmbedding => {
                                Some(pooled_topic_embedding(enc, td.topic_id))
                            }
                            _ => dc_topic_embedding(enc, &keywords),
                        }
                    })
                    .collect();
                cc.push(cc_topic_embedding(&dc, td)?);
                documents.extend(dc.into_iter().flatten().map(|d| (td.side, d)));
            }
            let conservative = cc.pop().expect("two sides");
            let liberal = cc.pop().expect("two sides");
            let score = polarization_score(&liberal, &conservative)?;
            Ok(TopicDetail {
                keywords,
                liberal,
                conservative,
                documents,
                score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VariantRun { mode, topics })
}
