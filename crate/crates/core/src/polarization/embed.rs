use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::{PolarizationError, Result};
use crate::corpus::Side;
use crate::encoder::ContextualEncoding;
use crate::topics::{TopicDocs, TopicKeywords};

/// A document's embedding of one topic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcTopicEmbedding {
    pub doc_id: String,
    pub topic_id: usize,
    pub vector: Array1<f64>,
    /// Present keywords with their renormalized weights. Empty for pooled
    /// document embeddings.
    pub used_keywords: Vec<(String, f64)>,
}

/// One side's embedding of a topic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcTopicEmbedding {
    pub side: Side,
    pub topic_id: usize,
    pub vector: Array1<f64>,
    /// Documents with a DC embedding and their renormalized weights.
    pub contributing_docs: Vec<(String, f64)>,
}

/// Mean of the rows whose token equals `keyword`; `None` when absent.
pub fn dc_keyword_embedding(encoding: &ContextualEncoding, keyword: &str) -> Option<Array1<f64>> {
    let mut sum = Array1::zeros(encoding.token_vectors.ncols());
    let mut count = 0usize;
    for (token, row) in encoding.tokens.iter().zip(encoding.token_vectors.rows()) {
        if token == keyword {
            sum += &row;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Weighted sum of the present keywords' embeddings, weights renormalized
/// over the present keywords. `None` when no keyword occurs.
pub fn dc_topic_embedding(
    encoding: &ContextualEncoding,
    keywords: &TopicKeywords,
) -> Option<DcTopicEmbedding> {
    let present: Vec<(&str, f64, Array1<f64>)> = keywords
        .entries
        .iter()
        .filter_map(|k| {
            dc_keyword_embedding(encoding, &k.token).map(|e| (k.token.as_str(), k.weight, e))
        })
        .collect();
    let total: f64 = present.iter().map(|p| p.1).sum();
    if present.is_empty() || total <= 0.0 {
        return None;
    }
    let mut vector = Array1::zeros(encoding.token_vectors.ncols());
    let mut used = Vec::with_capacity(present.len());
    for (token, weight, emb) in present {
        let w = weight / total;
        vector.scaled_add(w, &emb);
        used.push((token.to_string(), w));
    }
    Some(DcTopicEmbedding {
        doc_id: encoding.doc_id.clone(),
        topic_id: keywords.topic_id,
        vector,
        used_keywords: used,
    })
}

/// The pooled vector standing in for every topic of the document.
pub fn pooled_topic_embedding(encoding: &ContextualEncoding, topic_id: usize) -> DcTopicEmbedding {
    DcTopicEmbedding {
        doc_id: encoding.doc_id.clone(),
        topic_id,
        vector: encoding.pooled.clone(),
        used_keywords: Vec::new(),
    }
}

/// Weighted sum of the available DC embeddings. `dc` is aligned with
/// `topic_docs.entries`; missing entries are dropped and the document
/// weights renormalized.
pub fn cc_topic_embedding(
    dc: &[Option<DcTopicEmbedding>],
    topic_docs: &TopicDocs,
) -> Result<CcTopicEmbedding> {
    if dc.len() != topic_docs.entries.len() {
        return Err(PolarizationError::Misaligned {
            expected: topic_docs.entries.len(),
            found: dc.len(),
        });
    }
    let present: Vec<(&str, f64, &Array1<f64>)> = topic_docs
        .entries
        .iter()
        .zip(dc)
        .filter_map(|(entry, emb)| {
            emb.as_ref()
                .map(|e| (entry.doc_id.as_str(), entry.weight, &e.vector))
        })
        .collect();
    let total: f64 = present.iter().map(|p| p.1).sum();
    if present.is_empty() || total <= 0.0 {
        return Err(PolarizationError::Unrepresentable {
            topic: topic_docs.topic_id,
            side: topic_docs.side,
        });
    }
    let mut vector = Array1::zeros(present[0].2.len());
    let mut docs = Vec::with_capacity(present.len());
    for (id, weight, v) in present {
        if v.len() != vector.len() {
            return Err(PolarizationError::DimMismatch {
                left: vector.len(),
                right: v.len(),
            });
        }
        let w = weight / total;
        vector.scaled_add(w, v);
        docs.push((id.to_string(), w));
    }
    Ok(CcTopicEmbedding {
        side: topic_docs.side,
        topic_id: topic_docs.topic_id,
        vector,
        contributing_docs: docs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topics::{DocWeight, Keyword};
    use ndarray::{array, Array2};

    fn encoding(tokens: &[&str], rows: Array2<f64>) -> ContextualEncoding {
        ContextualEncoding {
            doc_id: "d".into(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            pooled: Array1::from_elem(rows.ncols(), 9.0),
            token_vectors: rows,
        }
    }

    fn keywords(entries: &[(&str, f64)]) -> TopicKeywords {
        TopicKeywords {
            topic_id: 1,
            entries: entries
                .iter()
                .map(|(t, w)| Keyword {
                    token: t.to_string(),
                    weight: *w,
                })
                .collect(),
            raw_mass: 1.0,
        }
    }

    fn topic_docs(weights: &[f64]) -> TopicDocs {
        TopicDocs {
            topic_id: 1,
            side: Side::Liberal,
            entries: weights
                .iter()
                .enumerate()
                .map(|(i, &w)| DocWeight {
                    doc_id: format!("d{i}"),
                    weight: w,
                })
                .collect(),
        }
    }

    fn dc(v: Array1<f64>) -> Option<DcTopicEmbedding> {
        Some(DcTopicEmbedding {
            doc_id: String::new(),
            topic_id: 1,
            vector: v,
            used_keywords: vec![],
        })
    }

    #[test]
    fn keyword_occurrences_average() {
        let rows = Array2::from_shape_fn((8, 2), |(i, j)| (i * 10 + j) as f64);
        let e = encoding(&["a", "b", "k", "c", "d", "e", "f", "k"], rows.clone());
        assert_eq!(dc_keyword_embedding(&e, "b").unwrap(), rows.row(1));
        assert_eq!(dc_keyword_embedding(&e, "k").unwrap(), array![45.0, 46.0]);
        assert!(dc_keyword_embedding(&e, "zzz").is_none());
    }

    #[test]
    fn absent_keywords_renormalize() {
        let e = encoding(
            &["x", "y", "other"],
            array![[1.0, 0.0], [0.0, 1.0], [5.0, 5.0]],
        );
        let t =
            dc_topic_embedding(&e, &keywords(&[("x", 0.6), ("gone", 0.2), ("y", 0.2)])).unwrap();
        let names: Vec<&str> = t.used_keywords.iter().map(|k| k.0.as_str()).collect();
        assert_eq!(names, ["x", "y"]);
        assert!((t.used_keywords[0].1 - 0.75).abs() < 1e-15);
        assert!((t.used_keywords[1].1 - 0.25).abs() < 1e-15);
        assert!((&t.vector - &array![0.75, 0.25])
            .iter()
            .all(|d| d.abs() < 1e-15));

        let single = dc_topic_embedding(&e, &keywords(&[("y", 0.1), ("gone", 0.9)])).unwrap();
        assert_eq!(single.vector, array![0.0, 1.0]);
        assert!(dc_topic_embedding(&e, &keywords(&[("gone", 1.0)])).is_none());
    }

    #[test]
    fn non_keywords_contribute_nothing() {
        let base = encoding(
            &["president", "trump", "briefing"],
            array![[1.0, 2.0], [3.0, 1.0], [0.0, 4.0]],
        );
        let with_extra = ContextualEncoding {
            tokens: vec![
                "president".into(),
                "trump".into(),
                "briefing".into(),
                "criticize".into(),
            ],
            token_vectors: array![[1.0, 2.0], [3.0, 1.0], [0.0, 4.0], [100.0, -100.0]],
            ..base.clone()
        };
        let kw = keywords(&[("president", 0.5), ("trump", 0.3), ("briefing", 0.2)]);
        assert_eq!(
            dc_topic_embedding(&base, &kw).unwrap().vector,
            dc_topic_embedding(&with_extra, &kw).unwrap().vector
        );
    }

    #[test]
    fn cc_renormalizes_over_present_docs() {
        let docs = topic_docs(&[0.5, 0.3, 0.2]);
        let cc =
            cc_topic_embedding(&[dc(array![1.0, 0.0]), None, dc(array![0.0, 1.0])], &docs).unwrap();
        assert!((cc.contributing_docs[0].1 - 0.5 / 0.7).abs() < 1e-15);
        assert!((cc.contributing_docs[1].1 - 0.2 / 0.7).abs() < 1e-15);
        assert_eq!(cc.contributing_docs[1].0, "d2");

        let one = cc_topic_embedding(&[None, dc(array![3.0, -1.0]), None], &docs).unwrap();
        assert_eq!(one.vector, array![3.0, -1.0]);

        let cancel = cc_topic_embedding(
            &[dc(array![1.0, 2.0]), dc(array![-1.0, -2.0])],
            &topic_docs(&[0.5, 0.5]),
        )
        .unwrap();
        assert_eq!(cancel.vector, array![0.0, 0.0]);
    }

    #[test]
    fn unrepresentable_topic_names_topic_and_side() {
        let err = cc_topic_embedding(&[None, None], &topic_docs(&[0.5, 0.5])).unwrap_err();
        assert!(matches!(
            err,
            PolarizationError::Unrepresentable {
                topic: 1,
                side: Side::Liberal
            }
        ));
        assert!(err.to_string().contains("liberal"));
    }
}
