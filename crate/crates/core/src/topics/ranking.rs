use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{LdaModel, Result, TopicError};
use crate::corpus::{Corpus, Side, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub token: String,
    pub weight: f64,
}

/// Top-m keywords of a topic, weights renormalized to sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicKeywords {
    pub topic_id: usize,
    pub entries: Vec<Keyword>,
    /// Probability mass the kept keywords carried before renormalization.
    pub raw_mass: f64,
}

impl TopicKeywords {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|k| k.token.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocWeight {
    pub doc_id: String,
    pub weight: f64,
}

/// The top-n documents of one side for a topic, weights renormalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicDocs {
    pub topic_id: usize,
    pub side: Side,
    pub entries: Vec<DocWeight>,
}

fn descending(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

/// Top-m entries of the topic's word distribution. Ties go to the smaller
/// token index.
pub fn top_keywords(
    model: &LdaModel,
    vocab: &Vocabulary,
    topic: usize,
    m: usize,
) -> Result<TopicKeywords> {
    if topic >= model.k {
        return Err(TopicError::TopicOutOfRange { topic, k: model.k });
    }
    let v = model.vocab_size();
    if m > v || m == 0 {
        return Err(TopicError::TooManyKeywords { m, v });
    }
    if vocab.len() != v {
        return Err(TopicError::Config(format!(
            "vocabulary has {} tokens but the model was trained on {v}",
            vocab.len()
        )));
    }
    let row = model.phi.row(topic);
    let mut order: Vec<usize> = (0..v).collect();
    order.sort_by(|&a, &b| descending(row[a], row[b]).then(a.cmp(&b)));
    order.truncate(m);
    let raw_mass: f64 = order.iter().map(|&w| row[w]).sum();
    let entries = order
        .into_iter()
        .map(|w| Keyword {
            token: vocab.token(w as u32).to_string(),
            weight: row[w] / raw_mass,
        })
        .collect();
    Ok(TopicKeywords {
        topic_id: topic,
        entries,
        raw_mass,
    })
}

/// Ranks the side's documents by their probability of the topic (uniform
/// document prior), keeps the top `n` and renormalizes. Ties go to the
/// smaller document id.
pub fn top_documents(
    model: &LdaModel,
    corpus: &Corpus,
    side: Side,
    topic: usize,
    n: usize,
) -> Result<TopicDocs> {
    if topic >= model.k {
        return Err(TopicError::TopicOutOfRange { topic, k: model.k });
    }
    let mut scored = corpus
        .side(side)
        .map(|doc| {
            model
                .doc_row(&doc.id)
                .map(|row| (doc.id.as_str(), model.theta[[row, topic]]))
                .ok_or_else(|| TopicError::UnknownDocument(doc.id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    if scored.is_empty() {
        return Err(TopicError::EmptySide(side));
    }
    scored.sort_by(|a, b| descending(a.1, b.1).then_with(|| a.0.cmp(b.0)));
    scored.truncate(n);
    let total: f64 = scored.iter().map(|s| s.1).sum();
    let entries = scored
        .into_iter()
        .map(|(id, p)| DocWeight {
            doc_id: id.to_string(),
            weight: p / total,
        })
        .collect();
    Ok(TopicDocs {
        topic_id: topic,
        side,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use chrono::NaiveDate;
    use ndarray::{array, Array2};

    fn model(phi: Array2<f64>, theta: Array2<f64>, ids: &[&str]) -> LdaModel {
        LdaModel::from_parts(
            phi.nrows(),
            0.1,
            0.01,
            0,
            1,
            phi,
            theta,
            ids.iter().map(|s| s.to_string()).collect(),
            vec![],
            String::new(),
        )
    }

    fn doc(id: &str, side: Side) -> Document {
        Document {
            id: id.into(),
            source: "s".into(),
            side,
            date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            raw_text: String::new(),
            tokens: vec!["x".into()],
        }
    }

    #[test]
    fn keywords_renormalized_over_top_m() {
        let m = model(
            array![[0.5, 0.3, 0.2], [0.2, 0.3, 0.5]],
            array![[0.5, 0.5]],
            &["d"],
        );
        let vocab = Vocabulary::from_tokens(["w0", "w1", "w2"]);
        let kw = top_keywords(&m, &vocab, 0, 2).unwrap();
        assert_eq!(kw.tokens().collect::<Vec<_>>(), ["w0", "w1"]);
        assert!((kw.entries[0].weight - 0.625).abs() < 1e-12);
        assert!((kw.entries[1].weight - 0.375).abs() < 1e-12);
        assert!((kw.raw_mass - 0.8).abs() < 1e-12);

        let full = top_keywords(&m, &vocab, 1, 3).unwrap();
        assert_eq!(full.tokens().collect::<Vec<_>>(), ["w2", "w1", "w0"]);
        assert!((full.entries.iter().map(|k| k.weight).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn keyword_ties_prefer_lower_index() {
        let m = model(array![[0.25, 0.25, 0.25, 0.25]], array![[1.0]], &["d"]);
        let vocab = Vocabulary::from_tokens(["a", "b", "c", "d"]);
        let kw = top_keywords(&m, &vocab, 0, 2).unwrap();
        assert_eq!(kw.tokens().collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn keyword_errors() {
        let m = model(array![[0.5, 0.5]], array![[1.0]], &["d"]);
        let vocab = Vocabulary::from_tokens(["a", "b"]);
        assert!(matches!(
            top_keywords(&m, &vocab, 1, 1),
            Err(TopicError::TopicOutOfRange { .. })
        ));
        assert!(matches!(
            top_keywords(&m, &vocab, 0, 3),
            Err(TopicError::TooManyKeywords { .. })
        ));
    }

    #[test]
    fn documents_renormalized_per_side() {
        let theta = array![[0.6, 0.4], [0.3, 0.7], [0.1, 0.9], [0.8, 0.2]];
        let m = model(array![[1.0], [1.0]], theta, &["d0", "d1", "d2", "r0"]);
        let corpus = Corpus::new(vec![
            doc("d0", Side::Liberal),
            doc("d1", Side::Liberal),
            doc("d2", Side::Liberal),
            doc("r0", Side::Conservative),
        ])
        .unwrap();
        let td = top_documents(&m, &corpus, Side::Liberal, 0, 2).unwrap();
        let ids: Vec<_> = td.entries.iter().map(|e| e.doc_id.as_str()).collect();
        assert_eq!(ids, ["d0", "d1"]);
        assert!((td.entries[0].weight - 2.0 / 3.0).abs() < 1e-12);
        assert!((td.entries[1].weight - 1.0 / 3.0).abs() < 1e-12);

        let all = top_documents(&m, &corpus, Side::Liberal, 0, 10).unwrap();
        assert_eq!(all.entries.len(), 3);
        assert!((all.entries.iter().map(|e| e.weight).sum::<f64>() - 1.0).abs() < 1e-12);

        let right = top_documents(&m, &corpus, Side::Conservative, 1, 10).unwrap();
        assert_eq!(right.entries.len(), 1);
        assert_eq!(right.entries[0].weight, 1.0);
    }

    #[test]
    fn document_ties_prefer_smaller_id_and_empty_side_errors() {
        let m = model(array![[1.0]], array![[0.5], [0.5]], &["b", "a"]);
        let corpus = Corpus::new(vec![doc("b", Side::Liberal), doc("a", Side::Liberal)]).unwrap();
        let td = top_documents(&m, &corpus, Side::Liberal, 0, 1).unwrap();
        assert_eq!(td.entries[0].doc_id, "a");
        assert!(matches!(
            top_documents(&m, &corpus, Side::Conservative, 0, 1),
            Err(TopicError::EmptySide(Side::Conservative))
        ));
    }
}
