use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{majority_vote, EvalError, Result, StanceLabel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedDoc {
    pub doc_id: String,
    pub source: String,
    pub labels: Vec<StanceLabel>,
    #[serde(default)]
    pub resolution: Option<StanceLabel>,
}

impl AnnotatedDoc {
    pub fn final_label(&self) -> Result<StanceLabel> {
        majority_vote(&self.doc_id, &self.labels, self.resolution)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicAnnotations {
    pub id: usize,
    pub stance0: String,
    pub stance1: String,
    pub docs: Vec<AnnotatedDoc>,
}

impl TopicAnnotations {
    /// Majority labels of the documents from `source` (case-insensitive).
    pub fn final_labels(&self, source: &str) -> Result<Vec<StanceLabel>> {
        self.docs
            .iter()
            .filter(|d| d.source.eq_ignore_ascii_case(source))
            .map(AnnotatedDoc::final_label)
            .collect()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationFile {
    topics: Vec<TopicAnnotations>,
}

/// Validated annotations keyed by topic id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AnnotationSet {
    topics: BTreeMap<usize, TopicAnnotations>,
}

impl AnnotationSet {
    /// Every document needs at least 3 labels and either a strict majority
    /// or a resolution label.
    pub fn new(topics: Vec<TopicAnnotations>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for topic in topics {
            let mut seen = std::collections::BTreeSet::new();
            for doc in &topic.docs {
                doc.final_label()?;
                if !seen.insert(doc.doc_id.as_str()) {
                    return Err(EvalError::Duplicate {
                        topic: topic.id,
                        doc_id: doc.doc_id.clone(),
                    });
                }
            }
            let id = topic.id;
            if map.insert(id, topic).is_some() {
                return Err(EvalError::Duplicate {
                    topic: id,
                    doc_id: String::new(),
                });
            }
        }
        Ok(Self { topics: map })
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let file: AnnotationFile = serde_json::from_str(text).map_err(|e| EvalError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::new(file.topics)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    pub fn topics(&self) -> &BTreeMap<usize, TopicAnnotations> {
        &self.topics
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.topics.keys().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }
}
