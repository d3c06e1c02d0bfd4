use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::stopwords;
use super::Corpus;

/// Text normalization settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub stopwords: BTreeSet<String>,
    /// Removed in addition to `stopwords`; matched after lowercasing.
    pub extra_stopwords: BTreeSet<String>,
    pub lemmas: Option<BTreeMap<String, String>>,
    pub lowercase: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            stopwords: stopwords::ENGLISH.iter().map(|s| s.to_string()).collect(),
            extra_stopwords: stopwords::SOURCE_NAMES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            lemmas: None,
            lowercase: true,
        }
    }
}

impl PreprocessConfig {
    fn is_stopword(&self, lowered: &str) -> bool {
        self.stopwords.contains(lowered) || self.extra_stopwords.contains(lowered)
    }

    /// Tokenizes and normalizes one text.
    pub fn process(&self, text: &str) -> Vec<String> {
        tokenize(text)
            .filter_map(|raw| {
                let lowered = raw.to_lowercase();
                if self.is_stopword(&lowered) {
                    return None;
                }
                let token = match self.lemmas.as_ref().and_then(|m| m.get(&lowered)) {
                    Some(lemma) => lemma.clone(),
                    None if self.lowercase => lowered,
                    None => raw.to_string(),
                };
                // a lemma may itself be a stopword ("was" -> "be")
                (!self.is_stopword(&token.to_lowercase())).then_some(token)
            })
            .collect()
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Splits text into maximal runs of Unicode letters and digits. An
/// apostrophe is kept only between two alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = &str> {
    let mut chars = text.char_indices().peekable();
    std::iter::from_fn(move || {
        let start = loop {
            let (i, c) = chars.next()?;
            if c.is_alphanumeric() {
                break i;
            }
        };
        let mut end = text.len();
        while let Some(&(i, c)) = chars.peek() {
            if c.is_alphanumeric() {
                chars.next();
            } else if is_apostrophe(c) {
                let next_alnum = text[i + c.len_utf8()..]
                    .chars()
                    .next()
                    .is_some_and(char::is_alphanumeric);
                if !next_alnum {
                    end = i;
                    break;
                }
                chars.next();
            } else {
                end = i;
                break;
            }
        }
        Some(&text[start..end])
    })
}

/// Fills `tokens` for every document. Documents left with no tokens are
/// kept and report [`super::Document::is_empty`].
pub fn preprocess(mut corpus: Corpus, config: &PreprocessConfig) -> Corpus {
    for doc in corpus.documents_mut() {
        doc.tokens = config.process(&doc.raw_text);
    }
    let empty = corpus.iter().filter(|d| d.is_empty()).count();
    if empty > 0 {
        log::warn!("{empty} documents have no tokens after preprocessing");
    }
    corpus
}
