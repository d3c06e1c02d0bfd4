//! Article ingestion, text normalization and the shared vocabulary.
//!
//! A [`Corpus`] is a single store of documents; the liberal, conservative and
//! combined views are filters over it keyed by each document's [`Side`].

mod bigram;
mod preprocess;
pub mod stopwords;
mod vocab;

pub use bigram::{bigram_transform, BigramModel, DEFAULT_MIN_COUNT, DEFAULT_THRESHOLD};
pub use preprocess::{preprocess, tokenize, PreprocessConfig};
pub use vocab::{build_vocabulary, Vocabulary};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: unknown source {source_name:?} (not in the source map)")]
    UnknownSource { line: usize, source_name: String },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("invalid side {0:?}: expected liberal or conservative")]
    InvalidSide(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("vocabulary is empty after document-frequency filtering")]
    EmptyVocabulary,
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Partisan side of a news source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Liberal,
    Conservative,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Liberal, Side::Conservative];

    /// Binary classification label; liberal is the positive class.
    pub fn label(self) -> u8 {
        match self {
            Side::Liberal => 1,
            Side::Conservative => 0,
        }
    }

    pub fn from_label(label: u8) -> Side {
        if label == 1 {
            Side::Liberal
        } else {
            Side::Conservative
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Liberal => Side::Conservative,
            Side::Conservative => Side::Liberal,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Liberal => "liberal",
            Side::Conservative => "conservative",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "liberal" | "left" | "l" => Ok(Side::Liberal),
            "conservative" | "right" | "r" => Ok(Side::Conservative),
            _ => Err(CorpusError::InvalidSide(s.to_string())),
        }
    }
}

/// Maps a news source name to its side. Lookups are case-insensitive.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceMap(BTreeMap<String, Side>);

impl SourceMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: &str, side: Side) {
        self.0.insert(source.trim().to_lowercase(), side);
    }

    pub fn side_of(&self, source: &str) -> Option<Side> {
        self.0.get(&source.trim().to_lowercase()).copied()
    }

    pub fn sources(&self, side: Side) -> impl Iterator<Item = &str> {
        self.0
            .iter()
            .filter(move |(_, s)| **s == side)
            .map(|(k, _)| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Reads either a JSON object (`{"CNN": "liberal", ...}`) or a text file
    /// with one `source<TAB>side` entry per line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        if text.trim_start().starts_with('{') {
            let raw: BTreeMap<String, String> =
                serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?;
            return raw
                .iter()
                .try_fold(SourceMap::new(), |mut map, (source, side)| {
                    map.insert(source, side.parse()?);
                    Ok(map)
                });
        }
        let mut map = SourceMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (source, side) =
                line.rsplit_once(['\t', ','])
                    .ok_or_else(|| CorpusError::Parse {
                        path: path.to_path_buf(),
                        message: format!("line {}: expected `source<TAB>side`", n + 1),
                    })?;
            map.insert(source, side.parse()?);
        }
        Ok(map)
    }
}

impl<S: AsRef<str>> FromIterator<(S, Side)> for SourceMap {
    fn from_iter<I: IntoIterator<Item = (S, Side)>>(iter: I) -> Self {
        let mut map = SourceMap::new();
        for (source, side) in iter {
            map.insert(source.as_ref(), side);
        }
        map
    }
}

/// A news article. `tokens` is empty until [`preprocess`] runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub source: String,
    pub side: Side,
    pub date: NaiveDate,
    pub raw_text: String,
    #[serde(default)]
    pub tokens: Vec<String>,
}

impl Document {
    /// True when no token survived preprocessing.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// One store of documents with unique ids.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Document>", into = "Vec<Document>")]
pub struct Corpus {
    documents: Vec<Document>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut index = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            if index.insert(doc.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Self { documents, index })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.index.get(id).map(|&i| &self.documents[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    /// The D^L or D^R view.
    pub fn side(&self, side: Side) -> impl Iterator<Item = &Document> {
        self.documents.iter().filter(move |d| d.side == side)
    }

    /// A new corpus holding the documents that satisfy `keep`, in order.
    pub fn filter<F: FnMut(&Document) -> bool>(&self, mut keep: F) -> Corpus {
        let docs = self.documents.iter().filter(|d| keep(d)).cloned().collect();
        Corpus::new(docs).expect("subset of a corpus has unique ids")
    }

    /// Documents whose source (case-insensitive) is in `sources`.
    pub fn with_sources(&self, sources: &[&str]) -> Corpus {
        let wanted: HashSet<String> = sources.iter().map(|s| s.to_lowercase()).collect();
        self.filter(|d| wanted.contains(&d.source.to_lowercase()))
    }

    pub fn sources(&self) -> BTreeSet<&str> {
        self.documents.iter().map(|d| d.source.as_str()).collect()
    }

    /// Drops documents with no tokens, returning the ids removed.
    pub fn drop_empty(&mut self) -> Vec<String> {
        let (kept, dropped): (Vec<_>, Vec<_>) = std::mem::take(&mut self.documents)
            .into_iter()
            .partition(|d| !d.is_empty());
        *self = Corpus::new(kept).expect("ids stay unique");
        dropped.into_iter().map(|d| d.id).collect()
    }

    pub(crate) fn documents_mut(&mut self) -> &mut [Document] {
        &mut self.documents
    }
}

impl TryFrom<Vec<Document>> for Corpus {
    type Error = CorpusError;

    fn try_from(documents: Vec<Document>) -> Result<Self> {
        Corpus::new(documents)
    }
}

impl From<Corpus> for Vec<Document> {
    fn from(corpus: Corpus) -> Self {
        corpus.documents
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArticle {
    id: String,
    source: String,
    date: String,
    text: String,
}

/// Reads one article per JSONL line: `{"id", "source", "date", "text"}`.
///
/// Articles whose text exactly repeats an earlier article are dropped.
pub fn ingest_jsonl(path: &Path, source_map: &SourceMap) -> Result<Corpus> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_reader(BufReader::new(file), source_map).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn ingest_reader<R: BufRead>(reader: R, source_map: &SourceMap) -> Result<Corpus> {
    let mut docs = Vec::new();
    let mut ids = HashSet::new();
    let mut texts = HashSet::new();
    let mut duplicates = 0usize;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawArticle =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedLine {
                line: line_no,
                message: e.to_string(),
            })?;
        let side = source_map
            .side_of(&raw.source)
            .ok_or_else(|| CorpusError::UnknownSource {
                line: line_no,
                source_name: raw.source.clone(),
            })?;
        let date = NaiveDate::parse_from_str(&raw.date, "%Y-%m-%d").map_err(|e| {
            CorpusError::MalformedLine {
                line: line_no,
                message: format!("date {:?}: {e}", raw.date),
            }
        })?;
        if !ids.insert(raw.id.clone()) {
            return Err(CorpusError::DuplicateId(raw.id));
        }
        if !texts.insert(raw.text.clone()) {
            duplicates += 1;
            continue;
        }
        docs.push(Document {
            id: raw.id,
            source: raw.source,
            side,
            date,
            raw_text: raw.text,
            tokens: Vec::new(),
        });
    }
    if duplicates > 0 {
        log::info!("dropped {duplicates} articles with duplicate text");
    }
    Corpus::new(docs)
}

/// One word per line; blank lines and `#` comments ignored.
pub fn load_word_list(path: &Path) -> Result<BTreeSet<String>> {
    Ok(read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}

/// Token→lemma dictionary: a JSON object or `token<TAB>lemma` lines.
pub fn load_lemma_map(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        });
    }
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (token, lemma) = line
            .split_once(['\t', ' '])
            .ok_or_else(|| CorpusError::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: expected `token<TAB>lemma`", n + 1),
            })?;
        map.insert(token.trim().to_lowercase(), lemma.trim().to_lowercase());
    }
    Ok(map)
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(text)
}
