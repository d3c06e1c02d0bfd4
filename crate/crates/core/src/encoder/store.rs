//! Embedding interchange format.
//!
//! `index.json` lists the documents; each document has one little-endian
//! binary file: `PCTE`, u32 version, u32 n_tokens, u32 dim, u8 has_pooled,
//! n_tokens × (u16 byte length + UTF-8), n_tokens × dim f32 row-major, then
//! dim f32 for the pooled vector.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{io_err, ContextEncoder, ContextualEncoding, EncoderError, Result};
use crate::corpus::Document;
use crate::io::write_atomic;

pub const STORE_MAGIC: &[u8; 4] = b"PCTE";
pub const STORE_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "index.json";
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub id: String,
    /// Relative to the directory holding `index.json`.
    pub file: String,
    pub n_tokens: usize,
}

#[derive(Serialize, Deserialize)]
struct Index {
    version: u32,
    dim: usize,
    encoder: String,
    docs: Vec<StoreEntry>,
}

struct Header {
    n_tokens: usize,
    dim: usize,
}

fn format_err(path: &Path, message: impl Into<String>) -> EncoderError {
    EncoderError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != STORE_MAGIC || u32_at(bytes, 4) != STORE_VERSION {
        return Err(EncoderError::BadHeader {
            path: path.to_path_buf(),
        });
    }
    if bytes[16] != 1 {
        return Err(format_err(path, "has_pooled must be 1"));
    }
    Ok(Header {
        n_tokens: u32_at(bytes, 8) as usize,
        dim: u32_at(bytes, 12) as usize,
    })
}

fn check_header(path: &Path, header: &Header, dim: usize, n_tokens: usize) -> Result<()> {
    if header.dim != dim {
        return Err(EncoderError::DimMismatch {
            path: path.to_path_buf(),
            expected: dim,
            found: header.dim,
        });
    }
    if header.n_tokens != n_tokens {
        return Err(EncoderError::TokenCountMismatch {
            path: path.to_path_buf(),
            expected: n_tokens,
            found: header.n_tokens,
        });
    }
    Ok(())
}

fn encode_file(enc: &ContextualEncoding, dim: usize) -> std::result::Result<Vec<u8>, String> {
    let n = enc.tokens.len();
    if enc.token_vectors.dim() != (n, dim) || enc.pooled.len() != dim {
        return Err(format!(
            "document {}: shape does not match {n} tokens × {dim}",
            enc.doc_id
        ));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + (n + 1) * dim * 4 + n * 8);
    out.extend_from_slice(STORE_MAGIC);
    out.extend_from_slice(&STORE_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.push(1);
    for token in &enc.tokens {
        let len = u16::try_from(token.len())
            .map_err(|_| format!("token longer than 65535 bytes in {}", enc.doc_id))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(token.as_bytes());
    }
    for &v in enc.token_vectors.iter().chain(enc.pooled.iter()) {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

/// Writes `encodings` as a store under `dir`. Values are narrowed to f32.
pub fn write_embedding_store(
    dir: &Path,
    encoder_name: &str,
    dim: usize,
    encodings: &[ContextualEncoding],
) -> Result<PathBuf> {
    let mut docs = Vec::with_capacity(encodings.len());
    for (i, enc) in encodings.iter().enumerate() {
        let file = format!("doc{i:06}.pcte");
        let path = dir.join(&file);
        let bytes = encode_file(enc, dim).map_err(|m| format_err(&path, m))?;
        write_atomic(&path, &bytes).map_err(io_err(&path))?;
        docs.push(StoreEntry {
            id: enc.doc_id.clone(),
            file,
            n_tokens: enc.tokens.len(),
        });
    }
    let index = Index {
        version: STORE_VERSION,
        dim,
        encoder: encoder_name.to_string(),
        docs,
    };
    let index_path = dir.join(INDEX_FILE);
    let json = serde_json::to_vec_pretty(&index).expect("index serializes");
    write_atomic(&index_path, &json).map_err(io_err(&index_path))?;
    Ok(index_path)
}

/// File-backed encodings. Headers are validated on open; vectors are read on
/// demand.
#[derive(Clone, Debug)]
pub struct EmbeddingStore {
    root: PathBuf,
    dim: usize,
    encoder_name: String,
    entries: Vec<StoreEntry>,
    by_id: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn open(index_path: &Path) -> Result<Self> {
        let text = std::fs::read(index_path).map_err(io_err(index_path))?;
        let index: Index =
            serde_json::from_slice(&text).map_err(|e| format_err(index_path, e.to_string()))?;
        if index.version != STORE_VERSION {
            return Err(EncoderError::BadHeader {
                path: index_path.to_path_buf(),
            });
        }
        if index.dim == 0 {
            return Err(format_err(index_path, "dim must be positive"));
        }
        let root = index_path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut by_id = HashMap::with_capacity(index.docs.len());
        for (i, entry) in index.docs.iter().enumerate() {
            if by_id.insert(entry.id.clone(), i).is_some() {
                return Err(format_err(
                    index_path,
                    format!("duplicate document id {}", entry.id),
                ));
            }
            let path = root.join(&entry.file);
            let mut head = [0u8; HEADER_LEN];
            let mut file = std::fs::File::open(&path).map_err(io_err(&path))?;
            std::io::Read::read_exact(&mut file, &mut head)
                .map_err(|_| EncoderError::BadHeader { path: path.clone() })?;
            check_header(
                &path,
                &parse_header(&path, &head)?,
                index.dim,
                entry.n_tokens,
            )?;
        }
        Ok(Self {
            root,
            dim: index.dim,
            encoder_name: index.encoder,
            entries: index.docs,
            by_id,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[StoreEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    /// Reads one document's encoding, widening f32 to f64.
    pub fn get(&self, id: &str) -> Result<ContextualEncoding> {
        let entry = self
            .by_id
            .get(id)
            .map(|&i| &self.entries[i])
            .ok_or_else(|| EncoderError::MissingDocument(id.to_string()))?;
        let path = self.root.join(&entry.file);
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        let header = parse_header(&path, &bytes)?;
        check_header(&path, &header, self.dim, entry.n_tokens)?;
        let (n, dim) = (header.n_tokens, header.dim);

        let truncated = || format_err(&path, "file ends early");
        let mut at = HEADER_LEN;
        let mut tokens = Vec::with_capacity(n);
        for _ in 0..n {
            let len_bytes = bytes.get(at..at + 2).ok_or_else(truncated)?;
            let len = u16::from_le_bytes([len_bytes[0], len_bytes[1]]) as usize;
            at += 2;
            let raw = bytes.get(at..at + len).ok_or_else(truncated)?;
            let token = std::str::from_utf8(raw)
                .map_err(|e| format_err(&path, format!("token is not UTF-8: {e}")))?;
            tokens.push(token.to_string());
            at += len;
        }
        let floats = bytes.get(at..).ok_or_else(truncated)?;
        let expected = (n + 1) * dim * 4;
        if floats.len() != expected {
            return Err(format_err(
                &path,
                format!(
                    "expected {expected} bytes of vectors, found {}",
                    floats.len()
                ),
            ));
        }
        let values: Vec<f64> = floats
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let pooled = Array1::from(values[n * dim..].to_vec());
        let mut values = values;
        values.truncate(n * dim);
        Ok(ContextualEncoding {
            doc_id: id.to_string(),
            tokens,
            token_vectors: Array2::from_shape_vec((n, dim), values).expect("length checked"),
            pooled,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<ContextualEncoding>> + '_ {
        self.entries.iter().map(|e| self.get(&e.id))
    }
}

impl ContextEncoder for EmbeddingStore {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &str {
        &self.encoder_name
    }

    /// Looks the document up by id. Stored tokens must be a prefix of the
    /// document's tokens, so that rows align with the pipeline vocabulary.
    fn encode(&self, doc: &Document) -> Result<ContextualEncoding> {
        let enc = self.get(&doc.id)?;
        if let Some(position) = enc
            .tokens
            .iter()
            .enumerate()
            .position(|(i, t)| doc.tokens.get(i) != Some(t))
        {
            return Err(EncoderError::TokenMismatch {
                doc_id: doc.id.clone(),
                position,
            });
        }
        Ok(enc)
    }
}
