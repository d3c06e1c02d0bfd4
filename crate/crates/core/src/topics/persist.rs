//! On-disk layout: `lda.json` header plus `phi.f64` (K × V) and `theta.f64`
//! (D × K), raw little-endian f64 in row-major order.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{LdaModel, Result, TopicError};
use crate::io::{f64s_from_le_bytes, f64s_to_le_bytes, write_atomic};

pub const HEADER_FILE: &str = "lda.json";
pub const PHI_FILE: &str = "phi.f64";
pub const THETA_FILE: &str = "theta.f64";

#[derive(Serialize, Deserialize)]
struct Header {
    k: usize,
    alpha: f64,
    beta: f64,
    vocab_size: usize,
    num_docs: usize,
    seed: u64,
    iterations: usize,
    vocab_hash: String,
    doc_ids: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TopicError + '_ {
    move |source| TopicError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let values = f64s_from_le_bytes(&bytes)
        .filter(|v| v.len() == rows * cols)
        .ok_or_else(|| TopicError::Format {
            path: path.to_path_buf(),
            message: format!(
                "expected {rows} x {cols} little-endian f64 values, found {} bytes",
                bytes.len()
            ),
        })?;
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked"))
}

impl LdaModel {
    pub fn save(&self, dir: &Path) -> Result<()> {
        let header = Header {
            k: self.k,
            alpha: self.alpha,
            beta: self.beta,
            vocab_size: self.vocab_size(),
            num_docs: self.num_docs(),
            seed: self.seed,
            iterations: self.iterations,
            vocab_hash: self.vocab_fingerprint.clone(),
            doc_ids: self.doc_ids.clone(),
        };
        let json = serde_json::to_vec_pretty(&header).expect("header serializes");
        let phi_path = dir.join(PHI_FILE);
        let theta_path = dir.join(THETA_FILE);
        let header_path = dir.join(HEADER_FILE);
        let phi: Vec<f64> = self.phi.iter().copied().collect();
        let theta: Vec<f64> = self.theta.iter().copied().collect();
        write_atomic(&phi_path, &f64s_to_le_bytes(&phi)).map_err(io_err(&phi_path))?;
        write_atomic(&theta_path, &f64s_to_le_bytes(&theta)).map_err(io_err(&theta_path))?;
        write_atomic(&header_path, &json).map_err(io_err(&header_path))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<LdaModel> {
        let header_path = dir.join(HEADER_FILE);
        let text = std::fs::read(&header_path).map_err(io_err(&header_path))?;
        let h: Header = serde_json::from_slice(&text).map_err(|e| TopicError::Format {
            path: header_path.clone(),
            message: e.to_string(),
        })?;
        if h.doc_ids.len() != h.num_docs {
            return Err(TopicError::Format {
                path: header_path,
                message: "doc_ids length differs from num_docs".into(),
            });
        }
        let phi = read_matrix(&dir.join(PHI_FILE), h.k, h.vocab_size)?;
        let theta = read_matrix(&dir.join(THETA_FILE), h.num_docs, h.k)?;
        Ok(LdaModel::from_parts(
            h.k,
            h.alpha,
            h.beta,
            h.seed,
            h.iterations,
            phi,
            theta,
            h.doc_ids,
            Vec::new(),
            h.vocab_hash,
        ))
    }
}
