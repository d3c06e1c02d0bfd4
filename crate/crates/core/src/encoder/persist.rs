//! Model directory: `encoder.json` (config and token table) plus
//! `params.f64` (all parameters, little-endian, fixed tensor order).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::Params;
use super::{io_err, EncoderConfig, EncoderError, EncoderModel, Result};
use crate::corpus::Vocabulary;
use crate::io::{f64s_from_le_bytes, f64s_to_le_bytes, write_atomic};

pub const HEADER_FILE: &str = "encoder.json";
pub const PARAMS_FILE: &str = "params.f64";

#[derive(Serialize, Deserialize)]
struct Header {
    config: EncoderConfig,
    vocabulary: Vocabulary,
    num_parameters: usize,
}

impl EncoderModel {
    pub fn save(&self, dir: &Path) -> Result<()> {
        let header = Header {
            config: self.config.clone(),
            vocabulary: self.vocab.clone(),
            num_parameters: self.params.num_values(),
        };
        let params_path = dir.join(PARAMS_FILE);
        write_atomic(&params_path, &f64s_to_le_bytes(&self.params.flatten()))
            .map_err(io_err(&params_path))?;
        let header_path = dir.join(HEADER_FILE);
        let json = serde_json::to_vec_pretty(&header).expect("header serializes");
        write_atomic(&header_path, &json).map_err(io_err(&header_path))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let header_path = dir.join(HEADER_FILE);
        let text = std::fs::read(&header_path).map_err(io_err(&header_path))?;
        let header: Header = serde_json::from_slice(&text).map_err(|e| EncoderError::Format {
            path: header_path.clone(),
            message: e.to_string(),
        })?;
        let mut model = EncoderModel::new(header.config, header.vocabulary, 0)?;
        let params_path = dir.join(PARAMS_FILE);
        let bytes = std::fs::read(&params_path).map_err(io_err(&params_path))?;
        let expected = model.params.num_values();
        let values = f64s_from_le_bytes(&bytes)
            .filter(|v| v.len() == expected && header.num_parameters == expected)
            .ok_or_else(|| EncoderError::Format {
                path: params_path.clone(),
                message: format!(
                    "expected {expected} parameters, found {} bytes",
                    bytes.len()
                ),
            })?;
        let mut params = Params::zeros(&model.config);
        params.assign_flat(&values);
        if !params.all_finite() {
            return Err(EncoderError::Format {
                path: params_path,
                message: "non-finite parameter".into(),
            });
        }
        model.params = params;
        Ok(model)
    }
}
