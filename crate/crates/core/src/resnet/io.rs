use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{ArchitectureSpec, Model, ModelConfig};
use crate::error::{Error, Result};
use crate::features::NormalizationStats;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A tensor stored as base64 of little-endian `f64`s.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorBlob {
    pub name: String,
    pub len: usize,
    pub data: String,
}

/// On-disk model document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub config: ModelConfig,
    pub arch: ArchitectureSpec,
    pub seed: u64,
    pub norm_stats: NormalizationStats,
    pub parameters: Vec<TensorBlob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
}

fn encode(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode(blob: &TensorBlob) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(&blob.data)
        .map_err(|e| Error::CorruptModel(format!("{}: {e}", blob.name)))?;
    if bytes.len() != blob.len * 8 {
        return Err(Error::CorruptModel(format!(
            "{}: expected {} values, found {} bytes",
            blob.name,
            blob.len,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

impl Model {
    pub fn to_document(&self, manifest: Option<serde_json::Value>) -> ModelDocument {
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            config: self.config,
            arch: self.arch,
            seed: self.seed,
            norm_stats: self.norm_stats.clone(),
            parameters: self
                .named_tensors()
                .into_iter()
                .map(|(name, values)| TensorBlob {
                    name,
                    len: values.len(),
                    data: encode(values),
                })
                .collect(),
            manifest,
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Model> {
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion(doc.format_version));
        }
        let n = doc.norm_stats.min.len();
        if n == 0 || doc.norm_stats.max.len() != n {
            return Err(Error::CorruptModel("normalization stats malformed".into()));
        }
        let mut model = Model::build_with_inputs(doc.config, doc.arch, doc.seed, n)
            .map_err(|e| Error::CorruptModel(e.to_string()))?;
        model.norm_stats = doc.norm_stats.clone();
        let mut slots = model.named_tensors_mut();
        if slots.len() != doc.parameters.len() {
            return Err(Error::CorruptModel(format!(
                "expected {} tensors, found {}",
                slots.len(),
                doc.parameters.len()
            )));
        }
        for ((name, slot), blob) in slots.iter_mut().zip(&doc.parameters) {
            if *name != blob.name || slot.len() != blob.len {
                return Err(Error::CorruptModel(format!(
                    "tensor {} does not match expected {name}",
                    blob.name
                )));
            }
            slot.copy_from_slice(&decode(blob)?);
        }
        Ok(model)
    }

    pub fn to_json(&self, manifest: Option<serde_json::Value>) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document(manifest))? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn save(&self, path: &Path, manifest: Option<serde_json::Value>) -> Result<()> {
        std::fs::write(path, self.to_json(manifest)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
