//! Self-describing model checkpoints.
//!
//! Layout: the 8-byte magic `SMBERTCK`, a little-endian u32 format version,
//! a little-endian u64 metadata length, the JSON metadata, then the tensors
//! as raw little-endian f32 in the order of the metadata's tensor index
//! (offsets are in bytes from the start of the tensor region).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptors::Normalizer;
use crate::model::{ModelConfig, Params};
use crate::tokenizer::Vocabulary;
use crate::training::PretrainConfig;

pub const MAGIC: &[u8; 8] = b"SMBERTCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Metadata {
    model: ModelConfig,
    pretrain: Option<PretrainConfig>,
    vocabulary: Vocabulary,
    normalizer: Normalizer,
    step: usize,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    /// Configuration of the run that produced the weights, if any.
    pub pretrain: Option<PretrainConfig>,
    pub vocabulary: Vocabulary,
    pub normalizer: Normalizer,
    pub step: usize,
    pub params: Params<f32>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut tensors = Vec::new();
        let mut offset = 0u64;
        for (name, shape, data) in self.params.tensors() {
            tensors.push(TensorEntry { name, shape, offset });
            offset += 4 * data.len() as u64;
        }
        let meta = Metadata {
            model: self.model.clone(),
            pretrain: self.pretrain.clone(),
            vocabulary: self.vocabulary.clone(),
            normalizer: self.normalizer.clone(),
            step: self.step,
            tensors,
        };
        let json = serde_json::to_vec(&meta).expect("metadata serializes");
        let mut out = Vec::with_capacity(20 + json.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, _, data) in self.params.tensors() {
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
        let corrupt = |m: &str| CheckpointError::Corrupt(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let meta_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let meta_end = 20usize.checked_add(meta_len).filter(|&e| e <= bytes.len());
        let meta_end = meta_end.ok_or_else(|| corrupt("metadata length exceeds file"))?;
        let meta: Metadata = serde_json::from_slice(&bytes[20..meta_end])
            .map_err(|e| CheckpointError::Corrupt(format!("metadata: {e}")))?;
        meta.model
            .validate()
            .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let data = &bytes[meta_end..];
        let mut params: Params<f32> = Params::init(&meta.model);
        let expected: Vec<(String, Vec<usize>)> = params.tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
        if expected.len() != meta.tensors.len() {
            return Err(corrupt("tensor count does not match the model config"));
        }
        let mut end = 0usize;
        for ((entry, (name, shape)), (_, dst)) in meta.tensors.iter().zip(&expected).zip(params.tensors_mut()) {
            if entry.name != *name || entry.shape != *shape {
                return Err(CheckpointError::Corrupt(format!(
                    "tensor '{}' {:?} where '{}' {:?} was expected",
                    entry.name, entry.shape, name, shape
                )));
            }
            let start = entry.offset as usize;
            let stop = start + 4 * dst.len();
            let src = data
                .get(start..stop)
                .ok_or_else(|| CheckpointError::Corrupt(format!("tensor '{name}' runs past end of file")))?;
            for (d, chunk) in dst.iter_mut().zip(src.chunks_exact(4)) {
                *d = f32::from_le_bytes(chunk.try_into().unwrap());
            }
            end = end.max(stop);
        }
        if end != data.len() {
            return Err(corrupt("trailing bytes after tensor data"));
        }
        Ok(Checkpoint {
            model: meta.model,
            pretrain: meta.pretrain,
            vocabulary: meta.vocabulary,
            normalizer: meta.normalizer,
            step: meta.step,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io = |e: std::io::Error| CheckpointError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut f = fs::File::create(path).map_err(io)?;
        f.write_all(&self.to_bytes()).map_err(io)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
        let bytes = fs::read(path).map_err(|e| CheckpointError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Checkpoint::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::{fit_normalizer, DescriptorSet};

    fn sample() -> Checkpoint {
        let set = DescriptorSet::parse("SIMPLE").unwrap();
        let vocab = Vocabulary::smiles_default();
        let model = ModelConfig::tiny(vocab.len(), set.len());
        let mols = ["CCO", "c1ccccc1O", "CC(=O)N"].map(|s| crate::chem::parse_smiles(s).unwrap());
        let normalizer = fit_normalizer(&set, mols.iter().map(|m| crate::descriptors::compute_descriptors(m, &set)), 0).unwrap();
        Checkpoint {
            params: Params::init(&model),
            model,
            pretrain: Some(PretrainConfig::default()),
            vocabulary: vocab,
            normalizer,
            step: 7,
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_version_and_magic() {
        let mut bytes = sample().to_bytes();
        bytes[8] = 9;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(CheckpointError::Version { found: 9, expected: 1 })
        ));
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn rejects_truncation() {
        let bytes = sample().to_bytes();
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 4]),
            Err(CheckpointError::Corrupt(_))
        ));
    }
}
