//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! 8 bytes   magic "SKTCKPT\0"
//! 8 bytes   u64 header length H
//! H bytes   UTF-8 JSON header
//! ...       tensor payload: raw f64 values, little-endian
//! ```
//!
//! The header carries the model identifier, its configuration, the seed and a
//! manifest with, for every tensor, its name, shape, byte offset into the
//! payload and element count. Tensors are stored in name order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::param::ModelParams;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"SKTCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: String,
    pub config: serde_json::Value,
    pub params: ModelParams,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub model: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0u64;
        let mut tensors = Vec::with_capacity(self.params.tensors.len());
        for (name, t) in &self.params.tensors {
            tensors.push(TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
                length: t.len() as u64,
            });
            offset += 8 * t.len() as u64;
        }
        let header = Header {
            format_version: FORMAT_VERSION,
            model: self.model.clone(),
            seed: self.params.seed,
            config: self.config.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&header).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(16 + json.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.params.tensors.values() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| NnError::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let payload_start = 16usize
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[16..payload_start])
            .map_err(|e| NnError::Checkpoint(format!("header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        let payload = &bytes[payload_start..];
        let mut tensors = std::collections::BTreeMap::new();
        for entry in header.tensors {
            let start = entry.offset as usize;
            let end = start + 8 * entry.length as usize;
            let raw = payload
                .get(start..end)
                .ok_or_else(|| NnError::Checkpoint(format!("tensor {} out of bounds", entry.name)))?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.insert(entry.name, Tensor::new(entry.shape, data)?);
        }
        Ok(Self {
            model: header.model,
            config: header.config,
            params: ModelParams {
                seed: header.seed,
                tensors,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn bytes_round_trip(values in prop::collection::vec(-1e6f64..1e6, 1..40), seed in any::<u64>()) {
            let n = values.len();
            let mut tensors = std::collections::BTreeMap::new();
            tensors.insert("a.weight".to_string(), Tensor::new(vec![n], values.clone()).unwrap());
            tensors.insert("b.bias".to_string(), Tensor::new(vec![1, n], values).unwrap());
            let ck = Checkpoint {
                model: "test".into(),
                config: serde_json::json!({"side": 4}),
                params: ModelParams { seed, tensors },
            };
            let back = Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
            prop_assert_eq!(back, ck);
        }
    }

    #[test]
    fn garbage_rejected() {
        assert!(Checkpoint::from_bytes(b"not a checkpoint at all").is_err());
    }
}
