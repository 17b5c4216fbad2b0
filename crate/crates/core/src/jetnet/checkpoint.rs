//! Binary parameter files: an 8-byte little-endian header length, a JSON
//! header, then every tensor's data as little-endian `f64` in header order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::embedding::FourierFeatureMap;
use super::network::{Network, NetworkConfig};
use crate::autodiff::Tensor;
use crate::{Error, Result};

const EMBEDDING_NAME: &str = "embedding.B";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
    pub seed: u64,
    pub config_hash: String,
    #[serde(default)]
    pub step: u64,
}

/// Hex SHA-256 of arbitrary bytes (used on the serialized config).
pub fn config_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_tensors(path: &Path, header: &CheckpointHeader, tensors: &[Tensor]) -> Result<()> {
    if header.names.len() != tensors.len() || header.shapes.len() != tensors.len() {
        return Err(Error::Shape("checkpoint header does not match tensors".into()));
    }
    let json = serde_json::to_vec(header).map_err(|e| Error::Serde(e.to_string()))?;
    let total: usize = tensors.iter().map(Tensor::len).sum();
    let mut buf = Vec::with_capacity(8 + json.len() + 8 * total);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for t in tensors {
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_tensors(path: &Path) -> Result<(CheckpointHeader, Vec<Tensor>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |msg: &str| Error::Serde(format!("{}: {msg}", path.display()));
    if bytes.len() < 8 {
        return Err(corrupt("truncated header length"));
    }
    let hlen = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(8..8 + hlen).ok_or_else(|| corrupt("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(body).map_err(|e| Error::Serde(e.to_string()))?;
    if header.names.len() != header.shapes.len() {
        return Err(corrupt("names and shapes differ in length"));
    }
    let mut off = 8 + hlen;
    let mut tensors = Vec::with_capacity(header.shapes.len());
    for shape in &header.shapes {
        let n: usize = shape.iter().product();
        let raw = bytes.get(off..off + 8 * n).ok_or_else(|| corrupt("truncated data"))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push(Tensor::new(shape.clone(), data)?);
        off += 8 * n;
    }
    if off != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok((header, tensors))
}

impl Network {
    pub fn save(&self, path: &Path, seed: u64, config_hash: &str, step: u64) -> Result<()> {
        let mut names = self.names().to_vec();
        let mut tensors = self.params().to_vec();
        if let Some(map) = self.embedding() {
            names.push(EMBEDDING_NAME.to_string());
            tensors.push(Tensor::matrix(map.features(), map.input_dim(), map.matrix().to_vec()));
        }
        let header = CheckpointHeader {
            shapes: tensors.iter().map(|t| t.shape().to_vec()).collect(),
            names,
            seed,
            config_hash: config_hash.to_string(),
            step,
        };
        write_tensors(path, &header, &tensors)
    }

    pub fn load(path: &Path, config: NetworkConfig) -> Result<(Self, CheckpointHeader)> {
        let (header, mut tensors) = read_tensors(path)?;
        let mut embedding = None;
        if header.names.last().map(String::as_str) == Some(EMBEDDING_NAME) {
            let b = tensors.pop().expect("nonempty");
            let sigma = match config.embedding {
                super::network::EmbeddingConfig::Fourier { sigma, .. } => sigma,
                super::network::EmbeddingConfig::None => 0.0,
            };
            embedding = Some(FourierFeatureMap::from_matrix(b.data().to_vec(), b.rows(), b.cols(), sigma)?);
        }
        let expected: Vec<String> = config.layout().into_iter().map(|(n, _)| n).collect();
        if header.names[..tensors.len()] != expected[..] {
            return Err(Error::Shape("checkpoint parameter names do not match the network config".into()));
        }
        Ok((Network::from_parts(config, embedding, tensors)?, header))
    }
}
