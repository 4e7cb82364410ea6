//! Versioned model container.
//!
//! Layout: `TSNM`, a little-endian `u32` version, a `u64` header length,
//! the JSON header, then every tensor listed in the header as
//! little-endian `f64` values in header order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::Network;
use super::spec::NetworkSpec;
use super::tensor::{ParamSet, Tensor};
use super::train::{ModelParams, StreamKind, TrainConfig, TrainingSummary};
use crate::augmentation::AugmentConfig;
use crate::error::{Error, Result};
use crate::transforms::{ChannelNormalizer, TransformConfig};

pub const MODEL_MAGIC: &[u8; 4] = b"TSNM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    stream: StreamKind,
    spec: NetworkSpec,
    transform: TransformConfig,
    normalizer: Option<ChannelNormalizer>,
    augment: AugmentConfig,
    train: TrainConfig,
    summary: TrainingSummary,
    tensors: Vec<TensorEntry>,
}

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format {
        what: "model file",
        reason: reason.into(),
    }
}

pub fn encode_model(model: &ModelParams) -> Result<Vec<u8>> {
    model.network.validate()?;
    let header = Header {
        stream: model.stream,
        spec: model.network.spec.clone(),
        transform: model.transform,
        normalizer: model.normalizer.clone(),
        augment: model.augment,
        train: model.train.clone(),
        summary: model.summary.clone(),
        tensors: model
            .network
            .params
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + 8 * model.network.params.parameter_count());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in model.network.params.iter() {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelParams> {
    if bytes.len() < 16 || &bytes[..4] != MODEL_MAGIC {
        return Err(format_err("missing TSNM magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != MODEL_VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let body = usize::try_from(header_len)
        .ok()
        .and_then(|n| n.checked_add(16))
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| format_err("truncated header"))?;
    let header: Header = serde_json::from_slice(&bytes[16..body])?;

    let mut rest = &bytes[body..];
    let mut params = ParamSet::new();
    for entry in header.tensors {
        let n: usize = entry.shape.iter().product();
        let len = n.checked_mul(8).filter(|&l| l <= rest.len());
        let Some(len) = len else {
            return Err(format_err(format!("truncated tensor {}", entry.name)));
        };
        let data = rest[..len]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        rest = &rest[len..];
        params.insert(
            entry.name,
            Tensor {
                shape: entry.shape,
                data,
            },
        );
    }
    if !rest.is_empty() {
        return Err(format_err(format!("{} trailing bytes", rest.len())));
    }
    let network = Network {
        spec: header.spec,
        params,
    };
    network.validate()?;
    if let Some(n) = &header.normalizer {
        if n.channels() != network.spec.input_channels {
            return Err(format_err("normalizer does not match the network input"));
        }
    }
    Ok(ModelParams {
        stream: header.stream,
        network,
        transform: header.transform,
        normalizer: header.normalizer,
        augment: header.augment,
        train: header.train,
        summary: header.summary,
    })
}

pub fn save_model(path: &Path, model: &ModelParams) -> Result<()> {
    let bytes = encode_model(model)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::spec::NetworkShape;
    use crate::network::train::EpochRecord;

    fn model() -> ModelParams {
        let spec = NetworkShape::default().with_inputs(18);
        let mut network = Network::init(spec, 3).unwrap();
        network.params.get_mut("head.bias").unwrap().data = vec![0.1, -1.0 / 3.0];
        ModelParams {
            stream: StreamKind::Frequency,
            network,
            transform: TransformConfig::default(),
            normalizer: Some(ChannelNormalizer {
                mean: (0..18).map(|i| i as f64 / 7.0).collect(),
                std: (0..18).map(|i| 1.0 + (i as f64).sqrt()).collect(),
            }),
            augment: AugmentConfig::default(),
            train: TrainConfig::default(),
            summary: TrainingSummary {
                history: vec![EpochRecord {
                    epoch: 0,
                    train_loss: None,
                    val_loss: 0.1 + 0.2,
                    val_accuracy: 0.5,
                }],
                best_epoch: 0,
            },
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let bytes = encode_model(&m).unwrap();
        let back = decode_model(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode_model(&back).unwrap(), bytes);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        save_model(&path, &m).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode_model(&model()).unwrap();
        assert!(decode_model(&bytes[..bytes.len() - 8]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_model(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(decode_model(&magic), Err(Error::Format { .. })));
        assert!(decode_model(&[]).is_err());
        assert!(load_model(Path::new("/nonexistent/m.model")).is_err());
    }
}
