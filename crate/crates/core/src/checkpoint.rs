//! Model checkpoints.
//!
//! ```text
//! b"DMNC"  u32 version  u64 header_len  header (JSON)  f64 × Σ numel
//! ```
//!
//! The JSON header holds the model configuration, both vocabularies and the
//! name and shape of every tensor; tensor data follows in header order, all
//! integers and floats little-endian.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::vocab::{AnswerVocab, Vocabulary};

pub const MAGIC: &[u8; 4] = b"DMNC";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vocabulary,
    answers: AnswerVocab,
    tensors: Vec<TensorEntry>,
}

pub fn to_bytes(model: &Model) -> Result<Vec<u8>> {
    let header = Header {
        config: model.config,
        vocab: model.vocab.clone(),
        answers: model.answers.clone(),
        tensors: model
            .params
            .iter()
            .map(|(_, p)| TensorEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut out = Vec::with_capacity(16 + json.len() + 8 * model.params.numel());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, p) in model.params.iter() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
    let bad = |msg: String| Error::Checkpoint(msg);
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}, expected {VERSION}")));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if body.len() < header_len {
        return Err(bad("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&body[..header_len]).map_err(|e| bad(format!("bad header: {e}")))?;
    let mut data = &body[header_len..];

    let mut model = Model::new(header.config, header.vocab, header.answers, 0)?;
    if header.tensors.len() != model.params.len() {
        return Err(bad(format!(
            "checkpoint has {} tensors, model expects {}",
            header.tensors.len(),
            model.params.len()
        )));
    }
    for entry in &header.tensors {
        let id = model
            .params
            .id(&entry.name)
            .ok_or_else(|| bad(format!("unexpected tensor {}", entry.name)))?;
        let target = model.params.value_mut(id);
        if target.shape() != entry.shape.as_slice() {
            return Err(bad(format!(
                "tensor {} has shape {:?}, model expects {:?}",
                entry.name,
                entry.shape,
                target.shape()
            )));
        }
        let n = target.numel();
        if data.len() < 8 * n {
            return Err(bad(format!("truncated data for tensor {}", entry.name)));
        }
        for (dst, chunk) in target.data_mut().iter_mut().zip(data[..8 * n].chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        data = &data[8 * n..];
    }
    if !data.is_empty() {
        return Err(bad(format!("{} trailing bytes", data.len())));
    }
    Ok(model)
}

pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tokenize;
    use crate::data::Example;
    use crate::model::Variant;
    use crate::vocab::build_vocab;

    fn model(seed: u64) -> (Model, Vec<Example>) {
        let data = vec![
            Example::text(vec![tokenize("Mary went to the kitchen.")], tokenize("Where is Mary?"), "kitchen"),
            Example::text(vec![tokenize("John went to the garden.")], tokenize("Where is John?"), "garden"),
        ];
        let (v, a) = build_vocab(&data);
        (Model::new(Variant::DmnPlus.config(5, 2, 70), v, a, seed).unwrap(), data)
    }

    #[test]
    fn round_trip_preserves_predictions_exactly() {
        let (m, data) = model(4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save(&m, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back.config, m.config);
        assert_eq!(back.vocab, m.vocab);
        assert_eq!(back.answers, m.answers);
        for ex in &data {
            let a = m.predict(&m.encode(ex).unwrap()).unwrap();
            let b = back.predict(&back.encode(ex).unwrap()).unwrap();
            assert_eq!(a.logits, b.logits);
        }
        assert_eq!(to_bytes(&back).unwrap(), to_bytes(&m).unwrap());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let (m, _) = model(1);
        let bytes = to_bytes(&m).unwrap();
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(from_bytes(&extra).is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(from_bytes(&wrong_version).unwrap_err().to_string().contains("version"));
        assert!(from_bytes(b"nope").is_err());
    }
}
