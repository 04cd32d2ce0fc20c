use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::StandardizationStats;
use crate::labels::LabelScheme;
use crate::models::{Model, ModelConfig, ParameterSet};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CADCKPT1";

/// A trained classifier plus everything needed to feed it new audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub scheme: LabelScheme,
    /// Ordered feature stream names, e.g. `["mel", "prosody"]`.
    pub recipe: Vec<String>,
    pub stats: StandardizationStats,
    pub train_config_digest: String,
    pub epoch: usize,
    pub dev_error: f64,
}

impl Checkpoint {
    /// Parameters are rounded to `f32`, the storage type, so that a reloaded
    /// checkpoint computes exactly what this one does.
    pub fn new(
        mut model: Model,
        scheme: LabelScheme,
        recipe: Vec<String>,
        stats: StandardizationStats,
        train_config_digest: String,
        epoch: usize,
        dev_error: f64,
    ) -> Result<Self> {
        if model.config().n_classes != scheme.arity() {
            return Err(Error::DimensionMismatch {
                expected: scheme.arity(),
                actual: model.config().n_classes,
                context: "checkpoint model classes vs scheme",
            });
        }
        if model.config().input_dim != stats.dim() {
            return Err(Error::DimensionMismatch {
                expected: stats.dim(),
                actual: model.config().input_dim,
                context: "checkpoint model input vs standardization stats",
            });
        }
        model.params_mut().round_to_f32();
        Ok(Self {
            model,
            scheme,
            recipe,
            stats,
            train_config_digest,
            epoch,
            dev_error,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    dtype: String,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    model: ModelConfig,
    scheme: LabelScheme,
    recipe: Vec<String>,
    stats: StandardizationStats,
    stats_digest: String,
    train_config_digest: String,
    epoch: usize,
    dev_error: f64,
    tensors: Vec<TensorEntry>,
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let mut tensors = Vec::new();
    let mut offset = 0;
    for t in ckpt.model.params().tensors() {
        let (r, c) = t.value.dim();
        tensors.push(TensorEntry {
            name: t.name.clone(),
            shape: [r, c],
            dtype: "f32".into(),
            offset,
        });
        offset += 4 * r * c;
    }
    let manifest = Manifest {
        model: ckpt.model.config().clone(),
        scheme: ckpt.scheme,
        recipe: ckpt.recipe.clone(),
        stats: ckpt.stats.clone(),
        stats_digest: ckpt.stats.digest(),
        train_config_digest: ckpt.train_config_digest.clone(),
        epoch: ckpt.epoch,
        dev_error: ckpt.dev_error,
        tensors,
    };
    let header = serde_json::to_vec(&manifest)?;
    let mut out = Vec::with_capacity(12 + header.len() + offset);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for t in ckpt.model.params().tensors() {
        for v in t.value.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(ckpt)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

/// Validates the whole container (magic, manifest, tensor table, payload
/// size, shapes) before building the model.
pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "CADCKPT1",
        });
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes
        .get(12..12 + hlen)
        .ok_or_else(|| Error::corrupt(path, "manifest truncated"))?;
    let m: Manifest = serde_json::from_slice(body)?;
    let payload = &bytes[12 + hlen..];
    if m.stats.digest() != m.stats_digest {
        return Err(Error::corrupt(path, "standardization stats digest mismatch"));
    }

    let reference = Model::new(m.model.clone(), 0).map_err(|e| Error::corrupt(path, e.to_string()))?;
    let mut names = BTreeSet::new();
    let mut spans = Vec::new();
    for t in &m.tensors {
        if t.dtype != "f32" {
            return Err(Error::corrupt(path, format!("tensor {} has dtype {}", t.name, t.dtype)));
        }
        if !names.insert(t.name.as_str()) {
            return Err(Error::corrupt(path, format!("tensor {} listed twice", t.name)));
        }
        let expected = reference
            .params()
            .get(&t.name)
            .map_err(|_| Error::corrupt(path, format!("unexpected tensor {}", t.name)))?;
        if expected.dim() != (t.shape[0], t.shape[1]) {
            return Err(Error::corrupt(
                path,
                format!(
                    "tensor {} has shape {:?}, model needs {:?}",
                    t.name,
                    t.shape,
                    expected.dim()
                ),
            ));
        }
        spans.push((t.offset, t.offset + 4 * t.shape[0] * t.shape[1]));
    }
    if names.len() != reference.params().len() {
        return Err(Error::corrupt(
            path,
            format!(
                "{} tensors stored, model needs {}",
                names.len(),
                reference.params().len()
            ),
        ));
    }
    spans.sort_unstable();
    for w in spans.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::corrupt(path, "tensor byte ranges overlap"));
        }
    }
    let needed = spans.last().map_or(0, |s| s.1);
    let total: usize = spans.iter().map(|s| s.1 - s.0).sum();
    if payload.len() != needed || needed != total {
        return Err(Error::corrupt(
            path,
            format!("payload has {} bytes, tensor table covers {needed}", payload.len()),
        ));
    }

    let mut params = ParameterSet::new();
    for r in reference.params().tensors() {
        let t = m.tensors.iter().find(|t| t.name == r.name).expect("checked above");
        let bytes = &payload[t.offset..t.offset + 4 * r.value.len()];
        let values: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let value =
            ndarray::Array2::from_shape_vec(r.value.dim(), values).map_err(|e| Error::corrupt(path, e.to_string()))?;
        params.insert(r.name.clone(), value, r.trainable);
    }
    let model = Model::from_parts(m.model, params).map_err(|e| Error::corrupt(path, e.to_string()))?;
    Checkpoint::new(
        model,
        m.scheme,
        m.recipe,
        m.stats,
        m.train_config_digest,
        m.epoch,
        m.dev_error,
    )
    .map_err(|e| Error::corrupt(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Split;
    use crate::models::{testutil, Arch, NormKind};

    fn sample(arch: Arch) -> Checkpoint {
        let mut cfg = ModelConfig::new(arch, 6, 5, 2, 4);
        cfg.norm_kind = NormKind::Batch;
        let mut model = Model::new(cfg, 3).unwrap();
        testutil::randomize(&mut model, 0.4, 9);
        let stats = StandardizationStats {
            mean: vec![0.1; 6],
            std: vec![1.5; 6],
            source: Split::Train,
        };
        Checkpoint::new(
            model,
            LabelScheme::Four,
            vec!["mel".into(), "prosody".into()],
            stats,
            "abc".into(),
            4,
            0.125,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for arch in [Arch::Dnn, Arch::Dtcnn, Arch::Gru, Arch::Bigru] {
            let c = sample(arch);
            let bytes = encode_checkpoint(&c).unwrap();
            let back = decode_checkpoint(&bytes, Path::new("mem")).unwrap();
            assert_eq!(back, c);
            assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
            let x = testutil::input(30, 6, 1);
            let a = c.model.posteriors(&x).unwrap();
            let b = back.model.posteriors(&x).unwrap();
            assert!(a.view().iter().zip(b.view()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn bad_magic_names_the_file() {
        let mut bytes = encode_checkpoint(&sample(Arch::Gru)).unwrap();
        bytes[3] = b'?';
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.ckpt");
        std::fs::write(&p, &bytes).unwrap();
        let err = load_checkpoint(&p).unwrap_err();
        assert!(matches!(err, Error::BadMagic { .. }));
        assert!(err.to_string().contains("model.ckpt"));
    }

    #[test]
    fn size_disagreement_is_rejected() {
        let bytes = encode_checkpoint(&sample(Arch::Dnn)).unwrap();
        for cut in [1, 4, 17] {
            let r = decode_checkpoint(&bytes[..bytes.len() - cut], Path::new("m"));
            assert!(matches!(r, Err(Error::Corrupt { .. })));
        }
        let mut longer = bytes.clone();
        longer.extend_from_slice(&[0; 4]);
        assert!(matches!(
            decode_checkpoint(&longer, Path::new("m")),
            Err(Error::Corrupt { .. })
        ));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let bytes = encode_checkpoint(&sample(Arch::Dnn)).unwrap();
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let mut m: serde_json::Value = serde_json::from_slice(&bytes[12..12 + hlen]).unwrap();
        m["model"]["hidden_size"] = 7.into();
        let header = serde_json::to_vec(&m).unwrap();
        let mut out = CHECKPOINT_MAGIC.to_vec();
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&bytes[12 + hlen..]);
        assert!(matches!(
            decode_checkpoint(&out, Path::new("m")),
            Err(Error::Corrupt { .. })
        ));
    }
}
