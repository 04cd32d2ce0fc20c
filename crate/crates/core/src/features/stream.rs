use std::io::Read;
use std::path::Path;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::frame::FrameSpec;
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 8] = b"CADFEAT1";

/// A `T x dim` matrix of per-frame features plus framing metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStream {
    pub name: String,
    pub spec: FrameSpec,
    pub data: Array2<f64>,
    pub standardized: bool,
}

impl FeatureStream {
    pub fn new(name: impl Into<String>, spec: FrameSpec, data: Array2<f64>) -> Self {
        Self {
            name: name.into(),
            spec,
            data,
            standardized: false,
        }
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }
}

/// Concatenate streams along the feature axis. Frames are aligned by center
/// (every stream shares the same hop), so the tail is truncated to the
/// shortest stream.
pub fn fuse_streams(streams: &[FeatureStream]) -> Result<FeatureStream> {
    let first = streams.first().ok_or(Error::EmptyInput("stream list"))?;
    if streams.len() == 1 {
        return Ok(first.clone());
    }
    for s in &streams[1..] {
        if s.spec.hop_ms != first.spec.hop_ms {
            return Err(Error::HopMismatch {
                first: first.spec.hop_ms,
                other: s.spec.hop_ms,
            });
        }
    }
    let t = streams.iter().map(|s| s.frames()).min().unwrap_or(0);
    let dim: usize = streams.iter().map(|s| s.dim()).sum();
    let mut data = Array2::zeros((t, dim));
    let mut col = 0;
    for s in streams {
        data.slice_mut(s![.., col..col + s.dim()])
            .assign(&s.data.slice(s![..t, ..]));
        col += s.dim();
    }
    let window_ms = streams
        .iter()
        .map(|s| s.spec.window_ms)
        .fold(first.spec.window_ms, f64::max);
    Ok(FeatureStream {
        name: streams.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join("+"),
        spec: FrameSpec {
            window_ms,
            hop_ms: first.spec.hop_ms,
        },
        data,
        standardized: streams.iter().all(|s| s.standardized),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureHeader {
    name: String,
    dim: usize,
    #[serde(rename = "T")]
    frames: usize,
    hop_ms: f64,
    window_ms: f64,
    standardized: bool,
}

/// Serialize a stream in the `CADFEAT1` container. Values are stored as
/// little-endian `f32`, row-major.
pub fn write_feature_file(path: impl AsRef<Path>, stream: &FeatureStream) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_feature_file(stream)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_feature_file(stream: &FeatureStream) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&FeatureHeader {
        name: stream.name.clone(),
        dim: stream.dim(),
        frames: stream.frames(),
        hop_ms: stream.spec.hop_ms,
        window_ms: stream.spec.window_ms,
        standardized: stream.standardized,
    })?;
    let mut out = Vec::with_capacity(12 + header.len() + 4 * stream.data.len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for v in stream.data.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

/// Read a `CADFEAT1` file. Any size disagreement with the header is an error;
/// no partial stream is returned.
pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureStream> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_feature_file(&bytes, path)
}

pub fn decode_feature_file(bytes: &[u8], path: &Path) -> Result<FeatureStream> {
    if bytes.len() < 12 || &bytes[..8] != FEATURE_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "CADFEAT1",
        });
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes
        .get(12..12 + hlen)
        .ok_or_else(|| Error::corrupt(path, "header truncated"))?;
    let header: FeatureHeader = serde_json::from_slice(body)?;
    let payload = &bytes[12 + hlen..];
    let expected = header
        .frames
        .checked_mul(header.dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::corrupt(path, "header sizes overflow"))?;
    if payload.len() != expected {
        return Err(Error::corrupt(
            path,
            format!(
                "payload has {} bytes, header declares {} x {} floats",
                payload.len(),
                header.frames,
                header.dim
            ),
        ));
    }
    let spec = FrameSpec::new(header.window_ms, header.hop_ms)?;
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let data =
        Array2::from_shape_vec((header.frames, header.dim), values).map_err(|e| Error::corrupt(path, e.to_string()))?;
    Ok(FeatureStream {
        name: header.name,
        spec,
        data,
        standardized: header.standardized,
    })
}

/// Load an externally computed embedding (for example a pretrained encoder's
/// 150 ms / 10 ms frames) so it can be fused like a native stream.
pub fn load_external_features(path: impl AsRef<Path>) -> Result<FeatureStream> {
    read_feature_file(path)
}
