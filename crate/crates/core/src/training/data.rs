use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Features and frame labels of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionData {
    pub id: String,
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
}

impl SessionData {
    pub fn new(id: impl Into<String>, features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                actual: labels.len(),
                context: "feature frames vs label frames",
            });
        }
        Ok(Self {
            id: id.into(),
            features,
            labels,
        })
    }

    pub fn frames(&self) -> usize {
        self.labels.len()
    }
}

/// A contiguous training sequence cut from a session.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub session: String,
    pub offset: usize,
}

/// Cut every session into consecutive non-overlapping chunks; a shorter
/// final chunk keeps the remainder.
pub fn chunk_sessions(sessions: &[SessionData], chunk_len: usize) -> Result<Vec<Chunk>> {
    if chunk_len == 0 {
        return Err(Error::InvalidArgument("chunk_len must be positive".into()));
    }
    let mut out = Vec::new();
    for sess in sessions {
        if sess.frames() == 0 {
            return Err(Error::EmptyInput("session with no frames"));
        }
        if sess.features.nrows() != sess.labels.len() {
            return Err(Error::DimensionMismatch {
                expected: sess.features.nrows(),
                actual: sess.labels.len(),
                context: "feature frames vs label frames",
            });
        }
        let mut offset = 0;
        while offset < sess.frames() {
            let end = (offset + chunk_len).min(sess.frames());
            out.push(Chunk {
                features: sess.features.slice(s![offset..end, ..]).to_owned(),
                labels: sess.labels[offset..end].to_vec(),
                session: sess.id.clone(),
                offset,
            });
            offset = end;
        }
    }
    Ok(out)
}

/// Stable 64-bit key for per-(seed, epoch, item) random streams.
pub fn stream_key(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a combined word
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Minibatches of chunk indices for one epoch: a seeded shuffle, then
/// consecutive groups of `batch_size` (the last may be smaller).
pub fn epoch_batches(n_chunks: usize, batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 || batch_size > n_chunks {
        return Err(Error::InvalidArgument(format!(
            "batch size {batch_size} must lie in [1, {n_chunks}]"
        )));
    }
    let mut order: Vec<usize> = (0..n_chunks).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(stream_key(seed, epoch as u64, u64::MAX));
    order.shuffle(&mut rng);
    Ok(order.chunks(batch_size).map(|c| c.to_vec()).collect())
}

/// The `step`-th minibatch of an epoch.
pub fn sample_minibatch(
    chunks: &[Chunk],
    batch_size: usize,
    seed: u64,
    epoch: usize,
    step: usize,
) -> Result<Vec<&Chunk>> {
    let batches = epoch_batches(chunks.len(), batch_size, seed, epoch)?;
    let batch = batches
        .get(step)
        .ok_or_else(|| Error::InvalidArgument(format!("epoch has only {} steps", batches.len())))?;
    Ok(batch.iter().map(|&i| &chunks[i]).collect())
}
