use serde::{Deserialize, Serialize};

use super::wav::Waveform;
use crate::error::{Error, Result};

/// Framing geometry. Frame `t` is centered on sample `round(t * hop)`,
/// with reflect padding past either edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub window_ms: f64,
    pub hop_ms: f64,
}

impl FrameSpec {
    pub const MEL: FrameSpec = FrameSpec {
        window_ms: 500.0,
        hop_ms: 10.0,
    };
    pub const PROSODY: FrameSpec = FrameSpec {
        window_ms: 50.0,
        hop_ms: 10.0,
    };

    pub fn new(window_ms: f64, hop_ms: f64) -> Result<Self> {
        if !(hop_ms > 0.0 && window_ms >= hop_ms && window_ms.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "frame spec needs 0 < hop <= window (window {window_ms} ms, hop {hop_ms} ms)"
            )));
        }
        Ok(Self { window_ms, hop_ms })
    }

    pub fn window_samples(&self, rate: u32) -> usize {
        (self.window_ms * rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, rate: u32) -> usize {
        ((self.hop_ms * rate as f64 / 1000.0).round() as usize).max(1)
    }

    /// Number of frames for a signal of `n` samples.
    pub fn frame_count(&self, n: usize, rate: u32) -> usize {
        n / self.hop_samples(rate)
    }
}

/// Map an out-of-range index into `0..n` by mirror reflection about the
/// end samples (edge sample not repeated).
pub(crate) fn reflect_index(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let m = i.rem_euclid(period);
    if m < n as i64 {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Lazily materialised analysis frames over a waveform.
#[derive(Debug, Clone)]
pub struct Frames<'a> {
    wave: &'a Waveform,
    spec: FrameSpec,
    window: usize,
    count: usize,
}

/// Split `w` into centered, reflect-padded frames under `spec`.
pub fn frame_signal(w: &Waveform, spec: FrameSpec) -> Result<Frames<'_>> {
    if w.is_empty() {
        return Err(Error::EmptyInput("waveform"));
    }
    let window = spec.window_samples(w.sample_rate).max(1);
    if window > 10 * w.len() {
        return Err(Error::DegenerateWindow {
            window,
            signal: w.len(),
        });
    }
    Ok(Frames {
        wave: w,
        spec,
        window,
        count: spec.frame_count(w.len(), w.sample_rate),
    })
}

impl<'a> Frames<'a> {
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn window_len(&self) -> usize {
        self.window
    }

    pub fn spec(&self) -> FrameSpec {
        self.spec
    }

    pub fn sample_rate(&self) -> u32 {
        self.wave.sample_rate
    }

    /// Center sample of frame `t`.
    pub fn center(&self, t: usize) -> i64 {
        (t as f64 * self.spec.hop_ms * self.wave.sample_rate as f64 / 1000.0).round() as i64
    }

    /// Copy frame `t` into `buf` (length must equal the window length).
    pub fn fill(&self, t: usize, buf: &mut [f64]) {
        debug_assert_eq!(buf.len(), self.window);
        let n = self.wave.len();
        let start = self.center(t) - (self.window / 2) as i64;
        let samples = &self.wave.samples;
        if start >= 0 && (start as usize + self.window) <= n {
            buf.copy_from_slice(&samples[start as usize..start as usize + self.window]);
        } else {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = samples[reflect_index(start + k as i64, n)];
            }
        }
    }

    pub fn frame(&self, t: usize) -> Vec<f64> {
        let mut buf = vec![0.0; self.window];
        self.fill(t, &mut buf);
        buf
    }
}
