//! Log mel-filterbank energies.
//!
//! Hann-windowed power spectrum (FFT size is the next power of two at or
//! above the window length), 40 triangular filters equally spaced on the HTK
//! mel scale from 0 Hz to Nyquist, natural log with a `1e-10` energy floor.

use std::sync::Arc;

use ndarray::Array2;
use rustfft::{num_complex::Complex, Fft, FftPlanner};

use super::frame::Frames;
use super::stream::FeatureStream;
use crate::exec::Execution;

pub const N_MELS: usize = 40;
pub const ENERGY_FLOOR: f64 = 1e-10;

const BLOCK_FRAMES: usize = 32;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Symmetric Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Triangular filterbank over `n_fft / 2 + 1` bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// Per filter: first bin index and weights from there on.
    filters: Vec<(usize, Vec<f64>)>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32) -> Self {
        let nyquist = sample_rate as f64 / 2.0;
        let max_mel = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(max_mel * i as f64 / (n_mels + 1) as f64))
            .collect();
        let n_bins = n_fft / 2 + 1;
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let mut filters = Vec::with_capacity(n_mels);
        for m in 0..n_mels {
            let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut first = None;
            let mut weights = Vec::new();
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let w = if f > lo && f <= c {
                    (f - lo) / (c - lo)
                } else if f > c && f < hi {
                    (hi - f) / (hi - c)
                } else {
                    0.0
                };
                if w > 0.0 {
                    first.get_or_insert(k);
                }
                if first.is_some() {
                    if w == 0.0 && f >= hi {
                        break;
                    }
                    weights.push(w);
                }
            }
            filters.push((first.unwrap_or(0), weights));
        }
        Self {
            filters,
            centers_hz: edges[1..=n_mels].to_vec(),
        }
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for ((start, w), o) in self.filters.iter().zip(out.iter_mut()) {
            *o = w.iter().zip(&power[*start..]).map(|(a, b)| a * b).sum();
        }
    }
}

struct MelScratch {
    frame: Vec<f64>,
    spectrum: Vec<Complex<f64>>,
    fft_scratch: Vec<Complex<f64>>,
    power: Vec<f64>,
}

/// Log mel features for every frame, computed with the default execution mode.
pub fn log_mel_features(frames: &Frames<'_>, n_mels: usize) -> FeatureStream {
    log_mel_features_with(frames, n_mels, Execution::default())
}

pub fn log_mel_features_with(frames: &Frames<'_>, n_mels: usize, exec: Execution) -> FeatureStream {
    let win_len = frames.window_len();
    let n_fft = win_len.next_power_of_two();
    let window = hann(win_len);
    let bank = MelFilterbank::new(n_mels, n_fft, frames.sample_rate());
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n_fft);
    let t_total = frames.len();
    let mut data = vec![0.0; t_total * n_mels];

    exec.for_each_chunk_mut(&mut data, BLOCK_FRAMES * n_mels, |block, out| {
        let mut sc = MelScratch {
            frame: vec![0.0; win_len],
            spectrum: vec![Complex::new(0.0, 0.0); n_fft],
            fft_scratch: vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()],
            power: vec![0.0; n_fft / 2 + 1],
        };
        for (i, row) in out.chunks_mut(n_mels).enumerate() {
            let t = block * BLOCK_FRAMES + i;
            frames.fill(t, &mut sc.frame);
            for (k, c) in sc.spectrum.iter_mut().enumerate() {
                *c = if k < win_len {
                    Complex::new(sc.frame[k] * window[k], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            fft.process_with_scratch(&mut sc.spectrum, &mut sc.fft_scratch);
            for (p, c) in sc.power.iter_mut().zip(&sc.spectrum) {
                *p = c.norm_sqr();
            }
            bank.apply(&sc.power, row);
            for v in row.iter_mut() {
                *v = (*v + ENERGY_FLOOR).ln();
            }
        }
    });

    let data = Array2::from_shape_vec((t_total, n_mels), data).expect("shape");
    FeatureStream::new("mel", frames.spec(), data)
}
