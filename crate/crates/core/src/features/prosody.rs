//! Frame-level pitch, loudness and voicing probability.
//!
//! Approximations of the usual prosodic toolkit outputs:
//! - f0: lag of the first strong peak of the normalized autocorrelation over
//!   the 50-500 Hz lag range, refined by parabolic interpolation; 0 when the
//!   frame is unvoiced.
//! - loudness: `ln(RMS + 1e-10)` (log-RMS, not a perceptual loudness model).
//! - voicing probability: the normalized autocorrelation value at that peak,
//!   clamped to [0, 1]. Frames under [`VOICING_THRESHOLD`] report f0 = 0.

use std::sync::Arc;

use ndarray::Array2;
use rustfft::{num_complex::Complex, Fft, FftPlanner};

use super::frame::Frames;
use super::stream::FeatureStream;
use crate::exec::Execution;

pub const F0_MIN_HZ: f64 = 50.0;
pub const F0_MAX_HZ: f64 = 500.0;
pub const VOICING_THRESHOLD: f64 = 0.3;
pub const LOUDNESS_FLOOR: f64 = 1e-10;
/// A peak within this fraction of the global maximum counts as "strong".
const PEAK_RATIO: f64 = 0.9;
const BLOCK_FRAMES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProsodyFrame {
    pub f0_hz: f64,
    pub loudness: f64,
    pub voicing: f64,
}

/// Lag bounds (inclusive) for the pitch search at `rate`.
pub fn lag_range(rate: u32, frame_len: usize) -> (usize, usize) {
    let lo = (rate as f64 / F0_MAX_HZ).floor() as usize;
    let hi = ((rate as f64 / F0_MIN_HZ).ceil() as usize).min(frame_len.saturating_sub(2));
    (lo.max(1), hi)
}

/// Normalized autocorrelation `r(lag)` for every lag in `lo..=hi`, given
/// the raw autocorrelation and the (mean-removed) frame.
fn normalized(raw: &[f64], frame: &[f64], lo: usize, hi: usize, out: &mut Vec<f64>) {
    let n = frame.len();
    // prefix[i] = sum of squares of frame[..i]
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for x in frame {
        acc += x * x;
        prefix.push(acc);
    }
    out.clear();
    for lag in lo..=hi {
        let head = prefix[n - lag];
        let tail = prefix[n] - prefix[lag];
        let denom = (head * tail).sqrt();
        out.push(if denom > 0.0 { raw[lag] / denom } else { 0.0 });
    }
}

/// Pick the pitch peak from normalized autocorrelation values indexed from
/// lag `lo`. Returns `(fractional lag, peak value)`.
fn pick_peak(r: &[f64], lo: usize) -> Option<(f64, f64)> {
    let (gi, gmax) = r
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    if !(gmax > 0.0) {
        return None;
    }
    let idx = (1..r.len().saturating_sub(1))
        .find(|&i| r[i] >= PEAK_RATIO * gmax && r[i] >= r[i - 1] && r[i] >= r[i + 1])
        .unwrap_or(gi);
    let mut lag = (lo + idx) as f64;
    if idx > 0 && idx + 1 < r.len() {
        let (a, b, c) = (r[idx - 1], r[idx], r[idx + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            lag += (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        }
    }
    Some((lag, r[idx]))
}

struct Scratch {
    frame: Vec<f64>,
    spectrum: Vec<Complex<f64>>,
    fft_scratch: Vec<Complex<f64>>,
    raw: Vec<f64>,
    norm: Vec<f64>,
}

fn analyse(
    frame: &mut [f64],
    rate: u32,
    sc: &mut Scratch,
    fwd: &Arc<dyn Fft<f64>>,
    inv: &Arc<dyn Fft<f64>>,
) -> ProsodyFrame {
    let n = frame.len();
    let rms = (frame.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let loudness = (rms + LOUDNESS_FLOOR).ln();
    let mean = frame.iter().sum::<f64>() / n as f64;
    frame.iter_mut().for_each(|x| *x -= mean);
    let (lo, hi) = lag_range(rate, n);
    if hi < lo || frame.iter().all(|&x| x == 0.0) {
        return ProsodyFrame {
            f0_hz: 0.0,
            loudness,
            voicing: 0.0,
        };
    }

    let n_fft = sc.spectrum.len();
    for (k, c) in sc.spectrum.iter_mut().enumerate() {
        *c = Complex::new(if k < n { frame[k] } else { 0.0 }, 0.0);
    }
    fwd.process_with_scratch(&mut sc.spectrum, &mut sc.fft_scratch);
    for c in sc.spectrum.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    inv.process_with_scratch(&mut sc.spectrum, &mut sc.fft_scratch);
    sc.raw.clear();
    sc.raw.extend(sc.spectrum[..n].iter().map(|c| c.re / n_fft as f64));

    normalized(&sc.raw, frame, lo, hi, &mut sc.norm);
    match pick_peak(&sc.norm, lo) {
        Some((lag, value)) => {
            let voicing = value.clamp(0.0, 1.0);
            let f0_hz = if voicing >= VOICING_THRESHOLD {
                rate as f64 / lag
            } else {
                0.0
            };
            ProsodyFrame {
                f0_hz,
                loudness,
                voicing,
            }
        }
        None => ProsodyFrame {
            f0_hz: 0.0,
            loudness,
            voicing: 0.0,
        },
    }
}

/// Prosodic features `[f0, loudness, voicing]` per frame.
pub fn prosody_features(frames: &Frames<'_>) -> FeatureStream {
    prosody_features_with(frames, Execution::default())
}

pub fn prosody_features_with(frames: &Frames<'_>, exec: Execution) -> FeatureStream {
    let n = frames.window_len();
    let rate = frames.sample_rate();
    let n_fft = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n_fft);
    let inv = planner.plan_fft_inverse(n_fft);
    let t_total = frames.len();
    let mut data = vec![0.0; t_total * 3];
    exec.for_each_chunk_mut(&mut data, BLOCK_FRAMES * 3, |block, out| {
        let mut sc = Scratch {
            frame: vec![0.0; n],
            spectrum: vec![Complex::new(0.0, 0.0); n_fft],
            fft_scratch: vec![Complex::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())],
            raw: Vec::with_capacity(n),
            norm: Vec::new(),
        };
        for (i, row) in out.chunks_mut(3).enumerate() {
            frames.fill(block * BLOCK_FRAMES + i, &mut sc.frame);
            let mut frame = std::mem::take(&mut sc.frame);
            let p = analyse(&mut frame, rate, &mut sc, &fwd, &inv);
            sc.frame = frame;
            row.copy_from_slice(&[p.f0_hz, p.loudness, p.voicing]);
        }
    });
    let data = Array2::from_shape_vec((t_total, 3), data).expect("shape");
    FeatureStream::new("prosody", frames.spec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::frame::{frame_signal, FrameSpec};
    use crate::features::wav::Waveform;
    use rand::{Rng, SeedableRng};

    fn sine(freq: f64, amp: f64, n: usize) -> Waveform {
        Waveform::new(
            (0..n)
                .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 16_000.0).sin())
                .collect(),
            16_000,
        )
        .unwrap()
    }

    /// Brute-force normalized autocorrelation pitch on one frame.
    fn oracle_f0(frame: &[f64]) -> (f64, f64) {
        let n = frame.len();
        let mean = frame.iter().sum::<f64>() / n as f64;
        let x: Vec<f64> = frame.iter().map(|v| v - mean).collect();
        let r = |lag: usize| {
            let num: f64 = (0..n - lag).map(|i| x[i] * x[i + lag]).sum();
            let a: f64 = x[..n - lag].iter().map(|v| v * v).sum();
            let b: f64 = x[lag..].iter().map(|v| v * v).sum();
            num / (a * b).sqrt()
        };
        let vals: Vec<(usize, f64)> = (32..=320).map(|l| (l, r(l))).collect();
        let best = vals
            .iter()
            .cloned()
            .fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
        let first = vals
            .windows(3)
            .find(|w| w[1].1 >= 0.9 * best.1 && w[1].1 >= w[0].1 && w[1].1 >= w[2].1)
            .map(|w| w[1])
            .unwrap_or(best);
        (16_000.0 / first.0 as f64, first.1)
    }

    #[test]
    fn sine_220_matches_oracle() {
        let w = sine(220.0, 0.5, 16_000);
        let frames = frame_signal(&w, FrameSpec::PROSODY).unwrap();
        let s = prosody_features(&frames);
        for t in [10usize, 50, 90] {
            let (f0, v) = oracle_f0(&frames.frame(t));
            let row = s.data.row(t);
            assert!((row[0] - 220.0).abs() <= 5.0, "f0 {}", row[0]);
            assert!((row[0] - f0).abs() <= 3.1, "oracle {f0} vs {}", row[0]);
            assert!(row[2] >= 0.9);
            assert!((row[2] - v).abs() < 0.02);
        }
    }

    #[test]
    fn silence_convention() {
        let w = Waveform::new(vec![0.0; 4000], 16_000).unwrap();
        let s = prosody_features(&frame_signal(&w, FrameSpec::PROSODY).unwrap());
        for row in s.data.rows() {
            assert_eq!(row.to_vec(), vec![0.0, LOUDNESS_FLOOR.ln(), 0.0]);
        }
    }

    #[test]
    fn white_noise_is_mostly_unvoiced() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let w = Waveform::new((0..16_000).map(|_| rng.random_range(-0.5..0.5)).collect(), 16_000).unwrap();
        let s = prosody_features(&frame_signal(&w, FrameSpec::PROSODY).unwrap());
        let mean_voicing = s.data.column(2).mean().unwrap();
        assert!(mean_voicing <= 0.3, "mean voicing {mean_voicing}");
    }

    #[test]
    fn pitch_accuracy_across_speech_range() {
        for f in [80.0, 110.0, 150.0, 199.0, 260.0, 333.0, 400.0] {
            let w = sine(f, 0.5, 8000);
            let s = prosody_features(&frame_signal(&w, FrameSpec::PROSODY).unwrap());
            let mut f0: Vec<f64> = s.data.column(0).to_vec();
            f0.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = f0[f0.len() / 2];
            assert!((median - f).abs() / f <= 0.02, "{f}: {median}");
        }
    }

    #[test]
    fn loudness_tracks_rms() {
        let w = sine(200.0, 0.5, 8000);
        let s = prosody_features(&frame_signal(&w, FrameSpec::PROSODY).unwrap());
        let expected = (0.5 / 2f64.sqrt()).ln();
        assert!((s.data[[20, 1]] - expected).abs() < 1e-2);
    }
}
