//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc kernel.

use super::wav::Waveform;
use crate::error::{Error, Result};

const KAISER_BETA: f64 = 8.0;
/// Kernel half-width, in zero crossings of the low-pass sinc.
const ZERO_CROSSINGS: f64 = 32.0;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Resample `w` to `target_rate`. Equal rates return the input unchanged.
pub fn resample(w: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(Error::InvalidArgument("target rate must be positive".into()));
    }
    if w.is_empty() {
        return Err(Error::EmptyInput("waveform"));
    }
    if w.sample_rate == target_rate {
        return Ok(w.clone());
    }
    let g = gcd(w.sample_rate as u64, target_rate as u64);
    let up = target_rate as u64 / g;
    let down = w.sample_rate as u64 / g;

    // Cutoff relative to the input Nyquist.
    let cutoff = (up as f64 / down as f64).min(1.0);
    let half_width = ZERO_CROSSINGS / cutoff;
    let reach = half_width.ceil() as i64;
    let i0_beta = bessel_i0(KAISER_BETA);
    let kernel = |tau: f64| -> f64 {
        let r = tau / half_width;
        if r.abs() > 1.0 {
            return 0.0;
        }
        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta;
        cutoff * sinc(cutoff * tau) * window
    };

    // One coefficient row per output phase.
    let taps = (2 * reach + 1) as usize;
    let phases: Vec<Vec<f64>> = (0..up)
        .map(|p| {
            let frac = p as f64 / up as f64;
            (-reach..=reach).map(|j| kernel(frac - j as f64)).collect()
        })
        .collect();

    let n_in = w.len() as u64;
    let n_out = (n_in * up).div_ceil(down) as usize;
    let x = &w.samples;
    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out as u64 {
        let pos = n * down;
        let base = (pos / up) as i64;
        let coeffs = &phases[(pos % up) as usize];
        let mut acc = 0.0;
        for (j, c) in coeffs.iter().enumerate().take(taps) {
            let k = base + j as i64 - reach;
            if k >= 0 && (k as u64) < n_in {
                acc += x[k as usize] * c;
            }
        }
        out.push(acc);
    }
    Waveform::new(out, target_rate)
}
