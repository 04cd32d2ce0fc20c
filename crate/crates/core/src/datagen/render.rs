//! Source-filter rendering of activity signatures.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Vowel-like formant sets used for group-work babble voices.
const BABBLE_FORMANTS: [[f64; 3]; 5] = [
    [700.0, 1220.0, 2600.0],
    [300.0, 870.0, 2240.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [440.0, 1020.0, 2240.0],
];
const FORMANT_BANDWIDTHS: [f64; 3] = [90.0, 110.0, 170.0];
pub const STUDENT_PITCH_HZ: (f64, f64) = (200.0, 280.0);
const EDGE_RAMP_S: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Instructor,
    Student,
}

/// How one activity sounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Signature {
    /// A single harmonic voice shaped by three formants.
    Voice {
        speaker: Speaker,
        formants_hz: [f64; 3],
        /// Pitch glides upward within each phrase.
        rising: bool,
        level: f64,
    },
    /// Several overlapping voices plus babble noise.
    Group {
        voices: usize,
        babble_level: f64,
        level: f64,
    },
    /// Band-limited noise.
    Noise {
        center_hz: f64,
        bandwidth_hz: f64,
        level: f64,
    },
    /// Room noise only.
    Silence { level: f64 },
}

/// Per-instructor variation: voice pitch, vocal-tract scale, gain and room noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstructorProfile {
    pub base_pitch_hz: f64,
    pub formant_scale: f64,
    pub gain: f64,
    pub noise_floor: f64,
}

impl InstructorProfile {
    pub fn sample(rng: &mut impl Rng) -> Self {
        Self {
            base_pitch_hz: rng.random_range(100.0..160.0),
            formant_scale: rng.random_range(0.96..1.04),
            gain: rng.random_range(0.8..1.25),
            noise_floor: rng.random_range(0.0005..0.002),
        }
    }
}

/// Two-pole resonator with unit gain at its centre frequency (approximately).
struct Resonator {
    a1: f64,
    a2: f64,
    b0: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bw: f64, rate: f64) -> Self {
        let r = (-std::f64::consts::PI * bw / rate).exp();
        let theta = 2.0 * std::f64::consts::PI * freq.min(0.45 * rate) / rate;
        Self {
            a1: 2.0 * r * theta.cos(),
            a2: -r * r,
            b0: (1.0 - r) * (1.0 + r * r - 2.0 * r * (2.0 * theta).cos()).sqrt(),
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn normalize_rms(buf: &mut [f64], level: f64) {
    let rms = (buf.iter().map(|v| v * v).sum::<f64>() / buf.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        let g = level / rms;
        buf.iter_mut().for_each(|v| *v *= g);
    }
}

/// Pulse-train voice through a formant cascade with syllabic amplitude
/// modulation. `pitch(t)` gives f0 in Hz at time `t` seconds.
fn voice(n: usize, rate: f64, formants: [f64; 3], pitch: impl Fn(f64) -> f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut res: Vec<Resonator> = formants
        .iter()
        .zip(FORMANT_BANDWIDTHS)
        .map(|(&f, bw)| Resonator::new(f, bw, rate))
        .collect();
    let syl_rate = rng.random_range(3.0..5.0);
    let syl_phase = rng.random_range(0.0..1.0);
    let mut phase = rng.random_range(0.0..1.0);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / rate;
        phase += pitch(t) / rate;
        let mut x = 0.03 * {
            let z: f64 = StandardNormal.sample(rng);
            z
        };
        if phase >= 1.0 {
            phase -= 1.0;
            x += 1.0;
        }
        let mut y = x;
        for r in &mut res {
            y = r.step(y);
        }
        let s = (std::f64::consts::PI * (syl_rate * t + syl_phase)).sin();
        out.push(y * (0.25 + 0.75 * s * s));
    }
    out
}

fn noise_band(n: usize, rate: f64, center: f64, bw: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut r = Resonator::new(center, bw, rate);
    (0..n).map(|_| r.step(StandardNormal.sample(rng))).collect()
}

/// Pitch contour with slow wobble; `rising` adds a per-phrase upward glide.
fn contour(base: f64, rising: bool, rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let wobble_hz = rng.random_range(0.2..0.5);
    let wobble_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let phrase = rng.random_range(1.2..1.8);
    move |t: f64| {
        let w = 1.0 + 0.04 * (std::f64::consts::TAU * wobble_hz * t + wobble_phase).sin();
        let glide = if rising { 1.0 + 0.35 * (t / phrase).fract() } else { 1.0 };
        base * w * glide
    }
}

/// Render `n` samples of `sig` for an instructor, without room noise.
pub fn render_signature(
    sig: &Signature,
    profile: &InstructorProfile,
    n: usize,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut buf = match sig {
        Signature::Voice {
            speaker,
            formants_hz,
            rising,
            level,
        } => {
            let (base, scale) = match speaker {
                Speaker::Instructor => (profile.base_pitch_hz, profile.formant_scale),
                Speaker::Student => (
                    rng.random_range(STUDENT_PITCH_HZ.0..STUDENT_PITCH_HZ.1),
                    rng.random_range(0.97..1.03),
                ),
            };
            let f = formants_hz.map(|v| v * scale);
            let pitch = contour(base, *rising, rng);
            let mut v = voice(n, rate, f, pitch, rng);
            normalize_rms(&mut v, *level);
            v
        }
        Signature::Group {
            voices,
            babble_level,
            level,
        } => {
            let mut mix = vec![0.0; n];
            for _ in 0..*voices {
                let base = rng.random_range(110.0..280.0);
                let f = BABBLE_FORMANTS[rng.random_range(0..BABBLE_FORMANTS.len())];
                let pitch = contour(base, false, rng);
                let mut v = voice(n, rate, f, pitch, rng);
                normalize_rms(&mut v, 1.0);
                mix.iter_mut().zip(&v).for_each(|(m, x)| *m += x);
            }
            normalize_rms(&mut mix, *level);
            let mut babble = noise_band(n, rate, 600.0, 900.0, rng);
            normalize_rms(&mut babble, *babble_level);
            mix.iter_mut().zip(&babble).for_each(|(m, x)| *m += x);
            mix
        }
        Signature::Noise {
            center_hz,
            bandwidth_hz,
            level,
        } => {
            let mut v = noise_band(n, rate, *center_hz, *bandwidth_hz, rng);
            let mod_hz = rng.random_range(0.3..0.8);
            for (i, x) in v.iter_mut().enumerate() {
                let t = i as f64 / rate;
                *x *= 0.6 + 0.4 * (std::f64::consts::TAU * mod_hz * t).sin();
            }
            normalize_rms(&mut v, *level);
            v
        }
        Signature::Silence { level } => {
            let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            normalize_rms(&mut v, *level);
            v
        }
    };
    buf.iter_mut().for_each(|v| *v *= profile.gain);
    let ramp = ((EDGE_RAMP_S * rate) as usize).min(n / 2);
    for i in 0..ramp {
        let g = i as f64 / ramp as f64;
        buf[i] *= g;
        buf[n - 1 - i] *= g;
    }
    buf
}
