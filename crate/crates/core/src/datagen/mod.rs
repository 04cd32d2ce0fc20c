//! Deterministic synthetic classroom sessions: a label timeline drawn from
//! corpus-calibrated activity statistics, rendered with an abstract acoustic
//! signature per activity.

pub mod render;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

pub use render::{render_signature, InstructorProfile, Signature, Speaker};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{write_wav, Waveform};
use crate::io::split::{make_instructor_split, SessionRecord, SplitManifest, DEFAULT_RATIOS};
use crate::labels::{write_annotations, ActivityLabel, AnnotationInterval};
use crate::training::stream_key;

/// Corpus statistics per activity, in [`ActivityLabel::ALL`] order:
/// number of annotated segments and total minutes.
pub const CORPUS_OCCURRENCES: [u64; 9] = [325, 673, 1202, 1581, 766, 960, 184, 118, 126];
pub const CORPUS_MINUTES: [f64; 9] = [230.09, 1427.59, 187.22, 656.72, 92.47, 89.32, 584.09, 115.58, 188.16];

/// Long-run share of time per activity implied by the corpus statistics.
pub fn target_time_shares() -> [f64; 9] {
    let total: f64 = CORPUS_MINUTES.iter().sum();
    CORPUS_MINUTES.map(|m| m / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationDist {
    /// Arithmetic mean segment length.
    pub mean_s: f64,
    /// Standard deviation of the log duration.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_instructors: usize,
    pub n_withheld: usize,
    pub sessions_per_instructor: usize,
    pub session_minutes: f64,
    pub sample_rate: u32,
    /// Row-stochastic 9 x 9 activity transition matrix.
    pub transitions: Vec<Vec<f64>>,
    pub durations: Vec<DurationDist>,
    pub signatures: Vec<Signature>,
    #[serde(default = "default_ratios")]
    pub split_ratios: [f64; 3],
}

fn default_ratios() -> [f64; 3] {
    DEFAULT_RATIOS
}

impl Default for SynthConfig {
    fn default() -> Self {
        let occ_total: u64 = CORPUS_OCCURRENCES.iter().sum();
        let row: Vec<f64> = CORPUS_OCCURRENCES
            .iter()
            .map(|&o| o as f64 / occ_total as f64)
            .collect();
        Self {
            seed: 0,
            n_instructors: 9,
            n_withheld: 3,
            sessions_per_instructor: 4,
            session_minutes: 5.0,
            sample_rate: 16_000,
            transitions: vec![row; 9],
            durations: (0..9)
                .map(|i| DurationDist {
                    mean_s: CORPUS_MINUTES[i] * 60.0 / CORPUS_OCCURRENCES[i] as f64,
                    sigma: 0.5,
                })
                .collect(),
            signatures: default_signatures(),
            split_ratios: DEFAULT_RATIOS,
        }
    }
}

/// One signature per activity, in [`ActivityLabel::ALL`] order.
pub fn default_signatures() -> Vec<Signature> {
    let inst = |f: [f64; 3], rising: bool, level: f64| Signature::Voice {
        speaker: Speaker::Instructor,
        formants_hz: f,
        rising,
        level,
    };
    let stu = |f: [f64; 3]| Signature::Voice {
        speaker: Speaker::Student,
        formants_hz: f,
        rising: false,
        level: 0.05,
    };
    vec![
        inst([850.0, 1250.0, 2900.0], false, 0.16),
        inst([500.0, 1500.0, 2500.0], false, 0.1),
        inst([300.0, 2300.0, 3100.0], true, 0.1),
        inst([650.0, 1000.0, 2200.0], false, 0.1),
        stu([380.0, 1900.0, 3400.0]),
        stu([780.0, 1650.0, 2650.0]),
        Signature::Group {
            voices: 4,
            babble_level: 0.03,
            level: 0.08,
        },
        Signature::Silence { level: 0.0005 },
        Signature::Noise {
            center_hz: 3500.0,
            bandwidth_hz: 2500.0,
            level: 0.05,
        },
    ]
}

impl SynthConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("synth config: {m}")));
        if self.transitions.len() != 9 || self.durations.len() != 9 || self.signatures.len() != 9 {
            return bad("transitions, durations and signatures need one entry per activity".into());
        }
        for (i, row) in self.transitions.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.len() != 9 || row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return bad(format!("transition row {i} is not a distribution"));
            }
        }
        if self.durations.iter().any(|d| !(d.mean_s > 0.0) || !(d.sigma >= 0.0)) {
            return bad("durations must have positive means".into());
        }
        for i in 0..9 {
            for j in i + 1..9 {
                if self.signatures[i] == self.signatures[j] {
                    return bad(format!("activities {i} and {j} share a signature"));
                }
            }
        }
        if !(self.session_minutes > 0.0) || self.sessions_per_instructor == 0 || self.sample_rate == 0 {
            return bad("session length, count and sample rate must be positive".into());
        }
        Ok(())
    }

    pub fn session_samples(&self) -> usize {
        (self.session_minutes * 60.0 * self.sample_rate as f64).round() as usize
    }
}

pub fn session_id(instructor: usize, session: usize) -> String {
    format!("inst{instructor:02}_sess{session:02}")
}

fn draw(row: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Stationary distribution of the transition matrix (power iteration).
fn stationary(t: &[Vec<f64>]) -> Vec<f64> {
    let mut pi = vec![1.0 / 9.0; 9];
    for _ in 0..500 {
        let mut next = vec![0.0; 9];
        for (i, row) in t.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                next[j] += pi[i] * p;
            }
        }
        pi = next;
    }
    pi
}

/// Label timeline of one session: a Markov walk with log-normal segment
/// durations. Repeated labels merge into one interval, and the intervals
/// tile `[0, duration]` with the last one truncated.
pub fn sample_timeline(cfg: &SynthConfig, instructor: usize, session: usize) -> Vec<AnnotationInterval> {
    let duration = cfg.session_samples() as f64 / cfg.sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_key(cfg.seed, instructor as u64, (session as u64) << 1));
    let dists: Vec<LogNormal<f64>> = cfg
        .durations
        .iter()
        .map(|d| LogNormal::new(d.mean_s.ln() - d.sigma * d.sigma / 2.0, d.sigma).expect("valid log-normal"))
        .collect();
    let mut out: Vec<AnnotationInterval> = Vec::new();
    let mut state = draw(&stationary(&cfg.transitions), &mut rng);
    let mut t = 0.0;
    while t < duration {
        let end = (t + dists[state].sample(&mut rng)).min(duration);
        let label = ActivityLabel::ALL[state];
        match out.last_mut() {
            Some(last) if last.label == label => last.end_s = end,
            _ => out.push(AnnotationInterval {
                start_s: t,
                end_s: end,
                label,
            }),
        }
        t = end;
        state = draw(&cfg.transitions[state], &mut rng);
    }
    out
}

pub fn instructor_profile(cfg: &SynthConfig, instructor: usize) -> InstructorProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_key(cfg.seed, instructor as u64, u64::MAX));
    InstructorProfile::sample(&mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSession {
    pub id: String,
    pub instructor: usize,
    pub session: usize,
    pub waveform: Waveform,
    pub intervals: Vec<AnnotationInterval>,
    /// Key of the rendering random stream.
    pub seed: u64,
}

/// Render one session; fully determined by `(cfg.seed, instructor, session)`.
pub fn generate_session(cfg: &SynthConfig, instructor: usize, session: usize) -> Result<SynthSession> {
    let intervals = sample_timeline(cfg, instructor, session);
    let profile = instructor_profile(cfg, instructor);
    let key = stream_key(cfg.seed, instructor as u64, ((session as u64) << 1) | 1);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let rate = cfg.sample_rate as f64;
    let n = cfg.session_samples();
    let mut samples: Vec<f64> = (0..n)
        .map(|_| profile.noise_floor * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    for iv in &intervals {
        let a = ((iv.start_s * rate).round() as usize).min(n);
        let b = ((iv.end_s * rate).round() as usize).min(n);
        if b <= a {
            continue;
        }
        let seg = render_signature(&cfg.signatures[iv.label.index()], &profile, b - a, rate, &mut rng);
        samples[a..b].iter_mut().zip(seg).for_each(|(s, v)| *s += v);
    }
    for s in &mut samples {
        *s = s.clamp(-1.0, 1.0);
    }
    Ok(SynthSession {
        id: session_id(instructor, session),
        instructor,
        session,
        waveform: Waveform::new(samples, cfg.sample_rate)?,
        intervals,
        seed: key,
    })
}

/// Every `(instructor, session)` pair of the config, in order.
pub fn session_keys(cfg: &SynthConfig) -> Vec<(usize, usize)> {
    (0..cfg.n_instructors)
        .flat_map(|i| (0..cfg.sessions_per_instructor).map(move |s| (i, s)))
        .collect()
}

/// Instructor split for the configured corpus without rendering audio.
pub fn corpus_split(cfg: &SynthConfig) -> Result<SplitManifest> {
    cfg.validate()?;
    if cfg.n_instructors < 4 {
        return Err(Error::InsufficientInstructors {
            available: cfg.n_instructors,
            required: 4,
        });
    }
    let records: Vec<SessionRecord> = session_keys(cfg)
        .into_iter()
        .map(|(i, s)| {
            let id = session_id(i, s);
            SessionRecord {
                wav: PathBuf::from(format!("{id}.wav")),
                annotations: PathBuf::from(format!("{id}.csv")),
                session: id,
                instructor: i,
                seed: Some(stream_key(cfg.seed, i as u64, ((s as u64) << 1) | 1)),
            }
        })
        .collect();
    make_instructor_split(&records, cfg.n_withheld, cfg.split_ratios, cfg.seed)
}

/// Write every session's WAV and annotation CSV plus `manifest.json` and
/// the generating config into `dir`. Sessions render in parallel.
pub fn generate_corpus(cfg: &SynthConfig, dir: impl AsRef<Path>, exec: Execution) -> Result<SplitManifest> {
    let dir = dir.as_ref();
    let manifest = corpus_split(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let keys = session_keys(cfg);
    exec.try_map(keys.len(), |k| {
        let (i, s) = keys[k];
        let sess = generate_session(cfg, i, s)?;
        write_wav(dir.join(format!("{}.wav", sess.id)), &sess.waveform)?;
        write_annotations(dir.join(format!("{}.csv", sess.id)), &sess.intervals)
    })?;
    manifest.save(dir.join("manifest.json"))?;
    crate::metrics::write_json(dir.join("synth_config.json"), cfg)?;
    Ok(manifest)
}
