use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Split;
use crate::training::stream_key;

pub const DEFAULT_RATIOS: [f64; 3] = [0.68, 0.16, 0.16];

/// One recorded (or generated) session.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session: String,
    pub instructor: usize,
    /// Relative to the manifest's directory unless absolute.
    pub wav: PathBuf,
    pub annotations: PathBuf,
    /// Random stream the session was generated from, if synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub withheld_instructors: Vec<usize>,
    pub ratios: [f64; 3],
    pub train: Vec<SessionRecord>,
    pub dev: Vec<SessionRecord>,
    pub test1: Vec<SessionRecord>,
    pub test2: Vec<SessionRecord>,
}

impl SplitManifest {
    pub fn get(&self, split: Split) -> &[SessionRecord] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test1 => &self.test1,
            Split::Test2 => &self.test2,
        }
    }

    pub fn all(&self) -> impl Iterator<Item = (Split, &SessionRecord)> {
        Split::ALL
            .into_iter()
            .flat_map(move |s| self.get(s).iter().map(move |r| (s, r)))
    }

    /// Check the partition and instructor-disjointness invariants.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (_, r) in self.all() {
            if !seen.insert(&r.session) {
                return Err(Error::InvalidArgument(format!(
                    "session {} appears in two splits",
                    r.session
                )));
            }
        }
        let withheld: BTreeSet<usize> = self.test2.iter().map(|r| r.instructor).collect();
        for split in [Split::Train, Split::Dev, Split::Test1] {
            if let Some(r) = self.get(split).iter().find(|r| withheld.contains(&r.instructor)) {
                return Err(Error::InvalidArgument(format!(
                    "test2 instructor {} also appears in {}",
                    r.instructor,
                    split.as_str()
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::metrics::write_json(path, self)
    }
}

/// Resolve a manifest path against the manifest's directory.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Withhold `n_withheld` instructors for test2; partition the remaining
/// sessions by count into train/dev/test1 according to `ratios`.
pub fn make_instructor_split(
    sessions: &[SessionRecord],
    n_withheld: usize,
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitManifest> {
    let instructors: Vec<usize> = sessions
        .iter()
        .map(|s| s.instructor)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if n_withheld == 0 || n_withheld >= instructors.len() {
        return Err(Error::InsufficientInstructors {
            available: instructors.len(),
            required: n_withheld.max(1) + 1,
        });
    }
    if ratios.iter().any(|r| !(*r >= 0.0)) || ratios.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidArgument(format!("invalid split ratios {ratios:?}")));
    }
    let mut order = instructors.clone();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_key(seed, 1, 0)));
    let mut withheld = order[..n_withheld].to_vec();
    withheld.sort_unstable();

    let mut test2: Vec<SessionRecord> = Vec::new();
    let mut rest: Vec<SessionRecord> = Vec::new();
    let mut sorted = sessions.to_vec();
    sorted.sort();
    for s in sorted {
        if withheld.contains(&s.instructor) {
            test2.push(s);
        } else {
            rest.push(s);
        }
    }
    rest.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_key(seed, 2, 0)));
    let n = rest.len();
    let total: f64 = ratios.iter().sum();
    let mut n_train = (ratios[0] / total * n as f64).round() as usize;
    let mut n_dev = (ratios[1] / total * n as f64).round() as usize;
    if n >= 3 {
        n_train = n_train.clamp(1, n - 2);
        n_dev = n_dev.clamp(1, n - 1 - n_train);
    } else {
        n_train = n_train.min(n);
        n_dev = n_dev.min(n - n_train);
    }
    let mut test1 = rest.split_off(n_train + n_dev);
    let mut dev = rest.split_off(n_train);
    let mut train = rest;
    for v in [&mut train, &mut dev, &mut test1] {
        v.sort();
    }
    let m = SplitManifest {
        seed,
        withheld_instructors: withheld,
        ratios,
        train,
        dev,
        test1,
        test2,
    };
    m.validate()?;
    Ok(m)
}
