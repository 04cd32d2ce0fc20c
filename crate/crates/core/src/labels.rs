//! Activity label inventory, coarse label schemes and frame labelling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The nine fine-grained classroom activities, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActivityLabel {
    /// instructor announcement
    A,
    /// instructor lecture
    L,
    /// instructor asks question
    Iq,
    /// instructor answers question
    Ia,
    /// student asks question
    Sq,
    /// student answers question
    Sa,
    /// group work
    G,
    /// silence
    S,
    /// other
    O,
}

impl ActivityLabel {
    pub const ALL: [ActivityLabel; 9] = [
        ActivityLabel::A,
        ActivityLabel::L,
        ActivityLabel::Iq,
        ActivityLabel::Ia,
        ActivityLabel::Sq,
        ActivityLabel::Sa,
        ActivityLabel::G,
        ActivityLabel::S,
        ActivityLabel::O,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ActivityLabel::A => "a",
            ActivityLabel::L => "l",
            ActivityLabel::Iq => "iq",
            ActivityLabel::Ia => "ia",
            ActivityLabel::Sq => "sq",
            ActivityLabel::Sa => "sa",
            ActivityLabel::G => "g",
            ActivityLabel::S => "s",
            ActivityLabel::O => "o",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl std::str::FromStr for ActivityLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ActivityLabel::ALL
            .into_iter()
            .find(|l| l.code() == s.trim())
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

impl std::fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// Label granularity: 4-, 5- or 9-way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum LabelScheme {
    Four,
    Five,
    Nine,
}

impl TryFrom<usize> for LabelScheme {
    type Error = Error;
    fn try_from(arity: usize) -> Result<Self> {
        match arity {
            4 => Ok(LabelScheme::Four),
            5 => Ok(LabelScheme::Five),
            9 => Ok(LabelScheme::Nine),
            n => Err(Error::InvalidArgument(format!("no {n}-way label scheme"))),
        }
    }
}

impl From<LabelScheme> for usize {
    fn from(s: LabelScheme) -> usize {
        s.arity()
    }
}

impl LabelScheme {
    pub const ALL: [LabelScheme; 3] = [LabelScheme::Four, LabelScheme::Five, LabelScheme::Nine];

    pub fn arity(self) -> usize {
        match self {
            LabelScheme::Four => 4,
            LabelScheme::Five => 5,
            LabelScheme::Nine => 9,
        }
    }

    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            LabelScheme::Four => &["sgl", "grp", "sil", "oth"],
            LabelScheme::Five => &["ist", "stu", "grp", "sil", "oth"],
            LabelScheme::Nine => &["a", "l", "iq", "ia", "sq", "sa", "g", "s", "o"],
        }
    }

    pub fn class_name(self, class: usize) -> &'static str {
        self.class_names()[class]
    }
}

/// Class index of `label` under `target`.
pub fn map_label_scheme(label: ActivityLabel, target: LabelScheme) -> usize {
    use ActivityLabel::*;
    match target {
        LabelScheme::Nine => label.index(),
        LabelScheme::Five => match label {
            A | L | Iq | Ia => 0,
            Sq | Sa => 1,
            G => 2,
            S => 3,
            O => 4,
        },
        LabelScheme::Four => match label {
            A | L | Iq | Ia | Sq | Sa => 0,
            G => 1,
            S => 2,
            O => 3,
        },
    }
}

/// Merge a 5-way class into the 4-way scheme (instructor and student voices
/// both become single-voice).
pub fn five_to_four(class: usize) -> usize {
    match class {
        0 | 1 => 0,
        c => c - 1,
    }
}

/// A labelled span of a session, `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub label: ActivityLabel,
}

/// Per-frame class indices under one scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLabels {
    pub scheme: LabelScheme,
    pub labels: Vec<usize>,
}

impl FrameLabels {
    pub fn new(scheme: LabelScheme, labels: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&c| c >= scheme.arity()) {
            return Err(Error::InvalidArgument(format!(
                "class {bad} out of range for {}-way scheme",
                scheme.arity()
            )));
        }
        Ok(Self { scheme, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Label `frames` frames by the interval containing each frame center
/// `t * hop`. A boundary exactly on a center belongs to the later interval.
/// Uncovered frames are an error unless `fill_gaps`, which labels them "o".
pub fn intervals_to_frame_labels(
    annos: &[AnnotationInterval],
    frames: usize,
    hop_ms: f64,
    scheme: LabelScheme,
    fill_gaps: bool,
) -> Result<FrameLabels> {
    for a in annos {
        if !(a.start_s >= 0.0 && a.end_s > a.start_s) {
            return Err(Error::InvalidArgument(format!(
                "bad interval [{}, {})",
                a.start_s, a.end_s
            )));
        }
    }
    for w in annos.windows(2) {
        if w[1].start_s < w[0].end_s {
            return Err(Error::OverlappingIntervals { at_s: w[1].start_s });
        }
    }
    let mut out = Vec::with_capacity(frames);
    let mut idx = 0;
    for t in 0..frames {
        // exact center in integer milliseconds when hop is integral
        let center = t as f64 * hop_ms / 1000.0;
        while idx < annos.len() && annos[idx].end_s <= center {
            idx += 1;
        }
        let label = match annos.get(idx) {
            Some(a) if a.start_s <= center => a.label,
            _ if fill_gaps => ActivityLabel::O,
            _ => {
                return Err(Error::UncoveredFrame {
                    frame: t,
                    time_s: center,
                })
            }
        };
        out.push(map_label_scheme(label, scheme));
    }
    Ok(FrameLabels { scheme, labels: out })
}

/// Per-class frame counts `n_y`.
pub fn class_counts(fl: &FrameLabels) -> Vec<u64> {
    let mut counts = vec![0u64; fl.scheme.arity()];
    for &c in &fl.labels {
        counts[c] += 1;
    }
    counts
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationRow {
    start_s: f64,
    end_s: f64,
    label: String,
}

/// Read an annotation CSV (`start_s,end_s,label`).
pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationInterval>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let row: AnnotationRow = row?;
        out.push(AnnotationInterval {
            start_s: row.start_s,
            end_s: row.end_s,
            label: row.label.parse()?,
        });
    }
    Ok(out)
}

pub fn write_annotations(path: impl AsRef<Path>, annos: &[AnnotationInterval]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    for a in annos {
        writer.serialize(AnnotationRow {
            start_s: a.start_s,
            end_s: a.end_s,
            label: a.label.code().to_string(),
        })?;
    }
    writer.flush().map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(())
}
