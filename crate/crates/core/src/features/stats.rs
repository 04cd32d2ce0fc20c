use ndarray::Array1;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::stream::FeatureStream;
use crate::error::{Error, Result};

/// Floor applied to per-dimension standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

/// Dataset partitions used throughout the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test1,
    Test2,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Dev, Split::Test1, Split::Test2];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test1 => "test1",
            Split::Test2 => "test2",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown split {s:?}")))
    }
}

/// Per-dimension mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub source: Split,
}

impl StandardizationStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Hex SHA-256 over the little-endian bytes of mean then std.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for v in self.mean.iter().chain(&self.std) {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Fit standardization statistics over every frame of the given training
/// streams. Two passes in fixed order, so the result does not depend on how
/// the streams were produced.
pub fn fit_stats(streams: &[&FeatureStream], split: Split) -> Result<StandardizationStats> {
    if split != Split::Train {
        return Err(Error::InvalidArgument(format!(
            "standardization statistics must come from the train split, not {}",
            split.as_str()
        )));
    }
    let first = streams.first().ok_or(Error::EmptyInput("stream list"))?;
    let dim = first.dim();
    if let Some(s) = streams.iter().find(|s| s.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: s.dim(),
            context: "fit_stats",
        });
    }
    if streams.iter().any(|s| s.standardized) {
        return Err(Error::InvalidArgument(
            "fit_stats expects unstandardized streams".into(),
        ));
    }
    let total: usize = streams.iter().map(|s| s.frames()).sum();
    if total < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 frames to fit statistics, got {total}"
        )));
    }
    let mut sum = Array1::<f64>::zeros(dim);
    for s in streams {
        for row in s.data.rows() {
            sum += &row;
        }
    }
    let mean = sum / total as f64;
    let mut sq = Array1::<f64>::zeros(dim);
    for s in streams {
        for row in s.data.rows() {
            let d = &row - &mean;
            sq += &(&d * &d);
        }
    }
    let std = (sq / total as f64).mapv(|v| v.sqrt().max(STD_FLOOR));
    Ok(StandardizationStats {
        mean: mean.to_vec(),
        std: std.to_vec(),
        source: split,
    })
}

/// `(x - mean) / std` per dimension.
pub fn standardize(stream: &FeatureStream, stats: &StandardizationStats) -> Result<FeatureStream> {
    if stats.dim() != stream.dim() {
        return Err(Error::DimensionMismatch {
            expected: stats.dim(),
            actual: stream.dim(),
            context: "standardize",
        });
    }
    let mean = Array1::from(stats.mean.clone());
    let std = Array1::from(stats.std.clone());
    let mut data = stream.data.clone();
    for mut row in data.rows_mut() {
        row -= &mean;
        row /= &std;
    }
    Ok(FeatureStream {
        name: stream.name.clone(),
        spec: stream.spec,
        data,
        standardized: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::frame::FrameSpec;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn stream(data: Array2<f64>) -> FeatureStream {
        FeatureStream::new("s", FrameSpec::MEL, data)
    }

    #[test]
    fn hand_arithmetic() {
        let s = stream(array![[0.0], [2.0]]);
        let st = fit_stats(&[&s], Split::Train).unwrap();
        assert_eq!(st.mean, vec![1.0]);
        assert_eq!(st.std, vec![1.0]);
    }

    #[test]
    fn constant_dimension_is_floored() {
        let s = stream(array![[3.0, 1.0], [3.0, 2.0], [3.0, 5.0]]);
        let st = fit_stats(&[&s], Split::Train).unwrap();
        assert_eq!(st.std[0], STD_FLOOR);
        let z = standardize(&s, &st).unwrap();
        assert!(z.data.column(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn errors() {
        let s = stream(array![[1.0]]);
        assert!(fit_stats(&[&s], Split::Train).is_err());
        let s2 = stream(array![[1.0], [2.0]]);
        assert!(fit_stats(&[&s2], Split::Dev).is_err());
        let st = fit_stats(&[&s2], Split::Train).unwrap();
        let wide = stream(array![[1.0, 2.0]]);
        assert!(matches!(standardize(&wide, &st), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn unit_stats_are_identity() {
        let s = stream(array![[1.5, -2.0], [0.25, 4.0]]);
        let st = StandardizationStats {
            mean: vec![0.0, 0.0],
            std: vec![1.0, 1.0],
            source: Split::Train,
        };
        let z = standardize(&s, &st).unwrap();
        assert_eq!(z.data, s.data);
        assert!(z.standardized);
    }

    #[test]
    fn train_stats_do_not_center_test_data() {
        let train = stream(array![[0.0], [2.0]]);
        let test = stream(array![[5.0], [7.0]]);
        let st = fit_stats(&[&train], Split::Train).unwrap();
        let z = standardize(&test, &st).unwrap();
        assert_eq!(z.data.column(0).mean().unwrap(), 5.0);
    }

    proptest! {
        #[test]
        fn self_standardization_is_centered_and_unit(
            vals in proptest::collection::vec(-100.0f64..100.0, 6..200),
        ) {
            let t = vals.len() / 3;
            let data = Array2::from_shape_fn((t, 3), |(i, j)| vals[i * 3 + j]);
            prop_assume!((0..3).all(|j| {
                let c = data.column(j);
                c.iter().any(|v| (v - c[0]).abs() > 1e-3)
            }));
            let s = stream(data);
            let st = fit_stats(&[&s], Split::Train).unwrap();
            let z = standardize(&s, &st).unwrap();
            let mut raw = z.clone();
            raw.standardized = false;
            let again = fit_stats(&[&raw], Split::Train).unwrap();
            for j in 0..3 {
                prop_assert!(again.mean[j].abs() <= 1e-9);
                prop_assert!((again.std[j] - 1.0).abs() <= 1e-6);
            }
        }
    }
}
