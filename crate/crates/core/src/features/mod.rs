//! Waveform to per-frame feature streams at a shared 10 ms hop.

pub mod frame;
pub mod mel;
pub mod prosody;
pub mod resample;
pub mod stats;
pub mod stream;
pub mod wav;

pub use frame::{frame_signal, FrameSpec, Frames};
pub use mel::{log_mel_features, log_mel_features_with, N_MELS};
pub use prosody::{prosody_features, prosody_features_with};
pub use resample::resample;
pub use stats::{fit_stats, standardize, Split, StandardizationStats, STD_FLOOR};
pub use stream::{
    decode_feature_file, encode_feature_file, fuse_streams, load_external_features, read_feature_file,
    write_feature_file, FeatureStream,
};
pub use wav::{read_wav, write_wav, Waveform};

use crate::error::Result;
use crate::exec::Execution;

/// Analysis rate for every native stream.
pub const TARGET_RATE: u32 = 16_000;

/// Native streams this crate can compute from audio.
pub const NATIVE_STREAMS: [&str; 2] = ["mel", "prosody"];

/// Compute one native stream by name from a waveform at any rate.
pub fn extract_stream(wave: &Waveform, name: &str, exec: Execution) -> Result<FeatureStream> {
    let wave = resample(wave, TARGET_RATE)?;
    match name {
        "mel" => {
            let frames = frame_signal(&wave, FrameSpec::MEL)?;
            Ok(log_mel_features_with(&frames, N_MELS, exec))
        }
        "prosody" => {
            let frames = frame_signal(&wave, FrameSpec::PROSODY)?;
            Ok(prosody_features_with(&frames, exec))
        }
        other => Err(crate::error::Error::InvalidArgument(format!(
            "unknown native feature stream {other:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn native_streams_share_frame_count() {
        let w = Waveform::new(vec![0.1; 48_000 * 2], 48_000).unwrap();
        let mel = extract_stream(&w, "mel", Execution::default()).unwrap();
        let pro = extract_stream(&w, "prosody", Execution::default()).unwrap();
        assert_eq!(mel.frames(), 200);
        assert_eq!(pro.frames(), 200);
        let fused = fuse_streams(&[mel, pro]).unwrap();
        assert_eq!(fused.dim(), 43);
        assert!(extract_stream(&w, "pase", Execution::default()).is_err());
    }
}
