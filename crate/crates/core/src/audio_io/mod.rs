//! Audio decoding, resampling and dataset manifests.

mod manifest;
mod resample;
mod wav;

pub use manifest::{
    load_manifest, load_manifest_with, parse_manifest, write_manifest, DatasetManifest, ManifestEntry, ManifestError,
    Split,
};
pub use resample::{resample, Resampler, TAPS_PER_PHASE};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav, SampleFormat, WavError};

/// Pipeline sample rate in Hz.
pub const PIPELINE_RATE: u32 = 16_000;

/// Nominal segment length in seconds.
pub const NOMINAL_SEGMENT_SECONDS: f64 = 5.0;

/// Mono audio buffer with amplitudes normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSegment {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub id: String,
}

impl AudioSegment {
    pub fn new(samples: Vec<f64>, sample_rate: u32, id: impl Into<String>) -> Self {
        assert!(sample_rate > 0, "sample rate must be positive");
        Self {
            samples,
            sample_rate,
            id: id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}
