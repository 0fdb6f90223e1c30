//! Signal conditioning and frame-level spectral features.

mod chroma;
mod contrast;
mod filter;
mod mel;
mod spectrum;

use thiserror::Error;

pub use chroma::{chroma, pitch_class, PITCH_CLASSES};
pub use contrast::{spectral_contrast, ContrastBands, CONTRAST_FMIN};
pub use filter::{bandpass, FilterSpec, Section};
pub use mel::{cepstrum_from_mel, dct_ortho, hz_to_mel, mel_to_hz, mfcc, MelFilterbank, MfccExtractor};
pub use spectrum::{hann, stft, Spectrogram, Stft};

use crate::audio_io::AudioSegment;

/// Floor applied before every log of an energy or magnitude.
pub const LOG_FLOOR: f64 = 1e-10;

pub(crate) fn floored_ln(x: f64) -> f64 {
    x.max(LOG_FLOOR).ln()
}

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("band edges must satisfy 0 < low < high < nyquist ({low} / {high} / {nyquist} Hz)")]
    BandEdges { low: f64, high: f64, nyquist: f64 },
    #[error("bandpass order must be a positive even number, got {0}")]
    FilterOrder(usize),
    #[error("filter section {0} is unstable")]
    Unstable(usize),
    #[error("invalid framing: frame length {frame_length}, hop {hop}")]
    Framing { frame_length: usize, hop: usize },
    #[error("signal is empty")]
    EmptySignal,
    #[error("n_mfcc ({n_mfcc}) must be in 1..=n_mels ({n_mels})")]
    MfccCount { n_mfcc: usize, n_mels: usize },
    #[error("mel filter {0} covers no FFT bin")]
    EmptyMelFilter(usize),
    #[error("spectrogram has {got} bins, expected {expected}")]
    BinMismatch { expected: usize, got: usize },
    #[error("{n_bands} octave bands from 200 Hz do not fit under nyquist {nyquist} Hz")]
    ContrastBands { n_bands: usize, nyquist: f64 },
    #[error("contrast alpha must be in (0, 1], got {0}")]
    ContrastAlpha(f64),
    #[error("spectral contrast band {0} contains no FFT bin")]
    EmptyContrastBand(usize),
}

/// Result of the RMS silence gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SilenceCheck {
    pub silent: bool,
    /// `-inf` for an all-zero (or empty) segment.
    pub rms_dbfs: f64,
}

pub const DEFAULT_SILENCE_DBFS: f64 = -50.0;

pub fn rms_dbfs(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return f64::NEG_INFINITY;
    }
    let ms = samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64;
    if ms == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * ms.log10()
    }
}

pub fn is_silent(seg: &AudioSegment, threshold_dbfs: f64) -> SilenceCheck {
    let rms_dbfs = rms_dbfs(&seg.samples);
    SilenceCheck {
        silent: rms_dbfs < threshold_dbfs,
        rms_dbfs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(peak: f64) -> AudioSegment {
        let x = (0..16000)
            .map(|i| peak * (2.0 * PI * 1000.0 * i as f64 / 16000.0).sin())
            .collect();
        AudioSegment::new(x, 16000, "s")
    }

    #[test]
    fn silence_gate() {
        let zero = is_silent(&AudioSegment::new(vec![0.0; 100], 16000, "z"), -50.0);
        assert!(zero.silent);
        assert_eq!(zero.rms_dbfs, f64::NEG_INFINITY);

        let full = is_silent(&sine(1.0), DEFAULT_SILENCE_DBFS);
        assert!(!full.silent);
        assert!((full.rms_dbfs + 3.0103).abs() < 1e-3);

        let quiet = is_silent(&sine(10f64.powf(-60.0 / 20.0) * 2f64.sqrt()), DEFAULT_SILENCE_DBFS);
        assert!(quiet.silent);
        assert!((quiet.rms_dbfs + 60.0).abs() < 1e-6);
    }
}
