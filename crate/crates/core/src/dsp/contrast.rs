//! Octave-band spectral contrast.
//!
//! Band 0 covers `[0, 200)` Hz, band `b` covers `[200 * 2^(b-1), 200 * 2^b)`
//! and the last band runs from its lower edge up to Nyquist. Within each band
//! the `ceil(alpha * k)` largest and smallest magnitudes are averaged; the
//! contrast is the difference of their floored logs.

use ndarray::Array2;

use super::spectrum::{bin_frequency, Spectrogram};
use super::{floored_ln, DspError};

pub const CONTRAST_FMIN: f64 = 200.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastBands {
    /// Bin index ranges, one per output column.
    ranges: Vec<std::ops::Range<usize>>,
    alpha: f64,
}

impl ContrastBands {
    pub fn new(n_bands: usize, alpha: f64, frame_length: usize, sample_rate: u32) -> Result<Self, DspError> {
        let nyquist = sample_rate as f64 / 2.0;
        if n_bands == 0 || CONTRAST_FMIN * 2f64.powi(n_bands as i32 - 1) >= nyquist {
            return Err(DspError::ContrastBands { n_bands, nyquist });
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(DspError::ContrastAlpha(alpha));
        }
        let n_bins = frame_length / 2 + 1;
        let freqs: Vec<f64> = (0..n_bins)
            .map(|k| bin_frequency(k, frame_length, sample_rate))
            .collect();
        let mut edges = vec![0.0];
        edges.extend((0..n_bands).map(|b| CONTRAST_FMIN * 2f64.powi(b as i32)));
        let mut ranges = Vec::with_capacity(n_bands + 1);
        for b in 0..=n_bands {
            let lo = edges[b];
            let start = freqs.partition_point(|&f| f < lo);
            let end = if b == n_bands {
                n_bins
            } else {
                freqs.partition_point(|&f| f < edges[b + 1])
            };
            if end <= start {
                return Err(DspError::EmptyContrastBand(b));
            }
            ranges.push(start..end);
        }
        Ok(Self { ranges, alpha })
    }

    pub fn n_outputs(&self) -> usize {
        self.ranges.len()
    }

    pub fn process(&self, spec: &Spectrogram) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((spec.n_frames(), self.ranges.len()));
        let mut band = Vec::new();
        for (f, frame) in spec.magnitudes.rows().into_iter().enumerate() {
            for (b, range) in self.ranges.iter().enumerate() {
                band.clear();
                band.extend(range.clone().map(|k| frame[k]));
                band.sort_by(f64::total_cmp);
                let q = ((self.alpha * band.len() as f64).ceil() as usize).clamp(1, band.len());
                let valley = band[..q].iter().sum::<f64>() / q as f64;
                let peak = band[band.len() - q..].iter().sum::<f64>() / q as f64;
                out[[f, b]] = floored_ln(peak) - floored_ln(valley);
            }
        }
        out
    }
}

pub fn spectral_contrast(spec: &Spectrogram, n_bands: usize, alpha: f64) -> Result<Array2<f64>, DspError> {
    Ok(ContrastBands::new(n_bands, alpha, spec.frame_length, spec.sample_rate)?.process(spec))
}
