//! Short-time Fourier transform.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::{num_complex::Complex64, Fft, FftPlanner};

use super::DspError;
use crate::audio_io::AudioSegment;

/// Magnitude spectrogram, `frames x (frame_length / 2 + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Array2<f64>,
    pub frame_length: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.magnitudes.ncols()
    }

    /// Center frequency of bin `k` in Hz.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        bin_frequency(k, self.frame_length, self.sample_rate)
    }
}

pub(crate) fn bin_frequency(k: usize, frame_length: usize, sample_rate: u32) -> f64 {
    k as f64 * sample_rate as f64 / frame_length as f64
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Index into `n` samples with mirror reflection at both ends (edge sample
/// not repeated), valid for any offset.
fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Reusable STFT plan for one frame length.
#[derive(Clone)]
pub struct Stft {
    frame_length: usize,
    hop: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft")
            .field("frame_length", &self.frame_length)
            .field("hop", &self.hop)
            .finish()
    }
}

impl Stft {
    pub fn new(frame_length: usize, hop: usize) -> Result<Self, DspError> {
        if frame_length == 0 || hop == 0 || hop > frame_length {
            return Err(DspError::Framing { frame_length, hop });
        }
        Ok(Self {
            frame_length,
            hop,
            window: hann(frame_length),
            fft: FftPlanner::new().plan_fft_forward(frame_length),
        })
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    /// Centered frames: the signal is reflect-padded by `frame_length / 2` on
    /// both sides, giving `1 + len / hop` frames.
    pub fn process(&self, seg: &AudioSegment) -> Result<Spectrogram, DspError> {
        let x = &seg.samples;
        if x.is_empty() {
            return Err(DspError::EmptySignal);
        }
        let n_fft = self.frame_length;
        let n_bins = n_fft / 2 + 1;
        let pad = (n_fft / 2) as isize;
        let n_frames = 1 + x.len() / self.hop;
        let mut mags = Array2::<f64>::zeros((n_frames, n_bins));
        let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for (f, mut row) in mags.rows_mut().into_iter().enumerate() {
            let start = (f * self.hop) as isize - pad;
            for (i, slot) in buf.iter_mut().enumerate() {
                let v = x[reflect_index(start + i as isize, x.len())];
                *slot = Complex64::new(v * self.window[i], 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (k, m) in row.iter_mut().enumerate() {
                *m = buf[k].norm();
            }
        }
        Ok(Spectrogram {
            magnitudes: mags,
            frame_length: n_fft,
            hop: self.hop,
            sample_rate: seg.sample_rate,
        })
    }
}

pub fn stft(seg: &AudioSegment, frame_length: usize, hop: usize) -> Result<Spectrogram, DspError> {
    Stft::new(frame_length, hop)?.process(seg)
}
