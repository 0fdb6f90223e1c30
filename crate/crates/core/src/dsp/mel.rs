//! Mel filterbank and MFCCs.
//!
//! Slaney-style mel scale (linear below 1 kHz, logarithmic above) with
//! area-normalized triangular filters, applied to the power spectrum. Log
//! energies are floored at `LOG_FLOOR` and decorrelated with an orthonormal
//! DCT-II.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1};

use super::spectrum::{bin_frequency, Spectrogram};
use super::{floored_ln, DspError};

const MEL_F_SP: f64 = 200.0 / 3.0;
const MEL_MIN_LOG_HZ: f64 = 1000.0;
const MEL_MIN_LOG_MEL: f64 = MEL_MIN_LOG_HZ / MEL_F_SP;

fn mel_log_step() -> f64 {
    6.4f64.ln() / 27.0
}

pub fn hz_to_mel(hz: f64) -> f64 {
    if hz < MEL_MIN_LOG_HZ {
        hz / MEL_F_SP
    } else {
        MEL_MIN_LOG_MEL + (hz / MEL_MIN_LOG_HZ).ln() / mel_log_step()
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel < MEL_MIN_LOG_MEL {
        mel * MEL_F_SP
    } else {
        MEL_MIN_LOG_HZ * (mel_log_step() * (mel - MEL_MIN_LOG_MEL)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_mels x n_bins`.
    pub weights: Array2<f64>,
    pub fmin: f64,
    pub fmax: f64,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, frame_length: usize, sample_rate: u32, fmin: f64, fmax: f64) -> Result<Self, DspError> {
        let n_bins = frame_length / 2 + 1;
        let (mlo, mhi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let mut weights = Array2::<f64>::zeros((n_mels, n_bins));
        for m in 0..n_mels {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let norm = 2.0 / (hi - lo);
            for k in 0..n_bins {
                let f = bin_frequency(k, frame_length, sample_rate);
                let up = (f - lo) / (mid - lo);
                let down = (hi - f) / (hi - mid);
                weights[[m, k]] = up.min(down).max(0.0) * norm;
            }
            if weights.row(m).iter().all(|&w| w == 0.0) {
                return Err(DspError::EmptyMelFilter(m));
            }
        }
        Ok(Self { weights, fmin, fmax })
    }

    pub fn n_mels(&self) -> usize {
        self.weights.nrows()
    }

    /// Mel energies of one power-spectrum frame.
    pub fn apply(&self, power: ArrayView1<f64>) -> Vec<f64> {
        self.weights.dot(&power).to_vec()
    }
}

/// Orthonormal DCT-II basis, `n_out x n_in`.
pub fn dct_ortho(n_out: usize, n_in: usize) -> Array2<f64> {
    let n = n_in as f64;
    Array2::from_shape_fn((n_out, n_in), |(k, i)| {
        let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        scale * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos()
    })
}

/// Cepstral coefficients from mel energies: floored log, then DCT.
pub fn cepstrum_from_mel(mel_energies: &[f64], dct: &Array2<f64>) -> Vec<f64> {
    let logs: Vec<f64> = mel_energies.iter().map(|&e| floored_ln(e)).collect();
    dct.rows()
        .into_iter()
        .map(|row| row.iter().zip(&logs).map(|(c, l)| c * l).sum())
        .collect()
}

/// Cached filterbank + DCT for one framing.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    pub filterbank: MelFilterbank,
    dct: Array2<f64>,
}

impl MfccExtractor {
    pub fn new(n_mfcc: usize, n_mels: usize, frame_length: usize, sample_rate: u32) -> Result<Self, DspError> {
        if n_mfcc == 0 || n_mfcc > n_mels {
            return Err(DspError::MfccCount { n_mfcc, n_mels });
        }
        let filterbank = MelFilterbank::new(n_mels, frame_length, sample_rate, 0.0, sample_rate as f64 / 2.0)?;
        Ok(Self {
            filterbank,
            dct: dct_ortho(n_mfcc, n_mels),
        })
    }

    pub fn n_mfcc(&self) -> usize {
        self.dct.nrows()
    }

    pub fn process(&self, spec: &Spectrogram) -> Result<Array2<f64>, DspError> {
        if spec.n_bins() != self.filterbank.weights.ncols() {
            return Err(DspError::BinMismatch {
                expected: self.filterbank.weights.ncols(),
                got: spec.n_bins(),
            });
        }
        let mut out = Array2::<f64>::zeros((spec.n_frames(), self.n_mfcc()));
        for (f, frame) in spec.magnitudes.rows().into_iter().enumerate() {
            let power = frame.mapv(|m| m * m);
            let mel = self.filterbank.apply(power.view());
            for (c, v) in cepstrum_from_mel(&mel, &self.dct).into_iter().enumerate() {
                out[[f, c]] = v;
            }
        }
        Ok(out)
    }
}

pub fn mfcc(spec: &Spectrogram, n_mfcc: usize, n_mels: usize) -> Result<Array2<f64>, DspError> {
    MfccExtractor::new(n_mfcc, n_mels, spec.frame_length, spec.sample_rate)?.process(spec)
}
