//! Butterworth bandpass design as second-order sections, applied zero-phase.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::DspError;
use crate::audio_io::AudioSegment;

/// One biquad: `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Section {
    /// Both poles strictly inside the unit circle (Jury conditions).
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let zi2 = zi * zi;
        (self.b0 + self.b1 * zi + self.b2 * zi2) / (1.0 + self.a1 * zi + self.a2 * zi2)
    }

    /// Direct-form-II-transposed state for a unit step held forever.
    fn step_state(&self) -> [f64; 2] {
        let dc = (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2);
        let z2 = self.b2 - self.a2 * dc;
        let z1 = self.b1 - self.a1 * dc + z2;
        [z1, z2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub sections: Vec<Section>,
    pub low_hz: f64,
    pub high_hz: f64,
    pub sample_rate: u32,
}

impl FilterSpec {
    /// Digital Butterworth bandpass of total order `order` (must be even;
    /// the lowpass prototype has order `order / 2`), designed by bilinear
    /// transform with pre-warped band edges.
    pub fn butterworth_bandpass(order: usize, low_hz: f64, high_hz: f64, sample_rate: u32) -> Result<Self, DspError> {
        let fs = sample_rate as f64;
        let nyquist = fs / 2.0;
        if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
            return Err(DspError::BandEdges {
                low: low_hz,
                high: high_hz,
                nyquist,
            });
        }
        if order == 0 || !order.is_multiple_of(2) {
            return Err(DspError::FilterOrder(order));
        }
        let proto_order = order / 2;

        let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
        let (w1, w2) = (warp(low_hz), warp(high_hz));
        let w0 = (w1 * w2).sqrt();
        let bw = w2 - w1;

        // Analog lowpass prototype poles mapped through s -> (s^2 + w0^2) / (B s).
        let mut analog = Vec::with_capacity(order);
        for k in 0..proto_order {
            let theta = PI * (2 * k + proto_order + 1) as f64 / (2 * proto_order) as f64;
            let p = Complex64::from_polar(1.0, theta);
            let half = p * bw / 2.0;
            let disc = (half * half - w0 * w0).sqrt();
            analog.push(half + disc);
            analog.push(half - disc);
        }
        let two_fs = 2.0 * fs;
        let digital: Vec<Complex64> = analog.iter().map(|&s| (two_fs + s) / (two_fs - s)).collect();

        let mut upper: Vec<Complex64> = digital.iter().copied().filter(|z| z.im > 1e-12).collect();
        let mut real: Vec<f64> = digital.iter().filter(|z| z.im.abs() <= 1e-12).map(|z| z.re).collect();
        upper.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        real.sort_by(f64::total_cmp);

        let mut pole_pairs: Vec<(f64, f64)> = upper.iter().map(|z| (-2.0 * z.re, z.norm_sqr())).collect();
        for pair in real.chunks(2) {
            let (p, q) = (pair[0], *pair.get(1).unwrap_or(&0.0));
            pole_pairs.push((-(p + q), p * q));
        }

        let center = Complex64::from_polar(1.0, 2.0 * (w0 / two_fs).atan());
        let sections = pole_pairs
            .into_iter()
            .map(|(a1, a2)| {
                // One zero at DC and one at Nyquist per section.
                let mut s = Section {
                    b0: 1.0,
                    b1: 0.0,
                    b2: -1.0,
                    a1,
                    a2,
                };
                let g = s.response(center).norm();
                s.b0 /= g;
                s.b2 /= g;
                s
            })
            .collect::<Vec<_>>();

        if let Some(i) = sections.iter().position(|s| !s.is_stable()) {
            return Err(DspError::Unstable(i));
        }
        Ok(Self {
            sections,
            low_hz,
            high_hz,
            sample_rate,
        })
    }

    /// Magnitude response of one forward pass at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * freq_hz / self.sample_rate as f64);
        self.sections.iter().map(|s| s.response(z).norm()).product()
    }

    /// Causal cascade with the given per-section initial states.
    fn run(&self, x: &mut [f64], init: Option<f64>) {
        let mut scale = init.unwrap_or(0.0);
        for s in &self.sections {
            let st = s.step_state();
            let mut z1 = st[0] * scale;
            let mut z2 = st[1] * scale;
            for v in x.iter_mut() {
                let input = *v;
                let y = s.b0 * input + z1;
                z1 = s.b1 * input - s.a1 * y + z2;
                z2 = s.b2 * input - s.a2 * y;
                *v = y;
            }
            // The next section sees this section's steady-state output.
            scale *= (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
        }
    }

    /// Forward-backward filtering with odd-extension edge padding and
    /// steady-state initial conditions. Output length equals input length.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }

        let first = ext[0];
        self.run(&mut ext, Some(first));
        ext.reverse();
        let first = ext[0];
        self.run(&mut ext, Some(first));
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase 4th-order Butterworth bandpass (per pass) between `low` and `high` Hz.
pub fn bandpass(seg: &AudioSegment, low: f64, high: f64) -> Result<AudioSegment, DspError> {
    let spec = FilterSpec::butterworth_bandpass(4, low, high, seg.sample_rate)?;
    Ok(AudioSegment {
        samples: spec.filtfilt(&seg.samples),
        sample_rate: seg.sample_rate,
        id: seg.id.clone(),
    })
}
