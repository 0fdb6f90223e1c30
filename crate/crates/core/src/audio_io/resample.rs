//! Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.
//!
//! The conversion ratio `target / source` is reduced to `up / down`. Output
//! sample `k` sits at input position `k * down / up`; its value is the dot
//! product of 64 neighbouring input samples with the kernel phase selected by
//! `(k * down) mod up`. The kernel cutoff is the lower of the two Nyquist
//! limits, and every phase is normalized to unit DC gain.

use std::f64::consts::PI;

use super::AudioSegment;

pub const TAPS_PER_PHASE: usize = 64;
const KAISER_BETA: f64 = 8.6;
/// Fraction of the lower Nyquist limit kept as passband.
const CUTOFF_FRACTION: f64 = 0.94;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Precomputed polyphase filter for one rate pair.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    /// `up` rows of `TAPS_PER_PHASE` coefficients.
    phases: Vec<[f64; TAPS_PER_PHASE]>,
    target_rate: u32,
}

impl Resampler {
    pub fn new(source_rate: u32, target_rate: u32) -> Self {
        assert!(source_rate > 0 && target_rate > 0, "rates must be positive");
        let g = gcd(source_rate as u64, target_rate as u64);
        let up = (target_rate as u64 / g) as usize;
        let down = (source_rate as u64 / g) as usize;
        let cutoff = CUTOFF_FRACTION * (up as f64 / down as f64).min(1.0);
        let half = (TAPS_PER_PHASE / 2) as f64;
        let i0_beta = bessel_i0(KAISER_BETA);

        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps = [0.0; TAPS_PER_PHASE];
                // Tap t multiplies input index base + t - (TAPS/2 - 1).
                for (t, tap) in taps.iter_mut().enumerate() {
                    let offset = t as f64 - (half - 1.0);
                    let tau = offset - frac;
                    let r = tau / half;
                    let window = if r.abs() <= 1.0 {
                        bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
                    } else {
                        0.0
                    };
                    *tap = cutoff * sinc(cutoff * tau) * window;
                }
                let sum: f64 = taps.iter().sum();
                for tap in taps.iter_mut() {
                    *tap /= sum;
                }
                taps
            })
            .collect();

        Self {
            up,
            down,
            phases,
            target_rate,
        }
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        if self.up == 1 && self.down == 1 {
            return input.to_vec();
        }
        let n = input.len() as isize;
        let lead = (TAPS_PER_PHASE / 2 - 1) as isize;
        (0..self.output_len(input.len()))
            .map(|k| {
                let pos = k * self.down;
                let base = (pos / self.up) as isize;
                let taps = &self.phases[pos % self.up];
                let start = base - lead;
                let mut acc = 0.0;
                for (t, &c) in taps.iter().enumerate() {
                    let idx = start + t as isize;
                    if idx >= 0 && idx < n {
                        acc += c * input[idx as usize];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn apply(&self, seg: &AudioSegment) -> AudioSegment {
        AudioSegment {
            samples: self.process(&seg.samples),
            sample_rate: self.target_rate,
            id: seg.id.clone(),
        }
    }
}

/// Converts `seg` to `target_rate`. Equal rates return an identical copy.
pub fn resample(seg: &AudioSegment, target_rate: u32) -> AudioSegment {
    assert!(target_rate > 0, "target rate must be positive");
    if seg.sample_rate == target_rate {
        return seg.clone();
    }
    Resampler::new(seg.sample_rate, target_rate).apply(seg)
}
