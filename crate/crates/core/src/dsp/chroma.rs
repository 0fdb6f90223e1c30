//! Pitch-class energy per frame.

use ndarray::Array2;

use super::spectrum::{bin_frequency, Spectrogram};

pub const PITCH_CLASSES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];
const A4_HZ: f64 = 440.0;
const A_CLASS: i64 = 9;

/// Pitch class (C = 0 .. B = 11) of a frequency, nearest semitone.
pub fn pitch_class(freq_hz: f64) -> usize {
    let semis = (12.0 * (freq_hz / A4_HZ).log2()).round() as i64;
    (semis + A_CLASS).rem_euclid(12) as usize
}

/// `frames x 12` chroma, each non-zero row scaled to unit maximum.
pub fn chroma(spec: &Spectrogram) -> Array2<f64> {
    let classes: Vec<Option<usize>> = (0..spec.n_bins())
        .map(|k| {
            let f = bin_frequency(k, spec.frame_length, spec.sample_rate);
            (f > 0.0).then(|| pitch_class(f))
        })
        .collect();
    let mut out = Array2::<f64>::zeros((spec.n_frames(), 12));
    for (f, frame) in spec.magnitudes.rows().into_iter().enumerate() {
        for (k, &m) in frame.iter().enumerate() {
            if let Some(c) = classes[k] {
                out[[f, c]] += m * m;
            }
        }
        let mut row = out.row_mut(f);
        let max = row.iter().fold(0.0f64, |a, &b| a.max(b));
        if max > 0.0 {
            row.mapv_inplace(|v| v / max);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::AudioSegment;
    use crate::dsp::stft;
    use std::f64::consts::PI;

    fn tone_chroma(freq: f64) -> Array2<f64> {
        let x = (0..16000)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / 16000.0).sin())
            .collect();
        chroma(&stft(&AudioSegment::new(x, 16000, "t"), 4096, 1024).unwrap())
    }

    fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
        (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap()
    }

    #[test]
    fn class_mapping() {
        assert_eq!(pitch_class(440.0), 9);
        assert_eq!(pitch_class(880.0), 9);
        assert_eq!(pitch_class(220.0), 9);
        assert_eq!(pitch_class(261.6256), 0);
        assert_eq!(pitch_class(493.8833), 11);
    }

    #[test]
    fn a4_and_a5() {
        for f in [440.0, 880.0] {
            let c = tone_chroma(f);
            assert_eq!(argmax(c.row(5)), 9);
            assert!((c.row(5).iter().fold(0.0f64, |a, &b| a.max(b)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_signal_rows_stay_zero() {
        let c = chroma(&stft(&AudioSegment::new(vec![0.0; 2000], 16000, "z"), 400, 160).unwrap());
        assert!(c.iter().all(|&v| v == 0.0));
    }
}
