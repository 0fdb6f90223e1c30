//! Synthetic audio corpora for tests and demos.
//!
//! A "cry" is a harmonic stack whose fundamental sweeps through 350-600 Hz
//! with 4 Hz amplitude modulation. A "not cry" is pink noise or a 120 Hz
//! mains hum with harmonics over a faint noise floor. Every generated
//! segment is scaled to the same RMS level.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RATE: u32 = 16_000;
/// Target RMS of every generated segment (about -20 dBFS).
pub const LEVEL_RMS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Cry,
    PinkNoise,
    Hum,
}

impl Kind {
    pub fn label(self) -> u8 {
        (self == Kind::Cry) as u8
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn scale_to_rms(mut x: Vec<f64>, rms: f64) -> Vec<f64> {
    let cur = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if cur > 0.0 {
        let g = rms / cur;
        x.iter_mut().for_each(|v| *v *= g);
    }
    x
}

fn white(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-1.0..1.0)
}

/// Pink (1/f) noise via Paul Kellet's refined filter, unscaled.
fn pink(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    (0..n)
        .map(|_| {
            let w = white(rng);
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let out = b.iter().sum::<f64>() + w * 0.5362;
            b[6] = w * 0.115926;
            out
        })
        .collect()
}

fn cry(n: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let f_lo = rng.random_range(350.0..420.0);
    let f_hi = rng.random_range(520.0..600.0);
    let rising = rng.random_bool(0.5);
    let am_phase = rng.random_range(0.0..2.0 * PI);
    let dur = n as f64 / rate;
    let amps = [1.0, 0.6, 0.4, 0.25];
    let mut phase = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / rate;
        // One rise and fall (or fall and rise) across the segment.
        let u = 0.5 - 0.5 * (2.0 * PI * t / dur).cos();
        let u = if rising { u } else { 1.0 - u };
        let f0 = f_lo + (f_hi - f_lo) * u;
        phase += 2.0 * PI * f0 / rate;
        let tone: f64 = amps
            .iter()
            .enumerate()
            .map(|(h, a)| a * ((h + 1) as f64 * phase).sin())
            .sum();
        let am = 0.6 + 0.4 * (2.0 * PI * 4.0 * t + am_phase).sin();
        out.push(am * tone + 0.01 * white(rng));
    }
    out
}

fn hum(n: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let f0 = 120.0 * rng.random_range(0.99..1.01);
    let phases: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let floor = scale_to_rms(pink(n, rng), 0.1);
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let tone: f64 = phases
                .iter()
                .enumerate()
                .map(|(h, p)| (2.0 * PI * f0 * (h + 1) as f64 * t + p).sin() / (h + 1) as f64)
                .sum();
            tone + floor[i]
        })
        .collect()
}

/// One segment of `kind`, `seconds` long at `rate`, at [`LEVEL_RMS`].
pub fn generate(kind: Kind, seconds: f64, rate: u32, seed: u64) -> Vec<f64> {
    let n = (seconds * rate as f64).round() as usize;
    let mut rng = rng_for(seed, 0);
    let raw = match kind {
        Kind::Cry => cry(n, rate as f64, &mut rng),
        Kind::PinkNoise => pink(n, &mut rng),
        Kind::Hum => hum(n, rate as f64, &mut rng),
    };
    scale_to_rms(raw, LEVEL_RMS)
}

/// 16-bit PCM mono WAV bytes.
pub fn wav_bytes(samples: &[f64], rate: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], rate: u32) -> io::Result<()> {
    fs::write(path, wav_bytes(samples, rate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub n_cry: usize,
    pub n_not_cry: usize,
    pub n_participants: usize,
    /// Participants `0..n_train_participants` form the train split.
    pub n_train_participants: usize,
    pub seconds: f64,
    pub rate: u32,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_cry: 100,
            n_not_cry: 100,
            n_participants: 8,
            n_train_participants: 6,
            seconds: 5.0,
            rate: RATE,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub id: String,
    pub kind: Kind,
    pub participant: String,
    pub train: bool,
}

/// Entries in manifest order. Cries and not-cries interleave, and each class
/// is dealt round-robin over participants so every participant has both.
pub fn corpus_entries(spec: &CorpusSpec) -> Vec<CorpusEntry> {
    let total = spec.n_cry + spec.n_not_cry;
    let (mut c, mut nc) = (0, 0);
    let mut out = Vec::with_capacity(total);
    for i in 0..total {
        let take_cry = if c >= spec.n_cry {
            false
        } else if nc >= spec.n_not_cry {
            true
        } else {
            i % 2 == 0
        };
        let (kind, k) = if take_cry {
            c += 1;
            (Kind::Cry, c - 1)
        } else {
            nc += 1;
            (Kind::PinkNoise, nc - 1)
        };
        let per = spec.n_participants.max(1);
        let p = k % per;
        // Alternate noise types per round so each participant gets both.
        let kind = if kind == Kind::PinkNoise && (k / per) % 2 == 1 {
            Kind::Hum
        } else {
            kind
        };
        out.push(CorpusEntry {
            id: format!("seg{i:04}"),
            kind,
            participant: format!("p{p}"),
            train: p < spec.n_train_participants,
        });
    }
    out
}

/// Writes `wav/<id>.wav` files and `manifest.csv` under `dir`; returns the
/// manifest path.
pub fn write_corpus(dir: impl AsRef<Path>, spec: &CorpusSpec) -> io::Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("wav"))?;
    let mut manifest = String::from("id,path,label,participant,split\n");
    for (i, e) in corpus_entries(spec).iter().enumerate() {
        let samples = generate(
            e.kind,
            spec.seconds,
            spec.rate,
            spec.seed.wrapping_add(i as u64 * 0x9E37_79B9),
        );
        let rel = format!("wav/{}.wav", e.id);
        write_wav(dir.join(&rel), &samples, spec.rate)?;
        manifest.push_str(&format!(
            "{},{},{},{},{}\n",
            e.id,
            rel,
            e.kind.label(),
            e.participant,
            if e.train { "train" } else { "test" }
        ));
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest)?;
    Ok(path)
}
