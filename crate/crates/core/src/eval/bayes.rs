//! Bayesian signed-rank test over paired differences.
//!
//! The sample is augmented with a pseudo-observation at 0. Each Monte Carlo
//! iteration draws flat Dirichlet weights over the augmented sample and
//! measures how much weight falls on Walsh averages `(z_i + z_j) / 2` below
//! `-rope`, inside the rope, and above `+rope`. The iteration votes for the
//! heaviest region.
//!
//! Iteration `k` draws from its own ChaCha stream (`stream = k`), so the
//! counts do not depend on how iterations are split across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use super::EvalError;

pub const DEFAULT_N_MC: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSummary {
    pub p_left: f64,
    pub p_rope: f64,
    pub p_right: f64,
    pub rope: f64,
    pub n_mc: usize,
    pub seed: u64,
}

#[derive(Clone, Copy)]
enum Region {
    Left,
    Rope,
    Right,
}

/// Sign of each Walsh average. `-1`, `0` (inside the rope) or `1`.
fn walsh_regions(z: &[f64], rope: f64) -> Vec<i8> {
    let m = z.len();
    let mut out = Vec::with_capacity(m * m);
    for &a in z {
        for &b in z {
            let w = (a + b) / 2.0;
            out.push(if w < -rope {
                -1
            } else if w > rope {
                1
            } else {
                0
            });
        }
    }
    out
}

fn iteration(regions: &[i8], m: usize, rope: f64, seed: u64, k: u64, w: &mut [f64]) -> Region {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    let mut total = 0.0;
    for v in w.iter_mut() {
        *v = Exp1.sample(&mut rng);
        total += *v;
    }
    for v in w.iter_mut() {
        *v /= total;
    }
    let (mut left, mut right) = (0.0, 0.0);
    for i in 0..m {
        let row = &regions[i * m..(i + 1) * m];
        let (mut l, mut r) = (0.0, 0.0);
        for (j, &s) in row.iter().enumerate() {
            match s {
                -1 => l += w[j],
                1 => r += w[j],
                _ => {}
            }
        }
        left += w[i] * l;
        right += w[i] * r;
    }
    if rope > 0.0 {
        let inside = 1.0 - left - right;
        if inside >= left && inside >= right {
            return Region::Rope;
        }
    }
    if right >= left {
        Region::Right
    } else {
        Region::Left
    }
}

fn count_range(regions: &[i8], m: usize, rope: f64, seed: u64, range: std::ops::Range<u64>) -> [usize; 3] {
    let mut w = vec![0.0; m];
    let mut counts = [0usize; 3];
    for k in range {
        let idx = match iteration(regions, m, rope, seed, k, &mut w) {
            Region::Left => 0,
            Region::Rope => 1,
            Region::Right => 2,
        };
        counts[idx] += 1;
    }
    counts
}

fn validate(z: &[f64], rope: f64, n_mc: usize) -> Result<(), EvalError> {
    if z.len() < 2 {
        return Err(EvalError::TooFewDifferences(z.len()));
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    if !(rope.is_finite() && rope >= 0.0) {
        return Err(EvalError::BadRope(rope));
    }
    if n_mc == 0 {
        return Err(EvalError::NoIterations);
    }
    Ok(())
}

fn summarize(counts: [usize; 3], rope: f64, n_mc: usize, seed: u64) -> PosteriorSummary {
    let p_left = counts[0] as f64 / n_mc as f64;
    let p_rope = counts[1] as f64 / n_mc as f64;
    PosteriorSummary {
        p_left,
        p_rope,
        // Taking the remainder keeps the three summing to exactly 1.
        p_right: 1.0 - (p_left + p_rope),
        rope,
        n_mc,
        seed,
    }
}

/// `p_left` is the probability that the differences favour the second model
/// (negative), `p_right` the first. With `rope = 0` the rope has no votes.
pub fn bayes_signed_rank(z: &[f64], rope: f64, n_mc: usize, seed: u64) -> Result<PosteriorSummary, EvalError> {
    bayes_signed_rank_partitioned(z, rope, n_mc, seed, 1)
}

/// Same result as [`bayes_signed_rank`], with iterations split into
/// `partitions` contiguous ranges evaluated in parallel.
pub fn bayes_signed_rank_partitioned(
    z: &[f64],
    rope: f64,
    n_mc: usize,
    seed: u64,
    partitions: usize,
) -> Result<PosteriorSummary, EvalError> {
    validate(z, rope, n_mc)?;
    let mut aug = Vec::with_capacity(z.len() + 1);
    aug.push(0.0);
    aug.extend_from_slice(z);
    let m = aug.len();
    let regions = walsh_regions(&aug, rope);

    let parts = partitions.clamp(1, n_mc) as u64;
    let n = n_mc as u64;
    let bounds: Vec<std::ops::Range<u64>> = (0..parts).map(|p| p * n / parts..(p + 1) * n / parts).collect();
    let counts = if parts == 1 {
        count_range(&regions, m, rope, seed, 0..n)
    } else {
        bounds
            .into_par_iter()
            .map(|r| count_range(&regions, m, rope, seed, r))
            .reduce(|| [0; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
    };
    Ok(summarize(counts, rope, n_mc, seed))
}
