//! Support vector machine baselines.
//!
//! The linear model is trained on the primal with Pegasos sub-gradient steps
//! (bias folded in as a constant feature). The RBF model is trained on the
//! dual with SMO using maximal-violating-pair working set selection.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_training_data, ModelError, RbfGamma, TrainConfig};

fn signed(y: &[u8]) -> Vec<f64> {
    y.iter().map(|&t| if t == 1 { 1.0 } else { -1.0 }).collect()
}

fn dot(a: ArrayView1<f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvmModel {
    /// Pegasos with `lambda = 1 / (C n)`, `svm_epochs` full passes in a
    /// seeded shuffled order, step `1 / (lambda t)` and projection onto the
    /// ball of radius `1 / sqrt(lambda)`.
    pub fn train(x: ArrayView2<f64>, y: &[u8], config: &TrainConfig) -> Result<Self, ModelError> {
        check_training_data(x, y)?;
        if config.svm_c.is_nan() || config.svm_c <= 0.0 {
            return Err(ModelError::Config(format!(
                "svm_c must be positive, got {}",
                config.svm_c
            )));
        }
        let (n, d) = x.dim();
        let ys = signed(y);
        let lambda = 1.0 / (config.svm_c * n as f64);
        let radius = 1.0 / lambda.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..n).collect();
        // w[d] is the bias weight on a constant input of 1.
        let mut w = vec![0.0; d + 1];
        let mut t = 0u64;
        for _ in 0..config.svm_epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let row = x.row(i);
                let score = dot(row, &w[..d]) + w[d];
                let shrink = 1.0 - eta * lambda;
                for v in w.iter_mut() {
                    *v *= shrink;
                }
                if ys[i] * score < 1.0 {
                    let step = eta * ys[i];
                    for (v, xi) in w[..d].iter_mut().zip(row.iter()) {
                        *v += step * xi;
                    }
                    w[d] += step;
                }
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > radius {
                    let s = radius / norm;
                    for v in w.iter_mut() {
                        *v *= s;
                    }
                }
            }
        }
        let bias = w.pop().unwrap_or(0.0);
        Ok(Self { weights: w, bias })
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.weights.len() {
            return Err(ModelError::Dimension {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbfSvmModel {
    /// Row-major `n_sv x n_features`.
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub n_features: usize,
}

fn rbf(a: &[f64], b: ArrayView1<f64>, gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum();
    (-gamma * d2).exp()
}

/// `1 / (d * mean per-column population variance)`.
pub fn auto_gamma(x: ArrayView2<f64>) -> f64 {
    let (n, d) = x.dim();
    if n == 0 || d == 0 {
        return 1.0;
    }
    let mean_var = x
        .columns()
        .into_iter()
        .map(|c| {
            let m = c.sum() / n as f64;
            c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64
        })
        .sum::<f64>()
        / d as f64;
    if mean_var > 0.0 {
        1.0 / (d as f64 * mean_var)
    } else {
        1.0 / d as f64
    }
}

enum Kernel<'a> {
    Dense(Vec<f64>),
    OnDemand { x: ArrayView2<'a, f64>, gamma: f64 },
}

/// Full kernel matrices up to this many entries are cached.
const DENSE_KERNEL_LIMIT: usize = 16 * 1024 * 1024;

impl<'a> Kernel<'a> {
    fn new(x: ArrayView2<'a, f64>, gamma: f64) -> Self {
        let n = x.nrows();
        if n * n <= DENSE_KERNEL_LIMIT {
            let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = rbf(&rows[i], x.row(j), gamma);
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            Kernel::Dense(k)
        } else {
            Kernel::OnDemand { x, gamma }
        }
    }

    fn row(&self, i: usize, n: usize) -> std::borrow::Cow<'_, [f64]> {
        match self {
            Kernel::Dense(k) => std::borrow::Cow::Borrowed(&k[i * n..(i + 1) * n]),
            Kernel::OnDemand { x, gamma } => {
                let xi = x.row(i).to_vec();
                std::borrow::Cow::Owned(x.rows().into_iter().map(|r| rbf(&xi, r, *gamma)).collect())
            }
        }
    }
}

impl RbfSvmModel {
    pub fn train(x: ArrayView2<f64>, y: &[u8], config: &TrainConfig) -> Result<Self, ModelError> {
        check_training_data(x, y)?;
        let c = config.svm_c;
        if c.is_nan() || c <= 0.0 {
            return Err(ModelError::Config(format!("svm_c must be positive, got {c}")));
        }
        let gamma = match config.rbf_gamma {
            RbfGamma::Auto => auto_gamma(x),
            RbfGamma::Value(g) if g > 0.0 => g,
            RbfGamma::Value(g) => return Err(ModelError::Config(format!("rbf_gamma must be positive, got {g}"))),
        };
        let n = x.nrows();
        let ys = signed(y);
        let kernel = Kernel::new(x, gamma);
        let tol = config.smo_tol;
        let tau = 1e-12;

        let mut alpha = vec![0.0; n];
        // Gradient of 0.5 a'Qa - e'a with Q_ij = y_i y_j K_ij.
        let mut grad = vec![-1.0; n];
        let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
        let in_low = |a: f64, yt: f64| (yt < 0.0 && a < c) || (yt > 0.0 && a > 0.0);

        let mut iter = 0usize;
        loop {
            let mut i = usize::MAX;
            let mut gmax = f64::NEG_INFINITY;
            let mut j = usize::MAX;
            let mut gmin = f64::INFINITY;
            for t in 0..n {
                let v = -ys[t] * grad[t];
                if in_up(alpha[t], ys[t]) && v > gmax {
                    gmax = v;
                    i = t;
                }
                if in_low(alpha[t], ys[t]) && v < gmin {
                    gmin = v;
                    j = t;
                }
            }
            if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
                break;
            }
            if iter >= config.smo_max_iter {
                return Err(ModelError::NotConverged { iterations: iter });
            }
            iter += 1;

            let ki = kernel.row(i, n);
            let kj = kernel.row(j, n);
            let (old_i, old_j) = (alpha[i], alpha[j]);
            if ys[i] != ys[j] {
                let quad = (ki[i] + kj[j] + 2.0 * ki[j]).max(tau);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (ki[i] + kj[j] - 2.0 * ki[j]).max(tau);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for t in 0..n {
                grad[t] += ys[t] * (ys[i] * ki[t] * di + ys[j] * kj[t] * dj);
            }
        }

        // rho: mean of y G over free vectors, else midpoint of the feasible interval.
        let mut free_sum = 0.0;
        let mut free_n = 0usize;
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        for t in 0..n {
            let yg = ys[t] * grad[t];
            if alpha[t] > 0.0 && alpha[t] < c {
                free_sum += yg;
                free_n += 1;
            } else {
                let at_upper = alpha[t] >= c;
                if (at_upper && ys[t] < 0.0) || (!at_upper && ys[t] > 0.0) {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            }
        }
        let rho = if free_n > 0 {
            free_sum / free_n as f64
        } else {
            (ub + lb) / 2.0
        };

        let mut support_vectors = Vec::new();
        let mut dual_coefs = Vec::new();
        for t in 0..n {
            if alpha[t] > 0.0 {
                support_vectors.push(x.row(t).to_vec());
                dual_coefs.push(alpha[t] * ys[t]);
            }
        }
        Ok(Self {
            support_vectors,
            dual_coefs,
            bias: -rho,
            gamma,
            n_features: x.ncols(),
        })
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.n_features {
            return Err(ModelError::Dimension {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let xv = ArrayView1::from(x);
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, &a)| a * rbf(sv, xv, self.gamma))
            .sum::<f64>()
            + self.bias)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn blobs() -> (Array2<f64>, Vec<u8>) {
        // Two clusters centred at (-2, -2) and (2, 2) with radius < 1.
        let x = Array2::from_shape_fn((40, 2), |(i, j)| {
            let c = if i < 20 { -2.0 } else { 2.0 };
            c + (((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5) * 0.8
        });
        let y = (0..40).map(|i| (i >= 20) as u8).collect();
        (x, y)
    }

    fn xor() -> (Array2<f64>, Vec<u8>) {
        let corners = [([0.0, 0.0], 0u8), ([1.0, 1.0], 0), ([0.0, 1.0], 1), ([1.0, 0.0], 1)];
        let mut x = Array2::zeros((100, 2));
        let mut y = Vec::new();
        for r in 0..100 {
            let (c, l) = corners[r % 4];
            let jit = |k: usize| (((r * 31 + k * 17) % 13) as f64 / 13.0 - 0.5) * 0.02;
            x[[r, 0]] = c[0] + jit(0);
            x[[r, 1]] = c[1] + jit(1);
            y.push(l);
        }
        (x, y)
    }

    fn acc(scores: impl Iterator<Item = f64>, y: &[u8]) -> f64 {
        scores.zip(y).filter(|(s, &t)| ((*s >= 0.0) as u8) == t).count() as f64 / y.len() as f64
    }

    #[test]
    fn linear_separates_blobs() {
        let (x, y) = blobs();
        let m = LinearSvmModel::train(x.view(), &y, &TrainConfig::default()).unwrap();
        assert_eq!(
            acc(x.rows().into_iter().map(|r| m.decision(&r.to_vec()).unwrap()), &y),
            1.0
        );
    }

    #[test]
    fn flipped_labels_negate_weights() {
        let (x, y) = blobs();
        let flipped: Vec<u8> = y.iter().map(|t| 1 - t).collect();
        let cfg = TrainConfig::default();
        let a = LinearSvmModel::train(x.view(), &y, &cfg).unwrap();
        let b = LinearSvmModel::train(x.view(), &flipped, &cfg).unwrap();
        for r in x.rows() {
            let (sa, sb) = (a.decision(&r.to_vec()).unwrap(), b.decision(&r.to_vec()).unwrap());
            assert!(sa.signum() == -sb.signum() && sa != 0.0);
        }
    }

    #[test]
    fn zero_features_predict_majority() {
        let x = Array2::zeros((10, 3));
        let y = [1, 1, 1, 0, 1, 0, 1, 1, 0, 1];
        let m = LinearSvmModel::train(x.view(), &y, &TrainConfig::default()).unwrap();
        let s0 = m.decision(&[0.0; 3]).unwrap();
        assert!(m.weights.iter().all(|&w| w == 0.0));
        assert_eq!(s0, m.bias);
        assert_eq!(acc(std::iter::repeat_n(s0, 10), &y), 0.7);
    }

    #[test]
    fn rbf_solves_xor_with_kkt() {
        let (x, y) = xor();
        let cfg = TrainConfig::default();
        let m = RbfSvmModel::train(x.view(), &y, &cfg).unwrap();
        assert!(acc(x.rows().into_iter().map(|r| m.decision(&r.to_vec()).unwrap()), &y) >= 0.95);
        assert!(m.dual_coefs.iter().all(|a| a.abs() <= cfg.svm_c + 1e-12));
        assert_eq!(m.dual_coefs.len(), m.support_vectors.len());
        // Free support vectors sit on the margin.
        for (sv, &a) in m.support_vectors.iter().zip(&m.dual_coefs) {
            if a.abs() > 1e-9 && a.abs() < cfg.svm_c - 1e-9 {
                let yi = a.signum();
                assert!((yi * m.decision(sv).unwrap() - 1.0).abs() <= 1e-2);
            }
        }
    }

    #[test]
    fn tiny_gamma_collapses_scores() {
        let (x, y) = xor();
        let cfg = TrainConfig {
            rbf_gamma: RbfGamma::Value(1e-8),
            ..TrainConfig::default()
        };
        let m = RbfSvmModel::train(x.view(), &y, &cfg).unwrap();
        let s: Vec<f64> = x.rows().into_iter().map(|r| m.decision(&r.to_vec()).unwrap()).collect();
        let (lo, hi) = s
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi - lo < 0.1);
        assert!(s.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let (x, y) = xor();
        let cfg = TrainConfig {
            smo_max_iter: 3,
            ..TrainConfig::default()
        };
        assert!(matches!(
            RbfSvmModel::train(x.view(), &y, &cfg),
            Err(ModelError::NotConverged { iterations: 3 })
        ));
    }

    #[test]
    fn single_class_rejected() {
        let (x, _) = xor();
        let y = vec![1u8; 100];
        assert!(matches!(
            LinearSvmModel::train(x.view(), &y, &TrainConfig::default()),
            Err(ModelError::SingleClass)
        ));
        assert!(matches!(
            RbfSvmModel::train(x.view(), &y, &TrainConfig::default()),
            Err(ModelError::SingleClass)
        ));
    }

    #[test]
    fn auto_gamma_formula() {
        let x = ndarray::array![[0.0, 0.0], [2.0, 4.0]];
        // Column variances 1 and 4: mean 2.5, d = 2.
        assert!((auto_gamma(x.view()) - 1.0 / 5.0).abs() < 1e-12);
    }
}
