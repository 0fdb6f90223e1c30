//! Gradient boosted trees for binary logistic loss.
//!
//! Stage `m` fits a regression tree to the residuals `y - p` by greedy
//! variance reduction, then replaces each leaf with a single Newton step
//! `sum(r) / sum(p (1 - p))` over the rows that reached it. Margins advance by
//! `learning_rate * tree(x)`.

use ndarray::ArrayView2;

use super::tree::{SortedColumns, TreeBuilder, TreeNode, TreeParams};
use super::{check_training_data, ModelError, TrainConfig};

const HESSIAN_FLOOR: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy of margins against labels.
pub fn log_loss(margins: &[f64], y: &[u8]) -> f64 {
    // log(1 + e^{-z}) for y = 1, log(1 + e^{z}) for y = 0, computed stably.
    let softplus = |z: f64| z.max(0.0) + (-z.abs()).exp().ln_1p();
    margins
        .iter()
        .zip(y)
        .map(|(&z, &t)| if t == 1 { softplus(-z) } else { softplus(z) })
        .sum::<f64>()
        / margins.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbmModel {
    pub base_score: f64,
    pub trees: Vec<TreeNode>,
    pub learning_rate: f64,
    pub n_features: usize,
}

impl GbmModel {
    pub fn train(x: ArrayView2<f64>, y: &[u8], config: &TrainConfig) -> Result<Self, ModelError> {
        Self::train_with_trace(x, y, config).map(|(m, _)| m)
    }

    /// Trains and also returns the training log-loss before the first stage
    /// and after every stage (`n_trees + 1` values).
    pub fn train_with_trace(
        x: ArrayView2<f64>,
        y: &[u8],
        config: &TrainConfig,
    ) -> Result<(Self, Vec<f64>), ModelError> {
        check_training_data(x, y)?;
        if !(config.learning_rate > 0.0 && config.learning_rate <= 1.0) {
            return Err(ModelError::Config(format!(
                "learning_rate must be in (0, 1], got {}",
                config.learning_rate
            )));
        }
        let n = x.nrows();
        let positives = y.iter().filter(|&&t| t == 1).count() as f64;
        let prior = positives / n as f64;
        let base_score = (prior / (1.0 - prior)).ln();

        let sorted = SortedColumns::new(x);
        let params = TreeParams {
            max_depth: config.max_depth,
            min_samples_leaf: config.min_samples_leaf,
        };
        let lr = config.learning_rate;
        let mut margins = vec![base_score; n];
        let mut trace = Vec::with_capacity(config.n_trees + 1);
        trace.push(log_loss(&margins, y));
        let mut trees = Vec::with_capacity(config.n_trees);
        let mut residuals = vec![0.0; n];
        let mut hessians = vec![0.0; n];

        for _ in 0..config.n_trees {
            for i in 0..n {
                let p = sigmoid(margins[i]);
                residuals[i] = y[i] as f64 - p;
                hessians[i] = p * (1.0 - p);
            }
            let tree = TreeBuilder {
                x,
                sorted: &sorted,
                targets: &residuals,
                params: &params,
                leaf_value: |rows: &[usize]| {
                    let g: f64 = rows.iter().map(|&r| residuals[r]).sum();
                    let h: f64 = rows.iter().map(|&r| hessians[r]).sum();
                    g / h.max(HESSIAN_FLOOR)
                },
            }
            .build((0..n).collect());
            for (i, m) in margins.iter_mut().enumerate() {
                let row = x.row(i);
                let leaf = match row.as_slice() {
                    Some(s) => tree.predict(s),
                    None => tree.predict(&row.to_vec()),
                };
                *m += lr * leaf;
            }
            trace.push(log_loss(&margins, y));
            trees.push(tree);
        }

        Ok((
            Self {
                base_score,
                trees,
                learning_rate: lr,
                n_features: x.ncols(),
            },
            trace,
        ))
    }

    /// Accumulated margin `base + lr * sum(tree(x))`.
    pub fn margin(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.n_features {
            return Err(ModelError::Dimension {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let mut m = self.base_score;
        for t in &self.trees {
            m += self.learning_rate * t.predict(x);
        }
        Ok(m)
    }

    /// Probability of the positive class, strictly inside (0, 1).
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, ModelError> {
        let p = sigmoid(self.margin(x)?);
        Ok(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn cfg(n_trees: usize, depth: usize) -> TrainConfig {
        TrainConfig {
            n_trees,
            max_depth: depth,
            ..TrainConfig::default()
        }
    }

    fn accuracy(m: &GbmModel, x: &Array2<f64>, y: &[u8]) -> f64 {
        let hits = x
            .rows()
            .into_iter()
            .zip(y)
            .filter(|(r, &t)| (m.predict_proba(&r.to_vec()).unwrap() >= 0.5) as u8 == t)
            .count();
        hits as f64 / y.len() as f64
    }

    #[test]
    fn separable_1d() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [0, 0, 1, 1];
        let m = GbmModel::train(x.view(), &y, &cfg(10, 1)).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
    }

    #[test]
    fn no_trees_predicts_base_rate() {
        let x = array![[0.0], [1.0], [2.0], [3.0], [4.0]];
        let y = [0, 1, 1, 1, 0];
        let m = GbmModel::train(x.view(), &y, &cfg(0, 3)).unwrap();
        for r in x.rows() {
            assert!((m.predict_proba(&r.to_vec()).unwrap() - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_built_models() {
        let empty = GbmModel {
            base_score: 0.0,
            trees: vec![],
            learning_rate: 0.1,
            n_features: 2,
        };
        assert_eq!(empty.predict_proba(&[3.0, 4.0]).unwrap(), 0.5);
        let v = 0.8;
        let stump = GbmModel {
            base_score: 0.0,
            trees: vec![TreeNode::Leaf { value: v }],
            learning_rate: 1.0,
            n_features: 1,
        };
        assert_eq!(stump.predict_proba(&[0.0]).unwrap(), sigmoid(v));
        assert!(matches!(
            stump.predict_proba(&[0.0, 1.0]),
            Err(ModelError::Dimension { .. })
        ));
    }

    #[test]
    fn errors() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(
            GbmModel::train(x.view(), &[1, 1], &cfg(5, 2)),
            Err(ModelError::SingleClass)
        ));
        let empty = Array2::<f64>::zeros((3, 0));
        assert!(matches!(
            GbmModel::train(empty.view(), &[0, 1, 0], &cfg(5, 2)),
            Err(ModelError::NoFeatures)
        ));
    }

    #[test]
    fn doubling_a_feature_changes_nothing() {
        let x = Array2::from_shape_fn((40, 2), |(i, j)| ((i * 37 + j * 11) % 17) as f64 * 0.3);
        let y: Vec<u8> = (0..40).map(|i| ((i * 37) % 17 > 8) as u8).collect();
        let mut x2 = x.clone();
        x2.column_mut(1).mapv_inplace(|v| 2.0 * v);
        let a = GbmModel::train(x.view(), &y, &cfg(20, 3)).unwrap();
        let b = GbmModel::train(x2.view(), &y, &cfg(20, 3)).unwrap();
        // Test points off the training grid, transformed the same way.
        for i in 0..50 {
            let p = [i as f64 * 0.11, i as f64 * 0.097];
            let p2 = [p[0], 2.0 * p[1]];
            assert_eq!(a.predict_proba(&p).unwrap(), b.predict_proba(&p2).unwrap());
        }
    }

    #[test]
    fn probabilities_stay_open_interval() {
        let x = Array2::from_shape_fn((20, 1), |(i, _)| i as f64);
        let y: Vec<u8> = (0..20).map(|i| (i >= 10) as u8).collect();
        let m = GbmModel::train(
            x.view(),
            &y,
            &TrainConfig {
                n_trees: 500,
                learning_rate: 1.0,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        for r in x.rows() {
            let p = m.predict_proba(&r.to_vec()).unwrap();
            assert!(p > 0.0 && p < 1.0);
        }
    }
}
