//! Per-column standardization.

use ndarray::{Array2, ArrayView2, Axis};

use super::FeatureError;

/// Columns whose population std falls below this are left unscaled.
pub const MIN_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ScalerParams {
    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if x.len() != self.means.len() {
            return Err(FeatureError::LengthMismatch {
                expected: self.means.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn transform_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, FeatureError> {
        if x.ncols() != self.means.len() {
            return Err(FeatureError::LengthMismatch {
                expected: self.means.len(),
                got: x.ncols(),
            });
        }
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.means[j]) / self.stds[j];
            }
        }
        Ok(out)
    }
}

/// Column means and population stds; near-constant columns get std 1.
pub fn fit_scaler(x: ArrayView2<f64>) -> Result<ScalerParams, FeatureError> {
    if x.nrows() == 0 {
        return Err(FeatureError::EmptyMatrix);
    }
    let n = x.nrows() as f64;
    let means: Vec<f64> = x.sum_axis(Axis(0)).iter().map(|s| s / n).collect();
    let stds = x
        .columns()
        .into_iter()
        .zip(&means)
        .map(|(col, m)| {
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd < MIN_STD {
                1.0
            } else {
                sd
            }
        })
        .collect();
    Ok(ScalerParams { means, stds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn basic_fit() {
        let p = fit_scaler(array![[1.0, 2.0], [3.0, 4.0]].view()).unwrap();
        assert_eq!(p.means, vec![2.0, 3.0]);
        assert_eq!(p.stds, vec![1.0, 1.0]);
    }

    #[test]
    fn constant_column_and_single_row() {
        let p = fit_scaler(array![[5.0], [5.0], [5.0]].view()).unwrap();
        assert_eq!((p.means[0], p.stds[0]), (5.0, 1.0));
        let p = fit_scaler(array![[1.5, -2.0, 7.0]].view()).unwrap();
        assert_eq!(p.means, vec![1.5, -2.0, 7.0]);
        assert_eq!(p.stds, vec![1.0; 3]);
    }

    #[test]
    fn transform_examples() {
        let x = array![[1.0, 2.0], [3.0, 6.0]];
        let p = fit_scaler(x.view()).unwrap();
        assert_eq!(p.transform(&p.means.clone()).unwrap(), vec![0.0, 0.0]);
        assert_eq!(
            ScalerParams::identity(2).transform(&[4.0, -1.0]).unwrap(),
            vec![4.0, -1.0]
        );
        let p = ScalerParams {
            means: vec![2.0],
            stds: vec![2.0],
        };
        assert_eq!(p.transform(&[4.0]).unwrap(), vec![1.0]);
        assert!(matches!(
            p.transform(&[1.0, 2.0]),
            Err(FeatureError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn empty_matrix() {
        assert!(matches!(
            fit_scaler(Array2::<f64>::zeros((0, 3)).view()),
            Err(FeatureError::EmptyMatrix)
        ));
    }

    proptest! {
        #[test]
        fn standardized_columns(rows in 2usize..30, cols in 1usize..6, seed in any::<u64>()) {
            let mut state = seed | 1;
            let x = Array2::from_shape_fn((rows, cols), |(_, j)| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                if j == 0 { 3.0 } else { (state % 10_000) as f64 / 100.0 - 50.0 }
            });
            let p = fit_scaler(x.view()).unwrap();
            let z = p.transform_matrix(x.view()).unwrap();
            for (j, col) in z.columns().into_iter().enumerate() {
                let n = col.len() as f64;
                let mean = col.sum() / n;
                let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                prop_assert!(mean.abs() < 1e-9);
                if j == 0 || p.stds[j] == 1.0 && col.iter().all(|&v| v == 0.0) {
                    prop_assert!(col.iter().all(|&v| v == 0.0));
                } else {
                    prop_assert!((sd - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
