//! Per-dimension standardization fitted on training-fold features only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean/std standardizer. Dimensions with zero variance pass through
/// unscaled, so constant columns (presence bits that never change, one-hot
/// positions never used) keep their raw values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit(features: &[Vec<f64>]) -> Result<Self> {
        let first = features
            .first()
            .ok_or_else(|| Error::Config("cannot fit a normalizer on an empty feature set".into()))?;
        let dim = first.len();
        let n = features.len() as f64;
        let mut mean = vec![0.0; dim];
        for f in features {
            assert_eq!(f.len(), dim, "inconsistent feature dimensionality");
            for (m, v) in mean.iter_mut().zip(f) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut std = vec![0.0; dim];
        for f in features {
            for ((s, v), m) in std.iter_mut().zip(f).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in std.iter_mut() {
            *s = (*s / n).sqrt();
        }
        Ok(Normalizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, features: &mut [f64]) {
        assert_eq!(features.len(), self.dim(), "feature/normalizer dimension mismatch");
        for i in 0..features.len() {
            if self.std[i] > 0.0 {
                features[i] = (features[i] - self.mean[i]) / self.std[i];
            }
        }
    }

    pub fn apply_all(&self, features: &mut [Vec<f64>]) {
        for f in features.iter_mut() {
            self.apply(f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn constant_column_is_unchanged() {
        let data = vec![vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 3.0]];
        let norm = Normalizer::fit(&data).unwrap();
        let mut row = vec![5.0, 2.0];
        norm.apply(&mut row);
        assert_eq!(row[0], 5.0);
        assert!((row[1] - 0.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_training_set_is_standard() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut data: Vec<Vec<f64>> =
            (0..400).map(|_| (0..7).map(|_| rng.random::<f64>() * 9.0 - 4.0).collect()).collect();
        let norm = Normalizer::fit(&data).unwrap();
        norm.apply_all(&mut data);
        for d in 0..7 {
            let col: Vec<f64> = data.iter().map(|f| f[d]).collect();
            assert!(crate::util::mean(&col).abs() < 1e-9);
            let s = crate::util::std_dev(&col);
            assert!(s == 0.0 || (s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(Normalizer::fit(&[]).is_err());
    }

    #[test]
    fn refitting_on_different_folds_changes_parameters() {
        // Leakage detector: the fitted statistics depend on exactly the
        // training fold. Adding held-out rows must change them.
        let train = vec![vec![1.0], vec![2.0], vec![3.0]];
        let mut train_plus_test = train.clone();
        train_plus_test.push(vec![50.0]);
        let a = Normalizer::fit(&train).unwrap();
        let b = Normalizer::fit(&train_plus_test).unwrap();
        assert_ne!(a.mean, b.mean);
        assert_ne!(a.std, b.std);
    }
}
