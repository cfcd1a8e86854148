//! Logistic regression over the engineered features, trained with full-batch
//! Adam on L2-regularized log-loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Adam, EpochStats, TrainConfig};

/// Weight vector with the bias folded in as the last coefficient, plus the
/// signature of the feature layout the model was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub w: Vec<f64>,
    pub layout_signature: u64,
}

impl LrModel {
    pub fn feature_dim(&self) -> usize {
        self.w.len() - 1
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// log(1 + e^a) without overflow.
fn log1p_exp(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

/// P(out-of-bed | x) = sigmoid(<w, [x; 1]>).
pub fn lr_predict(model: &LrModel, x: &[f64]) -> Result<f64> {
    if x.len() + 1 != model.w.len() {
        return Err(Error::Shape(format!(
            "feature dim {} does not match model dim {}",
            x.len(),
            model.feature_dim()
        )));
    }
    Ok(sigmoid(logit(&model.w, x)))
}

fn logit(w: &[f64], x: &[f64]) -> f64 {
    let mut z = w[w.len() - 1];
    for (wi, xi) in w[..w.len() - 1].iter().zip(x) {
        z += wi * xi;
    }
    z
}

/// Weighted mean log-loss plus `l2 * ||w||^2`, and its gradient. The bias is
/// included in the penalty so the infinite-regularization limit drives every
/// prediction to 0.5.
pub fn lr_loss_grad(
    w: &[f64],
    features: &[Vec<f64>],
    targets: &[bool],
    class_weights: &[f64; 2],
    l2: f64,
) -> (f64, Vec<f64>) {
    let dim = w.len();
    let mut grad = vec![0.0; dim];
    let mut loss = 0.0;
    let weight_sum: f64 = targets
        .iter()
        .map(|&y| class_weights[usize::from(y)])
        .sum();
    for (x, &y) in features.iter().zip(targets) {
        let cw = class_weights[usize::from(y)] / weight_sum;
        let z = logit(w, x);
        let s = if y { 1.0 } else { -1.0 };
        loss += cw * log1p_exp(-s * z);
        let err = cw * (sigmoid(z) - if y { 1.0 } else { 0.0 });
        for (g, xi) in grad[..dim - 1].iter_mut().zip(x) {
            *g += err * xi;
        }
        grad[dim - 1] += err;
    }
    for (g, wi) in grad.iter_mut().zip(w) {
        *g += 2.0 * l2 * wi;
    }
    loss += l2 * w.iter().map(|wi| wi * wi).sum::<f64>();
    (loss, grad)
}

/// Full-batch training. Deterministic: weights start at zero and every step
/// is a pure function of the data.
pub fn lr_train(
    features: &[Vec<f64>],
    targets: &[bool],
    cfg: &TrainConfig,
    layout_signature: u64,
) -> Result<(LrModel, Vec<EpochStats>)> {
    if features.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} feature rows vs {} targets",
            features.len(),
            targets.len()
        )));
    }
    let positives = targets.iter().filter(|&&y| y).count();
    if positives == 0 || positives == targets.len() {
        return Err(Error::Training(
            "training data must contain at least one example of each class".into(),
        ));
    }
    let dim = features[0].len() + 1;
    let class_weights = crate::nn::class_weights(
        [targets.len() - positives, positives],
        cfg.class_weighted,
    );

    let mut w = crate::nn::Param::zeros(&[dim]);
    let mut adam = Adam::new(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    let mut curve = Vec::new();
    let mut prev_loss = f64::INFINITY;
    for iter in 0..cfg.lr_iters.max(1) {
        let (loss, grad) = lr_loss_grad(&w.value, features, targets, &class_weights, cfg.l2);
        if !loss.is_finite() {
            return Err(Error::Training(format!("non-finite loss at iteration {iter}")));
        }
        w.grad.copy_from_slice(&grad);
        adam.step(&mut [&mut w]);
        curve.push(EpochStats { epoch: iter, train_loss: loss, val_loss: loss });
        if (prev_loss - loss).abs() < 1e-12 * (1.0 + loss.abs()) {
            break;
        }
        prev_loss = loss;
    }
    Ok((LrModel { w: w.value, layout_signature }, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{central_diff, max_rel_error};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_logit_gives_half() {
        let model = LrModel { w: vec![1.0, -1.0, 0.0], layout_signature: 0 };
        // <w, x> = 0 for x = (1, 1), bias 0.
        assert_eq!(lr_predict(&model, &[1.0, 1.0]).unwrap(), 0.5);
    }

    #[test]
    fn probability_is_monotone_in_the_logit() {
        let model = LrModel { w: vec![1.0, 0.0], layout_signature: 0 };
        let mut prev = 0.0;
        for i in -50..=50 {
            let p = lr_predict(&model, &[i as f64 * 0.5]).unwrap();
            assert!(p > prev);
            assert!(p > 0.0 && p < 1.0);
            prev = p;
        }
    }

    #[test]
    fn sigmoid_of_two() {
        // Scalar oracle: 1 / (1 + e^-2) = 0.8807970779778823.
        let oracle = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((oracle - 0.880_797_077_977_882_3).abs() < 1e-15);
        let model = LrModel { w: vec![2.0, 0.0], layout_signature: 0 };
        let p = lr_predict(&model, &[1.0]).unwrap();
        assert!((p - 0.880797).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let model = LrModel { w: vec![1.0, 0.0, 0.0], layout_signature: 0 };
        assert!(lr_predict(&model, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn separable_toy_set_reaches_full_training_accuracy() {
        let mut features = Vec::new();
        let mut targets = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..40 {
            let x: f64 = rng.random::<f64>() + 1.0;
            let y: f64 = rng.random::<f64>();
            features.push(vec![x, y]);
            targets.push(true);
            features.push(vec![-x, y]);
            targets.push(false);
        }
        let cfg = TrainConfig { lr: 0.05, lr_iters: 600, l2: 0.0, ..TrainConfig::default() };
        let (model, _) = lr_train(&features, &targets, &cfg, 0).unwrap();
        for (x, &y) in features.iter().zip(&targets) {
            let p = lr_predict(&model, x).unwrap();
            assert_eq!(p > 0.5, y);
        }
    }

    #[test]
    fn single_class_data_is_an_error() {
        let features = vec![vec![1.0], vec![2.0]];
        let targets = vec![true, true];
        assert!(lr_train(&features, &targets, &TrainConfig::default(), 0).is_err());
    }

    #[test]
    fn huge_regularization_collapses_to_half() {
        let features = vec![vec![2.0], vec![-2.0], vec![1.5], vec![-1.9]];
        let targets = vec![true, false, true, false];
        let cfg = TrainConfig { l2: 1e9, lr_iters: 800, ..TrainConfig::default() };
        let (model, _) = lr_train(&features, &targets, &cfg, 0).unwrap();
        let norm: f64 = model.w.iter().map(|w| w * w).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "weight norm {norm}");
        for x in &features {
            let p = lr_predict(&model, x).unwrap();
            assert!((p - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let dim = rng.random_range(2..8);
            let n = rng.random_range(3..12);
            let features: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
                .collect();
            let targets: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
            let w: Vec<f64> = (0..dim + 1).map(|_| rng.random::<f64>() - 0.5).collect();
            let weights = [1.0, 1.3];
            let (_, analytic) = lr_loss_grad(&w, &features, &targets, &weights, 1e-3);
            let numeric = central_diff(
                |wp| lr_loss_grad(wp, &features, &targets, &weights, 1e-3).0,
                &w,
                1e-5,
            );
            assert!(max_rel_error(&analytic, &numeric) < 1e-6);
        }
    }
}
