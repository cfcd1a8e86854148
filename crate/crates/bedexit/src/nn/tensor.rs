//! Dense row-major tensors and trainable parameters.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A dense tensor of f64 values in row-major order, with an optional
/// same-shape gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; n], grad: None }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "data length must equal the product of the dims"
        );
        Tensor { shape: shape.to_vec(), data, grad: None }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Attach a zeroed gradient buffer.
    pub fn with_grad(mut self) -> Self {
        self.grad = Some(vec![0.0; self.data.len()]);
        self
    }
}

/// A trainable parameter: values plus an accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Param { shape: shape.to_vec(), value: vec![0.0; n], grad: vec![0.0; n] }
    }

    /// Uniform init on [-bound, bound].
    pub fn uniform(shape: &[usize], bound: f64, rng: &mut ChaCha8Rng) -> Self {
        let n: usize = shape.iter().product();
        let value = (0..n).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound).collect();
        Param { shape: shape.to_vec(), value, grad: vec![0.0; n] }
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn numel(&self) -> usize {
        self.value.len()
    }
}
