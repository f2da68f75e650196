use serde::{Deserialize, Serialize};

use crate::nn::Tensor;
use crate::scalar::Scalar;

/// Ordered parameter tensors of a model. Gradients and optimizer caches use
/// the same layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params<F> {
    tensors: Vec<Tensor<F>>,
}

impl<F: Scalar> Params<F> {
    pub fn new(tensors: Vec<Tensor<F>>) -> Self {
        Params { tensors }
    }

    pub fn zeros_like(other: &Params<F>) -> Self {
        Params {
            tensors: other.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn tensors(&self) -> &[Tensor<F>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.tensors
    }

    pub fn get(&self, i: usize) -> &Tensor<F> {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Tensor<F> {
        &mut self.tensors[i]
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    pub fn norm(&self) -> F {
        self.tensors.iter().map(Tensor::sum_squares).sum::<F>().sqrt()
    }

    pub fn same_layout(&self, other: &Params<F>) -> bool {
        self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a.shape() == b.shape())
    }

    pub fn flat(&self) -> Vec<F> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    /// Mutable access to the `i`-th scalar in declaration order.
    pub fn scalar_mut(&mut self, mut i: usize) -> &mut F {
        for t in &mut self.tensors {
            if i < t.len() {
                return &mut t.data_mut()[i];
            }
            i -= t.len();
        }
        panic!("parameter index out of range");
    }
}
