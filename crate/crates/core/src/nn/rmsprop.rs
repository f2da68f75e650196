use serde::{Deserialize, Serialize};

use crate::nn::Params;
use crate::scalar::Scalar;

pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_RHO: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// RMSprop: a running mean of squared gradients scales each step.
///
/// ```text
/// cache <- rho * cache + (1 - rho) * g^2
/// param <- param - lr * g / (sqrt(cache) + eps)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsProp<F> {
    pub learning_rate: F,
    pub rho: F,
    pub epsilon: F,
    cache: Option<Params<F>>,
}

impl<F: Scalar> Default for RmsProp<F> {
    fn default() -> Self {
        Self::new(F::of(DEFAULT_LEARNING_RATE), F::of(DEFAULT_RHO), F::of(DEFAULT_EPSILON))
    }
}

impl<F: Scalar> RmsProp<F> {
    pub fn new(learning_rate: F, rho: F, epsilon: F) -> Self {
        assert!(learning_rate > F::zero(), "learning rate must be positive");
        RmsProp {
            learning_rate,
            rho,
            epsilon,
            cache: None,
        }
    }

    pub fn cache(&self) -> Option<&Params<F>> {
        self.cache.as_ref()
    }

    pub fn set_learning_rate(&mut self, lr: F) {
        assert!(lr > F::zero(), "learning rate must be positive");
        self.learning_rate = lr;
    }

    pub fn step(&mut self, params: &mut Params<F>, grads: &Params<F>) {
        assert!(params.same_layout(grads), "gradient layout differs from parameters");
        let cache = self.cache.get_or_insert_with(|| Params::zeros_like(params));
        let (rho, lr, eps) = (self.rho, self.learning_rate, self.epsilon);
        let one_minus = F::one() - rho;
        for ((p, g), c) in params
            .tensors_mut()
            .iter_mut()
            .zip(grads.tensors())
            .zip(cache.tensors_mut())
        {
            for ((pv, &gv), cv) in p.data_mut().iter_mut().zip(g.data()).zip(c.data_mut()) {
                *cv = rho * *cv + one_minus * gv * gv;
                *pv -= lr * gv / (cv.sqrt() + eps);
            }
        }
    }
}
