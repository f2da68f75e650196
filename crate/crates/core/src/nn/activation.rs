use crate::scalar::Scalar;

/// Logistic function, split on the sign of `z` so neither branch overflows.
#[inline]
pub fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

#[inline]
pub fn relu<F: Scalar>(z: F) -> F {
    if z > F::zero() {
        z
    } else {
        F::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_at_extremes() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        let lo = sigmoid(-1e3f64);
        let hi = sigmoid(1e3f64);
        assert!(lo.is_finite() && lo >= 0.0);
        assert_eq!(hi, 1.0);
        assert!(sigmoid(-700.0f64) > 0.0);
        assert!(sigmoid(-1e3f32).is_finite());
    }

    #[test]
    fn symmetric() {
        for z in [-5.0f64, -0.3, 0.7, 12.0] {
            assert!((sigmoid(z) + sigmoid(-z) - 1.0).abs() < 1e-15);
        }
    }
}
