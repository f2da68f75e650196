use rand::Rng;

use crate::nn::Tensor;
use crate::rng;
use crate::scalar::Scalar;

/// Half-width of the Glorot uniform interval.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Weight matrix of shape `[fan_out, fan_in]` with entries drawn i.i.d. from
/// `U[-L, L]`, `L = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<F: Scalar, R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor<F> {
    assert!(fan_in >= 1 && fan_out >= 1, "glorot_uniform needs positive fans");
    let limit = glorot_limit(fan_in, fan_out);
    let data = (0..fan_in * fan_out)
        .map(|_| F::of(rng.random_range(-limit..=limit)))
        .collect();
    Tensor::from_vec(&[fan_out, fan_in], data)
}

pub fn glorot_uniform_seeded<F: Scalar>(fan_in: usize, fan_out: usize, seed: u64) -> Tensor<F> {
    glorot_uniform(fan_in, fan_out, &mut rng::stream(seed, "glorot"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits() {
        assert_eq!(glorot_limit(3, 3), 1.0);
        assert!((glorot_limit(1, 2) - 2f64.sqrt()).abs() < 1e-15);
        let w: Tensor<f64> = glorot_uniform_seeded(3, 3, 9);
        assert!(w.data().iter().all(|v| v.abs() <= 1.0));
        let w: Tensor<f64> = glorot_uniform_seeded(1, 2, 9);
        assert_eq!(w.shape(), &[2, 1]);
        assert!(w.data().iter().all(|v| v.abs() <= 2f64.sqrt()));
    }

    #[test]
    fn deterministic_per_seed() {
        let a: Tensor<f64> = glorot_uniform_seeded(7, 5, 1);
        let b: Tensor<f64> = glorot_uniform_seeded(7, 5, 1);
        let c: Tensor<f64> = glorot_uniform_seeded(7, 5, 2);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn fills_the_interval() {
        let w: Tensor<f64> = glorot_uniform_seeded(100, 100, 3);
        let l = glorot_limit(100, 100);
        let max = w.data().iter().cloned().fold(f64::MIN, f64::max);
        let min = w.data().iter().cloned().fold(f64::MAX, f64::min);
        assert!(max > 0.99 * l && min < -0.99 * l);
        // variance of U[-L, L] is L^2 / 3 = 2 / (fan_in + fan_out)
        let var = w.data().iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var - 0.01).abs() < 0.001, "{var}");
    }
}
