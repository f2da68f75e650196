use crate::scalar::Scalar;

/// Probabilities are clamped into `[PROB_EPS, 1 - PROB_EPS]` before the log.
pub const PROB_EPS: f64 = 1e-7;

#[inline]
pub fn clamp_prob<F: Scalar>(p: F) -> F {
    let eps = F::of(PROB_EPS);
    p.max(eps).min(F::one() - eps)
}

/// Binary cross-entropy of one prediction.
#[inline]
pub fn bce<F: Scalar>(p: F, y: F) -> F {
    let p = clamp_prob(p);
    -(y * p.ln() + (F::one() - y) * (F::one() - p).ln())
}

/// Derivative of [`bce`] with respect to the logit that produced `p`
/// through a sigmoid. Zero where the clamp is active.
#[inline]
pub fn bce_logit_grad<F: Scalar>(p: F, y: F) -> F {
    let eps = F::of(PROB_EPS);
    if p < eps || p > F::one() - eps {
        F::zero()
    } else {
        p - y
    }
}

/// Mean (optionally weighted) binary cross-entropy. With weights the result
/// is `sum(w_i * l_i) / n`.
pub fn bce_loss<F: Scalar>(p: &[F], y: &[F], weights: Option<&[F]>) -> F {
    assert_eq!(p.len(), y.len(), "prediction and label lengths differ");
    if p.is_empty() {
        return F::zero();
    }
    let total: F = match weights {
        None => p.iter().zip(y).map(|(&p, &y)| bce(p, y)).sum(),
        Some(w) => {
            assert_eq!(w.len(), p.len(), "weight length differs");
            p.iter().zip(y).zip(w).map(|((&p, &y), &w)| w * bce(p, y)).sum()
        }
    };
    total / F::of(p.len() as f64)
}
