//! Feed-forward stack: ReLU hidden layers and a single sigmoid output. With
//! no hidden layers this is logistic regression.

use crate::nn::params::Params;
use crate::nn::tensor::{affine, matvec_t_add, outer_add};
use crate::nn::activation::relu;
use crate::scalar::Scalar;

/// Returns the output logit; hidden activations are appended to `acts`.
pub(crate) fn forward<F: Scalar>(p: &Params<F>, n_hidden: usize, x: &[F], acts: &mut Vec<Vec<F>>) -> F {
    acts.clear();
    for l in 0..n_hidden {
        let (w, b) = (p.get(2 * l), p.get(2 * l + 1));
        let mut z = vec![F::zero(); b.len()];
        {
            let input = if l == 0 { x } else { &acts[l - 1] };
            affine(w.data(), b.data(), input, &mut z);
        }
        z.iter_mut().for_each(|v| *v = relu(*v));
        acts.push(z);
    }
    let (w, b) = (p.get(2 * n_hidden), p.get(2 * n_hidden + 1));
    let input = if n_hidden == 0 { x } else { &acts[n_hidden - 1] };
    let mut out = [F::zero()];
    affine(w.data(), b.data(), input, &mut out);
    out[0]
}

/// Accumulates parameter gradients for one row given `d loss / d logit`.
pub(crate) fn backward<F: Scalar>(
    p: &Params<F>,
    grads: &mut Params<F>,
    n_hidden: usize,
    x: &[F],
    acts: &[Vec<F>],
    dlogit: F,
) {
    if dlogit == F::zero() {
        return;
    }
    let out = 2 * n_hidden;
    let input = if n_hidden == 0 { x } else { &acts[n_hidden - 1] };
    outer_add(grads.get_mut(out).data_mut(), &[dlogit], input);
    grads.get_mut(out + 1).data_mut()[0] += dlogit;
    if n_hidden == 0 {
        return;
    }
    let mut da = vec![F::zero(); input.len()];
    matvec_t_add(p.get(out).data(), &[dlogit], &mut da);
    for l in (0..n_hidden).rev() {
        let dz: Vec<F> = da
            .iter()
            .zip(&acts[l])
            .map(|(&d, &a)| if a > F::zero() { d } else { F::zero() })
            .collect();
        let input = if l == 0 { x } else { &acts[l - 1] };
        outer_add(grads.get_mut(2 * l).data_mut(), &dz, input);
        for (g, &d) in grads.get_mut(2 * l + 1).data_mut().iter_mut().zip(&dz) {
            *g += d;
        }
        if l > 0 {
            da = vec![F::zero(); input.len()];
            matvec_t_add(p.get(2 * l).data(), &dz, &mut da);
        }
    }
}
