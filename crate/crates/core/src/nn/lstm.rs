//! Stacked LSTM with a per-timestep sigmoid read-out, trained by
//! backpropagation through time over the whole sequence.
//!
//! Each layer holds `W` (`[4H, in]`), `U` (`[4H, H]`) and `b` (`[4H]`) with
//! gate blocks ordered input, forget, cell, output:
//!
//! ```text
//! a_t = W x_t + U h_{t-1} + b
//! i = sig(a_i)  f = sig(a_f)  g = tanh(a_g)  o = sig(a_o)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```

use crate::nn::activation::sigmoid;
use crate::nn::params::Params;
use crate::nn::tensor::{affine, dot, matvec_add, matvec_t_add, outer_add};
use crate::scalar::Scalar;

/// Activations of one layer over a sequence, row-major by timestep.
pub(crate) struct LayerTrace<F> {
    /// Post-activation gates `[i, f, g, o]`, `T x 4H`.
    gates: Vec<F>,
    /// Cell state, `T x H`.
    c: Vec<F>,
    /// `tanh(c)`, `T x H`.
    tc: Vec<F>,
    /// Hidden state, `T x H`.
    h: Vec<F>,
}

pub(crate) struct Trace<F> {
    layers: Vec<LayerTrace<F>>,
    pub logits: Vec<F>,
}

fn layer_forward<F: Scalar>(w: &[F], u: &[F], b: &[F], hidden: usize, x: &[F], steps: usize) -> LayerTrace<F> {
    let in_w = x.len() / steps;
    let g4 = 4 * hidden;
    let mut gates = vec![F::zero(); steps * g4];
    let mut c = vec![F::zero(); steps * hidden];
    let mut tc = vec![F::zero(); steps * hidden];
    let mut h = vec![F::zero(); steps * hidden];
    for t in 0..steps {
        let a = &mut gates[t * g4..(t + 1) * g4];
        affine(w, b, &x[t * in_w..(t + 1) * in_w], a);
        if t > 0 {
            matvec_add(u, &h[(t - 1) * hidden..t * hidden], a);
        }
        for k in 0..hidden {
            let i = sigmoid(a[k]);
            let f = sigmoid(a[hidden + k]);
            let g = a[2 * hidden + k].tanh();
            let o = sigmoid(a[3 * hidden + k]);
            a[k] = i;
            a[hidden + k] = f;
            a[2 * hidden + k] = g;
            a[3 * hidden + k] = o;
            let c_prev = if t > 0 { c[(t - 1) * hidden + k] } else { F::zero() };
            let ct = f * c_prev + i * g;
            c[t * hidden + k] = ct;
            tc[t * hidden + k] = ct.tanh();
            h[t * hidden + k] = o * tc[t * hidden + k];
        }
    }
    LayerTrace { gates, c, tc, h }
}

/// Runs the stack over `steps` rows of `x` and returns the per-step logits.
pub(crate) fn forward<F: Scalar>(p: &Params<F>, hidden: &[usize], x: &[F], steps: usize) -> Trace<F> {
    let mut layers: Vec<LayerTrace<F>> = Vec::with_capacity(hidden.len());
    for (l, &h) in hidden.iter().enumerate() {
        let input = if l == 0 { x } else { &layers[l - 1].h };
        let tr = layer_forward(p.get(3 * l).data(), p.get(3 * l + 1).data(), p.get(3 * l + 2).data(), h, input, steps);
        layers.push(tr);
    }
    let top = hidden.len();
    let (w_out, b_out) = (p.get(3 * top).data(), p.get(3 * top + 1).data()[0]);
    let last = hidden[top - 1];
    let top_h = &layers[top - 1].h;
    let logits = (0..steps)
        .map(|t| b_out + dot(w_out, &top_h[t * last..(t + 1) * last]))
        .collect();
    Trace { layers, logits }
}

/// Accumulates gradients given `d loss / d logit_t` for every step.
pub(crate) fn backward<F: Scalar>(
    p: &Params<F>,
    grads: &mut Params<F>,
    hidden: &[usize],
    x: &[F],
    steps: usize,
    trace: &Trace<F>,
    dlogits: &[F],
) {
    let top = hidden.len();
    let last = hidden[top - 1];
    let top_h = &trace.layers[top - 1].h;
    let w_out = p.get(3 * top).data();
    // d loss / d h for the current layer, T x H.
    let mut dh_in = vec![F::zero(); steps * last];
    {
        let gw = grads.get_mut(3 * top).data_mut();
        for t in 0..steps {
            let d = dlogits[t];
            if d == F::zero() {
                continue;
            }
            let h_t = &top_h[t * last..(t + 1) * last];
            for k in 0..last {
                gw[k] += d * h_t[k];
                dh_in[t * last + k] = d * w_out[k];
            }
        }
        let gb = &mut grads.get_mut(3 * top + 1).data_mut()[0];
        for &d in dlogits {
            *gb += d;
        }
    }

    for l in (0..top).rev() {
        let hs = hidden[l];
        let g4 = 4 * hs;
        let tr = &trace.layers[l];
        let input: &[F] = if l == 0 { x } else { &trace.layers[l - 1].h };
        let in_w = input.len() / steps;
        let (w, u) = (p.get(3 * l).data(), p.get(3 * l + 1).data());
        let mut dx = if l > 0 { vec![F::zero(); steps * in_w] } else { Vec::new() };
        let mut dh_next = vec![F::zero(); hs];
        let mut dc_next = vec![F::zero(); hs];
        let mut da = vec![F::zero(); g4];
        for t in (0..steps).rev() {
            let gates = &tr.gates[t * g4..(t + 1) * g4];
            for k in 0..hs {
                let i = gates[k];
                let f = gates[hs + k];
                let g = gates[2 * hs + k];
                let o = gates[3 * hs + k];
                let tc = tr.tc[t * hs + k];
                let c_prev = if t > 0 { tr.c[(t - 1) * hs + k] } else { F::zero() };
                let dh = dh_in[t * hs + k] + dh_next[k];
                let d_o = dh * tc;
                let dc = dh * o * (F::one() - tc * tc) + dc_next[k];
                da[k] = dc * g * i * (F::one() - i);
                da[hs + k] = dc * c_prev * f * (F::one() - f);
                da[2 * hs + k] = dc * i * (F::one() - g * g);
                da[3 * hs + k] = d_o * o * (F::one() - o);
                dc_next[k] = dc * f;
            }
            outer_add(grads.get_mut(3 * l).data_mut(), &da, &input[t * in_w..(t + 1) * in_w]);
            if t > 0 {
                outer_add(grads.get_mut(3 * l + 1).data_mut(), &da, &tr.h[(t - 1) * hs..t * hs]);
            }
            for (gb, &d) in grads.get_mut(3 * l + 2).data_mut().iter_mut().zip(&da) {
                *gb += d;
            }
            dh_next.iter_mut().for_each(|v| *v = F::zero());
            matvec_t_add(u, &da, &mut dh_next);
            if l > 0 {
                matvec_t_add(w, &da, &mut dx[t * in_w..(t + 1) * in_w]);
            }
        }
        dh_in = dx;
    }
}
