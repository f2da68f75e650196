use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Dense row-major array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![F::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: F) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    /// Panics when `data.len()` does not match the shape.
    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match {} elements",
            data.len()
        );
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum_squares(&self) -> F {
        self.data.iter().map(|&v| v * v).sum()
    }
}

/// `out = bias + W x` for `W` of shape `[out.len(), x.len()]`.
#[inline]
pub(crate) fn affine<F: Scalar>(w: &[F], bias: &[F], x: &[F], out: &mut [F]) {
    let n = x.len();
    for ((o, row), &b) in out.iter_mut().zip(w.chunks_exact(n)).zip(bias) {
        *o = b + dot(row, x);
    }
}

/// `out += W x`.
#[inline]
pub(crate) fn matvec_add<F: Scalar>(w: &[F], x: &[F], out: &mut [F]) {
    let n = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(n)) {
        *o += dot(row, x);
    }
}

/// `out += W^T d` for `W` of shape `[d.len(), out.len()]`.
#[inline]
pub(crate) fn matvec_t_add<F: Scalar>(w: &[F], d: &[F], out: &mut [F]) {
    let n = out.len();
    for (row, &dv) in w.chunks_exact(n).zip(d) {
        if dv != F::zero() {
            for (o, &wv) in out.iter_mut().zip(row) {
                *o += wv * dv;
            }
        }
    }
}

/// `g += d x^T`.
#[inline]
pub(crate) fn outer_add<F: Scalar>(g: &mut [F], d: &[F], x: &[F]) {
    let n = x.len();
    for (row, &dv) in g.chunks_exact_mut(n).zip(d) {
        if dv != F::zero() {
            for (gv, &xv) in row.iter_mut().zip(x) {
                *gv += dv * xv;
            }
        }
    }
}

#[inline]
pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}
