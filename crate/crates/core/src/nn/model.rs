use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::nn::activation::sigmoid;
use crate::nn::init::glorot_uniform;
use crate::nn::loss::{bce, bce_logit_grad};
use crate::nn::params::Params;
use crate::nn::{dense, lstm, Tensor};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "lr")]
    Lr,
    #[serde(rename = "mlp")]
    Mlp,
    #[serde(rename = "rnn")]
    Rnn,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Lr => "LR",
            ModelKind::Mlp => "MLP",
            ModelKind::Rnn => "RNN",
        }
    }

    /// LR and MLP score individual time-slices; the RNN reads whole sequences.
    pub fn is_sequential(self) -> bool {
        self == ModelKind::Rnn
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lr" => Ok(ModelKind::Lr),
            "mlp" => Ok(ModelKind::Mlp),
            "rnn" | "lstm" => Ok(ModelKind::Rnn),
            other => Err(format!("unknown model `{other}`")),
        }
    }
}

pub const DEFAULT_MLP_HIDDEN: [usize; 2] = [256, 256];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelArch {
    pub kind: ModelKind,
    pub input_width: usize,
    pub hidden_sizes: Vec<usize>,
}

impl ModelArch {
    pub fn lr(input_width: usize) -> Self {
        ModelArch {
            kind: ModelKind::Lr,
            input_width,
            hidden_sizes: Vec::new(),
        }
    }

    pub fn mlp(input_width: usize, hidden_sizes: Vec<usize>) -> Self {
        ModelArch {
            kind: ModelKind::Mlp,
            input_width,
            hidden_sizes,
        }
    }

    /// Two LSTM layers as wide as the input by default.
    pub fn rnn(input_width: usize, hidden_sizes: Option<Vec<usize>>) -> Self {
        ModelArch {
            kind: ModelKind::Rnn,
            input_width,
            hidden_sizes: hidden_sizes.unwrap_or_else(|| vec![input_width, input_width]),
        }
    }

    /// The architecture for `kind` using the standard defaults when no
    /// hidden sizes are given.
    pub fn for_kind(kind: ModelKind, input_width: usize, hidden: Option<Vec<usize>>) -> Self {
        match kind {
            ModelKind::Lr => Self::lr(input_width),
            ModelKind::Mlp => Self::mlp(input_width, hidden.unwrap_or_else(|| DEFAULT_MLP_HIDDEN.to_vec())),
            ModelKind::Rnn => Self::rnn(input_width, hidden),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.input_width == 0 {
            return Err("input width must be positive".into());
        }
        if self.hidden_sizes.contains(&0) {
            return Err("hidden sizes must be positive".into());
        }
        match self.kind {
            ModelKind::Lr if !self.hidden_sizes.is_empty() => Err("LR has no hidden layers".into()),
            ModelKind::Rnn if self.hidden_sizes.is_empty() => Err("RNN needs at least one LSTM layer".into()),
            _ => Ok(()),
        }
    }

    /// Parameter shapes in declaration order.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::new();
        let mut prev = self.input_width;
        for &h in &self.hidden_sizes {
            if self.kind.is_sequential() {
                shapes.push(vec![4 * h, prev]);
                shapes.push(vec![4 * h, h]);
                shapes.push(vec![4 * h]);
            } else {
                shapes.push(vec![h, prev]);
                shapes.push(vec![h]);
            }
            prev = h;
        }
        shapes.push(vec![1, prev]);
        shapes.push(vec![1]);
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.shapes().iter().map(|s| s.iter().product::<usize>()).sum()
    }
}

/// One training or scoring example. Feed-forward models treat each of the
/// `steps` rows as an independent time-slice; the RNN reads them as one
/// sequence. The example's loss is the mean BCE over its rows.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a, F> {
    pub inputs: &'a [F],
    pub steps: usize,
    pub label: F,
    pub weight: F,
}

impl<'a, F: Scalar> Sample<'a, F> {
    pub fn new(inputs: &'a [F], steps: usize, label: F) -> Self {
        Sample {
            inputs,
            steps,
            label,
            weight: F::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model<F> {
    pub arch: ModelArch,
    pub params: Params<F>,
}

impl<F: Scalar> Model<F> {
    /// Glorot-uniform weights, zero biases, LSTM forget-gate biases at one.
    pub fn init(arch: ModelArch, seed: u64) -> Self {
        arch.validate().expect("valid architecture");
        let mut rng = rng::stream(seed, "init");
        let sequential = arch.kind.is_sequential();
        let tensors = arch
            .shapes()
            .into_iter()
            .map(|shape| match shape.as_slice() {
                [rows, cols] => glorot_uniform(*cols, *rows, &mut rng),
                [n] if sequential && *n > 1 => {
                    let h = n / 4;
                    let mut b = Tensor::zeros(&[*n]);
                    b.data_mut()[h..2 * h].iter_mut().for_each(|v| *v = F::one());
                    b
                }
                _ => Tensor::zeros(&shape),
            })
            .collect();
        Model {
            arch,
            params: Params::new(tensors),
        }
    }

    pub fn zeros(arch: ModelArch) -> Self {
        let tensors = arch.shapes().iter().map(|s| Tensor::zeros(s)).collect();
        Model {
            arch,
            params: Params::new(tensors),
        }
    }

    pub fn from_params(arch: ModelArch, params: Params<F>) -> Result<Self, String> {
        arch.validate()?;
        let shapes = arch.shapes();
        if params.tensors().len() != shapes.len()
            || params.tensors().iter().zip(&shapes).any(|(t, s)| t.shape() != s.as_slice())
        {
            return Err("parameter shapes do not match the architecture".into());
        }
        Ok(Model { arch, params })
    }

    pub fn input_width(&self) -> usize {
        self.arch.input_width
    }

    /// Per-row output logits.
    pub fn logits(&self, inputs: &[F], steps: usize) -> Vec<F> {
        debug_assert_eq!(inputs.len(), steps * self.arch.input_width);
        if steps == 0 {
            return Vec::new();
        }
        match self.arch.kind {
            ModelKind::Rnn => lstm::forward(&self.params, &self.arch.hidden_sizes, inputs, steps).logits,
            _ => {
                let n = self.arch.hidden_sizes.len();
                let mut acts = Vec::new();
                inputs
                    .chunks_exact(self.arch.input_width)
                    .map(|x| dense::forward(&self.params, n, x, &mut acts))
                    .collect()
            }
        }
    }

    /// Per-row probabilities: independent slice scores for LR/MLP, per-step
    /// outputs of the sequence for the RNN.
    pub fn predict(&self, inputs: &[F], steps: usize) -> Vec<F> {
        self.logits(inputs, steps).into_iter().map(sigmoid).collect()
    }

    /// Weighted mean over samples of each sample's mean-over-rows BCE.
    pub fn loss(&self, batch: &[Sample<'_, F>]) -> F {
        if batch.is_empty() {
            return F::zero();
        }
        let total: F = batch
            .iter()
            .map(|s| {
                let per_row: F = self
                    .predict(s.inputs, s.steps)
                    .into_iter()
                    .map(|p| bce(p, s.label))
                    .sum();
                s.weight * per_row / F::of(s.steps as f64)
            })
            .sum();
        total / F::of(batch.len() as f64)
    }

    /// Loss and its exact gradient with respect to every parameter.
    pub fn loss_and_grad(&self, batch: &[Sample<'_, F>]) -> (F, Params<F>) {
        let mut grads = Params::zeros_like(&self.params);
        if batch.is_empty() {
            return (F::zero(), grads);
        }
        let n = F::of(batch.len() as f64);
        let mut total = F::zero();
        let hidden = &self.arch.hidden_sizes;
        let mut acts = Vec::new();
        for s in batch {
            if s.steps == 0 {
                continue;
            }
            let scale = s.weight / (F::of(s.steps as f64) * n);
            match self.arch.kind {
                ModelKind::Rnn => {
                    let trace = lstm::forward(&self.params, hidden, s.inputs, s.steps);
                    let mut dlogits = Vec::with_capacity(s.steps);
                    let mut sum = F::zero();
                    for &z in &trace.logits {
                        let p = sigmoid(z);
                        sum += bce(p, s.label);
                        dlogits.push(bce_logit_grad(p, s.label) * scale);
                    }
                    total += s.weight * sum / F::of(s.steps as f64);
                    lstm::backward(&self.params, &mut grads, hidden, s.inputs, s.steps, &trace, &dlogits);
                }
                _ => {
                    let mut sum = F::zero();
                    for x in s.inputs.chunks_exact(self.arch.input_width) {
                        let z = dense::forward(&self.params, hidden.len(), x, &mut acts);
                        let p = sigmoid(z);
                        sum += bce(p, s.label);
                        let d = bce_logit_grad(p, s.label) * scale;
                        dense::backward(&self.params, &mut grads, hidden.len(), x, &acts, d);
                    }
                    total += s.weight * sum / F::of(s.steps as f64);
                }
            }
        }
        (total / n, grads)
    }
}

/// Logistic regression on one time-slice: `sigmoid(W x + b)`.
pub fn lr_forward<F: Scalar>(x: &[F], model: &Model<F>) -> F {
    assert_eq!(model.arch.kind, ModelKind::Lr);
    feed_forward(x, model)
}

/// MLP on one time-slice. Identical code path to [`lr_forward`], which is
/// the zero-hidden-layer case.
pub fn mlp_forward<F: Scalar>(x: &[F], model: &Model<F>) -> F {
    assert_ne!(model.arch.kind, ModelKind::Rnn);
    feed_forward(x, model)
}

fn feed_forward<F: Scalar>(x: &[F], model: &Model<F>) -> F {
    assert_eq!(x.len(), model.arch.input_width);
    let mut acts = Vec::new();
    sigmoid(dense::forward(&model.params, model.arch.hidden_sizes.len(), x, &mut acts))
}

/// Per-timestep probabilities of the LSTM for a `steps x width` matrix.
pub fn lstm_forward<F: Scalar>(x: &[F], steps: usize, model: &Model<F>) -> Vec<F> {
    assert_eq!(model.arch.kind, ModelKind::Rnn);
    assert!(steps >= 1, "lstm_forward needs at least one timestep");
    model.predict(x, steps)
}
