//! Validation-driven training: plateau patience, learning-rate reduction,
//! a stop after the last reduction's patience runs out, and best-weights
//! restoration.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{sequence_dropout, MaskScope, Model, ModelArch, Mode, RmsProp, Sample};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig<F> {
    pub batch_size: usize,
    pub patience_epochs: usize,
    pub lr_reduction_factor: F,
    pub max_reductions: usize,
    pub dropout_rate: f64,
    pub dropout_scope: MaskScope,
    pub learning_rate: F,
    pub rho: F,
    pub epsilon: F,
    /// Guard against runs that keep improving forever.
    pub max_epochs: usize,
    /// Loss weight for positive (died) examples; `None` is plain BCE.
    pub positive_class_weight: Option<F>,
    pub seed: u64,
}

impl<F: Scalar> Default for TrainConfig<F> {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            patience_epochs: 15,
            lr_reduction_factor: F::of(5.0),
            max_reductions: 2,
            dropout_rate: 0.2,
            dropout_scope: MaskScope::PerFeature,
            learning_rate: F::of(crate::nn::rmsprop::DEFAULT_LEARNING_RATE),
            rho: F::of(crate::nn::rmsprop::DEFAULT_RHO),
            epsilon: F::of(crate::nn::rmsprop::DEFAULT_EPSILON),
            max_epochs: 500,
            positive_class_weight: None,
            seed: 0,
        }
    }
}

impl<F: Scalar> TrainConfig<F> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if !(self.lr_reduction_factor > F::one()) {
            return bad("lr_reduction_factor must exceed 1");
        }
        if !(self.learning_rate > F::zero()) {
            return bad("learning_rate must be positive");
        }
        if self.max_epochs == 0 || self.patience_epochs == 0 {
            return bad("max_epochs and patience_epochs must be positive");
        }
        Ok(())
    }

    pub fn schedule(&self) -> ScheduleConfig {
        ScheduleConfig {
            patience: self.patience_epochs,
            factor: self.lr_reduction_factor.to_f64_lossy(),
            max_reductions: self.max_reductions,
            max_epochs: self.max_epochs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub patience: usize,
    pub factor: f64,
    pub max_reductions: usize,
    pub max_epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Improved,
    Wait,
    Reduce,
    Stop,
}

/// Patience bookkeeping on the validation loss. Only a strictly lower
/// best-so-far resets the counter.
#[derive(Debug, Clone)]
pub struct PlateauSchedule {
    cfg: ScheduleConfig,
    best: f64,
    best_epoch: usize,
    wait: usize,
    reductions: usize,
}

impl PlateauSchedule {
    pub fn new(cfg: ScheduleConfig) -> Self {
        PlateauSchedule {
            cfg,
            best: f64::INFINITY,
            best_epoch: 0,
            wait: 0,
            reductions: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> Decision {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.wait = 0;
            return Decision::Improved;
        }
        self.wait += 1;
        if self.wait < self.cfg.patience {
            return Decision::Wait;
        }
        self.wait = 0;
        if self.reductions < self.cfg.max_reductions {
            self.reductions += 1;
            Decision::Reduce
        } else {
            Decision::Stop
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn reductions(&self) -> usize {
        self.reductions
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_bce: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
    /// The learning rate was reduced after this epoch.
    pub reduced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub reductions: usize,
    /// False when the epoch cap ended training.
    pub stopped_by_schedule: bool,
}

impl TrainHistory {
    pub fn best_val(&self) -> f64 {
        self.epochs
            .iter()
            .find(|e| e.epoch == self.best_epoch)
            .map_or(f64::NAN, |e| e.val_bce)
    }

    pub fn reduction_epochs(&self) -> Vec<usize> {
        self.epochs.iter().filter(|e| e.reduced).map(|e| e.epoch).collect()
    }

    pub fn last_epoch(&self) -> usize {
        self.epochs.last().map_or(0, |e| e.epoch)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "train_loss", "val_bce", "lr", "reduced"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.val_bce.to_string(),
                e.lr.to_string(),
                e.reduced.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<history>", e))?;
        Ok(())
    }
}

/// Something the schedule can train: one epoch at a given learning rate,
/// a validation loss, and a snapshot of its current weights.
pub trait Trainable {
    type Snapshot;

    fn run_epoch(&mut self, epoch: usize, learning_rate: f64) -> Result<f64>;
    fn validation_loss(&mut self) -> Result<f64>;
    fn snapshot(&self) -> Self::Snapshot;
}

/// Drives `learner` under the plateau schedule. Epochs are numbered from 1.
/// Returns the snapshot taken at the best validation epoch.
pub fn fit<T: Trainable>(learner: &mut T, cfg: ScheduleConfig, initial_lr: f64) -> Result<(T::Snapshot, TrainHistory)> {
    let mut schedule = PlateauSchedule::new(cfg);
    let mut lr = initial_lr;
    let mut epochs = Vec::new();
    let mut best = None;
    let mut stopped_by_schedule = false;
    for epoch in 1..=cfg.max_epochs {
        let train_loss = learner.run_epoch(epoch, lr)?;
        let val_bce = learner.validation_loss()?;
        if !val_bce.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                batch: 0,
                message: format!("validation loss {val_bce}"),
            });
        }
        let decision = schedule.observe(epoch, val_bce);
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_bce,
            lr,
            reduced: decision == Decision::Reduce,
        });
        match decision {
            Decision::Improved => best = Some(learner.snapshot()),
            Decision::Wait => {}
            Decision::Reduce => lr /= cfg.factor,
            Decision::Stop => {
                stopped_by_schedule = true;
                break;
            }
        }
    }
    let history = TrainHistory {
        epochs,
        best_epoch: schedule.best_epoch(),
        reductions: schedule.reductions(),
        stopped_by_schedule,
    };
    let snapshot = best.ok_or_else(|| Error::Contract("training produced no epochs".into()))?;
    Ok((snapshot, history))
}

/// One example with owned inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<F> {
    pub inputs: Vec<F>,
    pub steps: usize,
    pub label: F,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset<F> {
    pub width: usize,
    pub examples: Vec<Example<F>>,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(width: usize) -> Self {
        Dataset {
            width,
            examples: Vec::new(),
        }
    }

    pub fn push(&mut self, inputs: Vec<F>, steps: usize, label: F) {
        assert_eq!(inputs.len(), steps * self.width, "example shape mismatch");
        self.examples.push(Example { inputs, steps, label });
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Every row as its own one-step example carrying its sequence's label.
    pub fn slices(&self) -> Dataset<F> {
        let mut out = Dataset::new(self.width);
        for e in &self.examples {
            for row in e.inputs.chunks_exact(self.width) {
                out.push(row.to_vec(), 1, e.label);
            }
        }
        out
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.examples.iter().any(|e| e.label > F::zero());
        let neg = self.examples.iter().any(|e| e.label == F::zero());
        pos && neg
    }

    pub fn samples(&self) -> Vec<Sample<'_, F>> {
        self.examples
            .iter()
            .map(|e| Sample::new(&e.inputs, e.steps, e.label))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<F> {
    pub model: Model<F>,
    pub best_epoch: usize,
    pub best_val_bce: f64,
}

/// Mini-batch RMSprop over a dataset with validation after every epoch.
pub struct NetLearner<'a, F> {
    pub model: Model<F>,
    optimizer: RmsProp<F>,
    train: &'a Dataset<F>,
    val: &'a Dataset<F>,
    cfg: &'a TrainConfig<F>,
}

impl<'a, F: Scalar> NetLearner<'a, F> {
    pub fn new(model: Model<F>, train: &'a Dataset<F>, val: &'a Dataset<F>, cfg: &'a TrainConfig<F>) -> Self {
        NetLearner {
            model,
            optimizer: RmsProp::new(cfg.learning_rate, cfg.rho, cfg.epsilon),
            train,
            val,
            cfg,
        }
    }
}

impl<F: Scalar> Trainable for NetLearner<'_, F> {
    type Snapshot = Model<F>;

    fn run_epoch(&mut self, epoch: usize, learning_rate: f64) -> Result<f64> {
        use rand::seq::SliceRandom;

        self.optimizer.set_learning_rate(F::of(learning_rate));
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut rng::indexed(self.cfg.seed, "shuffle", epoch as u64));
        let width = self.train.width;
        let mut weighted_loss = 0.0;
        for (b, chunk) in order.chunks(self.cfg.batch_size).enumerate() {
            let mut dropout_rng = rng::indexed(self.cfg.seed, "dropout", ((epoch as u64) << 32) | b as u64);
            let inputs: Vec<Vec<F>> = chunk
                .iter()
                .map(|&i| {
                    sequence_dropout(
                        &self.train.examples[i].inputs,
                        width,
                        self.cfg.dropout_rate,
                        &mut dropout_rng,
                        Mode::Train,
                        self.cfg.dropout_scope,
                    )
                })
                .collect();
            let batch: Vec<Sample<'_, F>> = chunk
                .iter()
                .zip(&inputs)
                .map(|(&i, x)| {
                    let e = &self.train.examples[i];
                    let weight = match self.cfg.positive_class_weight {
                        Some(w) if e.label > F::zero() => w,
                        _ => F::one(),
                    };
                    Sample {
                        inputs: x,
                        steps: e.steps,
                        label: e.label,
                        weight,
                    }
                })
                .collect();
            let (loss, grads) = self.model.loss_and_grad(&batch);
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b,
                    message: format!(
                        "loss {loss}, parameter norm {}, gradient norm {}",
                        self.model.params.norm(),
                        grads.norm()
                    ),
                });
            }
            self.optimizer.step(&mut self.model.params, &grads);
            weighted_loss += loss.to_f64_lossy() * chunk.len() as f64;
        }
        Ok(weighted_loss / self.train.len() as f64)
    }

    fn validation_loss(&mut self) -> Result<f64> {
        Ok(self.model.loss(&self.val.samples()).to_f64_lossy())
    }

    fn snapshot(&self) -> Model<F> {
        self.model.clone()
    }
}

/// Trains `arch` from a seeded Glorot initialization and returns the
/// weights from the epoch with the lowest validation BCE. Feed-forward
/// models train on individual time-slices; the RNN on whole sequences.
pub fn train_model<F: Scalar>(
    arch: ModelArch,
    train: &Dataset<F>,
    val: &Dataset<F>,
    cfg: &TrainConfig<F>,
) -> Result<(TrainedModel<F>, TrainHistory)> {
    cfg.validate()?;
    arch.validate().map_err(Error::Config)?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be non-empty".into()));
    }
    if !train.has_both_classes() {
        let has_positive = train.examples.iter().any(|e| e.label > F::zero());
        return Err(Error::MissingClass(if has_positive { "negative" } else { "positive" }));
    }
    if train.width != arch.input_width || val.width != arch.input_width {
        return Err(Error::Contract(format!(
            "dataset width {} / {} does not match model input {}",
            train.width, val.width, arch.input_width
        )));
    }
    let sliced;
    let (train, val) = if arch.kind.is_sequential() {
        (train, val)
    } else {
        sliced = (train.slices(), val.slices());
        (&sliced.0, &sliced.1)
    };
    let model = Model::init(arch, rng::derive(cfg.seed, "weights", 0));
    let mut learner = NetLearner::new(model, train, val, cfg);
    let (best, history) = fit(&mut learner, cfg.schedule(), cfg.learning_rate.to_f64_lossy())?;
    let trained = TrainedModel {
        model: best,
        best_epoch: history.best_epoch,
        best_val_bce: history.best_val(),
    };
    Ok((trained, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scripted {
        losses: Vec<f64>,
        seen: usize,
        lrs: Vec<f64>,
    }

    impl Trainable for Scripted {
        type Snapshot = usize;
        fn run_epoch(&mut self, _epoch: usize, lr: f64) -> Result<f64> {
            self.lrs.push(lr);
            Ok(0.0)
        }
        fn validation_loss(&mut self) -> Result<f64> {
            let v = self.losses[self.seen.min(self.losses.len() - 1)];
            self.seen += 1;
            Ok(v)
        }
        fn snapshot(&self) -> usize {
            self.seen
        }
    }

    fn schedule() -> ScheduleConfig {
        TrainConfig::<f64>::default().schedule()
    }

    #[test]
    fn constant_loss_reduces_twice_then_stops() {
        let mut s = Scripted { losses: vec![0.3], seen: 0, lrs: vec![] };
        let (snap, h) = fit(&mut s, schedule(), 1e-3).unwrap();
        assert_eq!(snap, 1);
        assert_eq!(h.best_epoch, 1);
        assert_eq!(h.reduction_epochs(), vec![16, 31]);
        assert_eq!(h.last_epoch(), 46);
        assert!(h.stopped_by_schedule);
        assert!((s.lrs[16] - 2e-4).abs() < 1e-18);
        assert!((s.lrs[31] - 4e-5).abs() < 1e-18);
    }

    #[test]
    fn strictly_decreasing_runs_to_the_cap() {
        let losses: Vec<f64> = (0..600).map(|i| 1.0 / (i + 1) as f64).collect();
        let mut s = Scripted { losses, seen: 0, lrs: vec![] };
        let (_, h) = fit(&mut s, schedule(), 1e-3).unwrap();
        assert_eq!(h.last_epoch(), 500);
        assert_eq!(h.reductions, 0);
        assert!(!h.stopped_by_schedule);
        assert_eq!(h.best_epoch, 500);
    }

    #[test]
    fn ties_do_not_reset_patience() {
        let mut losses = vec![0.5, 0.4];
        losses.extend(std::iter::repeat(0.4).take(100));
        let mut s = Scripted { losses, seen: 0, lrs: vec![] };
        let (_, h) = fit(&mut s, schedule(), 1e-3).unwrap();
        assert_eq!(h.best_epoch, 2);
        assert_eq!(h.reduction_epochs(), vec![17, 32]);
        assert_eq!(h.last_epoch(), 47);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::<f64>::default();
        assert!(cfg.validate().is_ok());
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig::<f64> { dropout_rate: 1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig::<f64> { lr_reduction_factor: 1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    fn toy(n: usize, width: usize, seed: u64) -> Dataset<f64> {
        use rand::Rng;
        let mut r = rng::stream(seed, "toy");
        let mut d = Dataset::new(width);
        for i in 0..n {
            let y = (i % 3 == 0) as u8 as f64;
            let x: Vec<f64> = (0..width).map(|j| r.random_range(-1.0..1.0) + if j == 0 { 2.0 * y } else { 0.0 }).collect();
            d.push(x, 1, y);
        }
        d
    }

    #[test]
    fn single_class_is_rejected() {
        let mut d = Dataset::new(2);
        d.push(vec![0.0, 1.0], 1, 0.0);
        let err = train_model(ModelArch::lr(2), &d, &d, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::MissingClass("positive")));
    }

    #[test]
    fn training_is_deterministic_and_restores_best() {
        let (tr, va) = (toy(200, 3, 1), toy(80, 3, 2));
        let cfg = TrainConfig::<f64> { max_epochs: 40, patience_epochs: 5, seed: 9, ..Default::default() };
        let (a, ha) = train_model(ModelArch::mlp(3, vec![4]), &tr, &va, &cfg).unwrap();
        let (b, hb) = train_model(ModelArch::mlp(3, vec![4]), &tr, &va, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        let min = ha.epochs.iter().map(|e| e.val_bce).fold(f64::INFINITY, f64::min);
        assert_eq!(a.best_val_bce, min);
        assert_eq!(a.model.loss(&va.samples()), min);
        assert!(ha.reductions <= cfg.max_reductions);
        assert!(ha.epochs[0].val_bce > min);
    }

    #[test]
    fn history_csv_header() {
        let h = TrainHistory { epochs: vec![], best_epoch: 0, reductions: 0, stopped_by_schedule: false };
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,train_loss,val_bce,lr,reduced\n");
    }
}
