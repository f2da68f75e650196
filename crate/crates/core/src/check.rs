//! Self-test suite: finite-difference gradient checks, the pairwise AUROC
//! oracle and pipeline idempotence on a small synthetic cohort.

use rand::Rng as _;

use crate::cohort::{encode_drugs, DrugEncoding};
use crate::eval::auroc;
use crate::experiment::{build_cohort, fit_guarded, Cohort};
use crate::ingest::IngestStats;
use crate::nn::{Model, ModelArch, Sample};
use crate::rng;
use crate::synth::{generate, SynthConfig};
use crate::transform::{impute, standardize};

/// Floor on the denominator of the relative error, so gradients that are
/// zero up to rounding do not inflate it.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub params: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares every analytic gradient entry with a central difference of
/// step `h`.
pub fn gradient_check(model: &Model<f64>, batch: &[Sample<'_, f64>], h: f64) -> GradCheck {
    let (_, grads) = model.loss_and_grad(batch);
    let analytic = grads.flat();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *probe.params.scalar_mut(i);
        *probe.params.scalar_mut(i) = orig + h;
        let up = probe.loss(batch);
        *probe.params.scalar_mut(i) = orig - h;
        let down = probe.loss(batch);
        *probe.params.scalar_mut(i) = orig;
        worst = worst.max(relative_error(a, (up - down) / (2.0 * h)));
    }
    GradCheck {
        max_rel_error: worst,
        params: analytic.len(),
    }
}

/// O(P*N) AUROC: concordant pairs plus half of tied pairs.
pub fn pairwise_auroc(scores: &[(f64, u8)]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for &(sp, _) in scores.iter().filter(|s| s.1 != 0) {
        for &(sn, _) in scores.iter().filter(|s| s.1 == 0) {
            pairs += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Random scores on a coarse grid, so ties are common, with both classes.
pub fn random_instance(seed: u64, index: u64, max_len: usize) -> Vec<(f64, u8)> {
    let mut r = rng::indexed(seed, "auroc-instance", index);
    let n = r.random_range(2..=max_len);
    let levels = r.random_range(2..=50u32);
    let mut v: Vec<(f64, u8)> = (0..n)
        .map(|_| (r.random_range(0..levels) as f64 / levels as f64, r.random_range(0..2u8)))
        .collect();
    v[0].1 = 1;
    v[1].1 = 0;
    v
}

/// Offsets every parameter, so zero-initialized biases do not leave
/// pre-activations exactly on a ReLU kink.
pub fn jitter(model: &mut Model<f64>, seed: u64) {
    let mut r = rng::stream(seed, "gradcheck-jitter");
    for i in 0..model.params.count() {
        *model.params.scalar_mut(i) += r.random_range(-0.5..0.5);
    }
}

/// A small batch of random sequences for gradient checks.
pub fn random_batch(width: usize, steps: usize, n: usize, seed: u64) -> Vec<(Vec<f64>, f64)> {
    let mut r = rng::stream(seed, "gradcheck-batch");
    (0..n)
        .map(|i| {
            let x = (0..width * steps).map(|_| r.random_range(-1.5..1.5)).collect();
            (x, (i % 2) as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn grad_outcome(name: &str, arch: ModelArch, steps: usize) -> CheckOutcome {
    let mut model: Model<f64> = Model::init(arch.clone(), 7);
    jitter(&mut model, 7);
    let data = random_batch(arch.input_width, steps, 4, 11);
    let batch: Vec<Sample<'_, f64>> = data.iter().map(|(x, y)| Sample::new(x, steps, *y)).collect();
    let g = gradient_check(&model, &batch, 1e-4);
    outcome(
        name,
        g.max_rel_error < 1e-4,
        format!("{} parameters, max relative error {:.2e}", g.params, g.max_rel_error),
    )
}

fn pipeline_outcome() -> CheckOutcome {
    let run = || -> crate::Result<String> {
        let synth = generate(&SynthConfig {
            picu_encounters: 120,
            cticu_encounters: 30,
            ..SynthConfig::default()
        })?;
        let cohort: Cohort = build_cohort(synth.catalog, synth.records, synth.metas, IngestStats::default())?;
        let partition = crate::cohort::make_partition(&cohort.metas, 0);
        let train = crate::cohort::subsample_training(&partition, 1.0, 0)?;
        let params = fit_guarded(&cohort, &partition, &train)?;
        let mut checked = 0;
        for m in cohort.matrices.values() {
            let once = impute(&standardize(m, &params)?, &cohort.catalog)?;
            let twice = impute(&once, &cohort.catalog)?;
            if once != twice {
                return Err(crate::Error::Contract(format!("impute not idempotent on `{}`", m.encounter_id)));
            }
            let binary = encode_drugs(&once, &cohort.catalog, DrugEncoding::Binary)?;
            if binary.cells().iter().flatten().any(|v| !v.is_finite()) {
                return Err(crate::Error::Contract("non-finite cell after encoding".into()));
            }
            checked += 1;
        }
        Ok(format!("{checked} encounters"))
    };
    match run() {
        Ok(d) => outcome("pipeline idempotence", true, d),
        Err(e) => outcome("pipeline idempotence", false, e.to_string()),
    }
}

/// Runs every check; all must pass for a healthy build.
pub fn self_test() -> Vec<CheckOutcome> {
    let mut out = vec![
        grad_outcome("gradient LR", ModelArch::lr(5), 1),
        grad_outcome("gradient MLP", ModelArch::mlp(5, vec![4, 3]), 1),
        grad_outcome("gradient LSTM", ModelArch::rnn(3, Some(vec![3])), 4),
    ];
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let s = random_instance(0, i, 1000);
        worst = worst.max((auroc(&s).unwrap_or(f64::NAN) - pairwise_auroc(&s)).abs());
    }
    out.push(outcome(
        "auroc oracle",
        worst < 1e-12,
        format!("200 instances, max difference {worst:.1e}"),
    ));
    out.push(pipeline_outcome());
    out
}
