//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use emrbench_core::cohort::{encode_drugs, make_partition, select_inputs, subsample_training, Partition, Split};
use emrbench_core::eval::{auroc, ReportBundle};
use emrbench_core::experiment::{build_cohort, fit_guarded, prepare, run_experiment, run_prepared, ExperimentConfig};
use emrbench_core::ingest::{IngestStats, LongRecord};
use emrbench_core::nn::{Model, ModelArch, ModelKind, Sample};
use emrbench_core::pivot::{catalog_features, pivot_encounter, MatrixState};
use emrbench_core::synth::{generate, SynthConfig};
use emrbench_core::train::{fit, ScheduleConfig, Trainable};
use emrbench_core::transform::{impute, standardize};
use emrbench_core::{
    DrugEncoding, Disposition, EncounterMeta, InputType, PermutationSpec, Result, Unit, VariableCatalog, VariableKind,
    VariableSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

fn within(elapsed: Duration, limit_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit_s, format!("{s:.1}s (limit {limit_s}s)"))
}

// 1. Gradient correctness.

fn numeric_grad(model: &Model<f64>, batch: &[Sample<'_, f64>], h: f64) -> Vec<f64> {
    let mut probe = model.clone();
    (0..model.params.count())
        .map(|i| {
            let orig = *probe.params.scalar_mut(i);
            *probe.params.scalar_mut(i) = orig + h;
            let up = probe.loss(batch);
            *probe.params.scalar_mut(i) = orig - h;
            let down = probe.loss(batch);
            *probe.params.scalar_mut(i) = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn gradient_case(arch: ModelArch, steps: usize, seed: u64) -> f64 {
    let mut model: Model<f64> = Model::init(arch.clone(), seed);
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    // Zero biases can put a ReLU input exactly on the kink.
    for i in 0..model.params.count() {
        *model.params.scalar_mut(i) += r.random_range(-0.5..0.5);
    }
    let data: Vec<(Vec<f64>, f64)> = (0..6)
        .map(|i| {
            let x = (0..arch.input_width * steps).map(|_| r.random_range(-2.0..2.0)).collect();
            (x, (i % 2) as f64)
        })
        .collect();
    let batch: Vec<Sample<'_, f64>> = data.iter().map(|(x, y)| Sample::new(x, steps, *y)).collect();
    let analytic = model.loss_and_grad(&batch).1.flat();
    let numeric = numeric_grad(&model, &batch, 1e-4);
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let cases = [
        ("LR(5)", ModelArch::lr(5), 1),
        ("MLP 5-4-3", ModelArch::mlp(5, vec![4, 3]), 1),
        ("LSTM 1x3, T=4", ModelArch::rnn(5, Some(vec![3])), 4),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, arch, steps) in cases {
        let worst = (0..3).map(|s| gradient_case(arch.clone(), steps, s)).fold(0.0, f64::max);
        ok &= worst < 1e-4;
        parts.push(format!("{name} max rel err {worst:.1e}"));
    }
    let (fast, t) = within(start.elapsed(), 10.0);
    verdict(ok && fast, format!("{}; {t}", parts.join(", ")))
}

// 2. AUROC oracle.

fn pairwise(scores: &[(f64, u8)]) -> f64 {
    let pos: Vec<f64> = scores.iter().filter(|s| s.1 == 1).map(|s| s.0).collect();
    let neg: Vec<f64> = scores.iter().filter(|s| s.1 == 0).map(|s| s.0).collect();
    let mut total = 0.0;
    for p in &pos {
        for n in &neg {
            total += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    total / (pos.len() * neg.len()) as f64
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut ties = 0;
    for _ in 0..200 {
        let n = r.random_range(2..=1000);
        let levels = r.random_range(2..=40);
        let mut s: Vec<(f64, u8)> = (0..n)
            .map(|_| (r.random_range(0..levels) as f64 / levels as f64, r.random_range(0..2u8)))
            .collect();
        s[0].1 = 1;
        s[1].1 = 0;
        let distinct: BTreeSet<u64> = s.iter().map(|v| v.0.to_bits()).collect();
        ties += (distinct.len() < s.len()) as usize;
        worst = worst.max((auroc(&s).unwrap() - pairwise(&s)).abs());
    }
    let (fast, t) = within(start.elapsed(), 10.0);
    verdict(
        worst < 1e-12 && fast && ties > 0,
        format!("200 instances ({ties} with ties), max |diff| {worst:.1e}; {t}"),
    )
}

// 3. Pipeline invariants.

fn random_metas(r: &mut ChaCha8Rng, n: usize) -> Vec<EncounterMeta> {
    let patients = r.random_range(1..=n);
    let cticu: BTreeSet<usize> = (0..patients).filter(|_| r.random_bool(0.2)).collect();
    (0..n)
        .map(|i| {
            let p = r.random_range(0..patients);
            let unit = if cticu.contains(&p) && r.random_bool(0.7) { Unit::Cticu } else { Unit::Picu };
            EncounterMeta {
                encounter_id: format!("e{i}"),
                patient_id: format!("p{p}"),
                unit,
                disposition: if r.random_bool(0.1) { Disposition::Died } else { Disposition::Survived },
                length_of_stay: 48.0,
                statics: BTreeMap::new(),
            }
        })
        .collect()
}

fn split_is_patient_disjoint(metas: &[EncounterMeta], p: &Partition) -> bool {
    let mut seen: BTreeMap<&str, Split> = BTreeMap::new();
    for m in metas {
        let s = p.split_of(&m.encounter_id).unwrap();
        if m.unit == Unit::Cticu && s != Split::TestCticu {
            return false;
        }
        if *seen.entry(&m.patient_id).or_insert(s) != s {
            return false;
        }
    }
    true
}

fn pipeline_invariants() -> Result<Vec<(String, bool)>> {
    let mut checks = Vec::new();
    let mut r = ChaCha8Rng::seed_from_u64(3);

    // Round trip through pivot and flatten without collisions.
    let catalog = VariableCatalog::new(
        (0..6)
            .map(|i| VariableSpec::vital(&format!("v{i}"), -1e6, 1e6))
            .collect(),
    )?;
    let features = catalog_features(&catalog);
    let mut round_trip = true;
    for _ in 0..200 {
        let mut cells = BTreeSet::new();
        for _ in 0..r.random_range(1..60) {
            cells.insert((r.random_range(0..30u32), r.random_range(0..6usize)));
        }
        let expected: Vec<(f64, usize, f64)> =
            cells.iter().map(|&(t, c)| (t as f64 * 0.5, c, (t * 7 + c as u32) as f64)).collect();
        let mut records: Vec<LongRecord> = expected
            .iter()
            .map(|&(time, column, value)| LongRecord {
                patient_id: "p".into(),
                encounter_id: "e".into(),
                time,
                column,
                value,
            })
            .collect();
        records.reverse();
        let pivoted = pivot_encounter("e", &records, &features)?;
        round_trip &= pivoted.collisions == 0 && pivoted.matrix.flatten() == expected;
    }
    checks.push(("pivot/flatten round trip".to_string(), round_trip));

    let synth = generate(&SynthConfig {
        picu_encounters: 400,
        cticu_encounters: 100,
        seed: 17,
        ..SynthConfig::default()
    })?;
    let cohort = build_cohort(synth.catalog, synth.records, synth.metas, IngestStats::default())?;
    let catalog = &cohort.catalog;
    let partition = make_partition(&cohort.metas, 5);
    let subset = subsample_training(&partition, 0.5, 5)?;
    let params = fit_guarded(&cohort, &partition, &subset)?;

    let mut idempotent = true;
    let mut externals_in_range = true;
    let mut binary_ok = true;
    let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); catalog.width()];
    for (enc, m) in &cohort.matrices {
        let z = standardize(m, &params)?;
        if subset.contains(enc) {
            for (i, c) in z.cells().iter().enumerate() {
                if let Some(v) = c {
                    pooled[i % catalog.width()].push(*v);
                }
            }
        }
        let once = impute(&z, catalog)?;
        idempotent &= impute(&once, catalog)? == once && once.state() == MatrixState::Imputed;
        for col in catalog.external_columns() {
            externals_in_range &= once.column(col).all(|v| v.is_some_and(|v| (0.0..=1.0).contains(&v)));
        }
        let binary = encode_drugs(&once, catalog, DrugEncoding::Binary)?;
        for (j, f) in binary.features().iter().enumerate() {
            if f.kind(catalog) == VariableKind::Drug {
                binary_ok &= binary.column(j).all(|v| v == Some(0.0) || v == Some(1.0));
            }
        }
        for it in [InputType::Combined, InputType::Internals, InputType::Externals] {
            let sel = select_inputs(&once, catalog, it)?;
            for scheme in [DrugEncoding::None, DrugEncoding::Mesh] {
                if it == InputType::Internals {
                    continue;
                }
                let enc = encode_drugs(&sel, catalog, scheme)?;
                for (j, f) in enc.features().iter().enumerate() {
                    if f.kind(catalog).is_external() {
                        externals_in_range &= enc.column(j).all(|v| v.is_some_and(|v| (0.0..=1.0).contains(&v)));
                    }
                }
            }
        }
    }
    checks.push(("impute idempotence".to_string(), idempotent));

    let mut worst: f64 = 0.0;
    for col in catalog.internal_columns() {
        let v = &pooled[col];
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        worst = worst.max(mean.abs()).max((std - 1.0).abs());
    }
    checks.push((format!("training mean/std (max dev {worst:.1e})"), worst < 1e-9));
    checks.push(("external cells in [0,1]".to_string(), externals_in_range));
    checks.push(("binary drug cells in {0,1}".to_string(), binary_ok));

    let mut disjoint = true;
    for i in 0..1000 {
        let n = r.random_range(1..80);
        let metas = random_metas(&mut r, n);
        disjoint &= split_is_patient_disjoint(&metas, &make_partition(&metas, i));
    }
    checks.push(("patient-level split disjointness x1000".to_string(), disjoint));
    Ok(checks)
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    match pipeline_invariants() {
        Ok(checks) => {
            let (fast, t) = within(start.elapsed(), 30.0);
            let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
            let names: Vec<&str> = checks.iter().map(|c| c.0.as_str()).collect();
            let detail = if failed.is_empty() {
                format!("{}; {t}", names.join(", "))
            } else {
                format!("failed: {}; {t}", failed.join(", "))
            };
            verdict(failed.is_empty() && fast, detail)
        }
        Err(e) => verdict(false, format!("pipeline error: {e}")),
    }
}

// 4. Schedule conformance.

struct Scripted {
    curve: Vec<f64>,
    epoch: usize,
    lrs: Vec<f64>,
}

impl Trainable for Scripted {
    type Snapshot = usize;
    fn run_epoch(&mut self, epoch: usize, lr: f64) -> Result<f64> {
        self.epoch = epoch;
        self.lrs.push(lr);
        Ok(0.0)
    }
    fn validation_loss(&mut self) -> Result<f64> {
        Ok(self.curve[(self.epoch - 1).min(self.curve.len() - 1)])
    }
    fn snapshot(&self) -> usize {
        self.epoch
    }
}

struct Expected {
    reductions: Vec<usize>,
    stop: Option<usize>,
    best: usize,
}

fn criterion_4() -> Verdict {
    const P: usize = 15;
    const CAP: usize = 120;
    let mut curves: Vec<(&str, Vec<f64>, Expected)> = Vec::new();
    // Constant: nothing beats epoch 1.
    curves.push((
        "constant",
        vec![1.0; CAP],
        Expected {
            reductions: vec![1 + P, 1 + 2 * P],
            stop: Some(1 + 3 * P),
            best: 1,
        },
    ));
    // Strictly decreasing: never plateaus, runs to the cap.
    curves.push((
        "monotone",
        (1..=CAP).map(|e| 1.0 / e as f64).collect(),
        Expected {
            reductions: vec![],
            stop: None,
            best: CAP,
        },
    ));
    // Flat, a dip five epochs after the first reduction, then flat above it.
    let dip = 1 + P + 5;
    curves.push((
        "late dip",
        (1..=CAP)
            .map(|e| if e < dip { 1.0 } else if e == dip { 0.5 } else { 0.6 })
            .collect(),
        Expected {
            reductions: vec![1 + P, dip + P],
            stop: Some(dip + 2 * P),
            best: dip,
        },
    ));
    // Improves for ten epochs then flattens.
    curves.push((
        "improve then flat",
        (1..=CAP).map(|e| 1.0 / e.min(10) as f64).collect(),
        Expected {
            reductions: vec![10 + P, 10 + 2 * P],
            stop: Some(10 + 3 * P),
            best: 10,
        },
    ));
    // Alternating: odd epochs up to 19 improve, even epochs are worse.
    curves.push((
        "alternating",
        (1..=CAP)
            .map(|e| if e % 2 == 1 && e <= 19 { 1.0 - 0.01 * e as f64 } else { 2.0 })
            .collect(),
        Expected {
            reductions: vec![19 + P, 19 + 2 * P],
            stop: Some(19 + 3 * P),
            best: 19,
        },
    ));

    let cfg = ScheduleConfig {
        patience: P,
        factor: 5.0,
        max_reductions: 2,
        max_epochs: CAP,
    };
    let mut failures = Vec::new();
    for (name, curve, exp) in curves {
        let mut s = Scripted {
            curve,
            epoch: 0,
            lrs: Vec::new(),
        };
        let (best, history) = fit(&mut s, cfg, 1e-3).unwrap();
        let stop = history.stopped_by_schedule.then(|| history.last_epoch());
        let expected_last = exp.stop.unwrap_or(CAP);
        let lr_ok = s.lrs.iter().enumerate().all(|(i, &lr)| {
            let epoch = i + 1;
            let cuts = exp.reductions.iter().filter(|&&r| r < epoch).count() as i32;
            (lr - 1e-3 / 5f64.powi(cuts)).abs() < 1e-18
        });
        let ok = history.reduction_epochs() == exp.reductions
            && stop == exp.stop
            && history.last_epoch() == expected_last
            && best == exp.best
            && history.best_epoch == exp.best
            && lr_ok;
        if !ok {
            failures.push(format!(
                "{name}: got reductions {:?} stop {stop:?} best {best}",
                history.reduction_epochs()
            ));
        }
    }
    if failures.is_empty() {
        verdict(true, "5 scripted curves match (constant, monotone, late dip, improve-then-flat, alternating)")
    } else {
        verdict(false, failures.join("; "))
    }
}

// 5-7. Experiments.

fn cell(bundle: &ReportBundle, spec: PermutationSpec, model: ModelKind, test: Split) -> Option<f64> {
    let runs: Vec<f64> = bundle
        .runs
        .iter()
        .filter(|r| r.permutation == spec && r.model == model && r.test_set == test)
        .map(|r| r.auroc)
        .collect();
    (!runs.is_empty()).then(|| runs.iter().sum::<f64>() / runs.len() as f64)
}

fn load_config(name: &str, out: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&demo_dir().join(name))?;
    cfg.output_dir = out.to_path_buf();
    Ok(cfg)
}

fn criterion_5(scratch: &Path) -> Verdict {
    let start = Instant::now();
    let run = || -> Result<ReportBundle> {
        let cfg = load_config("desk.toml", &scratch.join("desk"))?;
        let cohort = emrbench_core::experiment::load_cohort(&cfg)?;
        let prepared = prepare(&cohort, &cfg)?;
        run_prepared(&prepared, &cfg, None)
    };
    let bundle = match run() {
        Ok(b) => b,
        Err(e) => return verdict(false, format!("run failed: {e}")),
    };
    let base = PermutationSpec::BASELINE;
    let tenth = PermutationSpec { training_fraction: 0.1, ..base };
    let internals = PermutationSpec { input_type: InputType::Internals, ..base };
    let externals = PermutationSpec { input_type: InputType::Externals, ..base };
    let picu = Split::TestPicu;
    let mut ok = true;
    let mut lines = Vec::new();
    for model in [ModelKind::Lr, ModelKind::Mlp, ModelKind::Rnn] {
        let get = |s, t| cell(&bundle, s, model, t).unwrap_or(f64::NAN);
        let (full, low) = (get(base, picu), get(tenth, picu));
        let (c, i, e) = (full, get(internals, picu), get(externals, picu));
        let cticu = get(base, Split::TestCticu);
        let a = full - low >= 0.02;
        let b = c >= i && i > e && c - e >= 0.03;
        let gap = cticu < full;
        ok &= a && b && gap;
        lines.push(format!(
            "{model}: (a) {full:.3}-{low:.3}={:.3} {} (b) C {c:.3} I {i:.3} E {e:.3} {} (c) CTICU {cticu:.3} < PICU {full:.3} {}",
            full - low,
            if a { "ok" } else { "FAIL" },
            if b { "ok" } else { "FAIL" },
            if gap { "ok" } else { "FAIL" },
        ));
    }
    let lr_base = cell(&bundle, base, ModelKind::Lr, picu).unwrap_or(f64::NAN);
    let fixture = lr_base > 0.8;
    lines.push(format!("LR baseline PICU {lr_base:.3} > 0.8 {}", if fixture { "ok" } else { "FAIL" }));
    let (fast, t) = within(start.elapsed(), 1800.0);
    lines.push(t);
    verdict(ok && fixture && fast, lines.join("\n      "))
}

fn criterion_6(scratch: &Path) -> Verdict {
    let run = || -> Result<ReportBundle> {
        let cfg = load_config("null.toml", &scratch.join("null"))?;
        let cohort = emrbench_core::experiment::load_cohort(&cfg)?;
        let prepared = prepare(&cohort, &cfg)?;
        run_prepared(&prepared, &cfg, None)
    };
    let bundle = match run() {
        Ok(b) => b,
        Err(e) => return verdict(false, format!("run failed: {e}")),
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for model in [ModelKind::Lr, ModelKind::Mlp, ModelKind::Rnn] {
        let seeds: Vec<f64> = bundle
            .runs
            .iter()
            .filter(|r| r.model == model && r.test_set == Split::TestPicu && r.permutation.is_baseline())
            .map(|r| r.auroc)
            .collect();
        let mean = seeds.iter().sum::<f64>() / seeds.len() as f64;
        let inside = seeds.len() == 3 && (0.45..=0.55).contains(&mean);
        ok &= inside;
        let per: Vec<String> = seeds.iter().map(|v| format!("{v:.3}")).collect();
        parts.push(format!("{model} mean {mean:.3} [{}]", per.join(", ")));
    }
    verdict(ok, parts.join(", "))
}

fn criterion_7(scratch: &Path) -> Verdict {
    let run = |dir: &str| -> Result<Vec<u8>> {
        let cfg = load_config("exp.toml", &scratch.join(dir))?;
        run_experiment(&cfg)?;
        std::fs::read(cfg.output_dir.join("bundle.json")).map_err(|e| emrbench_core::Error::Io {
            path: cfg.output_dir.join("bundle.json"),
            source: e,
        })
    };
    match (run("demo_a"), run("demo_b")) {
        (Ok(a), Ok(b)) => verdict(a == b && !a.is_empty(), format!("bundle sizes {} / {} bytes, identical: {}", a.len(), b.len(), a == b)),
        (Err(e), _) | (_, Err(e)) => verdict(false, format!("run failed: {e}")),
    }
}

// 8. Parameter counts.

fn criterion_8() -> Verdict {
    let w = 397;
    let dense = |sizes: &[usize]| sizes.windows(2).map(|p| (p[0] + 1) * p[1]).sum::<usize>();
    let lstm = |input: usize, hidden: &[usize]| {
        let mut prev = input;
        let mut total = 0;
        for &h in hidden {
            total += 4 * h * (prev + h + 1);
            prev = h;
        }
        total + prev + 1
    };
    let mlp_expected = dense(&[w, 256, 256, 1]);
    let rnn_expected = lstm(w, &[w, w]);
    let mlp = ModelArch::for_kind(ModelKind::Mlp, w, None);
    let rnn = ModelArch::for_kind(ModelKind::Rnn, w, None);
    let mlp_n = Model::<f32>::zeros(mlp.clone()).params.count();
    let rnn_n = Model::<f32>::zeros(rnn.clone()).params.count();
    let ratio = rnn_n as f64 / mlp_n as f64;
    let ok = mlp_n == mlp_expected
        && rnn_n == rnn_expected
        && mlp.param_count() == mlp_n
        && rnn.param_count() == rnn_n
        && (13.0..=17.0).contains(&ratio);
    verdict(ok, format!("MLP {mlp_n}, RNN {rnn_n}, ratio {ratio:.2}"))
}

// 9. Partition fixture.

fn criterion_9() -> Verdict {
    const PATIENTS: usize = 12_093;
    const ENCOUNTERS: usize = 16_706;
    let mut r = ChaCha8Rng::seed_from_u64(9);
    let mut counts = vec![1usize; PATIENTS];
    for _ in 0..ENCOUNTERS - PATIENTS {
        counts[r.random_range(0..PATIENTS)] += 1;
    }
    let mut metas = Vec::with_capacity(ENCOUNTERS);
    for (p, &k) in counts.iter().enumerate() {
        for j in 0..k {
            metas.push(EncounterMeta {
                encounter_id: format!("e{p}-{j}"),
                patient_id: format!("p{p}"),
                unit: Unit::Picu,
                disposition: Disposition::Survived,
                length_of_stay: 24.0,
                statics: BTreeMap::new(),
            });
        }
    }
    let partition = make_partition(&metas, 0);
    let mut patients: BTreeMap<Split, BTreeSet<&str>> = BTreeMap::new();
    for m in &metas {
        patients
            .entry(partition.split_of(&m.encounter_id).unwrap())
            .or_default()
            .insert(&m.patient_id);
    }
    let pc = |s| patients.get(&s).map_or(0, |v| v.len());
    let ec = |s| partition.count(s);
    let patient_ok = (pc(Split::Train), pc(Split::Validation), pc(Split::TestPicu)) == (6047, 3023, 3023);
    let targets = [(Split::Train, 8404.0), (Split::Validation, 4122.0), (Split::TestPicu, 4176.0)];
    let enc_ok = targets.iter().all(|&(s, t)| ((ec(s) as f64 - t) / t).abs() <= 0.05);
    let disjoint = split_is_patient_disjoint(&metas, &partition);
    verdict(
        patient_ok && enc_ok && disjoint,
        format!(
            "patients {}/{}/{}, encounters {}/{}/{} (targets 8404/4122/4176)",
            pc(Split::Train),
            pc(Split::Validation),
            pc(Split::TestPicu),
            ec(Split::Train),
            ec(Split::Validation),
            ec(Split::TestPicu)
        ),
    )
}

fn main() {
    let scratch = tempfile::tempdir().expect("scratch dir");
    let quick = std::env::var_os("EMRBENCH_ACCEPTANCE_QUICK").is_some();
    let mut criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("1 gradient correctness", Box::new(criterion_1)),
        ("2 auroc oracle", Box::new(criterion_2)),
        ("3 pipeline invariants", Box::new(criterion_3)),
        ("4 schedule conformance", Box::new(criterion_4)),
    ];
    if !quick {
        criteria.push(("5 desk-scale trends", Box::new(|| criterion_5(scratch.path()))));
        criteria.push(("6 no-signal null", Box::new(|| criterion_6(scratch.path()))));
        criteria.push(("7 determinism", Box::new(|| criterion_7(scratch.path()))));
    }
    criteria.push(("8 parameter-count ratio", Box::new(criterion_8)));
    criteria.push(("9 partition fixture", Box::new(criterion_9)));

    let mut failed = 0;
    for (name, check) in &criteria {
        let start = Instant::now();
        let v = check();
        failed += !v.passed as usize;
        println!(
            "criterion {name}: {} ({:.1}s) {}",
            if v.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if quick {
        println!("criteria 5-7 skipped (EMRBENCH_ACCEPTANCE_QUICK set)");
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
