//! Experiment runner: loads or synthesizes a cohort, prepares every
//! permutation of the grid, trains each model for each seed on a bounded
//! worker pool and assembles the report bundle.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::VariableCatalog;
use crate::cohort::{
    encode_drugs, make_partition, select_inputs, subsample_training, Partition, PermutationGrid, PermutationSpec,
    Split,
};
use crate::error::{Error, Result};
use crate::eval::{auroc, build_rows, predict_at_horizon, ReportBundle, RunResult, DEFAULT_HORIZON_HOURS};
use crate::ingest::{curate_all, drop_outside_stay, parse_events, parse_meta, EncounterMeta, IngestStats, LongRecord};
use crate::nn::{write_checkpoint, ModelArch, ModelKind};
use crate::pivot::{catalog_features, group_by_encounter, pivot_encounter, PatientMatrix};
use crate::synth::{generate, SynthConfig};
use crate::train::{train_model, Dataset, TrainConfig};
use crate::transform::{fit_standardizer, impute, standardize, StandardizationParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub catalog: PathBuf,
    pub events: PathBuf,
    pub meta: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub partition_seed: u64,
    pub seeds: Vec<u64>,
    /// Added to every training seed.
    pub seed_offset: u64,
    pub models: Vec<ModelKind>,
    pub mlp_hidden: Option<Vec<usize>>,
    pub rnn_hidden: Option<Vec<usize>>,
    pub horizon_hours: f64,
    /// Worker threads; all available cores when absent.
    pub workers: Option<usize>,
    /// Fit standardization on each fraction's subset rather than the full
    /// training set.
    pub refit_standardizer_per_fraction: bool,
    /// Write per-run histories and checkpoints.
    pub write_artifacts: bool,
    pub data: Option<DataPaths>,
    pub synth: Option<SynthConfig>,
    pub grid: PermutationGrid,
    pub train: TrainConfig<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            output_dir: PathBuf::from("emrbench_out"),
            partition_seed: 0,
            seeds: vec![0, 1, 2, 3, 4],
            seed_offset: 0,
            models: vec![ModelKind::Lr, ModelKind::Mlp, ModelKind::Rnn],
            mlp_hidden: None,
            rnn_hidden: None,
            horizon_hours: DEFAULT_HORIZON_HOURS,
            workers: None,
            refit_standardizer_per_fraction: true,
            write_artifacts: true,
            data: None,
            synth: None,
            grid: PermutationGrid::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML config. Relative paths resolve against the config's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(d) = &mut self.data {
            fix(&mut d.catalog);
            fix(&mut d.events);
            fix(&mut d.meta);
        }
        if let Some(c) = self.synth.as_mut().and_then(|s| s.catalog.as_mut()) {
            fix(c);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.models.is_empty() {
            return bad("at least one model is required");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return bad("seeds must be distinct");
        }
        match (&self.data, &self.synth) {
            (Some(_), Some(_)) => return bad("give either [data] or [synth], not both"),
            (None, None) => return bad("a [data] or [synth] section is required"),
            (None, Some(s)) => s.validate()?,
            _ => {}
        }
        if !(self.horizon_hours > 0.0 && self.horizon_hours.is_finite()) {
            return bad("horizon_hours must be positive");
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1");
        }
        for (name, h) in [("mlp_hidden", &self.mlp_hidden), ("rnn_hidden", &self.rnn_hidden)] {
            if h.as_ref().is_some_and(|h| h.contains(&0) || (name == "rnn_hidden" && h.is_empty())) {
                return bad(&format!("{name} must list positive layer sizes"));
            }
        }
        self.grid.validate()?;
        self.train.validate()
    }

    fn hidden_for(&self, kind: ModelKind) -> Option<Vec<usize>> {
        match kind {
            ModelKind::Lr => None,
            ModelKind::Mlp => self.mlp_hidden.clone(),
            ModelKind::Rnn => self.rnn_hidden.clone(),
        }
    }

    /// The configuration as recorded in the bundle. Output location is
    /// omitted so that bundles compare equal across output directories.
    fn echo(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
            obj.remove("workers");
            obj.insert(
                "disclosures".into(),
                serde_json::json!({
                    "standardization": if self.refit_standardizer_per_fraction {
                        "refit on each training-fraction subset"
                    } else {
                        "fit once on the full training set"
                    },
                    "fraction_subsets": "nested across fractions, drawn with the partition seed",
                    "horizon_fallback": "encounters with no data before the horizon are scored on their first row and flagged",
                }),
            );
        }
        Ok(v)
    }
}

/// A curated, pivoted cohort ready for partitioning.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub catalog: VariableCatalog,
    pub metas: Vec<EncounterMeta>,
    /// Raw patient-matrices keyed by encounter.
    pub matrices: BTreeMap<String, PatientMatrix>,
    pub stats: IngestStats,
    /// Same-cell collisions resolved while pivoting.
    pub collisions: usize,
    /// Encounters with metadata but no events; excluded.
    pub empty_encounters: Vec<String>,
}

/// Curates and pivots long-format records against the metadata.
pub fn build_cohort(
    catalog: VariableCatalog,
    records: Vec<LongRecord>,
    metas: Vec<EncounterMeta>,
    mut stats: IngestStats,
) -> Result<Cohort> {
    let records = curate_all(records, &catalog, &mut stats);
    let records = drop_outside_stay(records, &metas, &mut stats);
    let features = catalog_features(&catalog);
    let mut matrices = BTreeMap::new();
    let mut collisions = 0;
    for (enc, recs) in group_by_encounter(records) {
        let p = pivot_encounter(&enc, &recs, &features).map_err(|e| e.in_run("pivot", format!("encounter {enc}")))?;
        collisions += p.collisions;
        matrices.insert(enc, p.matrix);
    }
    let (metas, empty): (Vec<EncounterMeta>, Vec<EncounterMeta>) =
        metas.into_iter().partition(|m| matrices.contains_key(&m.encounter_id));
    Ok(Cohort {
        catalog,
        metas,
        matrices,
        stats,
        collisions,
        empty_encounters: empty.into_iter().map(|m| m.encounter_id).collect(),
    })
}

pub fn load_cohort(cfg: &ExperimentConfig) -> Result<Cohort> {
    if let Some(s) = &cfg.synth {
        let synth = generate(s)?;
        let stats = IngestStats {
            rows: synth.records.len(),
            emitted: synth.records.len(),
            ..IngestStats::default()
        };
        return build_cohort(synth.catalog, synth.records, synth.metas, stats);
    }
    let d = cfg.data.as_ref().ok_or_else(|| Error::Config("no data source".into()))?;
    let catalog = VariableCatalog::load(&d.catalog)?;
    let open = |p: &Path| File::open(p).map_err(|e| Error::io(p, e));
    let metas = parse_meta(open(&d.meta)?)?;
    let (records, stats) = parse_events(open(&d.events)?, &catalog)?;
    build_cohort(catalog, records, metas, stats)
}

/// Imputed matrices of one permutation with their labels.
#[derive(Debug, Clone)]
pub struct PreparedSet {
    pub matrices: Vec<PatientMatrix>,
    pub labels: Vec<u8>,
    pub stays: Vec<f64>,
}

impl PreparedSet {
    fn dataset(&self, width: usize) -> Dataset<f64> {
        let mut d = Dataset::new(width);
        for (m, &y) in self.matrices.iter().zip(&self.labels) {
            d.push(m.dense(), m.rows(), y as f64);
        }
        d
    }
}

#[derive(Debug, Clone)]
pub struct PreparedPermutation {
    pub spec: PermutationSpec,
    pub width: usize,
    pub train_encounters: usize,
    pub train: Dataset<f64>,
    pub val: Dataset<f64>,
    pub tests: Vec<(Split, PreparedSet)>,
}

/// Fits the standardizer on exactly the given training encounters, checking
/// each one is a Train encounter of the active subset.
pub fn fit_guarded(
    cohort: &Cohort,
    partition: &Partition,
    subset: &BTreeSet<String>,
) -> Result<StandardizationParams> {
    let mut fit_on = Vec::with_capacity(subset.len());
    for enc in subset {
        if partition.split_of(enc) != Some(Split::Train) {
            return Err(Error::Leakage(format!("encounter `{enc}` is not a training encounter")));
        }
        fit_on.push(&cohort.matrices[enc]);
    }
    fit_standardizer(&fit_on, &cohort.catalog)
}

/// Standardized, imputed full-width matrices for every encounter.
fn transform_all(cohort: &Cohort, params: &StandardizationParams) -> Result<BTreeMap<String, PatientMatrix>> {
    cohort
        .matrices
        .par_iter()
        .map(|(enc, m)| {
            let z = standardize(m, params)?;
            Ok((enc.clone(), impute(&z, &cohort.catalog)?))
        })
        .collect()
}

pub struct Prepared {
    pub partition: Partition,
    pub standardizers: Vec<(f64, StandardizationParams)>,
    pub permutations: Vec<PreparedPermutation>,
}

pub fn prepare(cohort: &Cohort, cfg: &ExperimentConfig) -> Result<Prepared> {
    let partition = make_partition(&cohort.metas, cfg.partition_seed);
    let labels: BTreeMap<&str, (u8, f64)> = cohort
        .metas
        .iter()
        .map(|m| (m.encounter_id.as_str(), (m.disposition.label(), m.length_of_stay)))
        .collect();
    let perms = cfg.grid.permutations();
    let mut fractions: Vec<f64> = Vec::new();
    for p in &perms {
        if !fractions.contains(&p.training_fraction) {
            fractions.push(p.training_fraction);
        }
    }
    let full_train: BTreeSet<String> = partition.encounters(Split::Train).iter().map(|s| s.to_string()).collect();
    let mut standardizers = Vec::new();
    let mut prepared = Vec::new();
    let mut shared: Option<BTreeMap<String, PatientMatrix>> = None;
    for &f in &fractions {
        let subset = subsample_training(&partition, f, cfg.partition_seed)?;
        let coords = format!("fraction {f}");
        let imputed = if cfg.refit_standardizer_per_fraction || shared.is_none() {
            let fit_set = if cfg.refit_standardizer_per_fraction { &subset } else { &full_train };
            let params = fit_guarded(cohort, &partition, fit_set).map_err(|e| e.in_run("transform", coords.clone()))?;
            let imputed = transform_all(cohort, &params).map_err(|e| e.in_run("transform", coords.clone()))?;
            standardizers.push((f, params));
            if !cfg.refit_standardizer_per_fraction {
                shared = Some(imputed.clone());
            }
            imputed
        } else {
            shared.clone().expect("shared matrices")
        };
        for p in perms.iter().filter(|p| p.training_fraction == f) {
            let coords = format!("permutation {}", perm_key(p));
            let permute = |enc: &str| -> Result<PatientMatrix> {
                let m = select_inputs(&imputed[enc], &cohort.catalog, p.input_type)?;
                encode_drugs(&m, &cohort.catalog, p.drug_encoding)
            };
            let collect = |encs: &mut dyn Iterator<Item = &str>| -> Result<PreparedSet> {
                let mut set = PreparedSet { matrices: Vec::new(), labels: Vec::new(), stays: Vec::new() };
                for enc in encs {
                    set.matrices.push(permute(enc)?);
                    let (y, los) = labels[enc];
                    set.labels.push(y);
                    set.stays.push(los);
                }
                Ok(set)
            };
            let train = collect(&mut subset.iter().map(String::as_str)).map_err(|e| e.in_run("cohort", coords.clone()))?;
            let val = collect(&mut partition.encounters(Split::Validation).into_iter())
                .map_err(|e| e.in_run("cohort", coords.clone()))?;
            let width = train
                .matrices
                .first()
                .map(|m| m.width())
                .ok_or_else(|| Error::InvalidArgument(format!("empty training set for {coords}")))?;
            let mut tests = Vec::new();
            for split in [Split::TestPicu, Split::TestCticu] {
                let set = collect(&mut partition.encounters(split).into_iter())
                    .map_err(|e| e.in_run("cohort", coords.clone()))?;
                if !set.matrices.is_empty() {
                    tests.push((split, set));
                }
            }
            prepared.push(PreparedPermutation {
                spec: *p,
                width,
                train_encounters: train.matrices.len(),
                train: train.dataset(width),
                val: val.dataset(width),
                tests,
            });
        }
    }
    Ok(Prepared {
        partition,
        standardizers,
        permutations: prepared,
    })
}

pub fn perm_key(p: &PermutationSpec) -> String {
    format!(
        "f{:.2}_{}_{}",
        p.training_fraction,
        p.input_type.label().to_lowercase(),
        p.drug_encoding.label().to_lowercase()
    )
}

/// Trains one (permutation, model, seed) cell and scores both test sets.
fn run_cell(
    prep: &PreparedPermutation,
    kind: ModelKind,
    seed: u64,
    cfg: &ExperimentConfig,
    artifacts: Option<&Path>,
) -> Result<Vec<RunResult>> {
    let arch = ModelArch::for_kind(kind, prep.width, cfg.hidden_for(kind));
    let train_cfg = TrainConfig {
        seed: seed + cfg.seed_offset,
        ..cfg.train.clone()
    };
    let (trained, history) = train_model(arch, &prep.train, &prep.val, &train_cfg).map_err(|e| e.in_run("train", ""))?;
    if let Some(dir) = artifacts {
        let stem = format!("{}__{}__s{}", perm_key(&prep.spec), kind.label().to_lowercase(), seed);
        let create = |name: String| {
            let p = dir.join(name);
            File::create(&p).map(BufWriter::new).map_err(|e| Error::io(p, e))
        };
        history.write_csv(create(format!("{stem}.history.csv"))?)?;
        write_checkpoint(&trained.model, create(format!("{stem}.ckpt"))?)?;
    }
    let mut out = Vec::new();
    for (split, set) in &prep.tests {
        let mut scores = Vec::with_capacity(set.matrices.len());
        let mut full = Vec::new();
        let (mut post, mut short) = (0, 0);
        for ((m, &y), &los) in set.matrices.iter().zip(&set.labels).zip(&set.stays) {
            let p = predict_at_horizon(&trained.model, m, cfg.horizon_hours).map_err(|e| e.in_run("eval", ""))?;
            let is_short = los < cfg.horizon_hours;
            post += p.post_horizon as usize;
            short += is_short as usize;
            scores.push((p.probability, y));
            if !p.post_horizon && !is_short {
                full.push((p.probability, y));
            }
        }
        let value = auroc(&scores).map_err(|e| e.in_run("eval", format!("test set {split}")))?;
        out.push(RunResult {
            permutation: prep.spec,
            model: kind,
            seed,
            test_set: *split,
            auroc: value,
            auroc_full_horizon: auroc(&full).ok(),
            n_encounters: scores.len(),
            n_post_horizon: post,
            n_short_stay: short,
            train_encounters: prep.train_encounters,
            best_epoch: trained.best_epoch,
            epochs_run: history.last_epoch(),
        });
    }
    Ok(out)
}

/// Runs every grid cell and returns the bundle. Results are sorted before
/// aggregation, so the bundle does not depend on scheduling.
pub fn run_prepared(prepared: &Prepared, cfg: &ExperimentConfig, artifacts: Option<&Path>) -> Result<ReportBundle> {
    let cells: Vec<(usize, ModelKind, u64)> = (0..prepared.permutations.len())
        .flat_map(|i| cfg.models.iter().flat_map(move |&m| cfg.seeds.iter().map(move |&s| (i, m, s))))
        .collect();
    let run = || -> Result<Vec<Vec<RunResult>>> {
        cells
            .par_iter()
            .map(|&(i, kind, seed)| {
                let prep = &prepared.permutations[i];
                run_cell(prep, kind, seed, cfg, artifacts).map_err(|e| match e {
                    Error::Run { module, source, .. } => Error::Run {
                        module,
                        coords: format!("permutation {}, model {kind}, seed {seed}", perm_key(&prep.spec)),
                        source,
                    },
                    other => other.in_run("run", format!("permutation {}, model {kind}, seed {seed}", perm_key(&prep.spec))),
                })
            })
            .collect()
    };
    let nested = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let order: BTreeMap<String, usize> = prepared
        .permutations
        .iter()
        .enumerate()
        .map(|(i, p)| (perm_key(&p.spec), i))
        .collect();
    let mut runs: Vec<RunResult> = nested.into_iter().flatten().collect();
    runs.sort_by_key(|r| (order[&perm_key(&r.permutation)], r.model, r.seed, r.test_set));
    let rows = build_rows(&runs, &cfg.grid, &cfg.models);
    Ok(ReportBundle {
        config: cfg.echo()?,
        runs,
        rows,
    })
}

/// Runs the full experiment and writes artifacts and reports under the
/// output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    let runs_dir = out.join("runs");
    fs::create_dir_all(&runs_dir).map_err(|e| Error::io(&runs_dir, e))?;
    let cohort = load_cohort(cfg)?;
    let prepared = prepare(&cohort, cfg)?;
    let create = |p: PathBuf| File::create(&p).map(BufWriter::new).map_err(|e| Error::io(p, e));
    prepared.partition.write_csv(create(out.join("partition.csv"))?)?;
    for (f, params) in &prepared.standardizers {
        params.write_csv(create(out.join(format!("standardizer_f{f:.2}.csv")))?, &cohort.catalog)?;
    }
    let bundle = run_prepared(&prepared, cfg, cfg.write_artifacts.then_some(runs_dir.as_path()))?;
    crate::eval::emit_report(&bundle, out)?;
    Ok(bundle)
}
