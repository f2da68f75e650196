//! Seeded synthetic cohorts with a planted severity signal.
//!
//! Each encounter draws two latent components, physiologic `p` and
//! care-need `c` (logistic, unit variance), combined into a severity
//! `s = wp*p + wc*c` of unit variance. Mortality follows `sigmoid(a + b*s)`
//! with `a` calibrated to the unit's base rate. With `signal_strength > 0`,
//! `p` shifts vitals and labs, treatments start more often with `c` (and
//! partly `p`), and charting gets denser with `s`; at zero every feature is
//! independent of the label. CTICU encounters get per-encounter offsets on
//! selected vitals and routine treatments scaled by `unit_shift`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Exp, LogNormal, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{VariableCatalog, VariableKind, VariableSpec};
use crate::error::{Error, Result};
use crate::ingest::{write_events, write_meta, Disposition, EncounterMeta, LongRecord, Unit};
use crate::nn::sigmoid;
use crate::rng;

/// Slope of the log-odds of death in severity.
const OUTCOME_SLOPE: f64 = 3.0;
/// Weights of the physiologic and care-need components in severity.
const PHYSIOLOGIC_WEIGHT: f64 = 0.866;
const CARE_WEIGHT: f64 = 0.5;
/// Share of the physiologic component in treatment propensity.
const TREATMENT_PHYSIOLOGIC: f64 = 0.5;
/// Severity effect on internals, in units of the variable's spread.
const INTERNAL_LOAD: f64 = 0.45;
/// Between-encounter and per-measurement noise, same units.
const BASELINE_SD: f64 = 0.8;
const MEASUREMENT_SD: f64 = 0.5;
/// Log-rate change of charting density per unit of severity.
const CHARTING_SLOPE: f64 = 0.1;
/// Baseline log-odds of starting a treatment.
const TREATMENT_INTERCEPT: f64 = -1.8;
const TREATMENT_LOAD: f64 = 0.9;
const MESH_FREE_SCALE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub picu_encounters: usize,
    pub cticu_encounters: usize,
    /// Mean encounters per patient; counts are `1 + Poisson(mean - 1)`.
    pub picu_encounters_per_patient: f64,
    pub cticu_encounters_per_patient: f64,
    pub picu_mortality: f64,
    pub cticu_mortality: f64,
    /// Catalog CSV to generate for; the built-in demo catalog when absent.
    pub catalog: Option<PathBuf>,
    /// Mean charting moments per hour at average severity.
    pub events_per_hour: f64,
    pub los_median_hours: f64,
    pub los_sigma: f64,
    pub los_min_hours: f64,
    pub los_max_hours: f64,
    pub signal_strength: f64,
    pub unit_shift: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            picu_encounters: 2000,
            cticu_encounters: 600,
            picu_encounters_per_patient: 1.38,
            cticu_encounters_per_patient: 1.68,
            picu_mortality: 0.0485,
            cticu_mortality: 0.0332,
            catalog: None,
            events_per_hour: 0.5,
            los_median_hours: 36.0,
            los_sigma: 0.6,
            los_min_hours: 4.0,
            los_max_hours: 240.0,
            signal_strength: 1.0,
            unit_shift: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synth: {m}")));
        for (name, r) in [("picu_mortality", self.picu_mortality), ("cticu_mortality", self.cticu_mortality)] {
            if !(r > 0.0 && r < 1.0) {
                return bad(&format!("{name} must lie in (0, 1), got {r}"));
            }
        }
        for (name, m) in [
            ("picu_encounters_per_patient", self.picu_encounters_per_patient),
            ("cticu_encounters_per_patient", self.cticu_encounters_per_patient),
        ] {
            if !(m >= 1.0 && m.is_finite()) {
                return bad(&format!("{name} must be at least 1, got {m}"));
            }
        }
        if self.picu_encounters == 0 {
            return bad("picu_encounters must be positive");
        }
        if !(self.events_per_hour > 0.0 && self.events_per_hour.is_finite()) {
            return bad("events_per_hour must be positive");
        }
        if !(self.los_median_hours > 0.0 && self.los_sigma > 0.0 && self.los_sigma.is_finite()) {
            return bad("LOS median and sigma must be positive");
        }
        if !(self.los_min_hours > 0.0 && self.los_min_hours < self.los_max_hours) {
            return bad("LOS bounds must satisfy 0 < min < max");
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return bad("signal_strength must be a finite value >= 0");
        }
        if !(self.unit_shift >= 0.0 && self.unit_shift.is_finite()) {
            return bad("unit_shift must be a finite value >= 0");
        }
        Ok(())
    }

    pub fn load_catalog(&self) -> Result<VariableCatalog> {
        match &self.catalog {
            Some(path) => VariableCatalog::load(path),
            None => Ok(demo_catalog()),
        }
    }
}

/// Twenty variables: six vitals, six labs, six drugs under three MeSH
/// headings plus one unmapped, and two interventions.
pub fn demo_catalog() -> VariableCatalog {
    let specs = vec![
        VariableSpec::vital("heart_rate", 0.0, 300.0).with_aliases(["HR", "pulse"]),
        VariableSpec::vital("resp_rate", 0.0, 120.0).with_aliases(["RR"]),
        VariableSpec::vital("systolic_bp", 0.0, 300.0).with_aliases(["SBP"]),
        VariableSpec::vital("diastolic_bp", 0.0, 200.0).with_aliases(["DBP"]),
        VariableSpec::vital("spo2", 0.0, 100.0).with_aliases(["SpO2", "pulse_ox"]),
        VariableSpec::vital("temperature", 25.0, 45.0).with_aliases(["temp"]),
        VariableSpec::lab("lactate", 0.0, 30.0),
        VariableSpec::lab("creatinine", 0.0, 20.0),
        VariableSpec::lab("ph", 6.5, 8.0).with_aliases(["pH"]),
        VariableSpec::lab("potassium", 1.0, 10.0).with_aliases(["K"]),
        VariableSpec::lab("wbc", 0.0, 100.0),
        VariableSpec::lab("hemoglobin", 0.0, 25.0).with_aliases(["Hgb"]),
        VariableSpec::drug("epinephrine", 1.0, Some("Vasoconstrictor Agents")),
        VariableSpec::drug("norepinephrine", 1.0, Some("Vasoconstrictor Agents")),
        VariableSpec::drug("furosemide", 6.0, Some("Diuretics")),
        VariableSpec::drug("morphine", 0.3, Some("Analgesics, Opioid")),
        VariableSpec::drug("fentanyl", 5.0, Some("Analgesics, Opioid")),
        VariableSpec::drug("milrinone", 1.0, None),
        VariableSpec::intervention("mechanical_ventilation", 1.0),
        VariableSpec::intervention("dialysis", 1.0),
    ];
    VariableCatalog::new(specs).expect("demo catalog is valid")
}

/// Typical (mean, spread) for the demo vitals and labs.
fn typical(name: &str) -> Option<(f64, f64)> {
    Some(match name {
        "heart_rate" => (120.0, 22.0),
        "resp_rate" => (28.0, 7.0),
        "systolic_bp" => (98.0, 14.0),
        "diastolic_bp" => (55.0, 10.0),
        "spo2" => (95.0, 2.5),
        "temperature" => (37.0, 0.6),
        "lactate" => (1.8, 0.9),
        "creatinine" => (0.6, 0.25),
        "ph" => (7.38, 0.05),
        "potassium" => (4.0, 0.5),
        "wbc" => (10.0, 3.5),
        "hemoglobin" => (11.5, 1.6),
        _ => return None,
    })
}

/// Per-variable generation parameters.
#[derive(Debug, Clone)]
struct VarModel {
    kind: VariableKind,
    mean: f64,
    spread: f64,
    lo: f64,
    hi: f64,
    /// Signed severity load.
    load: f64,
    /// Probability of being charted at a moment.
    chart_prob: f64,
    /// CTICU offsets apply to this vital.
    shifted: bool,
}

fn var_models(catalog: &VariableCatalog, seed: u64) -> Vec<VarModel> {
    let mut vitals_seen = 0;
    catalog
        .specs()
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            let mut r = rng::indexed(seed, "variable", j as u64);
            let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            let (lo, hi) = spec.clamp_range();
            match spec.kind {
                VariableKind::Vital | VariableKind::Lab => {
                    let (lo_f, hi_f) = (
                        if lo.is_finite() { lo } else { -1e3 },
                        if hi.is_finite() { hi } else { 1e3 },
                    );
                    let (mean, spread) = typical(&spec.canonical_name)
                        .unwrap_or((lo_f + 0.4 * (hi_f - lo_f), 0.06 * (hi_f - lo_f)));
                    let shifted = spec.kind == VariableKind::Vital && {
                        vitals_seen += 1;
                        vitals_seen <= 3
                    };
                    VarModel {
                        kind: spec.kind,
                        mean,
                        spread,
                        lo,
                        hi,
                        load: sign * r.random_range(0.6..1.0),
                        chart_prob: if spec.kind == VariableKind::Vital { 0.9 } else { 0.35 },
                        shifted,
                    }
                }
                VariableKind::Drug | VariableKind::Intervention => {
                    let mesh_free = spec.kind == VariableKind::Drug && spec.mesh_heading().is_none();
                    VarModel {
                        kind: spec.kind,
                        mean: 0.0,
                        spread: 0.0,
                        lo,
                        hi,
                        load: r.random_range(0.6..1.0) * if mesh_free { MESH_FREE_SCALE } else { 1.0 },
                        chart_prob: 0.95,
                        shifted: false,
                    }
                }
            }
        })
        .collect()
}

/// Logistic severity scaled to unit variance.
fn severity_from_uniform(u: f64) -> f64 {
    (u / (1.0 - u)).ln() * 3f64.sqrt() / std::f64::consts::PI
}

/// Intercept `a` with `E[sigmoid(a + b*s)] = rate` by midpoint quadrature
/// over the quantiles of both components and bisection.
pub fn calibrate_intercept(rate: f64, slope: f64) -> f64 {
    const N: usize = 300;
    let q: Vec<f64> = (0..N).map(|i| severity_from_uniform((i as f64 + 0.5) / N as f64)).collect();
    let s: Vec<f64> = q
        .iter()
        .flat_map(|&p| q.iter().map(move |&c| PHYSIOLOGIC_WEIGHT * p + CARE_WEIGHT * c))
        .collect();
    let mean = |a: f64| s.iter().map(|&v| sigmoid(a + slope * v)).sum::<f64>() / s.len() as f64;
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone)]
pub struct SynthCohort {
    pub catalog: VariableCatalog,
    pub records: Vec<LongRecord>,
    pub metas: Vec<EncounterMeta>,
}

struct EncounterPlan {
    unit: Unit,
    patient_id: String,
    encounter_id: String,
    index: u64,
}

fn plan_unit(unit: Unit, target: usize, mean_per_patient: f64, seed: u64) -> Vec<EncounterPlan> {
    let tag = match unit {
        Unit::Picu => "picu",
        Unit::Cticu => "cticu",
    };
    let mut r = rng::stream(seed, &format!("patients:{tag}"));
    let extra = (mean_per_patient > 1.0).then(|| Poisson::new(mean_per_patient - 1.0).expect("valid rate"));
    let mut plans = Vec::with_capacity(target);
    let mut patient = 0usize;
    while plans.len() < target {
        let k = 1 + extra.as_ref().map_or(0, |p| p.sample(&mut r) as usize);
        let patient_id = format!("{tag}-p{patient:06}");
        for _ in 0..k.min(target - plans.len()) {
            let index = plans.len() as u64;
            plans.push(EncounterPlan {
                unit,
                patient_id: patient_id.clone(),
                encounter_id: format!("{tag}-e{index:06}"),
                index,
            });
        }
        patient += 1;
    }
    plans
}

fn round_to(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

fn generate_encounter(
    plan: &EncounterPlan,
    cfg: &SynthConfig,
    vars: &[VarModel],
    intercept: f64,
) -> (EncounterMeta, Vec<LongRecord>) {
    let tag = match plan.unit {
        Unit::Picu => "encounter:picu",
        Unit::Cticu => "encounter:cticu",
    };
    let mut r = rng::indexed(cfg.seed, tag, plan.index);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let physiologic = severity_from_uniform(r.random_range(1e-9..1.0 - 1e-9));
    let care = severity_from_uniform(r.random_range(1e-9..1.0 - 1e-9));
    let sev = PHYSIOLOGIC_WEIGHT * physiologic + CARE_WEIGHT * care;
    let died = r.random_bool(sigmoid(intercept + OUTCOME_SLOPE * sev));
    let signal = cfg.signal_strength * sev;
    let physiologic_signal = cfg.signal_strength * physiologic;
    let treatment_signal =
        cfg.signal_strength * (TREATMENT_PHYSIOLOGIC * physiologic + (1.0 - TREATMENT_PHYSIOLOGIC.powi(2)).sqrt() * care);
    let cticu = plan.unit == Unit::Cticu;
    let shift = if cticu { cfg.unit_shift } else { 0.0 };

    let los_dist = LogNormal::new(cfg.los_median_hours.ln(), cfg.los_sigma).expect("valid LOS");
    let los = round_to(los_dist.sample(&mut r).clamp(cfg.los_min_hours, cfg.los_max_hours), 0.01);

    // Charting moments on a 0.01 h grid, strictly increasing.
    let rate = cfg.events_per_hour * (CHARTING_SLOPE * signal).exp();
    let gap = Exp::new(rate).expect("positive rate");
    let mut moments = Vec::new();
    let mut t = r.random_range(0.0..0.5f64.min(los));
    loop {
        let rounded = round_to(t, 0.01);
        if rounded > los {
            break;
        }
        if moments.last().is_none_or(|&last| rounded > last) {
            moments.push(rounded);
        }
        t += gap.sample(&mut r);
    }

    let mut records = Vec::new();
    let mut push = |time: f64, column: usize, value: f64| {
        records.push(LongRecord {
            patient_id: plan.patient_id.clone(),
            encounter_id: plan.encounter_id.clone(),
            time,
            column,
            value,
        })
    };
    for (j, v) in vars.iter().enumerate() {
        if v.kind.is_internal() {
            let mut offset = BASELINE_SD * std_normal.sample(&mut r) + INTERNAL_LOAD * v.load * physiologic_signal;
            if v.shifted && shift > 0.0 {
                offset += shift * (1.0 + 2.5 * std_normal.sample(&mut r));
            }
            for (m, &time) in moments.iter().enumerate() {
                let charted = r.random_bool(v.chart_prob);
                let noise = MEASUREMENT_SD * std_normal.sample(&mut r);
                if !(charted || (m == 0 && v.kind == VariableKind::Vital)) {
                    continue;
                }
                let value = round_to(v.mean + v.spread * (offset + noise), 1e-3).clamp(v.lo, v.hi);
                push(time, j, value);
            }
        } else {
            let logit = TREATMENT_INTERCEPT + TREATMENT_LOAD * v.load * treatment_signal;
            let triggered = r.random_bool(sigmoid(logit));
            let routine = shift > 0.0 && r.random_bool((0.4 * shift).min(0.9));
            let start = r.random_range(0.0..1.0f64).powi(2) * los.min(12.0);
            let stop = start + Exp::new(1.0 / 24.0).expect("positive rate").sample(&mut r);
            let dose = r.random_range(0.2..1.0);
            if !(triggered || routine) {
                continue;
            }
            let limit = v.hi;
            for &time in moments.iter().filter(|&&m| m >= start && m <= stop) {
                if !r.random_bool(v.chart_prob) {
                    continue;
                }
                let value = if v.kind == VariableKind::Intervention {
                    limit
                } else {
                    round_to(limit * dose, limit * 1e-3).clamp(limit * 1e-3, limit)
                };
                push(time, j, value);
            }
        }
    }
    let meta = EncounterMeta {
        encounter_id: plan.encounter_id.clone(),
        patient_id: plan.patient_id.clone(),
        unit: plan.unit,
        disposition: if died { Disposition::Died } else { Disposition::Survived },
        length_of_stay: los,
        statics: Default::default(),
    };
    (meta, records)
}

/// Generates the cohort. Deterministic in the configuration; encounters are
/// generated in parallel from per-encounter seeds.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCohort> {
    cfg.validate()?;
    let catalog = cfg.load_catalog()?;
    let vars = var_models(&catalog, cfg.seed);
    let mut plans = plan_unit(Unit::Picu, cfg.picu_encounters, cfg.picu_encounters_per_patient, cfg.seed);
    plans.extend(plan_unit(Unit::Cticu, cfg.cticu_encounters, cfg.cticu_encounters_per_patient, cfg.seed));
    let a_picu = calibrate_intercept(cfg.picu_mortality, OUTCOME_SLOPE);
    let a_cticu = calibrate_intercept(cfg.cticu_mortality, OUTCOME_SLOPE);
    let generated: Vec<(EncounterMeta, Vec<LongRecord>)> = plans
        .par_iter()
        .map(|p| {
            let a = if p.unit == Unit::Picu { a_picu } else { a_cticu };
            generate_encounter(p, cfg, &vars, a)
        })
        .collect();
    let mut metas = Vec::with_capacity(generated.len());
    let mut records = Vec::new();
    for (m, rs) in generated {
        metas.push(m);
        records.extend(rs);
    }
    Ok(SynthCohort { catalog, records, metas })
}

/// Reads a synth TOML file. An optional top-level `output_dir` is returned
/// alongside the generator settings, resolved against the file's directory
/// like a relative `catalog` path.
pub fn load_config(path: &Path) -> Result<(SynthConfig, Option<PathBuf>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config_err = |e: toml::de::Error| Error::Config(format!("{}: {e}", path.display()));
    let mut table: toml::Table = toml::from_str(&text).map_err(config_err)?;
    let out = match table.remove("output_dir") {
        Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
        Some(other) => return Err(Error::Config(format!("output_dir must be a string, got {other}"))),
        None => None,
    };
    let mut cfg: SynthConfig = table.try_into().map_err(config_err)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
    cfg.catalog = cfg.catalog.map(resolve);
    cfg.validate()?;
    Ok((cfg, out.map(resolve)))
}

pub const EVENTS_FILE: &str = "events.csv";
pub const META_FILE: &str = "meta.csv";
pub const CATALOG_FILE: &str = "catalog.csv";

/// Paths of a cohort written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortFiles {
    pub catalog: PathBuf,
    pub events: PathBuf,
    pub meta: PathBuf,
}

impl CohortFiles {
    pub fn in_dir(dir: &Path) -> Self {
        CohortFiles {
            catalog: dir.join(CATALOG_FILE),
            events: dir.join(EVENTS_FILE),
            meta: dir.join(META_FILE),
        }
    }
}

/// Writes the catalog, event and metadata CSVs into `dir`.
pub fn write_cohort(cohort: &SynthCohort, dir: &Path) -> Result<CohortFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = CohortFiles::in_dir(dir);
    let create = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| Error::io(p, e));
    cohort.catalog.write_csv(create(&files.catalog)?)?;
    write_events(create(&files.events)?, &cohort.records, &cohort.catalog)?;
    write_meta(create(&files.meta)?, &cohort.metas)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{curate, parse_events, parse_meta};
    use std::collections::BTreeMap;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            picu_encounters: 300,
            cticu_encounters: 80,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn demo_catalog_shape() {
        let c = demo_catalog();
        assert_eq!(c.width(), 20);
        assert_eq!(c.internal_columns().len(), 12);
        assert_eq!(c.external_columns().len(), 8);
        assert!(c.has_mesh_headings());
    }

    #[test]
    fn calibration_hits_rate() {
        for rate in [0.0332, 0.0485, 0.3] {
            let a = calibrate_intercept(rate, OUTCOME_SLOPE);
            let n = 1000;
            let q: Vec<f64> = (0..n).map(|i| severity_from_uniform((i as f64 + 0.5) / n as f64)).collect();
            let mean = q
                .iter()
                .flat_map(|&p| q.iter().map(move |&c| sigmoid(a + OUTCOME_SLOPE * (PHYSIOLOGIC_WEIGHT * p + CARE_WEIGHT * c))))
                .sum::<f64>()
                / (n * n) as f64;
            // Coarser grid in the calibration truncates the tails slightly.
            assert!((mean - rate).abs() < 5e-3 * rate, "{rate} {mean}");
        }
    }

    #[test]
    fn mortality_within_binomial_bounds() {
        let cfg = SynthConfig {
            picu_encounters: 5000,
            cticu_encounters: 3000,
            ..SynthConfig::default()
        };
        let cohort = generate(&cfg).unwrap();
        for (unit, rate, n) in [(Unit::Picu, cfg.picu_mortality, 5000.0), (Unit::Cticu, cfg.cticu_mortality, 3000.0)] {
            let deaths = cohort
                .metas
                .iter()
                .filter(|m| m.unit == unit && m.disposition == Disposition::Died)
                .count() as f64;
            let sigma = (n * rate * (1.0 - rate)).sqrt();
            assert!((deaths - n * rate).abs() <= 3.0 * sigma, "{unit}: {deaths} deaths");
        }
    }

    #[test]
    fn values_in_limits_times_in_stay_and_increasing() {
        let cohort = generate(&small(3)).unwrap();
        let los: BTreeMap<&str, f64> = cohort.metas.iter().map(|m| (m.encounter_id.as_str(), m.length_of_stay)).collect();
        let mut last: BTreeMap<(&str, usize), f64> = BTreeMap::new();
        for r in &cohort.records {
            assert_eq!(curate(r.clone(), &cohort.catalog), *r);
            assert!(r.time >= 0.0 && r.time <= los[r.encounter_id.as_str()]);
            if let Some(prev) = last.insert((&r.encounter_id, r.column), r.time) {
                assert!(r.time > prev);
            }
        }
    }

    #[test]
    fn patients_stay_in_one_unit_and_counts_match() {
        let cohort = generate(&small(5)).unwrap();
        let picu = cohort.metas.iter().filter(|m| m.unit == Unit::Picu).count();
        assert_eq!((picu, cohort.metas.len() - picu), (300, 80));
        let mut units: BTreeMap<&str, Unit> = BTreeMap::new();
        for m in &cohort.metas {
            assert_eq!(*units.entry(&m.patient_id).or_insert(m.unit), m.unit);
        }
        let patients = units.values().filter(|&&u| u == Unit::Picu).count();
        assert!(patients < 300 && patients > 150, "{patients}");
    }

    #[test]
    fn files_are_deterministic_and_parse_back() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let cfg = small(9);
        let fa = write_cohort(&generate(&cfg).unwrap(), a.path()).unwrap();
        let fb = write_cohort(&generate(&cfg).unwrap(), b.path()).unwrap();
        for (x, y) in [(&fa.events, &fb.events), (&fa.meta, &fb.meta), (&fa.catalog, &fb.catalog)] {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
        let catalog = VariableCatalog::load(&fa.catalog).unwrap();
        let (records, stats) = parse_events(File::open(&fa.events).unwrap(), &catalog).unwrap();
        assert_eq!(stats.dropped(), 0);
        let cohort = generate(&cfg).unwrap();
        assert_eq!(records, cohort.records);
        assert_eq!(parse_meta(File::open(&fa.meta).unwrap()).unwrap(), cohort.metas);
    }

    #[test]
    fn null_signal_makes_charting_label_free() {
        let cfg = SynthConfig {
            picu_encounters: 3000,
            cticu_encounters: 0,
            picu_mortality: 0.3,
            signal_strength: 0.0,
            ..SynthConfig::default()
        };
        let cohort = generate(&cfg).unwrap();
        let mut per: BTreeMap<&str, f64> = BTreeMap::new();
        for r in &cohort.records {
            *per.entry(&r.encounter_id).or_default() += 1.0;
        }
        let density = |died: bool| {
            let xs: Vec<f64> = cohort
                .metas
                .iter()
                .filter(|m| (m.disposition == Disposition::Died) == died)
                .map(|m| per.get(m.encounter_id.as_str()).copied().unwrap_or(0.0) / m.length_of_stay)
                .collect();
            xs.iter().sum::<f64>() / xs.len() as f64
        };
        let (d, s) = (density(true), density(false));
        assert!((d - s).abs() / s < 0.05, "{d} vs {s}");
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            SynthConfig { picu_mortality: 0.0, ..SynthConfig::default() },
            SynthConfig { cticu_mortality: 1.0, ..SynthConfig::default() },
            SynthConfig { los_sigma: -1.0, ..SynthConfig::default() },
            SynthConfig { signal_strength: -0.5, ..SynthConfig::default() },
            SynthConfig { picu_encounters_per_patient: 0.5, ..SynthConfig::default() },
        ] {
            assert!(matches!(generate(&cfg), Err(Error::Config(_))));
        }
    }
}
