//! Horizon scoring, AUROC, seed aggregation and report emission.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cohort::{PermutationGrid, PermutationSpec, Split, Study};
use crate::error::{Error, Result};
use crate::nn::{Model, ModelKind};
use crate::pivot::{MatrixState, PatientMatrix};
use crate::scalar::Scalar;

pub const DEFAULT_HORIZON_HOURS: f64 = 12.0;

/// Score for one encounter at the prediction horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterScore {
    pub encounter_id: String,
    pub probability: f64,
    pub label: u8,
    pub horizon_hours: f64,
    /// No row was charted before the horizon; the first row was scored.
    pub post_horizon: bool,
    /// The stay ended before the horizon.
    pub short_stay: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonPrediction {
    pub probability: f64,
    pub rows_used: usize,
    pub post_horizon: bool,
}

/// Scores an imputed matrix using the rows charted at or before `horizon`.
/// LR and MLP score the last such row; the RNN reads all of them and reports
/// its final step. With no such rows, the first row alone is used.
pub fn predict_at_horizon<F: Scalar>(model: &Model<F>, m: &PatientMatrix, horizon: f64) -> Result<HorizonPrediction> {
    if m.state() != MatrixState::Imputed || m.rows() == 0 {
        return Err(Error::Contract(format!(
            "predict_at_horizon needs a non-empty imputed matrix (`{}`)",
            m.encounter_id
        )));
    }
    if m.width() != model.input_width() {
        return Err(Error::Contract(format!(
            "matrix width {} does not match model input {}",
            m.width(),
            model.input_width()
        )));
    }
    let in_horizon = m.times().iter().take_while(|&&t| t <= horizon).count();
    let post_horizon = in_horizon == 0;
    let rows = in_horizon.max(1);
    let w = m.width();
    let to_f = |cells: &[Option<f64>]| -> Vec<F> { cells.iter().map(|c| F::of(c.unwrap_or(0.0))).collect() };
    let probability = if model.arch.kind.is_sequential() {
        let x = to_f(&m.cells()[..rows * w]);
        *model.predict(&x, rows).last().expect("at least one step")
    } else {
        let x = to_f(m.row(rows - 1));
        model.predict(&x, 1)[0]
    };
    Ok(HorizonPrediction {
        probability: probability.to_f64_lossy(),
        rows_used: rows,
        post_horizon,
    })
}

/// Exact Mann-Whitney AUROC: concordant pairs plus half the tied pairs over
/// all positive/negative pairs.
pub fn auroc<F: Scalar>(scores: &[(F, u8)]) -> Result<f64> {
    let pos = scores.iter().filter(|s| s.1 != 0).count() as u64;
    let neg = scores.len() as u64 - pos;
    if pos == 0 {
        return Err(Error::MissingClass("positive"));
    }
    if neg == 0 {
        return Err(Error::MissingClass("negative"));
    }
    let mut sorted: Vec<(F, u8)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    // Twice the Mann-Whitney U, kept integral.
    let mut twice_u: u128 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut p_tie, mut n_tie) = (0u64, 0u64);
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            if sorted[j].1 != 0 {
                p_tie += 1;
            } else {
                n_tie += 1;
            }
            j += 1;
        }
        twice_u += 2 * p_tie as u128 * neg_below as u128 + p_tie as u128 * n_tie as u128;
        neg_below += n_tie;
        i = j;
    }
    Ok(twice_u as f64 / (2 * pos as u128 * neg as u128) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Population standard deviation; absent for a single run.
    pub std: Option<f64>,
    pub n: usize,
}

pub fn aggregate(runs: &[f64]) -> Aggregate {
    let n = runs.len();
    if n == 0 {
        return Aggregate { mean: f64::NAN, std: None, n };
    }
    let mean = runs.iter().sum::<f64>() / n as f64;
    let std = (n >= 2).then(|| (runs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt());
    Aggregate { mean, std, n }
}

/// Outcome of one (permutation, model, seed) training run on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub permutation: PermutationSpec,
    pub model: ModelKind,
    pub seed: u64,
    pub test_set: Split,
    pub auroc: f64,
    /// AUROC over encounters with a full horizon of data, when both classes remain.
    pub auroc_full_horizon: Option<f64>,
    pub n_encounters: usize,
    pub n_post_horizon: usize,
    pub n_short_stay: usize,
    pub train_encounters: usize,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub study: Study,
    pub row_label: String,
    pub permutation: PermutationSpec,
    pub model: ModelKind,
    pub test_set: Split,
    pub auroc_mean: f64,
    pub auroc_std: Option<f64>,
    pub n_seeds: usize,
}

/// Everything an experiment produced: the configuration echo, every run and
/// the aggregated table rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub config: serde_json::Value,
    pub runs: Vec<RunResult>,
    pub rows: Vec<ReportRow>,
}

pub fn row_label(study: Study, p: &PermutationSpec, train_encounters: usize) -> String {
    match study {
        Study::TrainingFraction => format!("{}% ({train_encounters})", (p.training_fraction * 100.0).round()),
        Study::InputType if p.is_baseline() => format!("{} (BL)", p.input_type.label()),
        Study::InputType => p.input_type.label().to_string(),
        Study::DrugEncoding if p.is_baseline() => format!("{} (BL)", p.drug_encoding.label()),
        Study::DrugEncoding => p.drug_encoding.label().to_string(),
    }
}

/// Aggregates runs over seeds into table rows for every study of the grid.
/// Runs are matched by permutation; each cell averages over its seeds.
pub fn build_rows(runs: &[RunResult], grid: &PermutationGrid, models: &[ModelKind]) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for study in Study::ALL {
        for p in grid.study_rows(study) {
            for &model in models {
                for test_set in [Split::TestPicu, Split::TestCticu] {
                    let cell: Vec<&RunResult> = runs
                        .iter()
                        .filter(|r| r.permutation == p && r.model == model && r.test_set == test_set)
                        .collect();
                    if cell.is_empty() {
                        continue;
                    }
                    let agg = aggregate(&cell.iter().map(|r| r.auroc).collect::<Vec<_>>());
                    rows.push(ReportRow {
                        study,
                        row_label: row_label(study, &p, cell[0].train_encounters),
                        permutation: p,
                        model,
                        test_set,
                        auroc_mean: agg.mean,
                        auroc_std: agg.std,
                        n_seeds: agg.n,
                    });
                }
            }
        }
    }
    rows
}

pub const REPORT_HEADER: [&str; 6] = ["row_label", "model", "test_set", "auroc_mean", "auroc_std", "n_seeds"];

fn test_set_label(s: Split) -> &'static str {
    match s {
        Split::TestPicu => "PICU",
        Split::TestCticu => "CTICU",
        other => other.as_str(),
    }
}

/// Writes one table CSV per study, plot-data series, and `bundle.json`.
pub fn emit_report(bundle: &ReportBundle, out_dir: &Path) -> Result<()> {
    render_tables(bundle, out_dir)?;
    let json = serde_json::to_string_pretty(bundle)?;
    let path = out_dir.join("bundle.json");
    fs::write(&path, json).map_err(|e| Error::io(path, e))
}

/// Table CSVs and plot data from the bundle's rows.
pub fn render_tables(bundle: &ReportBundle, out_dir: &Path) -> Result<()> {
    let plots = out_dir.join("plots");
    fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
    for study in Study::ALL {
        let path = out_dir.join(format!("{}.csv", study.file_stem()));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(REPORT_HEADER)?;
        let rows: Vec<&ReportRow> = bundle.rows.iter().filter(|r| r.study == study).collect();
        for r in &rows {
            w.write_record([
                r.row_label.clone(),
                r.model.label().to_string(),
                test_set_label(r.test_set).to_string(),
                format!("{:.3}", r.auroc_mean),
                r.auroc_std.map(|s| format!("{s:.3}")).unwrap_or_default(),
                r.n_seeds.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let mut series: BTreeMap<(ModelKind, Split), Vec<(f64, f64, f64)>> = BTreeMap::new();
        for r in &rows {
            let entry = series.entry((r.model, r.test_set)).or_default();
            let x = match study {
                Study::TrainingFraction => r.permutation.training_fraction,
                _ => entry.len() as f64,
            };
            entry.push((x, r.auroc_mean, r.auroc_std.unwrap_or(0.0)));
        }
        for ((model, test_set), points) in series {
            let path = plots.join(format!(
                "{}__{}__{}.csv",
                study.file_stem(),
                model.label().to_lowercase(),
                test_set_label(test_set).to_lowercase()
            ));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["x", "y", "sigma"])?;
            for (x, y, s) in points {
                w.write_record([x.to_string(), y.to_string(), s.to_string()])?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<ReportBundle> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
