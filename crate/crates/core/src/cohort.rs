//! Patient-level partitioning and the three data-permutation generators.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::catalog::{MeshMapping, VariableCatalog, VariableKind};
use crate::error::{Error, Result};
use crate::ingest::{EncounterMeta, Unit};
use crate::pivot::{Feature, Features, MatrixState, PatientMatrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    TestPicu,
    TestCticu,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::TestPicu => "test_picu",
            Split::TestCticu => "test_cticu",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub assignments: BTreeMap<String, Split>,
    pub seed: u64,
}

impl Partition {
    pub fn split_of(&self, encounter_id: &str) -> Option<Split> {
        self.assignments.get(encounter_id).copied()
    }

    /// Encounter ids in `split`, sorted.
    pub fn encounters(&self, split: Split) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, s)| **s == split)
            .map(|(e, _)| e.as_str())
            .collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.assignments.values().filter(|s| **s == split).count()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["encounter_id", "split"])?;
        for (e, s) in &self.assignments {
            w.write_record([e.as_str(), s.as_str()])?;
        }
        w.flush().map_err(|e| Error::io("<partition>", e))?;
        Ok(())
    }
}

/// Splits PICU patients 50/25/25 into train/validation/test after a seeded
/// shuffle; every CTICU patient goes to the CTICU test set. A patient with
/// any CTICU encounter is a CTICU patient, so no patient spans two splits.
pub fn make_partition(metas: &[EncounterMeta], seed: u64) -> Partition {
    let cticu_patients: BTreeSet<&str> = metas
        .iter()
        .filter(|m| m.unit == Unit::Cticu)
        .map(|m| m.patient_id.as_str())
        .collect();
    let mut picu_patients: Vec<&str> = metas
        .iter()
        .map(|m| m.patient_id.as_str())
        .filter(|p| !cticu_patients.contains(p))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rng = rng::stream(seed, "partition");
    picu_patients.shuffle(&mut rng);

    let n = picu_patients.len();
    let n_train = (n + 1) / 2;
    let n_train_val = (3 * n + 2) / 4;
    let mut patient_split: BTreeMap<&str, Split> = BTreeMap::new();
    for (i, p) in picu_patients.iter().enumerate() {
        let split = if i < n_train {
            Split::Train
        } else if i < n_train_val {
            Split::Validation
        } else {
            Split::TestPicu
        };
        patient_split.insert(p, split);
    }
    for p in cticu_patients {
        patient_split.insert(p, Split::TestCticu);
    }
    let assignments = metas
        .iter()
        .map(|m| (m.encounter_id.clone(), patient_split[m.patient_id.as_str()]))
        .collect();
    Partition { assignments, seed }
}

/// Seeded subset of the training encounters of size `round(fraction * |Train|)`.
/// Subsets for one seed are nested across fractions.
pub fn subsample_training(p: &Partition, fraction: f64, seed: u64) -> Result<BTreeSet<String>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("training fraction {fraction} outside (0, 1]")));
    }
    let mut train: Vec<&str> = p.encounters(Split::Train);
    let k = subsample_size(train.len(), fraction);
    let mut rng = rng::stream(seed, "subsample");
    train.shuffle(&mut rng);
    Ok(train[..k].iter().map(|s| s.to_string()).collect())
}

pub fn subsample_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputType {
    Combined,
    Internals,
    Externals,
}

impl InputType {
    pub fn label(self) -> &'static str {
        match self {
            InputType::Combined => "Combined",
            InputType::Internals => "Internals",
            InputType::Externals => "Externals",
        }
    }
}

impl FromStr for InputType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "combined" => Ok(InputType::Combined),
            "internals" => Ok(InputType::Internals),
            "externals" => Ok(InputType::Externals),
            other => Err(format!("unknown input type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrugEncoding {
    None,
    Binary,
    Mesh,
}

impl DrugEncoding {
    pub fn label(self) -> &'static str {
        match self {
            DrugEncoding::None => "None",
            DrugEncoding::Binary => "Binary",
            DrugEncoding::Mesh => "MeSH",
        }
    }
}

impl FromStr for DrugEncoding {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(DrugEncoding::None),
            "binary" => Ok(DrugEncoding::Binary),
            "mesh" => Ok(DrugEncoding::Mesh),
            other => Err(format!("unknown drug encoding `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationSpec {
    pub training_fraction: f64,
    pub input_type: InputType,
    pub drug_encoding: DrugEncoding,
}

impl PermutationSpec {
    pub const BASELINE: PermutationSpec = PermutationSpec {
        training_fraction: 1.0,
        input_type: InputType::Combined,
        drug_encoding: DrugEncoding::None,
    };

    pub fn is_baseline(&self) -> bool {
        *self == Self::BASELINE
    }
}

impl Default for PermutationSpec {
    fn default() -> Self {
        Self::BASELINE
    }
}

/// The permutation grid of an experiment. Each study varies one axis
/// away from the baseline; the baseline row is shared by all three.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PermutationGrid {
    pub fractions: Vec<f64>,
    pub input_types: Vec<InputType>,
    pub drug_encodings: Vec<DrugEncoding>,
}

impl Default for PermutationGrid {
    fn default() -> Self {
        PermutationGrid {
            fractions: vec![1.0, 0.75, 0.5, 0.25, 0.1],
            input_types: vec![InputType::Combined, InputType::Internals, InputType::Externals],
            drug_encodings: vec![DrugEncoding::None, DrugEncoding::Binary, DrugEncoding::Mesh],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    TrainingFraction,
    InputType,
    DrugEncoding,
}

impl Study {
    pub const ALL: [Study; 3] = [Study::TrainingFraction, Study::InputType, Study::DrugEncoding];

    pub fn file_stem(self) -> &'static str {
        match self {
            Study::TrainingFraction => "training_fraction",
            Study::InputType => "input_type",
            Study::DrugEncoding => "drug_encoding",
        }
    }
}

impl PermutationGrid {
    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(Error::Config(format!("training fraction {f} outside (0, 1]")));
        }
        Ok(())
    }

    /// Rows of one study, baseline first, without duplicates.
    pub fn study_rows(&self, study: Study) -> Vec<PermutationSpec> {
        let base = PermutationSpec::BASELINE;
        let mut rows = vec![base];
        let candidates: Vec<PermutationSpec> = match study {
            Study::TrainingFraction => self
                .fractions
                .iter()
                .map(|&f| PermutationSpec { training_fraction: f, ..base })
                .collect(),
            Study::InputType => self
                .input_types
                .iter()
                .map(|&t| PermutationSpec { input_type: t, ..base })
                .collect(),
            Study::DrugEncoding => self
                .drug_encodings
                .iter()
                .map(|&d| PermutationSpec { drug_encoding: d, ..base })
                .collect(),
        };
        for c in candidates {
            if !rows.contains(&c) {
                rows.push(c);
            }
        }
        rows
    }

    /// Every distinct permutation the grid needs, in study order.
    pub fn permutations(&self) -> Vec<PermutationSpec> {
        let mut out: Vec<PermutationSpec> = Vec::new();
        for study in Study::ALL {
            for p in self.study_rows(study) {
                if !out.contains(&p) {
                    out.push(p);
                }
            }
        }
        out
    }
}

/// Restricts an imputed matrix to internal or external columns.
pub fn select_inputs(m: &PatientMatrix, catalog: &VariableCatalog, input_type: InputType) -> Result<PatientMatrix> {
    expect_imputed(m, "select_inputs")?;
    let keep: Vec<usize> = match input_type {
        InputType::Combined => return Ok(m.clone()),
        InputType::Internals => kinds_where(m, catalog, VariableKind::is_internal),
        InputType::Externals => kinds_where(m, catalog, VariableKind::is_external),
    };
    if keep.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} selection leaves no columns",
            input_type.label()
        )));
    }
    let features: Features = keep.iter().map(|&c| m.features()[c].clone()).collect();
    let w = m.width();
    let cells = (0..m.rows())
        .flat_map(|r| keep.iter().map(move |&c| r * w + c))
        .map(|i| m.cells()[i])
        .collect();
    Ok(m.with_cells(features, cells, MatrixState::Imputed))
}

fn kinds_where(m: &PatientMatrix, catalog: &VariableCatalog, pred: fn(VariableKind) -> bool) -> Vec<usize> {
    m.features()
        .iter()
        .enumerate()
        .filter(|(_, f)| pred(f.kind(catalog)))
        .map(|(i, _)| i)
        .collect()
}

fn expect_imputed(m: &PatientMatrix, op: &str) -> Result<()> {
    if m.state() == MatrixState::Imputed {
        Ok(())
    } else {
        Err(Error::Contract(format!("{op} expects an imputed matrix, got {:?}", m.state())))
    }
}

/// Target columns of the MeSH rollup: each output column takes the maximum
/// over its source columns.
fn mesh_plan(features: &[Feature], catalog: &VariableCatalog) -> Vec<(Feature, Vec<usize>)> {
    let mut plan: Vec<(Feature, Vec<usize>)> = Vec::new();
    let mut groups: Vec<(Feature, Vec<usize>)> = Vec::new();
    for (i, f) in features.iter().enumerate() {
        let heading = match f {
            Feature::Variable(c) if catalog.kind(*c) == VariableKind::Drug => match &catalog.spec(*c).mesh {
                Some(MeshMapping::Heading(h)) => Some(Feature::Heading(h.clone())),
                _ => Some(f.clone()),
            },
            Feature::Heading(_) => Some(f.clone()),
            Feature::Variable(_) => None,
        };
        match heading {
            None => plan.push((f.clone(), vec![i])),
            Some(target) => match groups.iter_mut().find(|(t, _)| *t == target) {
                Some((_, members)) => members.push(i),
                None => groups.push((target, vec![i])),
            },
        }
    }
    plan.extend(groups);
    plan
}

/// Re-encodes the drug columns of an imputed matrix.
pub fn encode_drugs(m: &PatientMatrix, catalog: &VariableCatalog, scheme: DrugEncoding) -> Result<PatientMatrix> {
    expect_imputed(m, "encode_drugs")?;
    match scheme {
        DrugEncoding::None => Ok(m.clone()),
        DrugEncoding::Binary => {
            let w = m.width();
            let is_drug: Vec<bool> = m
                .features()
                .iter()
                .map(|f| f.kind(catalog) == VariableKind::Drug)
                .collect();
            let cells = m
                .cells()
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if is_drug[i % w] {
                        c.map(|v| if v > 0.0 { 1.0 } else { 0.0 })
                    } else {
                        *c
                    }
                })
                .collect();
            Ok(m.with_cells(m.features().clone(), cells, MatrixState::Imputed))
        }
        DrugEncoding::Mesh => {
            if !catalog.has_mesh_headings() {
                return Err(Error::InvalidArgument("MeSH encoding requested but the catalog has no mesh headings".into()));
            }
            let plan = mesh_plan(m.features(), catalog);
            let features: Features = plan.iter().map(|(f, _)| f.clone()).collect::<Vec<_>>().into();
            let w = m.width();
            let mut cells = Vec::with_capacity(m.rows() * plan.len());
            for r in 0..m.rows() {
                for (_, members) in &plan {
                    let v = members
                        .iter()
                        .map(|&c| m.cells()[r * w + c].unwrap_or(0.0))
                        .fold(f64::NEG_INFINITY, f64::max);
                    cells.push(Some(v));
                }
            }
            Ok(m.with_cells(features, cells, MatrixState::Imputed))
        }
    }
}

/// Column layout that [`select_inputs`] followed by [`encode_drugs`] produces
/// for matrices with `features`.
pub fn permuted_features(
    features: &Features,
    catalog: &VariableCatalog,
    input_type: InputType,
    scheme: DrugEncoding,
) -> Features {
    let selected: Vec<Feature> = features
        .iter()
        .filter(|f| match input_type {
            InputType::Combined => true,
            InputType::Internals => f.kind(catalog).is_internal(),
            InputType::Externals => f.kind(catalog).is_external(),
        })
        .cloned()
        .collect();
    match scheme {
        DrugEncoding::Mesh if catalog.has_mesh_headings() => {
            mesh_plan(&selected, catalog).into_iter().map(|(f, _)| f).collect::<Vec<_>>().into()
        }
        _ => Arc::from(selected),
    }
}
