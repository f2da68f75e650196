//! Variable dictionary.
//!
//! The catalog fixes the column order of every patient-matrix in a run and
//! carries the per-variable limits used by curation and standardization.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CATALOG_HEADER: [&str; 7] = [
    "canonical_name",
    "kind",
    "aliases",
    "min_value",
    "max_value",
    "treatment_upper_limit",
    "mesh_heading",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Vital,
    Lab,
    Drug,
    Intervention,
}

impl VariableKind {
    /// Vitals and labs describe the patient's state.
    pub fn is_internal(self) -> bool {
        matches!(self, VariableKind::Vital | VariableKind::Lab)
    }

    /// Drugs and interventions describe treatment.
    pub fn is_external(self) -> bool {
        !self.is_internal()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VariableKind::Vital => "vital",
            VariableKind::Lab => "lab",
            VariableKind::Drug => "drug",
            VariableKind::Intervention => "intervention",
        }
    }
}

impl fmt::Display for VariableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariableKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vital" => Ok(VariableKind::Vital),
            "lab" => Ok(VariableKind::Lab),
            "drug" => Ok(VariableKind::Drug),
            "intervention" => Ok(VariableKind::Intervention),
            other => Err(format!("unknown variable kind `{other}`")),
        }
    }
}

/// Ontology mapping of a drug. Drugs with an empty `mesh_heading` field are
/// explicitly unmapped and keep their own column under MeSH encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeshMapping {
    Heading(String),
    Unmapped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub canonical_name: String,
    pub kind: VariableKind,
    pub aliases: BTreeSet<String>,
    /// Physiologic lower clamp; present for vitals and labs.
    pub min_value: Option<f64>,
    /// Physiologic upper clamp; present for vitals and labs.
    pub max_value: Option<f64>,
    /// Clinician-defined full-scale value; present for drugs and interventions.
    pub treatment_upper_limit: Option<f64>,
    /// Drugs only.
    pub mesh: Option<MeshMapping>,
}

impl VariableSpec {
    pub fn vital(name: &str, lo: f64, hi: f64) -> Self {
        Self::internal(name, VariableKind::Vital, lo, hi)
    }

    pub fn lab(name: &str, lo: f64, hi: f64) -> Self {
        Self::internal(name, VariableKind::Lab, lo, hi)
    }

    fn internal(name: &str, kind: VariableKind, lo: f64, hi: f64) -> Self {
        VariableSpec {
            canonical_name: name.to_string(),
            kind,
            aliases: BTreeSet::new(),
            min_value: Some(lo),
            max_value: Some(hi),
            treatment_upper_limit: None,
            mesh: None,
        }
    }

    pub fn drug(name: &str, limit: f64, heading: Option<&str>) -> Self {
        VariableSpec {
            canonical_name: name.to_string(),
            kind: VariableKind::Drug,
            aliases: BTreeSet::new(),
            min_value: None,
            max_value: None,
            treatment_upper_limit: Some(limit),
            mesh: Some(match heading {
                Some(h) => MeshMapping::Heading(h.to_string()),
                None => MeshMapping::Unmapped,
            }),
        }
    }

    pub fn intervention(name: &str, limit: f64) -> Self {
        VariableSpec {
            canonical_name: name.to_string(),
            kind: VariableKind::Intervention,
            aliases: BTreeSet::new(),
            min_value: None,
            max_value: None,
            treatment_upper_limit: Some(limit),
            mesh: None,
        }
    }

    pub fn with_aliases<I, S>(mut self, aliases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.aliases.extend(aliases.into_iter().map(Into::into));
        self
    }

    pub fn mesh_heading(&self) -> Option<&str> {
        match &self.mesh {
            Some(MeshMapping::Heading(h)) => Some(h),
            _ => None,
        }
    }

    /// The clamp interval applied by curation.
    pub fn clamp_range(&self) -> (f64, f64) {
        if self.kind.is_internal() {
            (
                self.min_value.unwrap_or(f64::NEG_INFINITY),
                self.max_value.unwrap_or(f64::INFINITY),
            )
        } else {
            (0.0, self.treatment_upper_limit.unwrap_or(f64::INFINITY))
        }
    }
}

/// Trim and case-fold a variable name for matching.
pub fn normalize_name(raw: &str) -> String {
    raw.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableCatalog {
    specs: Vec<VariableSpec>,
    lookup: HashMap<String, usize>,
}

impl VariableCatalog {
    /// Validates the specs and builds the name index. Column order is the
    /// order of `specs`.
    pub fn new(specs: Vec<VariableSpec>) -> Result<Self> {
        let mut lookup: HashMap<String, usize> = HashMap::new();
        // Canonical names first so alias collisions name the right owner.
        for (i, spec) in specs.iter().enumerate() {
            validate_spec(spec)?;
            let key = normalize_name(&spec.canonical_name);
            if key.is_empty() {
                return Err(Error::Validation(format!("variable {i} has an empty name")));
            }
            if let Some(&j) = lookup.get(&key) {
                return Err(Error::Validation(format!(
                    "duplicate canonical name `{}` (entries {} and {})",
                    spec.canonical_name, specs[j].canonical_name, spec.canonical_name
                )));
            }
            lookup.insert(key, i);
        }
        for (i, spec) in specs.iter().enumerate() {
            for alias in &spec.aliases {
                let key = normalize_name(alias);
                if key.is_empty() {
                    continue;
                }
                match lookup.get(&key) {
                    Some(&j) if j == i => {}
                    Some(&j) => {
                        return Err(Error::Validation(format!(
                            "alias `{alias}` of `{}` collides with `{}`",
                            spec.canonical_name, specs[j].canonical_name
                        )));
                    }
                    None => {
                        lookup.insert(key, i);
                    }
                }
            }
        }
        Ok(VariableCatalog { specs, lookup })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    /// Parses the catalog CSV format.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| parse_err(1, e))?.clone();
        if header.iter().collect::<Vec<_>>() != CATALOG_HEADER {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "expected header `{}`, found `{}`",
                    CATALOG_HEADER.join(","),
                    header.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut specs = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                parse_err(line, e)
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            specs.push(parse_spec_row(&rec, line)?);
        }
        Self::new(specs)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CATALOG_HEADER)?;
        for s in &self.specs {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let mesh = match &s.mesh {
                Some(MeshMapping::Heading(h)) => h.clone(),
                _ => String::new(),
            };
            w.write_record([
                s.canonical_name.clone(),
                s.kind.to_string(),
                s.aliases.iter().cloned().collect::<Vec<_>>().join("|"),
                opt(s.min_value),
                opt(s.max_value),
                opt(s.treatment_upper_limit),
                mesh,
            ])?;
        }
        w.flush().map_err(|e| Error::io("<catalog>", e))?;
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[VariableSpec] {
        &self.specs
    }

    pub fn spec(&self, column: usize) -> &VariableSpec {
        &self.specs[column]
    }

    pub fn kind(&self, column: usize) -> VariableKind {
        self.specs[column].kind
    }

    /// Column index for a raw charted name, matching canonical names and
    /// aliases after trimming and case folding.
    pub fn resolve(&self, raw_name: &str) -> Option<usize> {
        self.lookup.get(&normalize_name(raw_name)).copied()
    }

    pub fn column_of(&self, canonical: &str) -> Option<usize> {
        self.specs
            .iter()
            .position(|s| s.canonical_name == canonical)
    }

    pub fn internal_columns(&self) -> Vec<usize> {
        self.columns_where(|k| k.is_internal())
    }

    pub fn external_columns(&self) -> Vec<usize> {
        self.columns_where(|k| k.is_external())
    }

    pub fn drug_columns(&self) -> Vec<usize> {
        self.columns_where(|k| k == VariableKind::Drug)
    }

    fn columns_where(&self, pred: impl Fn(VariableKind) -> bool) -> Vec<usize> {
        self.specs
            .iter()
            .enumerate()
            .filter(|(_, s)| pred(s.kind))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn has_mesh_headings(&self) -> bool {
        self.specs.iter().any(|s| s.mesh_heading().is_some())
    }
}

fn parse_err(line: usize, e: impl fmt::Display) -> Error {
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn parse_spec_row(rec: &csv::StringRecord, line: usize) -> Result<VariableSpec> {
    if rec.len() != CATALOG_HEADER.len() {
        return Err(parse_err(
            line,
            format!("expected {} fields, found {}", CATALOG_HEADER.len(), rec.len()),
        ));
    }
    let field = |i: usize| rec.get(i).unwrap_or("").trim();
    let num = |i: usize| -> Result<Option<f64>> {
        let s = field(i);
        if s.is_empty() {
            return Ok(None);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Some)
            .ok_or_else(|| parse_err(line, format!("{} `{s}` is not a finite number", CATALOG_HEADER[i])))
    };
    let name = field(0).to_string();
    let kind: VariableKind = field(1).parse().map_err(|e| parse_err(line, e))?;
    let aliases = field(2)
        .split('|')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(str::to_string)
        .collect();
    let mesh_field = field(6);
    let mesh = match kind {
        VariableKind::Drug if mesh_field.is_empty() => Some(MeshMapping::Unmapped),
        VariableKind::Drug => Some(MeshMapping::Heading(mesh_field.to_string())),
        _ if !mesh_field.is_empty() => {
            return Err(Error::Validation(format!(
                "line {line}: mesh_heading given for non-drug `{name}`"
            )))
        }
        _ => None,
    };
    Ok(VariableSpec {
        canonical_name: name,
        kind,
        aliases,
        min_value: num(3)?,
        max_value: num(4)?,
        treatment_upper_limit: num(5)?,
        mesh,
    })
}

fn validate_spec(spec: &VariableSpec) -> Result<()> {
    let name = &spec.canonical_name;
    if spec.kind.is_internal() {
        match (spec.min_value, spec.max_value) {
            (Some(lo), Some(hi)) if lo < hi => {}
            (Some(lo), Some(hi)) => {
                return Err(Error::Validation(format!(
                    "`{name}`: min_value {lo} must be below max_value {hi}"
                )))
            }
            _ => {
                return Err(Error::Validation(format!(
                    "`{name}`: vitals and labs need min_value and max_value"
                )))
            }
        }
        if spec.treatment_upper_limit.is_some() {
            return Err(Error::Validation(format!(
                "`{name}`: treatment_upper_limit is only valid for drugs and interventions"
            )));
        }
        if spec.mesh.is_some() {
            return Err(Error::Validation(format!("`{name}`: mesh_heading on a non-drug")));
        }
    } else {
        match spec.treatment_upper_limit {
            Some(l) if l > 0.0 => {}
            Some(l) => {
                return Err(Error::Validation(format!(
                    "`{name}`: treatment_upper_limit {l} must be positive"
                )))
            }
            None => {
                return Err(Error::Validation(format!(
                    "{} `{name}` is missing treatment_upper_limit",
                    spec.kind
                )))
            }
        }
        if spec.kind == VariableKind::Drug && spec.mesh.is_none() {
            return Err(Error::Validation(format!(
                "drug `{name}` must carry a mesh heading or be marked unmapped"
            )));
        }
        if spec.kind == VariableKind::Intervention && spec.mesh.is_some() {
            return Err(Error::Validation(format!("`{name}`: mesh_heading on a non-drug")));
        }
    }
    Ok(())
}
