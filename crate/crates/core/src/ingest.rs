//! Long-format event ingestion and curation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::VariableCatalog;
use crate::error::{Error, Result};

pub const EVENT_HEADER: [&str; 5] = ["patient_id", "encounter_id", "time_hours", "variable", "value"];
pub const META_HEADER: [&str; 5] = [
    "patient_id",
    "encounter_id",
    "unit",
    "disposition",
    "length_of_stay_hours",
];

/// One charted observation or treatment, in hours since admission.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRecord {
    pub patient_id: String,
    pub encounter_id: String,
    pub time: f64,
    pub column: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "PICU")]
    Picu,
    #[serde(rename = "CTICU")]
    Cticu,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Picu => "PICU",
            Unit::Cticu => "CTICU",
        })
    }
}

impl FromStr for Unit {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PICU" => Ok(Unit::Picu),
            "CTICU" => Ok(Unit::Cticu),
            other => Err(format!("unknown unit `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disposition {
    Survived,
    Died,
}

impl Disposition {
    /// Training label: 1 for death.
    pub fn label(self) -> u8 {
        match self {
            Disposition::Survived => 0,
            Disposition::Died => 1,
        }
    }
}

impl fmt::Display for Disposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Disposition::Survived => "survived",
            Disposition::Died => "died",
        })
    }
}

impl FromStr for Disposition {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "survived" => Ok(Disposition::Survived),
            "died" => Ok(Disposition::Died),
            other => Err(format!("unknown disposition `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncounterMeta {
    pub encounter_id: String,
    pub patient_id: String,
    pub unit: Unit,
    pub disposition: Disposition,
    pub length_of_stay: f64,
    /// Demographics carried through but not used as model input.
    pub statics: BTreeMap<String, f64>,
}

/// Per-reason accounting for ingestion and curation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows: usize,
    pub emitted: usize,
    pub unresolved: usize,
    pub non_numeric: usize,
    pub invalid_time: usize,
    pub beyond_stay: usize,
    pub unknown_encounter: usize,
    pub clamped_low: usize,
    pub clamped_high: usize,
    /// Unresolved raw names and how often each was seen.
    pub unresolved_names: BTreeMap<String, usize>,
}

impl IngestStats {
    pub fn dropped(&self) -> usize {
        self.unresolved + self.non_numeric + self.invalid_time + self.beyond_stay + self.unknown_encounter
    }
}

/// Parses the event CSV. Rows that cannot be mapped are counted and dropped;
/// output order follows input order.
pub fn parse_events<R: Read>(
    reader: R,
    catalog: &VariableCatalog,
) -> Result<(Vec<LongRecord>, IngestStats)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(rdr.headers()?, &EVENT_HEADER, false)?;
    let mut stats = IngestStats::default();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        stats.rows += 1;
        let Some(column) = catalog.resolve(&rec[3]) else {
            stats.unresolved += 1;
            *stats.unresolved_names.entry(rec[3].to_string()).or_default() += 1;
            continue;
        };
        let (Ok(time), Ok(value)) = (rec[2].parse::<f64>(), rec[4].parse::<f64>()) else {
            stats.non_numeric += 1;
            continue;
        };
        if !value.is_finite() {
            stats.non_numeric += 1;
            continue;
        }
        if !time.is_finite() || time < 0.0 {
            stats.invalid_time += 1;
            continue;
        }
        stats.emitted += 1;
        out.push(LongRecord {
            patient_id: rec[0].to_string(),
            encounter_id: rec[1].to_string(),
            time,
            column,
            value,
        });
    }
    Ok((out, stats))
}

/// Clamps a record into its variable's plausible range: physiologic limits
/// for vitals and labs, `[0, treatment_upper_limit]` for treatments.
pub fn curate(record: LongRecord, catalog: &VariableCatalog) -> LongRecord {
    let (lo, hi) = catalog.spec(record.column).clamp_range();
    LongRecord {
        value: record.value.clamp(lo, hi),
        ..record
    }
}

/// Curates every record, counting clamp events.
pub fn curate_all(
    records: Vec<LongRecord>,
    catalog: &VariableCatalog,
    stats: &mut IngestStats,
) -> Vec<LongRecord> {
    records
        .into_iter()
        .map(|r| {
            let (lo, hi) = catalog.spec(r.column).clamp_range();
            if r.value < lo {
                stats.clamped_low += 1;
            } else if r.value > hi {
                stats.clamped_high += 1;
            }
            curate(r, catalog)
        })
        .collect()
}

/// Drops records after their encounter's discharge or for encounters
/// missing from the metadata.
pub fn drop_outside_stay(
    records: Vec<LongRecord>,
    metas: &[EncounterMeta],
    stats: &mut IngestStats,
) -> Vec<LongRecord> {
    let los: HashMap<&str, f64> = metas
        .iter()
        .map(|m| (m.encounter_id.as_str(), m.length_of_stay))
        .collect();
    records
        .into_iter()
        .filter(|r| match los.get(r.encounter_id.as_str()) {
            None => {
                stats.unknown_encounter += 1;
                stats.emitted -= 1;
                false
            }
            Some(&l) if r.time > l => {
                stats.beyond_stay += 1;
                stats.emitted -= 1;
                false
            }
            Some(_) => true,
        })
        .collect()
}

/// Parses the encounter metadata CSV. Columns after the five fixed ones are
/// numeric statics named by their header.
pub fn parse_meta<R: Read>(reader: R) -> Result<Vec<EncounterMeta>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    check_header(&header, &META_HEADER, true)?;
    let static_names: Vec<String> = header.iter().skip(META_HEADER.len()).map(str::to_string).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |message: String| Error::Row { row, message };
        let unit: Unit = rec[2].parse().map_err(bad)?;
        let disposition: Disposition = rec[3].parse().map_err(bad)?;
        let length_of_stay: f64 = rec[4]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v > 0.0)
            .ok_or_else(|| bad(format!("length_of_stay_hours `{}` must be a positive number", &rec[4])))?;
        let encounter_id = rec[1].to_string();
        if !seen.insert(encounter_id.clone()) {
            return Err(bad(format!("duplicate encounter_id `{encounter_id}`")));
        }
        let mut statics = BTreeMap::new();
        for (name, cell) in static_names.iter().zip(rec.iter().skip(META_HEADER.len())) {
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| bad(format!("static `{name}` value `{cell}` is not numeric")))?;
            statics.insert(name.clone(), v);
        }
        out.push(EncounterMeta {
            encounter_id,
            patient_id: rec[0].to_string(),
            unit,
            disposition,
            length_of_stay,
            statics,
        });
    }
    Ok(out)
}

pub fn write_events<W: Write>(writer: W, records: &[LongRecord], catalog: &VariableCatalog) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EVENT_HEADER)?;
    for r in records {
        w.write_record([
            r.patient_id.as_str(),
            r.encounter_id.as_str(),
            &r.time.to_string(),
            &catalog.spec(r.column).canonical_name,
            &r.value.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<events>", e))?;
    Ok(())
}

pub fn write_meta<W: Write>(writer: W, metas: &[EncounterMeta]) -> Result<()> {
    let statics: Vec<String> = metas
        .iter()
        .flat_map(|m| m.statics.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = META_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend(statics.iter().cloned());
    w.write_record(&header)?;
    for m in metas {
        let mut row = vec![
            m.patient_id.clone(),
            m.encounter_id.clone(),
            m.unit.to_string(),
            m.disposition.to_string(),
            m.length_of_stay.to_string(),
        ];
        row.extend(
            statics
                .iter()
                .map(|s| m.statics.get(s).map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<metadata>", e))?;
    Ok(())
}

fn check_header(found: &csv::StringRecord, expected: &[&str], allow_extra: bool) -> Result<()> {
    let ok = if allow_extra {
        found.len() >= expected.len() && found.iter().zip(expected).all(|(a, b)| a == *b)
    } else {
        found.iter().eq(expected.iter().copied())
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        })
    }
}
