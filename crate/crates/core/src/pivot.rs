//! Long-to-wide reshaping into per-encounter patient-matrices.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog::{VariableCatalog, VariableKind};
use crate::error::{Error, Result};
use crate::ingest::LongRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixState {
    Raw,
    Standardized,
    Imputed,
}

/// What a matrix column holds: a catalog variable or a MeSH heading that
/// aggregates several drug columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Feature {
    Variable(usize),
    Heading(String),
}

impl Feature {
    pub fn kind(&self, catalog: &VariableCatalog) -> VariableKind {
        match self {
            Feature::Variable(c) => catalog.kind(*c),
            Feature::Heading(_) => VariableKind::Drug,
        }
    }

    pub fn name(&self, catalog: &VariableCatalog) -> String {
        match self {
            Feature::Variable(c) => catalog.spec(*c).canonical_name.clone(),
            Feature::Heading(h) => format!("mesh:{h}"),
        }
    }
}

pub type Features = Arc<[Feature]>;

/// The full catalog column layout, shared by every raw matrix of a run.
pub fn catalog_features(catalog: &VariableCatalog) -> Features {
    (0..catalog.width()).map(Feature::Variable).collect()
}

/// Time x variable grid for one encounter. Rows are charting times.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientMatrix {
    pub encounter_id: String,
    times: Vec<f64>,
    features: Features,
    cells: Vec<Option<f64>>,
    state: MatrixState,
}

impl PatientMatrix {
    pub fn new(
        encounter_id: String,
        times: Vec<f64>,
        features: Features,
        cells: Vec<Option<f64>>,
        state: MatrixState,
    ) -> Result<Self> {
        if cells.len() != times.len() * features.len() {
            return Err(Error::Contract(format!(
                "{} cells for {} rows x {} columns",
                cells.len(),
                times.len(),
                features.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract(format!(
                "times of `{encounter_id}` must be finite, non-negative and strictly increasing"
            )));
        }
        if state == MatrixState::Imputed && cells.iter().any(Option::is_none) {
            return Err(Error::Contract(format!("imputed matrix `{encounter_id}` has empty cells")));
        }
        Ok(PatientMatrix {
            encounter_id,
            times,
            features,
            cells,
            state,
        })
    }

    pub fn rows(&self) -> usize {
        self.times.len()
    }

    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn state(&self) -> MatrixState {
        self.state
    }

    pub fn cells(&self) -> &[Option<f64>] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.width() + col]
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        let w = self.width();
        &self.cells[row * w..(row + 1) * w]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        self.cells.iter().skip(col).step_by(self.width().max(1)).copied()
    }

    pub fn filled(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Dense row-major values; empty cells read as zero.
    pub fn dense(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.unwrap_or(0.0)).collect()
    }

    /// Filled cells as `(time, column, value)` in row-major order.
    pub fn flatten(&self) -> Vec<(f64, usize, f64)> {
        let w = self.width();
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|v| (self.times[i / w], i % w, v)))
            .collect()
    }

    pub(crate) fn with_cells(&self, features: Features, cells: Vec<Option<f64>>, state: MatrixState) -> Self {
        debug_assert_eq!(cells.len(), self.rows() * features.len());
        PatientMatrix {
            encounter_id: self.encounter_id.clone(),
            times: self.times.clone(),
            features,
            cells,
            state,
        }
    }

    /// Debug dump: times first, canonical names as header, blanks for empty.
    pub fn write_csv<W: Write>(&self, writer: W, catalog: &VariableCatalog) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time_hours".to_string()];
        header.extend(self.features.iter().map(|f| f.name(catalog)));
        w.write_record(&header)?;
        for r in 0..self.rows() {
            let mut rec = vec![self.times[r].to_string()];
            rec.extend(self.row(r).iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<matrix>", e))?;
        Ok(())
    }
}

/// Result of pivoting one encounter.
#[derive(Debug, Clone)]
pub struct Pivoted {
    pub matrix: PatientMatrix,
    /// Records that landed on an already-filled `(time, variable)` cell.
    pub collisions: usize,
}

/// Pivots one encounter's curated records into a raw matrix. Rows are the
/// sorted distinct event times; a later record at the same cell wins.
pub fn pivot_encounter(
    encounter_id: &str,
    records: &[LongRecord],
    features: &Features,
) -> Result<Pivoted> {
    if let Some(r) = records.iter().find(|r| r.encounter_id != encounter_id) {
        return Err(Error::Contract(format!(
            "record for encounter `{}` passed to pivot of `{encounter_id}`",
            r.encounter_id
        )));
    }
    let width = features.len();
    if let Some(r) = records.iter().find(|r| r.column >= width) {
        return Err(Error::Contract(format!("column {} outside width {width}", r.column)));
    }
    let mut times: Vec<f64> = records.iter().map(|r| r.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut cells = vec![None; times.len() * width];
    let mut collisions = 0;
    for r in records {
        let row = times
            .binary_search_by(|t| t.total_cmp(&r.time))
            .expect("every record time is a row");
        let cell = &mut cells[row * width + r.column];
        if cell.is_some() {
            collisions += 1;
        }
        *cell = Some(r.value);
    }
    let matrix = PatientMatrix::new(encounter_id.to_string(), times, features.clone(), cells, MatrixState::Raw)?;
    Ok(Pivoted { matrix, collisions })
}

/// Groups records by encounter, preserving input order within each group.
pub fn group_by_encounter(records: Vec<LongRecord>) -> BTreeMap<String, Vec<LongRecord>> {
    let mut groups: BTreeMap<String, Vec<LongRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.encounter_id.clone()).or_default().push(r);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::VariableSpec;

    fn catalog() -> VariableCatalog {
        VariableCatalog::new(vec![
            VariableSpec::vital("hr", 1.0, 350.0),
            VariableSpec::intervention("peep", 30.0),
        ])
        .unwrap()
    }

    fn rec(time: f64, column: usize, value: f64) -> LongRecord {
        LongRecord {
            patient_id: "p".into(),
            encounter_id: "e".into(),
            time,
            column,
            value,
        }
    }

    #[test]
    fn sparse_rows_leave_blank_cells() {
        let f = catalog_features(&catalog());
        let p = pivot_encounter("e", &[rec(1.0, 0, 120.0), rec(2.0, 0, 180.0), rec(2.0, 1, 6.0)], &f).unwrap();
        let m = p.matrix;
        assert_eq!(m.times(), &[1.0, 2.0]);
        assert_eq!(m.row(0), &[Some(120.0), None]);
        assert_eq!(m.row(1), &[Some(180.0), Some(6.0)]);
        assert_eq!(p.collisions, 0);
        assert_eq!(m.state(), MatrixState::Raw);
    }

    #[test]
    fn single_and_empty() {
        let f = catalog_features(&catalog());
        let m = pivot_encounter("e", &[rec(0.5, 1, 5.0)], &f).unwrap().matrix;
        assert_eq!((m.rows(), m.filled()), (1, 1));
        let m = pivot_encounter("e", &[], &f).unwrap().matrix;
        assert_eq!((m.rows(), m.width()), (0, 2));
    }

    #[test]
    fn last_record_wins_on_collision() {
        let f = catalog_features(&catalog());
        let p = pivot_encounter("e", &[rec(1.0, 0, 100.0), rec(1.0, 0, 110.0)], &f).unwrap();
        assert_eq!(p.matrix.get(0, 0), Some(110.0));
        assert_eq!(p.collisions, 1);
        assert_eq!(p.matrix.filled(), 1);
    }

    #[test]
    fn mixed_encounters_are_rejected() {
        let f = catalog_features(&catalog());
        let other = LongRecord { encounter_id: "x".into(), ..rec(1.0, 0, 1.0) };
        assert!(matches!(pivot_encounter("e", &[rec(0.0, 0, 1.0), other], &f), Err(Error::Contract(_))));
    }

    #[test]
    fn debug_csv_dump() {
        let cat = catalog();
        let f = catalog_features(&cat);
        let m = pivot_encounter("e", &[rec(1.0, 0, 120.0), rec(2.0, 1, 6.0)], &f).unwrap().matrix;
        let mut buf = Vec::new();
        m.write_csv(&mut buf, &cat).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "time_hours,hr,peep\n1,120,\n2,,6\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn flatten_recovers_records_without_collisions(
                cells in proptest::collection::btree_map((0u32..40, 0usize..2), -50.0f64..50.0, 0..30)
            ) {
                let f = catalog_features(&catalog());
                let records: Vec<_> = cells.iter().map(|(&(t, c), &v)| rec(t as f64 * 0.5, c, v)).collect();
                let p = pivot_encounter("e", &records, &f).unwrap();
                prop_assert_eq!(p.collisions, 0);
                let mut flat = p.matrix.flatten();
                let mut want: Vec<_> = records.iter().map(|r| (r.time, r.column, r.value)).collect();
                flat.sort_by(|a, b| a.partial_cmp(b).unwrap());
                want.sort_by(|a, b| a.partial_cmp(b).unwrap());
                prop_assert_eq!(flat, want);
                let distinct: std::collections::BTreeSet<u32> = cells.keys().map(|k| k.0).collect();
                prop_assert_eq!(p.matrix.rows(), distinct.len());
            }
        }
    }
}
