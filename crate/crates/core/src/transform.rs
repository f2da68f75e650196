//! Standardization and imputation of patient-matrices.
//!
//! Internals (vitals, labs) become z-scores against training-set statistics
//! and are forward-filled; externals (drugs, interventions) are scaled by
//! their clinician limit into `[0, 1]` and zero-filled.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::catalog::VariableCatalog;
use crate::error::{Error, Result};
use crate::pivot::{Feature, MatrixState, PatientMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ColumnScaling {
    ZScore { mean: f64, std: f64, degenerate: bool },
    Limit { upper: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    /// Indexed by catalog column.
    pub columns: Vec<ColumnScaling>,
}

impl StandardizationParams {
    pub fn write_csv<W: Write>(&self, writer: W, catalog: &VariableCatalog) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["column", "mean", "std", "degenerate"])?;
        for (c, s) in self.columns.iter().enumerate() {
            if let ColumnScaling::ZScore { mean, std, degenerate } = s {
                w.write_record([
                    catalog.spec(c).canonical_name.clone(),
                    mean.to_string(),
                    std.to_string(),
                    degenerate.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<standardizer>", e))?;
        Ok(())
    }
}

/// Pools every filled internal cell of the training matrices per column and
/// computes the mean and population standard deviation.
pub fn fit_standardizer(train: &[&PatientMatrix], catalog: &VariableCatalog) -> Result<StandardizationParams> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("cannot fit a standardizer on an empty training set".into()));
    }
    let width = catalog.width();
    for m in train {
        if m.state() != MatrixState::Raw || m.width() != width {
            return Err(Error::Contract(format!(
                "fit_standardizer needs raw full-width matrices; `{}` is {:?} with width {}",
                m.encounter_id,
                m.state(),
                m.width()
            )));
        }
    }
    let mut count = vec![0usize; width];
    let mut sum = vec![0.0f64; width];
    let mut first: Vec<Option<f64>> = vec![None; width];
    let mut varied = vec![false; width];
    for m in train {
        for (i, cell) in m.cells().iter().enumerate() {
            if let Some(v) = *cell {
                let c = i % width;
                count[c] += 1;
                sum[c] += v;
                match first[c] {
                    None => first[c] = Some(v),
                    Some(f) if f != v => varied[c] = true,
                    _ => {}
                }
            }
        }
    }
    let mean: Vec<f64> = (0..width)
        .map(|c| if count[c] > 0 { sum[c] / count[c] as f64 } else { 0.0 })
        .collect();
    let mut sq = vec![0.0f64; width];
    for m in train {
        for (i, cell) in m.cells().iter().enumerate() {
            if let Some(v) = *cell {
                let c = i % width;
                let d = v - mean[c];
                sq[c] += d * d;
            }
        }
    }
    let columns = (0..width)
        .map(|c| {
            let spec = catalog.spec(c);
            if spec.kind.is_internal() {
                let std = if count[c] > 0 { (sq[c] / count[c] as f64).sqrt() } else { 0.0 };
                if varied[c] && std > 0.0 {
                    ColumnScaling::ZScore { mean: mean[c], std, degenerate: false }
                } else {
                    ColumnScaling::ZScore { mean: mean[c], std: 1.0, degenerate: true }
                }
            } else {
                ColumnScaling::Limit {
                    upper: spec.treatment_upper_limit.expect("validated catalog"),
                }
            }
        })
        .collect();
    Ok(StandardizationParams { columns })
}

/// Applies z-scoring to internals and limit scaling to externals. Empty
/// cells stay empty.
pub fn standardize(m: &PatientMatrix, params: &StandardizationParams) -> Result<PatientMatrix> {
    if m.state() != MatrixState::Raw {
        return Err(Error::Contract(format!("standardize expects a raw matrix, got {:?}", m.state())));
    }
    let scalings: Vec<ColumnScaling> = m
        .features()
        .iter()
        .map(|f| match f {
            Feature::Variable(c) => params
                .columns
                .get(*c)
                .copied()
                .ok_or_else(|| Error::Contract(format!("no scaling for column {c}"))),
            Feature::Heading(h) => Err(Error::Contract(format!("raw matrix has heading column `{h}`"))),
        })
        .collect::<Result<_>>()?;
    let w = m.width();
    let cells = m
        .cells()
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            cell.map(|v| match scalings[i % w] {
                ColumnScaling::ZScore { mean, std, .. } => (v - mean) / std,
                ColumnScaling::Limit { upper } => (v / upper).clamp(0.0, 1.0),
            })
        })
        .collect();
    Ok(m.with_cells(m.features().clone(), cells, MatrixState::Standardized))
}

/// Forward-fills internals after their first measurement and zero-fills
/// everything else.
pub fn impute(m: &PatientMatrix, catalog: &VariableCatalog) -> Result<PatientMatrix> {
    match m.state() {
        MatrixState::Standardized => {}
        MatrixState::Imputed => return Ok(m.clone()),
        MatrixState::Raw => return Err(Error::Contract("impute expects a standardized matrix".into())),
    }
    let w = m.width();
    let internal: Vec<bool> = m.features().iter().map(|f| f.kind(catalog).is_internal()).collect();
    let mut cells = m.cells().to_vec();
    for c in 0..w {
        let mut last: Option<f64> = None;
        for r in 0..m.rows() {
            let cell = &mut cells[r * w + c];
            match *cell {
                Some(v) => last = Some(v),
                None if internal[c] => *cell = Some(last.unwrap_or(0.0)),
                None => *cell = Some(0.0),
            }
        }
    }
    Ok(m.with_cells(m.features().clone(), cells, MatrixState::Imputed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::VariableSpec;
    use crate::pivot::catalog_features;

    fn catalog() -> VariableCatalog {
        VariableCatalog::new(vec![
            VariableSpec::vital("hr", 0.0, 400.0),
            VariableSpec::lab("lactate", 0.0, 30.0),
            VariableSpec::drug("epi", 2.0, Some("Epinephrine")),
        ])
        .unwrap()
    }

    fn raw(cat: &VariableCatalog, times: &[f64], cells: Vec<Option<f64>>) -> PatientMatrix {
        PatientMatrix::new("e".into(), times.to_vec(), catalog_features(cat), cells, MatrixState::Raw).unwrap()
    }

    fn zscore(p: &StandardizationParams, c: usize) -> (f64, f64, bool) {
        match p.columns[c] {
            ColumnScaling::ZScore { mean, std, degenerate } => (mean, std, degenerate),
            _ => panic!("not internal"),
        }
    }

    #[test]
    fn pooled_population_std() {
        let cat = catalog();
        let a = raw(&cat, &[0.0], vec![Some(10.0), Some(7.0), None]);
        let b = raw(&cat, &[0.0], vec![Some(20.0), Some(7.0), None]);
        let p = fit_standardizer(&[&a, &b], &cat).unwrap();
        assert_eq!(zscore(&p, 0), (15.0, 5.0, false));
        // constant column
        assert_eq!(zscore(&p, 1), (7.0, 1.0, true));
        assert_eq!(p.columns[2], ColumnScaling::Limit { upper: 2.0 });
    }

    #[test]
    fn unmeasured_column_is_degenerate() {
        let cat = catalog();
        let a = raw(&cat, &[0.0], vec![Some(10.0), None, None]);
        let p = fit_standardizer(&[&a], &cat).unwrap();
        assert_eq!(zscore(&p, 1), (0.0, 1.0, true));
    }

    #[test]
    fn empty_training_set_is_an_error() {
        assert!(fit_standardizer(&[], &catalog()).is_err());
    }

    #[test]
    fn standardize_values() {
        let cat = catalog();
        let params = StandardizationParams {
            columns: vec![
                ColumnScaling::ZScore { mean: 15.0, std: 5.0, degenerate: false },
                ColumnScaling::ZScore { mean: 7.0, std: 1.0, degenerate: true },
                ColumnScaling::Limit { upper: 2.0 },
            ],
        };
        let m = raw(
            &cat,
            &[0.0, 1.0],
            vec![Some(15.0), None, Some(2.0), Some(25.0), Some(9.0), Some(5.0)],
        );
        let s = standardize(&m, &params).unwrap();
        assert_eq!(s.state(), MatrixState::Standardized);
        assert_eq!(s.row(0), &[Some(0.0), None, Some(1.0)]);
        assert_eq!(s.row(1), &[Some(2.0), Some(2.0), Some(1.0)]);
    }

    #[test]
    fn impute_forward_fills_internals_and_zeroes_externals() {
        let cat = catalog();
        let m = PatientMatrix::new(
            "e".into(),
            vec![1.0, 2.0, 3.0],
            catalog_features(&cat),
            vec![
                Some(1.2), None, None,
                None, Some(0.5), None,
                None, None, Some(0.3),
            ],
            MatrixState::Standardized,
        )
        .unwrap();
        let out = impute(&m, &cat).unwrap();
        assert_eq!(out.state(), MatrixState::Imputed);
        assert_eq!(out.column(0).collect::<Vec<_>>(), vec![Some(1.2); 3]);
        assert_eq!(out.column(1).collect::<Vec<_>>(), vec![Some(0.0), Some(0.5), Some(0.5)]);
        assert_eq!(out.column(2).collect::<Vec<_>>(), vec![Some(0.0), Some(0.0), Some(0.3)]);
        assert_eq!(impute(&out, &cat).unwrap(), out);
    }

    #[test]
    fn wrong_state_is_rejected() {
        let cat = catalog();
        let m = raw(&cat, &[0.0], vec![Some(1.0), None, None]);
        assert!(impute(&m, &cat).is_err());
        let s = m.with_cells(m.features().clone(), m.cells().to_vec(), MatrixState::Standardized);
        let p = fit_standardizer(&[&m], &cat).unwrap();
        assert!(standardize(&s, &p).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_matrix() -> impl Strategy<Value = Vec<Option<f64>>> {
            proptest::collection::vec(proptest::option::of(0.0f64..400.0), 3..30)
                .prop_map(|mut v| {
                    let n = v.len() / 3 * 3;
                    v.truncate(n);
                    v
                })
        }

        proptest! {
            #[test]
            fn refit_then_standardize_has_zero_mean_unit_std(
                mats in proptest::collection::vec(arb_matrix(), 1..6)
            ) {
                let cat = catalog();
                let raws: Vec<PatientMatrix> = mats.into_iter().map(|cells| {
                    let rows = cells.len() / 3;
                    let times: Vec<f64> = (0..rows).map(|r| r as f64).collect();
                    raw(&cat, &times, cells)
                }).collect();
                let refs: Vec<&PatientMatrix> = raws.iter().collect();
                let p = fit_standardizer(&refs, &cat).unwrap();
                for c in cat.internal_columns() {
                    let (_, _, degenerate) = zscore(&p, c);
                    if degenerate { continue; }
                    let vals: Vec<f64> = raws.iter()
                        .map(|m| standardize(m, &p).unwrap())
                        .flat_map(|s| s.column(c).flatten().collect::<Vec<_>>())
                        .collect();
                    let n = vals.len() as f64;
                    let mu = vals.iter().sum::<f64>() / n;
                    let sd = (vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt();
                    prop_assert!(mu.abs() < 1e-9, "mean {mu}");
                    prop_assert!((sd - 1.0).abs() < 1e-9, "std {sd}");
                }
            }

            #[test]
            fn impute_never_alters_filled_cells(cells in arb_matrix()) {
                let cat = catalog();
                let rows = cells.len() / 3;
                let s = PatientMatrix::new("e".into(), (0..rows).map(|r| r as f64).collect(),
                    catalog_features(&cat), cells.clone(), MatrixState::Standardized).unwrap();
                let out = impute(&s, &cat).unwrap();
                prop_assert!(out.cells().iter().all(|c| c.is_some_and(f64::is_finite)));
                for (a, b) in cells.iter().zip(out.cells()) {
                    if a.is_some() { prop_assert_eq!(a, b); }
                }
                prop_assert_eq!(impute(&out, &cat).unwrap(), out);
            }
        }
    }
}
