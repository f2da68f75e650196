//! Benchmark pipeline for studying how EMR data quality affects in-ICU
//! mortality prediction.
//!
//! The pipeline runs long-format events through curation, pivoting to
//! per-encounter patient-matrices, standardization and imputation, then
//! applies one of three data permutations (training-set fraction, input
//! types, drug encoding) before training logistic regression, an MLP and an
//! LSTM from scratch and scoring them by AUROC at a 12-hour horizon.
//!
//! The numerical core in [`nn`], [`train`] and [`eval`] is generic over
//! [`Scalar`]; the aliases below fix it to `f64`, which the pipeline uses
//! throughout.

pub mod catalog;
pub mod check;
pub mod cohort;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod ingest;
pub mod nn;
pub mod pivot;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod train;
pub mod transform;

pub use catalog::{VariableCatalog, VariableKind, VariableSpec};
pub use cohort::{DrugEncoding, InputType, Partition, PermutationSpec, Split};
pub use error::{Error, Result};
pub use ingest::{Disposition, EncounterMeta, LongRecord, Unit};
pub use pivot::{MatrixState, PatientMatrix};
pub use scalar::Scalar;

pub type Tensor = nn::Tensor<f64>;
pub type Params = nn::Params<f64>;
pub type Model = nn::Model<f64>;
pub type RmsProp = nn::RmsProp<f64>;
pub type TrainConfig = train::TrainConfig<f64>;
pub type TrainedModel = train::TrainedModel<f64>;

pub type Tensor32 = nn::Tensor<f32>;
pub type Model32 = nn::Model<f32>;
