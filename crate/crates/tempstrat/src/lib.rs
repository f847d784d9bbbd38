//! Temporally stratified daily risk prediction for sparse clinical time series.
//!
//! The central idea: instead of one mortality model for a whole hospital stay,
//! patient timelines are right-aligned on their outcome day and partitioned
//! into temporal strata (intervals of remaining length of stay). A multi-class
//! strata classifier estimates which stratum a patient-day belongs to, one
//! binary model per stratum estimates the risk of death for days inside that
//! stratum, and the daily risk score is the dot product of the two:
//!
//! ```text
//! risk(day) = strata_probs(day) . stratum_scores(day)
//! ```
//!
//! The crate provides the full pipeline:
//!
//! * [`cohort`] — CSV ingestion, right-alignment by outcome date, daily
//!   aggregation, last-observation-carried-forward imputation, optional
//!   history-derived features, and feature-matrix extraction.
//! * [`strata`] — strata definitions over day offsets, window algebra, and
//!   double-truncated per-stratum training sets.
//! * [`boosting`] — a self-contained gradient-boosted decision tree engine
//!   (binary logistic and softmax objectives, exact greedy split finding with
//!   second-order gains, learned default directions for missing values, row
//!   subsampling, L2 regularization, gain-based feature importance).
//! * [`predictor`] — the two-level stratified predictor and the day-weighted
//!   cross-entropy loss.
//! * [`eval`] — ranking/threshold metrics, patient-grouped stratified k-fold
//!   cross-validation, per-stratum evaluation, and per-day baseline
//!   experiments.
//! * [`synth`] — a deterministic synthetic reference cohort mirroring the
//!   shape of a public COVID-19 lab-test dataset, used by the examples and the
//!   acceptance suite.
//! * [`config`] / [`cli`] — run configuration and the command-line entry
//!   points used by the `tempstrat` binary.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod boosting;
pub mod cli;
pub mod cohort;
pub mod config;
pub mod eval;
pub mod matrix;
pub mod predictor;
pub mod seeds;
pub mod strata;
pub mod synth;

#[cfg(test)]
pub(crate) mod test_util;

pub use boosting::{grad_hess, BoostError, BoostedModel, HyperParams, Objective, TreeNode};
pub use cohort::{
    AlignedCohort, CohortError, DaySelection, FeatureMatrix, FeatureVector, Ingested, Outcome,
    PatientPanel, RawRecord, SchemaConfig,
};
pub use config::RunConfig;
pub use eval::{auroc, aupr, threshold_metrics, CVReport, EvalError, Metrics, PositiveClass};
pub use matrix::DenseMatrix;
pub use predictor::{
    DailyPrediction, DayWeight, PredictorError, PredictorParams, StratifiedPredictor,
};
pub use strata::{StrataDefinition, StrataError, StratumWindow};
