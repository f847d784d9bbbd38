//! Experiment suites: per-stratum model evaluation, per-day baseline models
//! on a few key labs, and the retrospective last-day baseline.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{stratified_group_kfold, AggregatedMetrics, CvSettings};
use super::{compute_metrics, EvalError, Metrics, PositiveClass};
use crate::boosting::{BoostedModel, HyperParams, ImportanceEntry, Objective};
use crate::cohort::{AlignedCohort, DaySelection, Outcome, PatientPanel};
use crate::matrix::DenseMatrix;
use crate::seeds::derive_seed;
use crate::strata::{truncated_training_set, StrataDefinition};

fn named_importance(
    model: &BoostedModel,
    names: &[String],
) -> BTreeMap<String, ImportanceEntry> {
    model
        .feature_importance()
        .into_iter()
        .map(|(idx, entry)| (names[idx].clone(), entry))
        .collect()
}

/// Evaluation of one stratum-wise mortality model: cohort-determined
/// membership counts, cross-validated metrics in both label orientations,
/// and the gain importances of a model fitted on the stratum's full data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumEvalRow {
    pub index: usize,
    pub window: String,
    pub n_patients: usize,
    pub n_deaths: usize,
    /// True when the stratum holds a single outcome class (or too few
    /// patients to fold); metrics are then undefined rather than fatal.
    pub single_class: bool,
    pub died: AggregatedMetrics,
    pub survived: AggregatedMetrics,
    pub importance: BTreeMap<String, ImportanceEntry>,
}

/// Train and evaluate each stratum's mortality model on its double-truncated
/// training set via repeated patient-grouped CV, reporting both the
/// died-as-positive and survived-as-positive orientations.
pub fn per_stratum_eval(
    cohort: &AlignedCohort,
    def: &StrataDefinition,
    stratum_hp: &HyperParams,
    selection: DaySelection,
    cv: &CvSettings,
) -> Result<Vec<StratumEvalRow>, EvalError> {
    if !cohort.imputed {
        return Err(EvalError::NotImputed);
    }
    let windows = def.windows();
    let mut rows = Vec::with_capacity(windows.len());
    for window in &windows {
        let k = window.index;
        let tset = truncated_training_set(cohort, def, k, selection);
        let labels_u32: Vec<u32> = tset.data.labels.iter().map(|&l| u32::from(l)).collect();

        // Full-data model for the importance profile.
        let importance = if tset.is_empty() {
            BTreeMap::new()
        } else {
            let hp = HyperParams {
                seed: derive_seed(cv.seed, "stratum-importance", k as u64),
                ..stratum_hp.clone()
            };
            let (model, _) =
                BoostedModel::fit(Objective::BinaryLogistic, &tset.data.x, &labels_u32, &hp, None)?;
            named_importance(&model, &cohort.variable_names)
        };

        // Local patient list in first-appearance order.
        let mut local_of: BTreeMap<usize, usize> = BTreeMap::new();
        let mut patient_outcomes: Vec<Outcome> = Vec::new();
        let mut row_patient: Vec<usize> = Vec::with_capacity(tset.data.x.n_rows());
        for (i, &pi) in tset.data.patient_indices.iter().enumerate() {
            let local = *local_of.entry(pi).or_insert_with(|| {
                patient_outcomes.push(cohort.patients[pi].outcome);
                patient_outcomes.len() - 1
            });
            let _ = i;
            row_patient.push(local);
        }

        let single_class =
            tset.n_deaths == 0 || tset.n_deaths == tset.n_patients || tset.n_patients < 2;
        let (died, survived) = if single_class || tset.is_empty() {
            (
                AggregatedMetrics::from_repetitions(&[]),
                AggregatedMetrics::from_repetitions(&[]),
            )
        } else {
            let k_folds = cv.k.min(tset.n_patients);
            // Strata are small (tens of patients), so no validation fold is
            // carved out here: every non-test fold trains the model for the
            // configured number of rounds.
            let reps: Vec<(Metrics, Metrics)> = (0..cv.repeats)
                .into_par_iter()
                .map(|rep| -> Result<(Metrics, Metrics), EvalError> {
                    let fold_seed =
                        derive_seed(cv.seed, "stratum-folds", (k * 10_000 + rep) as u64);
                    let folds = stratified_group_kfold(&patient_outcomes, k_folds, fold_seed)?;
                    let mut scores = Vec::new();
                    let mut labels = Vec::new();
                    for test_fold in 0..k_folds {
                        let mut train_rows = Vec::new();
                        let mut test_rows = Vec::new();
                        for (r, &local) in row_patient.iter().enumerate() {
                            if folds[local] == test_fold {
                                test_rows.push(r);
                            } else {
                                train_rows.push(r);
                            }
                        }
                        if train_rows.is_empty() || test_rows.is_empty() {
                            continue;
                        }
                        let tx = tset.data.x.select_rows(&train_rows);
                        let ty: Vec<u32> =
                            train_rows.iter().map(|&r| labels_u32[r]).collect();
                        let hp = HyperParams {
                            seed: derive_seed(
                                cv.seed,
                                "stratum-cv",
                                (k * 1_000_000 + rep * 100 + test_fold) as u64,
                            ),
                            ..stratum_hp.clone()
                        };
                        let (model, _) =
                            BoostedModel::fit(Objective::BinaryLogistic, &tx, &ty, &hp, None)?;
                        let probs = model.predict_proba(&tset.data.x.select_rows(&test_rows))?;
                        for (i, &r) in test_rows.iter().enumerate() {
                            scores.push(probs.get(i, 0));
                            labels.push(tset.data.labels[r]);
                        }
                    }
                    Ok((
                        compute_metrics(&scores, &labels, cv.threshold, PositiveClass::Died),
                        compute_metrics(&scores, &labels, cv.threshold, PositiveClass::Survived),
                    ))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let died: Vec<Metrics> = reps.iter().map(|(d, _)| d.clone()).collect();
            let survived: Vec<Metrics> = reps.iter().map(|(_, s)| s.clone()).collect();
            (
                AggregatedMetrics::from_repetitions(&died),
                AggregatedMetrics::from_repetitions(&survived),
            )
        };

        rows.push(StratumEvalRow {
            index: k,
            window: window.label(),
            n_patients: tset.n_patients,
            n_deaths: tset.n_deaths,
            single_class,
            died,
            survived,
            importance,
        });
    }
    Ok(rows)
}

/// Whether per-day baseline models align days by offset to the outcome or by
/// calendar date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayAxis {
    Offset,
    Calendar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyBaselineConfig {
    /// Input features of the per-day models (the key labs by default).
    pub features: Vec<String>,
    pub axis: DayAxis,
    /// Days with fewer training patients than this are skipped.
    pub min_patients: usize,
    /// Whether day 0 (the outcome day) gets a model. It is the
    /// retrospective-style endpoint, useful as a diagnostic.
    pub include_outcome_day: bool,
    pub params: HyperParams,
    pub seed: u64,
    pub threshold: f64,
}

impl DailyBaselineConfig {
    pub fn new(features: Vec<String>) -> Self {
        DailyBaselineConfig {
            features,
            axis: DayAxis::Offset,
            min_patients: 5,
            include_outcome_day: true,
            params: HyperParams::default(),
            seed: 0,
            threshold: 0.5,
        }
    }
}

/// One per-day baseline model's results. `survival_recall` / `death_recall`
/// are the per-class accuracies; `metrics` is the died-as-positive set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyBaselineRow {
    pub day: String,
    pub n_train: usize,
    pub n_test: usize,
    pub survival_recall: Option<f64>,
    pub death_recall: Option<f64>,
    pub metrics: Metrics,
    pub importance: BTreeMap<String, ImportanceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyBaselineReport {
    pub axis: DayAxis,
    pub features: Vec<String>,
    pub rows: Vec<DailyBaselineRow>,
    /// (day, reason) for days without a model.
    pub skipped: Vec<(String, String)>,
}

fn feature_indices(cohort: &AlignedCohort, features: &[String]) -> Result<Vec<usize>, EvalError> {
    features
        .iter()
        .map(|f| {
            cohort
                .variable_names
                .iter()
                .position(|v| v == f)
                .ok_or_else(|| EvalError::MissingFeature(f.clone()))
        })
        .collect()
}

fn rows_at(
    cohort: &AlignedCohort,
    idx: &[usize],
    offset_for: impl Fn(&PatientPanel) -> Option<i32>,
) -> (Vec<Vec<Option<f64>>>, Vec<u8>) {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for panel in &cohort.patients {
        let Some(offset) = offset_for(panel) else {
            continue;
        };
        let Some(values) = panel.rows.get(&offset) else {
            continue;
        };
        rows.push(idx.iter().map(|&i| values[i]).collect());
        labels.push(panel.outcome.as_u8());
    }
    (rows, labels)
}

/// Build one model per day from the latest (carried-forward) values of a few
/// key labs in the training cohort, and score it on the same day of the test
/// cohort. Reproduces the per-day baseline analysis grid: per-class
/// accuracies plus each day's gain-importance profile.
pub fn daily_baseline_experiment(
    train: &AlignedCohort,
    test: &AlignedCohort,
    cfg: &DailyBaselineConfig,
) -> Result<DailyBaselineReport, EvalError> {
    if !train.imputed || !test.imputed {
        return Err(EvalError::NotImputed);
    }
    let train_idx = feature_indices(train, &cfg.features)?;
    let test_idx = feature_indices(test, &cfg.features)?;

    // Candidate days along the chosen axis.
    enum Day {
        Offset(i32),
        Date(chrono::NaiveDate),
    }
    let days: Vec<Day> = match cfg.axis {
        DayAxis::Offset => {
            let min_offset = train
                .patients
                .iter()
                .filter_map(|p| p.rows.keys().next().copied())
                .min();
            let Some(min_offset) = min_offset else {
                return Ok(DailyBaselineReport {
                    axis: cfg.axis,
                    features: cfg.features.clone(),
                    rows: vec![],
                    skipped: vec![],
                });
            };
            let last = if cfg.include_outcome_day { 0 } else { -1 };
            (min_offset..=last).map(Day::Offset).collect()
        }
        DayAxis::Calendar => {
            let start = train.patients.iter().map(|p| p.admission_date).min();
            let end = train.patients.iter().map(|p| p.discharge_date).max();
            match (start, end) {
                (Some(start), Some(end)) => start
                    .iter_days()
                    .take_while(|d| *d <= end)
                    .map(Day::Date)
                    .collect(),
                _ => vec![],
            }
        }
    };

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (di, day) in days.iter().enumerate() {
        let (label, train_data, test_data) = match day {
            Day::Offset(d) => {
                let t = rows_at(train, &train_idx, |p| {
                    p.rows.contains_key(d).then_some(*d)
                });
                let e = rows_at(test, &test_idx, |p| p.rows.contains_key(d).then_some(*d));
                (d.to_string(), t, e)
            }
            Day::Date(date) => {
                let at = |p: &PatientPanel| {
                    if *date < p.admission_date || *date > p.discharge_date {
                        return None;
                    }
                    let offset = (*date - p.discharge_date).num_days() as i32;
                    p.rows.contains_key(&offset).then_some(offset)
                };
                let t = rows_at(train, &train_idx, at);
                let e = rows_at(test, &test_idx, at);
                (date.to_string(), t, e)
            }
        };
        let (train_rows, train_labels) = train_data;
        let (test_rows, test_labels) = test_data;
        if train_rows.len() < cfg.min_patients {
            skipped.push((label, "too few training patients".to_string()));
            continue;
        }
        if train_labels.windows(2).all(|w| w[0] == w[1]) {
            skipped.push((label, "single training class".to_string()));
            continue;
        }
        if test_rows.is_empty() {
            skipped.push((label, "no test rows".to_string()));
            continue;
        }
        let tx = DenseMatrix::from_rows(&train_rows, train_idx.len());
        let ty: Vec<u32> = train_labels.iter().map(|&l| u32::from(l)).collect();
        let hp = HyperParams {
            seed: derive_seed(cfg.seed, "daily-baseline", di as u64),
            ..cfg.params.clone()
        };
        let (model, _) = BoostedModel::fit(Objective::BinaryLogistic, &tx, &ty, &hp, None)?;
        let ex = DenseMatrix::from_rows(&test_rows, test_idx.len());
        let probs = model.predict_proba(&ex)?;
        let scores: Vec<f64> = (0..ex.n_rows()).map(|r| probs.get(r, 0)).collect();
        let died = compute_metrics(&scores, &test_labels, cfg.threshold, PositiveClass::Died);
        let survived =
            compute_metrics(&scores, &test_labels, cfg.threshold, PositiveClass::Survived);
        rows.push(DailyBaselineRow {
            day: label,
            n_train: train_rows.len(),
            n_test: test_rows.len(),
            survival_recall: survived.recall,
            death_recall: died.recall,
            metrics: died,
            importance: model
                .feature_importance()
                .into_iter()
                .map(|(i, e)| (cfg.features[i].clone(), e))
                .collect(),
        });
    }
    Ok(DailyBaselineReport {
        axis: cfg.axis,
        features: cfg.features.clone(),
        rows,
        skipped,
    })
}

/// Retrospective baseline: one model trained on each training patient's last
/// observed day and scored on each test patient's last observed day. Not an
/// operational mode (the last record is only knowable in hindsight); kept as
/// the reference point the daily models are compared against.
pub fn retrospective_last_day_eval(
    train: &AlignedCohort,
    test: &AlignedCohort,
    features: &[String],
    params: &HyperParams,
    threshold: f64,
) -> Result<Metrics, EvalError> {
    let train_idx = feature_indices(train, features)?;
    let test_idx = feature_indices(test, features)?;
    let last_day = |p: &PatientPanel| {
        p.observed_mask
            .iter()
            .rev()
            .find(|(_, m)| m.iter().any(|&b| b))
            .map(|(&t, _)| t)
    };
    let (train_rows, train_labels) = rows_at(train, &train_idx, last_day);
    let (test_rows, test_labels) = rows_at(test, &test_idx, last_day);
    if train_rows.is_empty() || test_rows.is_empty() {
        return Ok(Metrics::undefined());
    }
    let tx = DenseMatrix::from_rows(&train_rows, train_idx.len());
    let ty: Vec<u32> = train_labels.iter().map(|&l| u32::from(l)).collect();
    let (model, _) = BoostedModel::fit(Objective::BinaryLogistic, &tx, &ty, params, None)?;
    let ex = DenseMatrix::from_rows(&test_rows, test_idx.len());
    let probs = model.predict_proba(&ex)?;
    let scores: Vec<f64> = (0..ex.n_rows()).map(|r| probs.get(r, 0)).collect();
    Ok(compute_metrics(
        &scores,
        &test_labels,
        threshold,
        PositiveClass::Died,
    ))
}
