//! Patient-grouped, outcome-stratified cross-validation.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compute_metrics, EvalError, Metrics, PositiveClass};
use crate::boosting::HyperParams;
use crate::cohort::{AlignedCohort, Outcome};
use crate::predictor::{build_training_data, fit_from_data, PredictorParams};
use crate::seeds::derive_seed;
use crate::strata::StrataDefinition;

/// Assign each patient to one of `k` folds, keeping outcome proportions
/// balanced: shuffled patients are dealt greedily to the fold with the
/// fewest of their label (ties broken by fold size, then index). Per-fold
/// death counts differ by at most one from the balanced optimum, and all of
/// a patient's days inherit their fold.
pub fn stratified_group_kfold(
    outcomes: &[Outcome],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidFolds(k));
    }
    if k > outcomes.len() {
        return Err(EvalError::TooManyFolds {
            k,
            n: outcomes.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..outcomes.len()).collect();
    order.shuffle(&mut rng);

    let mut folds = vec![0usize; outcomes.len()];
    let mut label_counts = vec![[0usize; 2]; k];
    let mut totals = vec![0usize; k];
    for class in [Outcome::Died, Outcome::Survived] {
        for &p in order.iter().filter(|&&p| outcomes[p] == class) {
            let label = outcomes[p].as_u8() as usize;
            let fold = (0..k)
                .min_by_key(|&f| (label_counts[f][label], totals[f], f))
                .expect("k >= 2");
            folds[p] = fold;
            label_counts[fold][label] += 1;
            totals[fold] += 1;
        }
    }
    Ok(folds)
}

/// Cross-validation protocol settings. With `k = 5` each repetition splits
/// patients 60/20/20 into train/validation/test: every fold serves once as
/// the test cohort with the next fold as the early-stopping validation
/// cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSettings {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            k: 5,
            repeats: 100,
            seed: 0,
            threshold: 0.5,
        }
    }
}

/// Mean and dispersion of one metric across repetitions. `se` is the sample
/// standard deviation of the repetition-level means; with a single defined
/// repetition it is reported as 0 and `n_defined` flags the degenerate case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: Option<f64>,
    pub se: Option<f64>,
    pub n_defined: usize,
    pub n_total: usize,
}

fn aggregate(values: impl Iterator<Item = Option<f64>>) -> MetricStats {
    let values: Vec<Option<f64>> = values.collect();
    let n_total = values.len();
    let defined: Vec<f64> = values.into_iter().flatten().collect();
    let n_defined = defined.len();
    if n_defined == 0 {
        return MetricStats {
            mean: None,
            se: None,
            n_defined,
            n_total,
        };
    }
    let mean = defined.iter().sum::<f64>() / n_defined as f64;
    let se = if n_defined == 1 {
        0.0
    } else {
        let var = defined.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (n_defined as f64 - 1.0);
        var.sqrt()
    };
    MetricStats {
        mean: Some(mean),
        se: Some(se),
        n_defined,
        n_total,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedMetrics {
    pub auroc: MetricStats,
    pub aupr: MetricStats,
    pub accuracy: MetricStats,
    pub f1: MetricStats,
    pub precision: MetricStats,
    pub recall: MetricStats,
    pub specificity: MetricStats,
}

impl AggregatedMetrics {
    pub fn from_repetitions(reps: &[Metrics]) -> Self {
        AggregatedMetrics {
            auroc: aggregate(reps.iter().map(|m| m.auroc)),
            aupr: aggregate(reps.iter().map(|m| m.aupr)),
            accuracy: aggregate(reps.iter().map(|m| m.accuracy)),
            f1: aggregate(reps.iter().map(|m| m.f1)),
            precision: aggregate(reps.iter().map(|m| m.precision)),
            recall: aggregate(reps.iter().map(|m| m.recall)),
            specificity: aggregate(reps.iter().map(|m| m.specificity)),
        }
    }
}

/// Repeated cross-validation report for the combined predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub k: usize,
    pub repeats: usize,
    pub master_seed: u64,
    pub threshold: f64,
    pub n_patients: usize,
    pub per_repetition: Vec<Metrics>,
    pub summary: AggregatedMetrics,
}

impl CVReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Repeated stratified group k-fold evaluation of the combined predictor.
///
/// Each repetition reshuffles the folds, fits the predictor on the training
/// folds with early stopping on the validation fold, scores every held-out
/// patient-day (offset < 0) as an independent sample, and pools the test
/// predictions into one metric set. Repetitions run in parallel; results are
/// reduced in repetition order so parallelism never changes the report.
pub fn run_cv(
    cohort: &AlignedCohort,
    def: &StrataDefinition,
    params: &PredictorParams,
    cv: &CvSettings,
) -> Result<CVReport, EvalError> {
    if !cohort.imputed {
        return Err(EvalError::NotImputed);
    }
    if cv.k < 2 {
        return Err(EvalError::InvalidFolds(cv.k));
    }
    let outcomes: Vec<Outcome> = cohort.patients.iter().map(|p| p.outcome).collect();
    if cv.k > outcomes.len() {
        return Err(EvalError::TooManyFolds {
            k: cv.k,
            n: outcomes.len(),
        });
    }
    let data = build_training_data(cohort, def, params.selection);
    let schema = &cohort.variable_names;

    let per_repetition: Vec<Metrics> = (0..cv.repeats)
        .into_par_iter()
        .map(|rep| -> Result<Metrics, EvalError> {
            let fold_seed = derive_seed(cv.seed, "cv-folds", rep as u64);
            let folds = stratified_group_kfold(&outcomes, cv.k, fold_seed)?;
            let mut pooled_scores = Vec::new();
            let mut pooled_labels = Vec::new();
            for test_fold in 0..cv.k {
                // With fewer than 3 folds there is no room for a separate
                // validation fold; train without early stopping.
                let val_fold = if cv.k >= 3 { Some((test_fold + 1) % cv.k) } else { None };
                let mut train_rows = Vec::new();
                let mut val_rows = Vec::new();
                let mut test_rows = Vec::new();
                for r in 0..data.x.n_rows() {
                    let fold = folds[data.patient_indices[r]];
                    if fold == test_fold {
                        test_rows.push(r);
                    } else if Some(fold) == val_fold {
                        val_rows.push(r);
                    } else {
                        train_rows.push(r);
                    }
                }
                let split_id = (rep * cv.k + test_fold) as u64;
                let strata_hp = HyperParams {
                    seed: derive_seed(cv.seed, "cv-strata-clf", split_id),
                    ..params.strata.clone()
                };
                let stratum_hp = HyperParams {
                    seed: derive_seed(cv.seed, "cv-stratum-models", split_id),
                    ..params.stratum.clone()
                };
                let (predictor, _) = fit_from_data(
                    &data,
                    def,
                    schema,
                    &train_rows,
                    val_fold.map(|_| val_rows.as_slice()),
                    &strata_hp,
                    &stratum_hp,
                )?;
                let test_x = data.x.select_rows(&test_rows);
                for (i, p) in predictor.predict_batch(&test_x)?.into_iter().enumerate() {
                    pooled_scores.push(p.risk);
                    pooled_labels.push(data.outcome[test_rows[i]] as u8);
                }
            }
            Ok(compute_metrics(
                &pooled_scores,
                &pooled_labels,
                cv.threshold,
                PositiveClass::Died,
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let summary = AggregatedMetrics::from_repetitions(&per_repetition);
    Ok(CVReport {
        k: cv.k,
        repeats: cv.repeats,
        master_seed: cv.seed,
        threshold: cv.threshold,
        n_patients: outcomes.len(),
        per_repetition,
        summary,
    })
}
