//! The two-level temporally stratified predictor.
//!
//! A strata classifier (softmax over the strata) and one binary mortality
//! model per stratum share the same daily feature schema. The daily risk is
//! the dot product of the strata probability vector with the vector of
//! stratum-wise death probabilities, so inference never needs to know the
//! true day offset. `fit` may train its submodels independently; the fitted
//! predictor is immutable and its predict methods are read-only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boosting::{BoostError, BoostedModel, EvalSet, HyperParams, Objective, TrainLog};
use crate::cohort::{feature_matrix, AlignedCohort, DaySelection, FeatureVector, Outcome, PatientPanel};
use crate::matrix::DenseMatrix;
use crate::seeds::derive_seed;
use crate::strata::{StrataDefinition, StrataError};

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("cohort must be imputed before fitting")]
    NotImputed,
    #[error("cohort contains a single outcome class")]
    SingleOutcomeCohort,
    #[error("stratum {window} has no training rows; the definition is too fine for the data")]
    EmptyStratum { window: String },
    #[error("feature vector has {got} entries, predictor schema has {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Boost(#[from] BoostError),
    #[error(transparent)]
    Strata(#[from] StrataError),
}

/// Per-submodel hyperparameters plus fit-level knobs. All submodel seeds are
/// derived from `seed`, so two fits with the same inputs are identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorParams {
    pub strata: HyperParams,
    pub stratum: HyperParams,
    #[serde(default)]
    pub selection: DaySelection,
    /// Fraction of patients held out (grouped, outcome-stratified) for early
    /// stopping during `fit`. 0 trains on everything with no early stop.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl PredictorParams {
    /// Reference configuration: depth-4 trees, learning rate 0.2, subsample
    /// 0.9; L2 of 0.02 on the strata classifier and none on the stratum
    /// models.
    pub fn with_seed(seed: u64) -> Self {
        PredictorParams {
            strata: HyperParams {
                l2_lambda: 0.02,
                ..HyperParams::default()
            },
            stratum: HyperParams {
                l2_lambda: 0.0,
                ..HyperParams::default()
            },
            selection: DaySelection::Observed,
            validation_fraction: 0.2,
            seed,
        }
    }
}

/// One daily prediction. `patient_id` and `day_offset` are bookkeeping
/// copied from the panel when known; the scores are a pure function of the
/// feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyPrediction {
    pub patient_id: Option<String>,
    pub day_offset: Option<i32>,
    pub strata_probs: Vec<f64>,
    pub stratum_scores: Vec<f64>,
    pub risk: f64,
}

/// Day-weighting schemes for the weighted cross-entropy loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DayWeight {
    /// Every day weighs 1 (the plain per-day loss).
    Uniform,
    /// `exp(beta * offset)` with `beta > 0`: days close to the outcome weigh
    /// more, emphasizing near-term accuracy.
    Exponential { beta: f64 },
}

impl DayWeight {
    pub fn value(&self, day_offset: i32) -> f64 {
        match self {
            DayWeight::Uniform => 1.0,
            DayWeight::Exponential { beta } => (beta * f64::from(day_offset)).exp(),
        }
    }
}

const RISK_CLAMP: f64 = 1e-12;

/// Cross-entropy of one risk against a binary outcome; the risk is clamped
/// to [1e-12, 1 - 1e-12] before the logs.
pub fn cross_entropy(risk: f64, outcome: Outcome) -> f64 {
    let p = risk.clamp(RISK_CLAMP, 1.0 - RISK_CLAMP);
    match outcome {
        Outcome::Died => -p.ln(),
        Outcome::Survived => -(1.0 - p).ln(),
    }
}

/// Day-weighted cross-entropy over a patient's per-day risks:
/// `sum_t w(t) * ce(risk_t, y)`. With the uniform weight this is the plain
/// per-day loss.
pub fn weighted_ce_loss(day_risks: &[(i32, f64)], outcome: Outcome, weight: &DayWeight) -> f64 {
    weighted_ce_loss_with(day_risks, outcome, |t| weight.value(t))
}

pub fn weighted_ce_loss_with(
    day_risks: &[(i32, f64)],
    outcome: Outcome,
    weight: impl Fn(i32) -> f64,
) -> f64 {
    day_risks
        .iter()
        .map(|&(t, risk)| {
            let w = weight(t);
            debug_assert!(w >= 0.0, "day weights must be non-negative");
            w * cross_entropy(risk, outcome)
        })
        .sum()
}

/// Per-stratum training-set statistics reported by `fit`. Patient and death
/// counts describe the whole input cohort's truncated membership;
/// `n_train_rows` is what the stratum model actually saw (smaller when a
/// validation fraction is held out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumFitInfo {
    pub index: usize,
    pub window: String,
    pub n_patients: usize,
    pub n_deaths: usize,
    pub n_train_rows: usize,
    pub single_class: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n_strata_rows: usize,
    pub per_stratum: Vec<StratumFitInfo>,
    pub strata_log: TrainLog,
    pub stratum_logs: Vec<TrainLog>,
}

/// The assembled two-level predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedPredictor {
    pub strata_def: StrataDefinition,
    pub strata_clf: BoostedModel,
    pub stratum_models: Vec<BoostedModel>,
    pub feature_schema: Vec<String>,
}

/// All (patient, day<0) samples of a cohort with their stratum labels.
#[derive(Debug, Clone)]
pub(crate) struct TrainingData {
    pub x: DenseMatrix,
    pub outcome: Vec<u32>,
    pub stratum: Vec<u32>,
    pub patient_indices: Vec<usize>,
    pub n_strata: usize,
}

pub(crate) fn build_training_data(
    cohort: &AlignedCohort,
    def: &StrataDefinition,
    selection: DaySelection,
) -> TrainingData {
    let fm = feature_matrix(cohort, |t| t < 0, selection);
    let stratum: Vec<u32> = fm
        .offsets
        .iter()
        .map(|&t| def.assign(t).expect("offsets are negative") as u32)
        .collect();
    TrainingData {
        x: fm.x,
        outcome: fm.labels.iter().map(|&l| u32::from(l)).collect(),
        stratum,
        patient_indices: fm.patient_indices,
        n_strata: def.n_strata(),
    }
}

/// Train the strata classifier and the stratum models on explicit row
/// subsets of prepared training data. `eval_rows`, when given, drives early
/// stopping for every submodel.
pub(crate) fn fit_from_data(
    data: &TrainingData,
    def: &StrataDefinition,
    feature_schema: &[String],
    train_rows: &[usize],
    eval_rows: Option<&[usize]>,
    strata_hp: &HyperParams,
    stratum_hp: &HyperParams,
) -> Result<(StratifiedPredictor, FitReport), PredictorError> {
    let n_strata = data.n_strata;
    let windows = def.windows();

    // Strata classifier: every training day, labeled with its true stratum.
    let sx = data.x.select_rows(train_rows);
    let sy: Vec<u32> = train_rows.iter().map(|&r| data.stratum[r]).collect();
    let strata_eval = eval_rows.filter(|rows| !rows.is_empty()).map(|rows| {
        (
            data.x.select_rows(rows),
            rows.iter().map(|&r| data.stratum[r]).collect::<Vec<u32>>(),
        )
    });
    let (strata_clf, strata_log) = BoostedModel::fit(
        Objective::Softmax { n_classes: n_strata },
        &sx,
        &sy,
        strata_hp,
        strata_eval.as_ref().map(|(x, y)| EvalSet { x, y }),
    )?;

    let mut stratum_models = Vec::with_capacity(n_strata);
    let mut stratum_logs = Vec::with_capacity(n_strata);
    let mut per_stratum = Vec::with_capacity(n_strata);
    for (k, window) in windows.iter().enumerate() {
        let rows: Vec<usize> = train_rows
            .iter()
            .copied()
            .filter(|&r| data.stratum[r] as usize == k)
            .collect();
        if rows.is_empty() {
            return Err(PredictorError::EmptyStratum {
                window: window.label(),
            });
        }
        // Cohort-wide membership counts (data-determined, independent of the
        // train/validation split).
        let mut patients = std::collections::BTreeSet::new();
        let mut deaths = std::collections::BTreeSet::new();
        for r in 0..data.x.n_rows() {
            if data.stratum[r] as usize == k {
                patients.insert(data.patient_indices[r]);
                if data.outcome[r] == 1 {
                    deaths.insert(data.patient_indices[r]);
                }
            }
        }
        let kx = data.x.select_rows(&rows);
        let ky: Vec<u32> = rows.iter().map(|&r| data.outcome[r]).collect();
        let k_eval = eval_rows.and_then(|er| {
            let rows: Vec<usize> = er
                .iter()
                .copied()
                .filter(|&r| data.stratum[r] as usize == k)
                .collect();
            if rows.is_empty() {
                None
            } else {
                Some((
                    data.x.select_rows(&rows),
                    rows.iter().map(|&r| data.outcome[r]).collect::<Vec<u32>>(),
                ))
            }
        });
        let hp = HyperParams {
            seed: derive_seed(stratum_hp.seed, "stratum-model", k as u64),
            ..stratum_hp.clone()
        };
        let (model, log) = BoostedModel::fit(
            Objective::BinaryLogistic,
            &kx,
            &ky,
            &hp,
            k_eval.as_ref().map(|(x, y)| EvalSet { x, y }),
        )?;
        let single_class = ky.windows(2).all(|w| w[0] == w[1]);
        per_stratum.push(StratumFitInfo {
            index: k,
            window: window.label(),
            n_patients: patients.len(),
            n_deaths: deaths.len(),
            n_train_rows: rows.len(),
            single_class,
        });
        stratum_models.push(model);
        stratum_logs.push(log);
    }

    Ok((
        StratifiedPredictor {
            strata_def: def.clone(),
            strata_clf,
            stratum_models,
            feature_schema: feature_schema.to_vec(),
        },
        FitReport {
            n_strata_rows: train_rows.len(),
            per_stratum,
            strata_log,
            stratum_logs,
        },
    ))
}

impl StratifiedPredictor {
    /// Fit the full two-level predictor on an imputed cohort.
    ///
    /// Strata with zero death or zero survival rows are trained anyway and
    /// flagged in the report; a stratum with zero rows is fatal and names
    /// its window.
    pub fn fit(
        cohort: &AlignedCohort,
        def: &StrataDefinition,
        params: &PredictorParams,
    ) -> Result<(StratifiedPredictor, FitReport), PredictorError> {
        if !cohort.imputed {
            return Err(PredictorError::NotImputed);
        }
        let outcomes: Vec<Outcome> = cohort.patients.iter().map(|p| p.outcome).collect();
        if !outcomes.contains(&Outcome::Died) || !outcomes.contains(&Outcome::Survived) {
            return Err(PredictorError::SingleOutcomeCohort);
        }
        let data = build_training_data(cohort, def, params.selection);

        let (train_rows, eval_rows): (Vec<usize>, Option<Vec<usize>>) =
            if params.validation_fraction > 0.0 && cohort.patients.len() >= 4 {
                let k = ((1.0 / params.validation_fraction).round() as usize).max(2);
                let folds = crate::eval::stratified_group_kfold(
                    &outcomes,
                    k.min(cohort.patients.len()),
                    derive_seed(params.seed, "fit-validation", 0),
                )
                .expect("k bounded by patient count");
                let train = (0..data.x.n_rows())
                    .filter(|&r| folds[data.patient_indices[r]] != 0)
                    .collect();
                let eval = (0..data.x.n_rows())
                    .filter(|&r| folds[data.patient_indices[r]] == 0)
                    .collect();
                (train, Some(eval))
            } else {
                ((0..data.x.n_rows()).collect(), None)
            };

        let strata_hp = HyperParams {
            seed: derive_seed(params.seed, "strata-clf", 0),
            ..params.strata.clone()
        };
        let stratum_hp = HyperParams {
            seed: derive_seed(params.seed, "stratum-models", 0),
            ..params.stratum.clone()
        };
        fit_from_data(
            &data,
            def,
            &cohort.variable_names,
            &train_rows,
            eval_rows.as_deref(),
            &strata_hp,
            &stratum_hp,
        )
    }

    pub fn n_strata(&self) -> usize {
        self.strata_def.n_strata()
    }

    /// Predict a batch of feature rows. Output order matches input order.
    pub fn predict_batch(&self, x: &DenseMatrix) -> Result<Vec<DailyPrediction>, PredictorError> {
        if x.n_cols() != self.feature_schema.len() {
            return Err(PredictorError::SchemaMismatch {
                expected: self.feature_schema.len(),
                got: x.n_cols(),
            });
        }
        let probs = self.strata_clf.predict_proba(x)?;
        let scores: Vec<DenseMatrix> = self
            .stratum_models
            .iter()
            .map(|m| m.predict_proba(x))
            .collect::<Result<_, _>>()?;
        let n_strata = self.n_strata();
        let mut out = Vec::with_capacity(x.n_rows());
        for r in 0..x.n_rows() {
            let strata_probs: Vec<f64> = (0..n_strata).map(|k| probs.get(r, k)).collect();
            let stratum_scores: Vec<f64> = scores.iter().map(|s| s.get(r, 0)).collect();
            let risk = combined_risk(&strata_probs, &stratum_scores);
            out.push(DailyPrediction {
                patient_id: None,
                day_offset: None,
                strata_probs,
                stratum_scores,
                risk,
            });
        }
        Ok(out)
    }

    /// Predict one day from its feature vector alone; no day offset or other
    /// panel metadata is consulted.
    pub fn predict_day(&self, x: &FeatureVector) -> Result<DailyPrediction, PredictorError> {
        if x.len() != self.feature_schema.len() {
            return Err(PredictorError::SchemaMismatch {
                expected: self.feature_schema.len(),
                got: x.len(),
            });
        }
        let m = DenseMatrix::from_rows(std::slice::from_ref(x), x.len());
        Ok(self.predict_batch(&m)?.pop().expect("one row in, one out"))
    }

    /// Predict every populated day before the outcome day, in chronological
    /// order. The outcome day itself is discarded: a prediction made then
    /// would be too late to act on.
    pub fn predict_course(
        &self,
        panel: &PatientPanel,
    ) -> Result<Vec<DailyPrediction>, PredictorError> {
        let mut out = Vec::new();
        for (&offset, values) in &panel.rows {
            if offset >= 0 {
                continue;
            }
            let mut prediction = self.predict_day(values)?;
            prediction.patient_id = Some(panel.patient_id.clone());
            prediction.day_offset = Some(offset);
            out.push(prediction);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("predictor serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}

/// `risk = strata_probs . stratum_scores`.
fn combined_risk(strata_probs: &[f64], stratum_scores: &[f64]) -> f64 {
    strata_probs
        .iter()
        .zip(stratum_scores)
        .map(|(p, s)| p * s)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::toy_cohort;
    use std::collections::BTreeMap;

    fn quick_params(seed: u64) -> PredictorParams {
        let mut p = PredictorParams::with_seed(seed);
        p.strata.n_rounds = 10;
        p.strata.subsample = 1.0;
        p.stratum.n_rounds = 10;
        p.stratum.subsample = 1.0;
        p.validation_fraction = 0.0;
        p
    }

    #[test]
    fn fit_produces_one_model_per_stratum() {
        let cohort = toy_cohort(8, 6);
        let def = StrataDefinition::new(vec![-3]).unwrap();
        let (pred, report) = StratifiedPredictor::fit(&cohort, &def, &quick_params(1)).unwrap();
        assert_eq!(pred.stratum_models.len(), 2);
        assert_eq!(pred.strata_clf.n_groups(), 2);
        assert_eq!(report.per_stratum.len(), 2);
        // every patient is observed in both windows
        assert!(report.per_stratum.iter().all(|s| s.n_patients == 16));
        assert!(report.per_stratum.iter().all(|s| s.n_deaths == 8));
        assert!(report.per_stratum.iter().all(|s| !s.single_class));
    }

    #[test]
    fn unreachable_stratum_is_fatal_and_names_the_window() {
        let cohort = toy_cohort(4, 5); // offsets down to -4 only
        let def = StrataDefinition::new(vec![-30]).unwrap();
        let err = StratifiedPredictor::fit(&cohort, &def, &quick_params(1)).unwrap_err();
        match err {
            PredictorError::EmptyStratum { window } => assert_eq!(window, "(-inf, -30]"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn single_class_stratum_is_trained_and_flagged() {
        // deaths stay 3 days, survivors 9: the early stratum sees survivors
        // only, which trains to a base-score model and gets flagged
        let cohort = crate::test_util::toy_cohort_mixed(6, 3, 9);
        let def = StrataDefinition::new(vec![-4]).unwrap();
        let (pred, report) = StratifiedPredictor::fit(&cohort, &def, &quick_params(8)).unwrap();
        assert!(report.per_stratum[0].single_class);
        assert_eq!(report.per_stratum[0].n_deaths, 0);
        assert!(!report.per_stratum[1].single_class);
        assert_eq!(pred.stratum_models.len(), 2);
        // the flagged model still predicts (low risk everywhere)
        let p = pred
            .predict_day(&vec![Some(0.3), Some(-5.0)])
            .unwrap();
        assert!((0.0..=1.0).contains(&p.risk));
    }

    #[test]
    fn unimputed_cohort_is_rejected() {
        let mut cohort = toy_cohort(4, 5);
        cohort.imputed = false;
        let def = StrataDefinition::new(vec![-2]).unwrap();
        assert!(matches!(
            StratifiedPredictor::fit(&cohort, &def, &quick_params(1)),
            Err(PredictorError::NotImputed)
        ));
    }

    #[test]
    fn combined_risk_is_the_dot_product() {
        assert_eq!(combined_risk(&[1.0, 0.0], &[0.3, 0.9]), 0.3);
        assert_eq!(combined_risk(&[0.0, 1.0], &[0.3, 0.9]), 0.9);
        assert!((combined_risk(&[0.5, 0.5], &[0.2, 0.8]) - 0.5).abs() < 1e-15);
        // equal scores: weights on the simplex are irrelevant
        let c = combined_risk(&[0.25, 0.75], &[0.4, 0.4]);
        assert!((c - 0.4).abs() < 1e-12);
    }

    #[test]
    fn risk_is_a_convex_combination_of_stratum_scores() {
        let cohort = toy_cohort(8, 8);
        let def = StrataDefinition::new(vec![-2, -5]).unwrap();
        let (pred, _) = StratifiedPredictor::fit(&cohort, &def, &quick_params(2)).unwrap();
        for panel in &cohort.patients {
            for p in pred.predict_course(panel).unwrap() {
                let lo = p.stratum_scores.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = p
                    .stratum_scores
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(p.risk >= lo - 1e-12 && p.risk <= hi + 1e-12);
                let dot = combined_risk(&p.strata_probs, &p.stratum_scores);
                assert!((p.risk - dot).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_hot_strata_reproduce_the_bare_stratum_model() {
        let cohort = toy_cohort(8, 6);
        let def = StrataDefinition::new(vec![-3]).unwrap();
        let (pred, _) = StratifiedPredictor::fit(&cohort, &def, &quick_params(3)).unwrap();
        let panel = &cohort.patients[0];
        for (&offset, values) in panel.rows.iter().filter(|(&t, _)| t < 0) {
            let truth = def.assign(offset).unwrap();
            let p = pred.predict_day(values).unwrap();
            // replace the strata distribution with the ground-truth one-hot
            let mut one_hot = vec![0.0; pred.n_strata()];
            one_hot[truth] = 1.0;
            let oracle_risk = combined_risk(&one_hot, &p.stratum_scores);
            let m = DenseMatrix::from_rows(std::slice::from_ref(values), values.len());
            let bare = pred.stratum_models[truth].predict_proba(&m).unwrap().get(0, 0);
            assert_eq!(oracle_risk, bare);
        }
    }

    #[test]
    fn identical_stratum_models_reduce_to_the_unstratified_model() {
        let cohort = toy_cohort(8, 6);
        let def = StrataDefinition::new(vec![-3]).unwrap();
        let (pred, _) = StratifiedPredictor::fit(&cohort, &def, &quick_params(4)).unwrap();
        let mut degenerate = pred.clone();
        degenerate.stratum_models = vec![pred.stratum_models[0].clone(); 2];
        let panel = &cohort.patients[1];
        for (_, values) in panel.rows.iter().filter(|(&t, _)| t < 0) {
            let p = degenerate.predict_day(values).unwrap();
            let m = DenseMatrix::from_rows(std::slice::from_ref(values), values.len());
            let single = pred.stratum_models[0].predict_proba(&m).unwrap().get(0, 0);
            assert!((p.risk - single).abs() < 1e-12);
        }
    }

    #[test]
    fn predict_course_excludes_the_outcome_day() {
        let cohort = toy_cohort(4, 4);
        let def = StrataDefinition::new(vec![-2]).unwrap();
        let (pred, _) = StratifiedPredictor::fit(&cohort, &def, &quick_params(5)).unwrap();

        // panel with rows at -3, -1 and 0 only
        let mut panel = cohort.patients[0].clone();
        let keep = [-3, -1];
        panel.rows.retain(|t, _| keep.contains(t) || *t == 0);
        panel.observed_mask.retain(|t, _| keep.contains(t) || *t == 0);
        let preds = pred.predict_course(&panel).unwrap();
        assert_eq!(preds.len(), 2);
        assert_eq!(preds[0].day_offset, Some(-3));
        assert_eq!(preds[1].day_offset, Some(-1));
        assert!(preds.iter().all(|p| (0.0..=1.0).contains(&p.risk)));
        // no leakage: the course prediction equals a bare predict_day on the
        // same feature vector, with no panel metadata consulted
        for p in &preds {
            let direct = pred.predict_day(&panel.rows[&p.day_offset.unwrap()]).unwrap();
            assert_eq!(direct.risk, p.risk);
            assert_eq!(direct.strata_probs, p.strata_probs);
        }

        let empty = PatientPanel {
            rows: BTreeMap::new(),
            observed_mask: BTreeMap::new(),
            ..panel.clone()
        };
        assert!(pred.predict_course(&empty).unwrap().is_empty());
    }

    #[test]
    fn schema_mismatch_is_fatal() {
        let cohort = toy_cohort(4, 4);
        let def = StrataDefinition::new(vec![-2]).unwrap();
        let (pred, _) = StratifiedPredictor::fit(&cohort, &def, &quick_params(6)).unwrap();
        let err = pred.predict_day(&vec![Some(1.0)]).unwrap_err();
        assert!(matches!(
            err,
            PredictorError::SchemaMismatch { expected: 2, got: 1 }
        ));
    }

    #[test]
    fn predictor_serialization_round_trips() {
        let cohort = toy_cohort(4, 5);
        let def = StrataDefinition::new(vec![-2]).unwrap();
        let (pred, _) = StratifiedPredictor::fit(&cohort, &def, &quick_params(7)).unwrap();
        let json = pred.to_json();
        let restored = StratifiedPredictor::from_json(&json).unwrap();
        assert_eq!(pred, restored);
    }

    #[test]
    fn weighted_loss_examples() {
        // perfect predictions -> loss ~ 0 after clamping
        let perfect = weighted_ce_loss(&[(-3, 1.0), (-1, 1.0)], Outcome::Died, &DayWeight::Uniform);
        assert!(perfect < 1e-10);
        // zero weights -> zero loss
        let zero = weighted_ce_loss_with(&[(-3, 0.5)], Outcome::Died, |_| 0.0);
        assert_eq!(zero, 0.0);
        // two days at risk 0.5 with unit weights -> 2 ln 2
        let l = weighted_ce_loss(&[(-2, 0.5), (-1, 0.5)], Outcome::Died, &DayWeight::Uniform);
        assert!((l - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        // exponential weights decay away from the outcome
        let w = DayWeight::Exponential { beta: 0.5 };
        assert!(w.value(-1) > w.value(-5));
        assert_eq!(w.value(0), 1.0);
    }
}
