//! Command implementations behind the `tempstrat` binary.
//!
//! Every command is a function from a validated [`RunConfig`] to files in
//! the output directory, written deterministically: the same config and
//! seed always produce byte-identical primary outputs. Exit codes: 0
//! success, 2 input/config error, 3 data-insufficiency error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::boosting::{BoostError, HyperParams};
use crate::cohort::{
    align_and_aggregate, derive_history_features, impute_locf, ingest_csv, AlignedCohort,
    CohortError,
};
use crate::config::{ConfigError, RunConfig};
use crate::eval::{
    daily_baseline_experiment, per_stratum_eval, retrospective_last_day_eval, run_cv, CVReport,
    DailyBaselineConfig, DailyBaselineReport, EvalError, MetricStats, StratumEvalRow,
};
use crate::matrix::DenseMatrix;
use crate::predictor::{PredictorError, StratifiedPredictor};
use crate::seeds::derive_seed;
use crate::strata::StrataError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input or configuration; exit code 2.
    #[error("{0}")]
    Input(String),
    /// The data cannot support the requested computation; exit code 3.
    #[error("{0}")]
    DataInsufficiency(String),
    /// Unexpected internal failure; exit code 1.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::DataInsufficiency(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<CohortError> for CliError {
    fn from(e: CohortError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<StrataError> for CliError {
    fn from(e: StrataError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PredictorError> for CliError {
    fn from(e: PredictorError) -> Self {
        match e {
            PredictorError::EmptyStratum { .. } => CliError::DataInsufficiency(e.to_string()),
            PredictorError::SingleOutcomeCohort => CliError::DataInsufficiency(e.to_string()),
            PredictorError::SchemaMismatch { .. } | PredictorError::NotImputed => {
                CliError::Input(e.to_string())
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::TooManyFolds { .. } => CliError::DataInsufficiency(e.to_string()),
            EvalError::InvalidFolds(_) | EvalError::MissingFeature(_) | EvalError::NotImputed => {
                CliError::Input(e.to_string())
            }
            EvalError::Predictor(p) => p.into(),
            EvalError::Boost(BoostError::EmptyTrainingSet) => {
                CliError::DataInsufficiency("a model received zero training rows".into())
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

/// Files written by a command, in write order.
#[derive(Debug, Clone, PartialEq)]
pub struct CmdOutput {
    pub files: Vec<PathBuf>,
}

/// Ingest + align + impute (+ optional history features) for the training
/// file.
pub fn load_train_cohort(config: &RunConfig) -> Result<AlignedCohort, CliError> {
    let ingested = ingest_csv(&config.dataset.train_csv, &config.dataset.schema)?;
    let cohort = impute_locf(&align_and_aggregate(&ingested)?);
    match &config.derive_features {
        Some(d) => Ok(derive_history_features(&cohort, &d.vars, d.window)?),
        None => Ok(cohort),
    }
}

/// The external test cohort, when configured. History features are not
/// derived here: the test file typically carries only the key labs.
pub fn load_test_cohort(config: &RunConfig) -> Result<Option<AlignedCohort>, CliError> {
    let Some(path) = &config.dataset.test_csv else {
        return Ok(None);
    };
    let ingested = ingest_csv(path, &config.dataset.schema)?;
    Ok(Some(impute_locf(&align_and_aggregate(&ingested)?)))
}

fn fmt_opt(value: Option<f64>, precision: usize) -> String {
    match value {
        Some(v) => format!("{v:.precision$}"),
        None => "NA".to_string(),
    }
}

/// Write the canonical cohort dump plus a summary of patients, deaths,
/// variables and per-offset data density.
pub fn cmd_ingest(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let cohort = load_train_cohort(config)?;
    let dump_path = config.output_dir.join("cohort.json");
    write_file(&dump_path, &cohort.to_canonical_json())?;
    let summary = cohort.summarize();
    let summary_path = config.output_dir.join("summary.json");
    write_file(
        &summary_path,
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    Ok(CmdOutput {
        files: vec![dump_path, summary_path],
    })
}

/// Train the stratified predictor on the full training cohort and write the
/// model bundle plus the training log (per-round losses, early-stop round).
pub fn cmd_train(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let cohort = load_train_cohort(config)?;
    let params = config.predictor_params();
    let (predictor, report) = StratifiedPredictor::fit(&cohort, &config.strata, &params)?;
    let model_path = config.output_dir.join("model.json");
    write_file(&model_path, &predictor.to_json())?;
    let log_path = config.output_dir.join("training_log.json");
    write_file(
        &log_path,
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    Ok(CmdOutput {
        files: vec![model_path, log_path],
    })
}

/// Input mode for `predict`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictInput {
    /// A records CSV in the configured schema; predictions cover every
    /// populated day before the outcome day.
    Records,
    /// A plain feature CSV whose header must match the model schema; one
    /// prediction per row.
    Features,
}

fn predictions_header(n_strata: usize) -> String {
    let mut h = String::from("patient_id,day_offset");
    for k in 0..n_strata {
        write!(h, ",strata_prob_{k}").unwrap();
    }
    for k in 0..n_strata {
        write!(h, ",stratum_score_{k}").unwrap();
    }
    h.push_str(",risk\n");
    h
}

fn push_prediction_row(
    out: &mut String,
    id: &str,
    offset: Option<i32>,
    p: &crate::predictor::DailyPrediction,
) {
    let offset = offset.map(|o| o.to_string()).unwrap_or_default();
    write!(out, "{id},{offset}").unwrap();
    for v in &p.strata_probs {
        write!(out, ",{v:.6}").unwrap();
    }
    for v in &p.stratum_scores {
        write!(out, ",{v:.6}").unwrap();
    }
    writeln!(out, ",{:.6}", p.risk).unwrap();
}

/// Score a cohort or feature rows with a trained model bundle.
pub fn cmd_predict(
    config: &RunConfig,
    model_path: &Path,
    input_path: &Path,
    mode: PredictInput,
) -> Result<CmdOutput, CliError> {
    let model_json = std::fs::read_to_string(model_path)
        .map_err(|e| CliError::Input(format!("cannot read model {}: {e}", model_path.display())))?;
    let predictor = StratifiedPredictor::from_json(&model_json)
        .map_err(|e| CliError::Input(format!("invalid model bundle: {e}")))?;

    let mut out = predictions_header(predictor.n_strata());
    match mode {
        PredictInput::Records => {
            let ingested = ingest_csv(input_path, &config.dataset.schema)?;
            let cohort = impute_locf(&align_and_aggregate(&ingested)?);
            if cohort.variable_names != predictor.feature_schema {
                return Err(CliError::Input(format!(
                    "input variables {:?} do not match the model schema {:?}",
                    cohort.variable_names, predictor.feature_schema
                )));
            }
            for panel in &cohort.patients {
                for p in predictor.predict_course(panel)? {
                    push_prediction_row(&mut out, &panel.patient_id, p.day_offset, &p);
                }
            }
        }
        PredictInput::Features => {
            let text = std::fs::read_to_string(input_path).map_err(|e| {
                CliError::Input(format!("cannot read {}: {e}", input_path.display()))
            })?;
            let mut reader = csv::Reader::from_reader(text.as_bytes());
            let headers: Vec<String> = reader
                .headers()
                .map_err(|e| CliError::Input(e.to_string()))?
                .iter()
                .map(|h| h.trim().to_string())
                .collect();
            if headers != predictor.feature_schema {
                return Err(CliError::Input(format!(
                    "feature columns {headers:?} do not match the model schema {:?}",
                    predictor.feature_schema
                )));
            }
            let missing = &config.dataset.schema.missing_values;
            let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
            for record in reader.records() {
                let record = record.map_err(|e| CliError::Input(e.to_string()))?;
                let line = record.position().map(|p| p.line()).unwrap_or(0);
                let mut row = Vec::with_capacity(headers.len());
                for (i, cell) in record.iter().enumerate() {
                    let cell = cell.trim();
                    if missing.iter().any(|m| m == cell) {
                        row.push(None);
                    } else {
                        let v: f64 = cell.parse().map_err(|_| {
                            CliError::Input(format!(
                                "line {line}: malformed number {cell:?} in column {:?}",
                                headers[i]
                            ))
                        })?;
                        row.push(Some(v));
                    }
                }
                rows.push(row);
            }
            let x = DenseMatrix::from_rows(&rows, headers.len());
            for (i, p) in predictor.predict_batch(&x)?.into_iter().enumerate() {
                push_prediction_row(&mut out, &format!("row{i}"), None, &p);
            }
        }
    }
    let path = config.output_dir.join("predictions.csv");
    write_file(&path, &out)?;
    Ok(CmdOutput { files: vec![path] })
}

fn table5_csv(report: &CVReport) -> String {
    let s = &report.summary;
    let cols: [(&str, &MetricStats); 6] = [
        ("auroc", &s.auroc),
        ("aupr", &s.aupr),
        ("accuracy", &s.accuracy),
        ("f1", &s.f1),
        ("precision", &s.precision),
        ("recall", &s.recall),
    ];
    let mut out = String::from("metric");
    for (name, _) in &cols {
        write!(out, ",{name}").unwrap();
    }
    out.push_str("\nmean");
    for (_, stat) in &cols {
        write!(out, ",{}", fmt_opt(stat.mean, 4)).unwrap();
    }
    out.push_str("\nse");
    for (_, stat) in &cols {
        write!(out, ",{}", fmt_opt(stat.se, 4)).unwrap();
    }
    out.push('\n');
    out
}

/// Run repeated cross-validation of the combined model and write the full
/// report plus the summary table.
pub fn cmd_evaluate(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let cohort = load_train_cohort(config)?;
    let report = run_cv(
        &cohort,
        &config.strata,
        &config.predictor_params(),
        &config.cv_settings(),
    )?;
    let report_path = config.output_dir.join("cvreport.json");
    write_file(&report_path, &report.to_json())?;
    let table_path = config.output_dir.join("table5.csv");
    write_file(&table_path, &table5_csv(&report))?;
    Ok(CmdOutput {
        files: vec![report_path, table_path],
    })
}

fn table4_csv(rows: &[StratumEvalRow]) -> String {
    let mut out = String::from(
        "stratum,n_patients,n_deaths,f1_survived,precision_survived,specificity_survived,\
         auroc_died,f1_died,precision_died,sensitivity_died\n",
    );
    for row in rows {
        writeln!(
            out,
            "\"{}\",{},{},{},{},{},{},{},{},{}",
            row.window,
            row.n_patients,
            row.n_deaths,
            fmt_opt(row.survived.f1.mean, 3),
            fmt_opt(row.survived.precision.mean, 3),
            fmt_opt(row.survived.specificity.mean, 3),
            fmt_opt(row.died.auroc.mean, 3),
            fmt_opt(row.died.f1.mean, 3),
            fmt_opt(row.died.precision.mean, 3),
            fmt_opt(row.died.recall.mean, 3),
        )
        .unwrap();
    }
    out
}

fn daily_baseline_csv(report: &DailyBaselineReport) -> String {
    let mut out =
        String::from("day,n_train,n_test,survival_recall,death_recall,auroc_died,accuracy\n");
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.day,
            row.n_train,
            row.n_test,
            fmt_opt(row.survival_recall, 3),
            fmt_opt(row.death_recall, 3),
            fmt_opt(row.metrics.auroc, 3),
            fmt_opt(row.metrics.accuracy, 3),
        )
        .unwrap();
    }
    for (day, reason) in &report.skipped {
        writeln!(out, "{day},0,0,NA,NA,NA,NA # skipped: {reason}").unwrap();
    }
    out
}

fn importances_csv(strata: &[StratumEvalRow], daily: &DailyBaselineReport) -> String {
    let mut out = String::from("source,model,feature,gain_share,splits\n");
    for row in strata {
        for (feature, entry) in &row.importance {
            writeln!(
                out,
                "stratum,\"{}\",{},{:.6},{}",
                row.window, feature, entry.gain_share, entry.splits
            )
            .unwrap();
        }
    }
    for row in &daily.rows {
        for (feature, entry) in &row.importance {
            writeln!(
                out,
                "daily,{},{},{:.6},{}",
                row.day, feature, entry.gain_share, entry.splits
            )
            .unwrap();
        }
    }
    out
}

/// Reproduce the experiment artifacts: the per-stratum model table, the
/// per-day baseline grid, the importance profiles, and the retrospective
/// last-day baseline. Undefined metrics are flagged in-file, not fatal.
pub fn cmd_experiments(config: &RunConfig) -> Result<CmdOutput, CliError> {
    let cohort = load_train_cohort(config)?;
    let stratum_hp = HyperParams {
        seed: derive_seed(config.cv.seed, "experiments", 0),
        ..config.stratum_params.clone()
    };
    let strata_rows = per_stratum_eval(
        &cohort,
        &config.strata,
        &stratum_hp,
        config.selection,
        &config.cv_settings(),
    )?;
    let table4_path = config.output_dir.join("table4.csv");
    write_file(&table4_path, &table4_csv(&strata_rows))?;

    // Per-day baselines evaluate on the external test cohort when present;
    // otherwise the training cohort doubles as a resubstitution check.
    let test = load_test_cohort(config)?;
    let eval_cohort = test.as_ref().unwrap_or(&cohort);
    let baseline_cfg = DailyBaselineConfig {
        features: config.baseline.features.clone(),
        axis: config.baseline.axis,
        min_patients: config.baseline.min_patients,
        include_outcome_day: true,
        params: HyperParams {
            seed: derive_seed(config.cv.seed, "daily-baseline", 0),
            ..config.stratum_params.clone()
        },
        seed: config.cv.seed,
        threshold: config.threshold,
    };
    let daily = daily_baseline_experiment(&cohort, eval_cohort, &baseline_cfg)?;
    let daily_path = config.output_dir.join("daily_baseline.csv");
    write_file(&daily_path, &daily_baseline_csv(&daily))?;

    let importances_path = config.output_dir.join("importances.csv");
    write_file(&importances_path, &importances_csv(&strata_rows, &daily))?;

    let retro = retrospective_last_day_eval(
        &cohort,
        eval_cohort,
        &config.baseline.features,
        &HyperParams {
            seed: derive_seed(config.cv.seed, "retrospective", 0),
            ..config.stratum_params.clone()
        },
        config.threshold,
    )?;
    let mut retro_csv = String::from("metric,value\n");
    for (name, value) in [
        ("auroc", retro.auroc),
        ("aupr", retro.aupr),
        ("accuracy", retro.accuracy),
        ("f1", retro.f1),
        ("precision", retro.precision),
        ("recall", retro.recall),
    ] {
        writeln!(retro_csv, "{name},{}", fmt_opt(value, 4)).unwrap();
    }
    let retro_path = config.output_dir.join("retrospective.csv");
    write_file(&retro_path, &retro_csv)?;

    Ok(CmdOutput {
        files: vec![table4_path, daily_path, importances_path, retro_path],
    })
}
