//! Repeated stratified group 5-fold cross-validation of the combined model
//! at desk scale (a few repetitions; raise `repeats` for tighter error
//! bars).

use tempstrat::cohort::{align_and_aggregate, impute_locf, ingest_reader};
use tempstrat::eval::{run_cv, CvSettings, MetricStats};
use tempstrat::predictor::PredictorParams;
use tempstrat::synth::reference_cohort;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let synth = reference_cohort(7);
    let ingested = ingest_reader(synth.train_csv.as_bytes(), &synth.schema)?;
    let cohort = impute_locf(&align_and_aggregate(&ingested)?);

    let params = PredictorParams::with_seed(0);
    let cv = CvSettings {
        k: 5,
        repeats: 5,
        seed: 2024,
        threshold: 0.5,
    };
    println!(
        "running {}x stratified group {}-fold CV on {} patients...",
        cv.repeats,
        cv.k,
        cohort.patients.len()
    );
    let report = run_cv(&cohort, &synth.strata, &params, &cv)?;

    let fmt = |s: &MetricStats| match (s.mean, s.se) {
        (Some(m), Some(se)) => format!("{m:.4} ({se:.4})"),
        _ => "undefined".to_string(),
    };
    println!("\ncombined model, mean (se) over {} repetitions:", report.repeats);
    println!("  AUROC     {}", fmt(&report.summary.auroc));
    println!("  AUPR      {}", fmt(&report.summary.aupr));
    println!("  accuracy  {}", fmt(&report.summary.accuracy));
    println!("  F1        {}", fmt(&report.summary.f1));
    println!("  precision {}", fmt(&report.summary.precision));
    println!("  recall    {}", fmt(&report.summary.recall));
    Ok(())
}
