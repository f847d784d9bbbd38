//! Per-day baseline models on the three key labs, trained on the training
//! cohort and scored on the external test cohort: per-class accuracies and
//! the drift of each day's top feature by gain importance.

use tempstrat::cohort::{align_and_aggregate, impute_locf, ingest_reader};
use tempstrat::eval::{daily_baseline_experiment, DailyBaselineConfig};
use tempstrat::synth::reference_cohort;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let synth = reference_cohort(7);
    let train = impute_locf(&align_and_aggregate(&ingest_reader(
        synth.train_csv.as_bytes(),
        &synth.schema,
    )?)?);
    let test = impute_locf(&align_and_aggregate(&ingest_reader(
        synth.test_csv.as_bytes(),
        &synth.schema,
    )?)?);

    let cfg = DailyBaselineConfig::new(vec![
        "LDH".to_string(),
        "lymphocyte".to_string(),
        "hs-CRP".to_string(),
    ]);
    let report = daily_baseline_experiment(&train, &test, &cfg)?;

    println!(
        "{:>5} {:>7} {:>6} {:>9} {:>9}  top feature (gain share)",
        "day", "n_train", "n_test", "surv_acc", "death_acc"
    );
    for row in &report.rows {
        let top = row
            .importance
            .iter()
            .max_by(|a, b| a.1.gain_share.partial_cmp(&b.1.gain_share).unwrap());
        let top = top
            .map(|(f, e)| format!("{f} ({:.2})", e.gain_share))
            .unwrap_or_else(|| "-".to_string());
        println!(
            "{:>5} {:>7} {:>6} {:>9} {:>9}  {top}",
            row.day,
            row.n_train,
            row.n_test,
            row.survival_recall.map(|v| format!("{v:.3}")).unwrap_or("NA".into()),
            row.death_recall.map(|v| format!("{v:.3}")).unwrap_or("NA".into()),
        );
    }
    if !report.skipped.is_empty() {
        println!("\nskipped days:");
        for (day, reason) in &report.skipped {
            println!("  {day}: {reason}");
        }
    }
    Ok(())
}
