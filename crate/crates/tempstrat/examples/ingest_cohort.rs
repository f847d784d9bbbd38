//! Ingest a records CSV, right-align it on the outcome day, impute by LOCF,
//! and print the cohort summary with its per-offset data density.

use tempstrat::cohort::{align_and_aggregate, impute_locf, ingest_reader};
use tempstrat::synth::reference_cohort;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let synth = reference_cohort(7);
    let ingested = ingest_reader(synth.train_csv.as_bytes(), &synth.schema)?;
    println!(
        "ingested {} records across {} patients, {} variables",
        ingested.records.len(),
        ingested.patients.len(),
        ingested.variable_names.len()
    );

    let aligned = align_and_aggregate(&ingested)?;
    let cohort = impute_locf(&aligned);
    let summary = cohort.summarize();
    println!(
        "cohort: {} patients ({} died), {} observed patient-days, {} populated after imputation",
        summary.n_patients, summary.n_deaths, summary.n_observed_days, summary.n_populated_days
    );

    println!("\nobserved data density by day offset (0 = outcome day):");
    for (&offset, &count) in summary.observed_density.iter().rev().take(15) {
        println!("  day {offset:>4}: {:<55} {count}", "#".repeat(count / 4));
    }

    // the canonical dump is what golden-file tests and downstream tools read
    let json = cohort.to_canonical_json();
    println!("\ncanonical dump size: {} bytes", json.len());
    Ok(())
}
