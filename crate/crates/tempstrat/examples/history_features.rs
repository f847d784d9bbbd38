//! Derive trailing-window history features (mean, slope, standard
//! deviation, first difference) for selected labs and show them alongside
//! the raw values of one patient.

use tempstrat::cohort::{align_and_aggregate, derive_history_features, impute_locf, ingest_reader};
use tempstrat::synth::reference_cohort;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let synth = reference_cohort(7);
    let ingested = ingest_reader(synth.train_csv.as_bytes(), &synth.schema)?;
    let cohort = impute_locf(&align_and_aggregate(&ingested)?);

    let derived = derive_history_features(&cohort, &["LDH".to_string()], 7)?;
    println!(
        "variables: {} raw + {} derived",
        cohort.variable_names.len(),
        derived.variable_names.len() - cohort.variable_names.len()
    );

    let names = &derived.variable_names;
    let ldh = names.iter().position(|n| n == "LDH").unwrap();
    let cols: Vec<usize> = ["LDH__mean_w7", "LDH__slope_w7", "LDH__std_w7", "LDH__diff_w7"]
        .iter()
        .map(|n| names.iter().position(|v| v == *n).unwrap())
        .collect();

    let panel = derived
        .patients
        .iter()
        .filter(|p| p.observed_mask.values().filter(|m| m[ldh]).count() >= 4)
        .max_by_key(|p| p.rows.len())
        .expect("some patient has several LDH draws");
    println!("\npatient {} ({:?}):", panel.patient_id, panel.outcome);
    println!(
        "{:>5} {:>9} {:>10} {:>9} {:>9} {:>9}",
        "day", "LDH", "mean_w7", "slope_w7", "std_w7", "diff_w7"
    );
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:9.2}")).unwrap_or_else(|| format!("{:>9}", "-"));
    for (&offset, row) in &panel.rows {
        println!(
            "{:>5} {} {} {} {} {}",
            offset,
            fmt(row[ldh]),
            fmt(row[cols[0]]),
            fmt(row[cols[1]]),
            fmt(row[cols[2]]),
            fmt(row[cols[3]]),
        );
    }
    Ok(())
}
