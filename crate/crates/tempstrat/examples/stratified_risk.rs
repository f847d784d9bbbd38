//! Fit the two-level stratified predictor and walk one patient's stay:
//! per-day strata probabilities, stratum-wise death scores, the combined
//! risk, and the day-weighted loss of the trajectory.

use tempstrat::cohort::{align_and_aggregate, impute_locf, ingest_reader, Outcome};
use tempstrat::predictor::{weighted_ce_loss, DayWeight, PredictorParams, StratifiedPredictor};
use tempstrat::synth::reference_cohort;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let synth = reference_cohort(7);
    let ingested = ingest_reader(synth.train_csv.as_bytes(), &synth.schema)?;
    let cohort = impute_locf(&align_and_aggregate(&ingested)?);

    let params = PredictorParams::with_seed(11);
    let (predictor, report) = StratifiedPredictor::fit(&cohort, &synth.strata, &params)?;
    println!("fitted {} stratum models + 1 strata classifier", predictor.stratum_models.len());
    for info in &report.per_stratum {
        println!(
            "  {}: {} patients ({} deaths), {} training rows{}",
            info.window,
            info.n_patients,
            info.n_deaths,
            info.n_train_rows,
            if info.single_class { " [single class]" } else { "" }
        );
    }

    // pick one long-staying death and one survivor
    let interesting = cohort
        .patients
        .iter()
        .filter(|p| p.rows.len() > 8)
        .find(|p| p.outcome == Outcome::Died)
        .expect("reference cohort has long stays");
    println!(
        "\npatient {} ({:?}, {} days in hospital):",
        interesting.patient_id, interesting.outcome, interesting.total_los_days
    );
    println!("{:>5} {:>8} {:>22}", "day", "risk", "top stratum (prob)");
    let course = predictor.predict_course(interesting)?;
    for p in &course {
        let (top, prob) = p
            .strata_probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        println!(
            "{:>5} {:>8.3} {:>15} ({:.2})",
            p.day_offset.unwrap(),
            p.risk,
            predictor.strata_def.windows()[top].label(),
            prob
        );
    }

    let day_risks: Vec<(i32, f64)> = course
        .iter()
        .map(|p| (p.day_offset.unwrap(), p.risk))
        .collect();
    let uniform = weighted_ce_loss(&day_risks, interesting.outcome, &DayWeight::Uniform);
    let near_term = weighted_ce_loss(
        &day_risks,
        interesting.outcome,
        &DayWeight::Exponential { beta: 0.3 },
    );
    println!("\ntrajectory loss: uniform {uniform:.4}, near-term weighted {near_term:.4}");
    Ok(())
}
