//! Strata algebra: windows induced by a cut-point list, day-offset
//! assignment, and the double-truncated per-stratum training sets.

use tempstrat::cohort::{align_and_aggregate, impute_locf, ingest_reader, DaySelection};
use tempstrat::strata::{truncated_training_set, StrataDefinition};
use tempstrat::synth::reference_cohort;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let def = StrataDefinition::parse("-1,-2,-4,-7,-13")?;
    println!("cut points {:?} induce {} strata:", def.cut_points(), def.n_strata());
    for w in def.windows() {
        println!("  stratum {}: {}", w.index, w.label());
    }

    for offset in [-30, -13, -5, -3, -1] {
        println!("day {offset} belongs to stratum {}", def.assign(offset)?);
    }
    println!("day 0 is discarded: {}", def.assign(0).unwrap_err());

    let synth = reference_cohort(7);
    let ingested = ingest_reader(synth.train_csv.as_bytes(), &synth.schema)?;
    let cohort = impute_locf(&align_and_aggregate(&ingested)?);
    println!("\ndouble-truncated training sets (observed days only):");
    println!("{:>12} {:>9} {:>7} {:>6}", "stratum", "patients", "deaths", "rows");
    for w in def.windows() {
        let tset = truncated_training_set(&cohort, &def, w.index, DaySelection::Observed);
        println!(
            "{:>12} {:>9} {:>7} {:>6}",
            w.label(),
            tset.n_patients,
            tset.n_deaths,
            tset.data.x.n_rows()
        );
    }
    Ok(())
}
