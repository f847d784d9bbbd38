//! Generate the synthetic reference cohort (train + external test CSVs) and
//! a ready-to-run configuration file.
//!
//!     cargo run --example generate_cohort -- [out_dir] [seed]

use std::path::PathBuf;

use tempstrat::config::RunConfig;
use tempstrat::synth::reference_cohort;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data".to_string()));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);

    let synth = reference_cohort(seed);
    let (train, test) = synth.write_to(&dir)?;
    println!("wrote {}", train.display());
    println!("wrote {}", test.display());

    let config = RunConfig::for_reference_data(
        train.clone(),
        Some(test.clone()),
        dir.join("out"),
        seed,
    );
    let config_path = dir.join("config.json");
    std::fs::write(&config_path, config.to_json())?;
    println!("wrote {}", config_path.display());
    println!();
    println!("next steps:");
    println!("  tempstrat ingest      --config {}", config_path.display());
    println!("  tempstrat train       --config {}", config_path.display());
    println!("  tempstrat evaluate    --config {}", config_path.display());
    println!("  tempstrat experiments --config {}", config_path.display());
    Ok(())
}
