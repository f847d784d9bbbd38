//! Deterministic synthetic reference cohort.
//!
//! Mirrors the shape of a public COVID-19 hospital lab dataset: a training
//! file of 375 patients (174 deaths) with sparse lab-test rows, and an
//! external test file of 110 patients (13 deaths) carrying only the three
//! key labs. Per-stratum membership under the reference strata
//! `-1,-2,-4,-7,-13` is constructed to hit fixed patient/death counts
//! (46/7, 99/13, 48/12, 40/12, 34/12), so the double-truncation logic can be
//! validated against known numbers.
//!
//! Lab values are drawn from outcome- and time-dependent distributions with
//! deliberately time-varying effects: lymphocyte count separates outcomes
//! early in the stay, hs-CRP peaks mid-course, and LDH plus d-dimer diverge
//! sharply near the outcome. Everything is a pure function of the seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cohort::SchemaConfig;
use crate::seeds::derive_seed;
use crate::strata::StrataDefinition;

pub const TRAIN_VARIABLES: [&str; 10] = [
    "LDH",
    "lymphocyte",
    "hs-CRP",
    "d_dimer",
    "albumin",
    "platelet_count",
    "neutrophil_pct",
    "creatinine",
    "il_6",
    "procalcitonin",
];

pub const TEST_VARIABLES: [&str; 3] = ["LDH", "lymphocyte", "hs-CRP"];

/// The reference strata definition in notation form.
pub const REFERENCE_STRATA: &str = "-1,-2,-4,-7,-13";

const N_TRAIN_DEATHS: usize = 174;
const N_TRAIN_SURVIVORS: usize = 201;
const N_TEST_DEATHS: usize = 13;
const N_TEST_SURVIVORS: usize = 97;

/// Target per-stratum membership, earliest window first.
const WINDOW_PATIENTS: [usize; 5] = [46, 99, 48, 40, 34];
const WINDOW_DEATHS: [usize; 5] = [7, 13, 12, 12, 12];

pub struct SynthCohort {
    pub train_csv: String,
    pub test_csv: String,
    pub schema: SchemaConfig,
    pub strata: StrataDefinition,
}

impl SynthCohort {
    /// Write both CSV files into `dir` and return their paths.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let train = dir.join("train.csv");
        let test = dir.join("test.csv");
        std::fs::write(&train, &self.train_csv)?;
        std::fs::write(&test, &self.test_csv)?;
        Ok((train, test))
    }
}

fn normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    // Box-Muller; one draw per call keeps consumption order obvious.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    mean + sd * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Proximity to the outcome day: 1 on day 0, decaying into the past.
fn proximity(t: i32) -> f64 {
    (f64::from(t) / 6.0).exp()
}

fn lab_value(rng: &mut ChaCha8Rng, var: &str, died: bool, t: i32) -> f64 {
    let prox = proximity(t);
    match (var, died) {
        ("LDH", false) => normal(rng, 230.0, 35.0).max(80.0),
        ("LDH", true) => normal(rng, 290.0 + 340.0 * prox, 48.0).max(80.0),
        ("lymphocyte", false) => normal(rng, 22.0 + 2.0 * prox, 5.0).max(0.5),
        ("lymphocyte", true) => normal(rng, 10.0 - 3.0 * prox, 2.8).max(0.5),
        ("hs-CRP", false) => normal(rng, 16.0, 8.0).max(0.3),
        ("hs-CRP", true) => {
            let hump = (-(f64::from(t) + 10.0).powi(2) / 36.0).exp();
            normal(rng, 30.0 + 120.0 * hump, 22.0).max(1.0)
        }
        ("d_dimer", false) => normal(rng, 0.8, 0.4).max(0.05),
        ("d_dimer", true) => normal(rng, 1.2 + 7.0 * prox, 1.0).max(0.05),
        ("albumin", false) => normal(rng, 38.0, 4.0).max(15.0),
        ("albumin", true) => normal(rng, 33.0, 4.0).max(15.0),
        ("platelet_count", false) => normal(rng, 220.0, 50.0).max(10.0),
        ("platelet_count", true) => normal(rng, 180.0, 55.0).max(10.0),
        ("neutrophil_pct", false) => normal(rng, 62.0, 8.0).clamp(20.0, 99.0),
        ("neutrophil_pct", true) => normal(rng, 78.0, 8.0).clamp(20.0, 99.0),
        ("creatinine", false) => normal(rng, 75.0, 18.0).max(20.0),
        ("creatinine", true) => normal(rng, 95.0, 30.0).max(20.0),
        ("il_6", false) => normal(rng, 8.0, 5.0).max(0.1),
        ("il_6", true) => normal(rng, 30.0 + 40.0 * prox, 18.0).max(0.1),
        ("procalcitonin", false) => normal(rng, 0.08, 0.05).max(0.005),
        ("procalcitonin", true) => normal(rng, 0.3 + 0.8 * prox, 0.3).max(0.005),
        (other, _) => unreachable!("no distribution for variable {other}"),
    }
}

fn sample_distinct(rng: &mut ChaCha8Rng, pool: usize, count: usize) -> Vec<usize> {
    let count = count.min(pool);
    let mut idx: Vec<usize> = (0..pool).collect();
    for i in 0..count {
        let j = rng.random_range(i..pool);
        idx.swap(i, j);
    }
    idx.truncate(count);
    idx
}

fn shuffled_outcomes(rng: &mut ChaCha8Rng, deaths: usize, survivors: usize) -> Vec<bool> {
    let mut died = vec![true; deaths];
    died.extend(vec![false; survivors]);
    for i in (1..died.len()).rev() {
        let j = rng.random_range(0..=i);
        died.swap(i, j);
    }
    died
}

struct DayPlan {
    offset: i32,
    variables: Vec<usize>,
}

fn plan_day(rng: &mut ChaCha8Rng, offset: i32, variables: &[&str], key_p: f64, other_p: f64) -> DayPlan {
    let mut present = Vec::new();
    for (i, v) in variables.iter().enumerate() {
        let p = if TEST_VARIABLES.contains(v) { key_p } else { other_p };
        if rng.random::<f64>() < p {
            present.push(i);
        }
    }
    if present.is_empty() {
        present.push(0); // always at least one measurement on an observed day
    }
    DayPlan {
        offset,
        variables: present,
    }
}

struct CsvBuilder {
    header: String,
    body: String,
    n_vars: usize,
}

impl CsvBuilder {
    fn new(variables: &[&str]) -> Self {
        let mut header =
            String::from("patient_id,record_time,admission_time,discharge_time,outcome");
        for v in variables {
            header.push(',');
            header.push_str(v);
        }
        header.push('\n');
        CsvBuilder {
            header,
            body: String::new(),
            n_vars: variables.len(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push_record(
        &mut self,
        rng: &mut ChaCha8Rng,
        id: &str,
        record_time: &str,
        admission: &str,
        discharge: &str,
        outcome: bool,
        values: &[Option<f64>],
    ) {
        assert_eq!(values.len(), self.n_vars);
        write!(
            self.body,
            "{id},{record_time},{admission},{discharge},{}",
            u8::from(outcome)
        )
        .unwrap();
        for v in values {
            match v {
                Some(x) => write!(self.body, ",{x:.2}").unwrap(),
                // occasionally spell missing cells with the NA sentinel
                None if rng.random::<f64>() < 0.02 => self.body.push_str(",NA"),
                None => self.body.push(','),
            }
        }
        self.body.push('\n');
    }

    fn finish(self) -> String {
        format!("{}{}", self.header, self.body)
    }
}

fn date_str(date: chrono::NaiveDate, h: u32, m: u32) -> String {
    format!("{date} {h:02}:{m:02}:00")
}

#[allow(clippy::too_many_arguments)]
fn emit_patient_days(
    rng: &mut ChaCha8Rng,
    csv: &mut CsvBuilder,
    id: &str,
    died: bool,
    los: u32,
    day_plans: &[DayPlan],
    variables: &[&str],
    discharge: chrono::NaiveDate,
) {
    let admission = discharge - chrono::Duration::days(i64::from(los) - 1);
    let admission_s = date_str(admission, 0, 30);
    let discharge_s = date_str(discharge, 23, 30);
    for plan in day_plans {
        let date = discharge + chrono::Duration::days(i64::from(plan.offset));
        let hour = rng.random_range(6..20u32);
        let minute = rng.random_range(0..60u32);
        let mut values: Vec<Option<f64>> = vec![None; variables.len()];
        for &vi in &plan.variables {
            values[vi] = Some(lab_value(rng, variables[vi], died, plan.offset));
        }
        csv.push_record(
            rng,
            id,
            &date_str(date, hour, minute),
            &admission_s,
            &discharge_s,
            died,
            &values,
        );
        // a second same-day draw for one variable now and then; the daily
        // panel keeps the later value
        if rng.random::<f64>() < 0.1 && !plan.variables.is_empty() {
            let vi = plan.variables[rng.random_range(0..plan.variables.len())];
            let mut update: Vec<Option<f64>> = vec![None; variables.len()];
            update[vi] = Some(lab_value(rng, variables[vi], died, plan.offset));
            csv.push_record(
                rng,
                id,
                &date_str(date, (hour + 2).min(22), minute),
                &admission_s,
                &discharge_s,
                died,
                &update,
            );
        }
    }
}

/// Generate the synthetic reference cohort. Identical seeds give
/// byte-identical files.
pub fn reference_cohort(seed: u64) -> SynthCohort {
    let strata = StrataDefinition::parse(REFERENCE_STRATA).expect("reference strata are valid");
    let windows = strata.windows();
    let n_windows = windows.len();
    assert_eq!(n_windows, WINDOW_PATIENTS.len());

    // Integer day range of each window, and the minimum stay needed to reach it.
    let hi_int: Vec<i32> = windows
        .iter()
        .map(|w| if w.upper_inclusive { w.upper } else { w.upper - 1 })
        .collect();
    let min_los: Vec<u32> = hi_int.iter().map(|&hi| (1 - hi) as u32).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth-train", 0));
    let n = N_TRAIN_DEATHS + N_TRAIN_SURVIVORS;
    let died = shuffled_outcomes(&mut rng, N_TRAIN_DEATHS, N_TRAIN_SURVIVORS);
    let death_pool: Vec<usize> = (0..n).filter(|&i| died[i]).collect();
    let survivor_pool: Vec<usize> = (0..n).filter(|&i| !died[i]).collect();

    // Draw each window's members: exact death and survivor counts.
    let mut member_windows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for k in 0..n_windows {
        for local in sample_distinct(&mut rng, death_pool.len(), WINDOW_DEATHS[k]) {
            member_windows[death_pool[local]].push(k);
        }
        let survivors = WINDOW_PATIENTS[k] - WINDOW_DEATHS[k];
        for local in sample_distinct(&mut rng, survivor_pool.len(), survivors) {
            member_windows[survivor_pool[local]].push(k);
        }
    }

    let mut csv = CsvBuilder::new(&TRAIN_VARIABLES);
    let base_date = chrono::NaiveDate::from_ymd_opt(2020, 2, 1).unwrap();
    for i in 0..n {
        let id = (i + 1).to_string();
        member_windows[i].sort_unstable();
        let members = &member_windows[i];
        let required = members.iter().map(|&k| min_los[k]).max().unwrap_or(1);
        let extra = if members.contains(&0) {
            rng.random_range(0..=12u32)
        } else {
            rng.random_range(0..=4u32)
        };
        let los = required.max(1) + extra;
        let earliest = -(los as i32 - 1);

        let mut day_plans: Vec<DayPlan> = Vec::new();
        for &k in members {
            let lo = windows[k].lower.map(|l| l + 1).unwrap_or(earliest).max(earliest);
            let hi = hi_int[k];
            let width = (hi - lo + 1) as usize;
            let want = if died[i] {
                rng.random_range(2..=3usize)
            } else {
                rng.random_range(1..=2usize)
            };
            let mut picks = sample_distinct(&mut rng, width, want)
                .into_iter()
                .map(|d| lo + d as i32)
                .collect::<Vec<i32>>();
            picks.sort_unstable();
            // dying patients get more comprehensive panels drawn
            let (key_p, other_p) = if died[i] { (0.95, 0.65) } else { (0.85, 0.45) };
            for offset in picks {
                day_plans.push(plan_day(&mut rng, offset, &TRAIN_VARIABLES, key_p, other_p));
            }
        }
        let want_day0 = members.is_empty() || rng.random::<f64>() < 0.85;
        if want_day0 {
            day_plans.push(plan_day(&mut rng, 0, &TRAIN_VARIABLES, 0.85, 0.45));
        }
        day_plans.sort_by_key(|p| p.offset);

        let discharge = base_date + chrono::Duration::days(rng.random_range(0..75i64));
        emit_patient_days(
            &mut rng,
            &mut csv,
            &id,
            died[i],
            los,
            &day_plans,
            &TRAIN_VARIABLES,
            discharge,
        );
    }
    let train_csv = csv.finish();

    // External test cohort: three labs only, no membership targets.
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth-test", 0));
    let died_test = shuffled_outcomes(&mut rng, N_TEST_DEATHS, N_TEST_SURVIVORS);
    let mut csv = CsvBuilder::new(&TEST_VARIABLES);
    for (i, &died_i) in died_test.iter().enumerate() {
        let id = format!("T{}", i + 1);
        let los = rng.random_range(2..=20u32);
        let earliest = -(los as i32 - 1);
        let n_days = rng.random_range(1..=4usize);
        let mut day_plans: Vec<DayPlan> = sample_distinct(&mut rng, los as usize - 1, n_days)
            .into_iter()
            .map(|d| earliest + d as i32)
            .map(|offset| plan_day(&mut rng, offset, &TEST_VARIABLES, 0.9, 0.9))
            .collect();
        if rng.random::<f64>() < 0.85 {
            day_plans.push(plan_day(&mut rng, 0, &TEST_VARIABLES, 0.9, 0.9));
        }
        day_plans.sort_by_key(|p| p.offset);
        let discharge = base_date + chrono::Duration::days(rng.random_range(0..75i64));
        emit_patient_days(
            &mut rng,
            &mut csv,
            &id,
            died_i,
            los,
            &day_plans,
            &TEST_VARIABLES,
            discharge,
        );
    }
    let test_csv = csv.finish();

    SynthCohort {
        train_csv,
        test_csv,
        schema: SchemaConfig::standard(),
        strata,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{align_and_aggregate, impute_locf, ingest_reader, DaySelection, Outcome};
    use crate::strata::truncated_training_set;

    #[test]
    fn generation_is_deterministic() {
        let a = reference_cohort(7);
        let b = reference_cohort(7);
        assert_eq!(a.train_csv, b.train_csv);
        assert_eq!(a.test_csv, b.test_csv);
        let c = reference_cohort(8);
        assert_ne!(a.train_csv, c.train_csv);
    }

    #[test]
    fn train_cohort_matches_reference_counts() {
        let synth = reference_cohort(7);
        let ingested = ingest_reader(synth.train_csv.as_bytes(), &synth.schema).unwrap();
        assert_eq!(ingested.patients.len(), 375);
        let cohort = impute_locf(&align_and_aggregate(&ingested).unwrap());
        assert_eq!(cohort.patients.len(), 375);
        assert_eq!(cohort.n_deaths(), 174);
        assert_eq!(cohort.variable_names.len(), 10);

        for (k, (&patients, &deaths)) in WINDOW_PATIENTS.iter().zip(&WINDOW_DEATHS).enumerate() {
            let tset = truncated_training_set(&cohort, &synth.strata, k, DaySelection::Observed);
            assert_eq!(tset.n_patients, patients, "window {k}");
            assert_eq!(tset.n_deaths, deaths, "window {k}");
        }
    }

    #[test]
    fn test_cohort_has_three_variables_and_13_deaths() {
        let synth = reference_cohort(7);
        let ingested = ingest_reader(synth.test_csv.as_bytes(), &synth.schema).unwrap();
        assert_eq!(ingested.patients.len(), 110);
        assert_eq!(
            ingested
                .patients
                .iter()
                .filter(|p| p.outcome == Outcome::Died)
                .count(),
            13
        );
        assert_eq!(ingested.variable_names, TEST_VARIABLES);
    }
}
