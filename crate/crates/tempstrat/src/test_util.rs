//! Shared builders for unit tests.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::cohort::{AlignedCohort, Outcome, PatientPanel};

/// Hand-built imputed cohort: `n_each` patients per outcome, everyone
/// observed daily for `los` days. Variable "a" separates outcomes from day
/// one, variable "b" tracks the day offset (so strata are learnable).
pub(crate) fn toy_cohort(n_each: usize, los: u32) -> AlignedCohort {
    toy_cohort_mixed(n_each, los, los)
}

/// Like [`toy_cohort`] but with outcome-specific lengths of stay.
pub(crate) fn toy_cohort_mixed(n_each: usize, los_died: u32, los_survived: u32) -> AlignedCohort {
    let discharge = NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
    let mut patients = Vec::new();
    for i in 0..2 * n_each {
        let died = i % 2 == 0;
        let los = if died { los_died } else { los_survived };
        let mut rows = BTreeMap::new();
        let mut mask = BTreeMap::new();
        for offset in -(los as i32 - 1)..=0 {
            let a = if died { 10.0 } else { 0.0 } + 0.1 * (i % 7) as f64;
            let b = offset as f64 + 0.01 * (i % 3) as f64;
            rows.insert(offset, vec![Some(a), Some(b)]);
            mask.insert(offset, vec![true, true]);
        }
        patients.push(PatientPanel {
            patient_id: format!("P{i}"),
            outcome: if died { Outcome::Died } else { Outcome::Survived },
            total_los_days: los,
            admission_date: discharge - chrono::Duration::days(los as i64 - 1),
            discharge_date: discharge,
            rows,
            observed_mask: mask,
        });
    }
    AlignedCohort {
        variable_names: vec!["a".into(), "b".into()],
        patients,
        imputed: true,
    }
}
