//! Temporal strata over right-aligned day offsets.
//!
//! A strata definition is a strictly decreasing list of negative cut points
//! (days before the outcome day). The induced windows partition all negative
//! integer day offsets: the earliest window is `(-inf, d_m]`, interior
//! windows are `(d_{k+1}, d_k]` with the upper bound inclusive, and the
//! latest window is `(d_1, 0)` with the outcome day itself always excluded.
//!
//! A trailing cut point of `-1` is redundant over whole days — the interval
//! `(-1, 0)` contains no integer offset — so the constructor drops it when
//! other cut points exist. `{-1, -2, -4, -7, -13}` therefore induces five
//! windows, the last being `(-2, 0)`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::cohort::{feature_matrix, AlignedCohort, DaySelection, FeatureMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum StrataError {
    #[error("strata definition needs at least one cut point")]
    Empty,
    #[error("cut point {0} is not negative")]
    NonNegativeCut(i32),
    #[error("cut points must be strictly decreasing, got {0} before {1}")]
    NotDecreasing(i32, i32),
    #[error("day offset {0} is on or after the outcome day, which is excluded")]
    ExcludedDay(i32),
    #[error("cannot parse strata cut point {0:?}")]
    Parse(String),
}

/// One stratum's interval of day offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumWindow {
    pub index: usize,
    /// Exclusive lower bound; `None` means unbounded below.
    pub lower: Option<i32>,
    /// Upper bound: inclusive for all but the last window, exclusive for the
    /// last one (which ends at the excluded outcome day 0).
    pub upper: i32,
    pub upper_inclusive: bool,
}

impl StratumWindow {
    pub fn contains(&self, offset: i32) -> bool {
        let above = self.lower.is_none_or(|lo| offset > lo);
        let below = if self.upper_inclusive {
            offset <= self.upper
        } else {
            offset < self.upper
        };
        above && below
    }

    /// Human-readable interval, e.g. `(-inf, -13]`, `(-7, -4]`, `(-2, 0)`.
    pub fn label(&self) -> String {
        let lo = match self.lower {
            None => "-inf".to_string(),
            Some(v) => v.to_string(),
        };
        let close = if self.upper_inclusive { "]" } else { ")" };
        format!("({}, {}{}", lo, self.upper, close)
    }
}

impl std::fmt::Display for StratumWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

/// Ordered cut points partitioning negative day offsets into strata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrataDefinition {
    /// Strictly decreasing negative day offsets, d_1 > d_2 > ... > d_m.
    cut_points: Vec<i32>,
}

impl StrataDefinition {
    /// Validate and normalize a cut-point list. Input order does not matter;
    /// duplicates are rejected. A `-1` cut is dropped when other cuts exist
    /// (see module docs).
    pub fn new(cut_points: Vec<i32>) -> Result<Self, StrataError> {
        if cut_points.is_empty() {
            return Err(StrataError::Empty);
        }
        let mut cuts = cut_points;
        cuts.sort_unstable_by(|a, b| b.cmp(a));
        for c in &cuts {
            if *c >= 0 {
                return Err(StrataError::NonNegativeCut(*c));
            }
        }
        for w in cuts.windows(2) {
            if w[0] <= w[1] {
                return Err(StrataError::NotDecreasing(w[0], w[1]));
            }
        }
        if cuts[0] == -1 && cuts.len() >= 2 {
            cuts.remove(0);
        }
        Ok(StrataDefinition { cut_points: cuts })
    }

    /// Parse a comma-separated list such as `-1,-2,-4,-7,-13`.
    pub fn parse(text: &str) -> Result<Self, StrataError> {
        let cuts = text
            .split(',')
            .map(|t| t.trim().parse::<i32>().map_err(|_| StrataError::Parse(t.trim().to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(cuts)
    }

    pub fn cut_points(&self) -> &[i32] {
        &self.cut_points
    }

    /// Number of strata induced by the definition.
    pub fn n_strata(&self) -> usize {
        self.cut_points.len() + 1
    }

    /// The strata windows, earliest first.
    pub fn windows(&self) -> Vec<StratumWindow> {
        let mut asc: Vec<i32> = self.cut_points.clone();
        asc.reverse();
        let mut out = Vec::with_capacity(asc.len() + 1);
        out.push(StratumWindow {
            index: 0,
            lower: None,
            upper: asc[0],
            upper_inclusive: true,
        });
        for k in 1..asc.len() {
            out.push(StratumWindow {
                index: k,
                lower: Some(asc[k - 1]),
                upper: asc[k],
                upper_inclusive: true,
            });
        }
        out.push(StratumWindow {
            index: asc.len(),
            lower: Some(asc[asc.len() - 1]),
            upper: 0,
            upper_inclusive: false,
        });
        out
    }

    /// Stratum index containing `day_offset`. Offsets on or after the outcome
    /// day (>= 0) are rejected: the last day is discarded from training and
    /// scoring.
    pub fn assign(&self, day_offset: i32) -> Result<usize, StrataError> {
        if day_offset >= 0 {
            return Err(StrataError::ExcludedDay(day_offset));
        }
        // Earliest window captures everything at or below the lowest cut;
        // otherwise the first cut (ascending) strictly above the offset
        // closes the window.
        let m = self.cut_points.len();
        for (i, &cut) in self.cut_points.iter().rev().enumerate() {
            if day_offset <= cut {
                return Ok(i);
            }
        }
        Ok(m)
    }
}

impl Serialize for StrataDefinition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.cut_points.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StrataDefinition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let cuts = Vec::<i32>::deserialize(deserializer)?;
        StrataDefinition::new(cuts).map_err(serde::de::Error::custom)
    }
}

/// A stratum's double-truncated training set: the (patient, day) rows whose
/// offset falls inside window `k`. Left truncation (the patient stayed long
/// enough to reach the window) and right truncation (the patient has data
/// within it) both follow from row membership.
#[derive(Debug, Clone)]
pub struct TruncatedSet {
    pub data: FeatureMatrix,
    /// Distinct patients contributing at least one row.
    pub n_patients: usize,
    /// Distinct contributing patients whose outcome was death.
    pub n_deaths: usize,
}

impl TruncatedSet {
    pub fn is_empty(&self) -> bool {
        self.data.x.is_empty()
    }
}

/// Extract the training set for stratum `k`. `selection` decides whether a
/// row requires an actually observed measurement that day
/// ([`DaySelection::Observed`]) or any populated (possibly imputed) row
/// ([`DaySelection::Populated`]).
///
/// An empty result is not an error; callers that need data should check
/// [`TruncatedSet::is_empty`].
pub fn truncated_training_set(
    cohort: &AlignedCohort,
    def: &StrataDefinition,
    k: usize,
    selection: DaySelection,
) -> TruncatedSet {
    let window = def.windows()[k];
    let data = feature_matrix(cohort, |t| window.contains(t), selection);
    let mut patients = std::collections::BTreeSet::new();
    let mut deaths = std::collections::BTreeSet::new();
    for (i, pid) in data.groups.iter().enumerate() {
        patients.insert(pid.clone());
        if data.labels[i] == 1 {
            deaths.insert(pid.clone());
        }
    }
    TruncatedSet {
        data,
        n_patients: patients.len(),
        n_deaths: deaths.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> StrataDefinition {
        StrataDefinition::parse("-1,-2,-4,-7,-13").unwrap()
    }

    #[test]
    fn canonical_definition_induces_five_windows() {
        let def = canonical();
        assert_eq!(def.n_strata(), 5);
        let labels: Vec<String> = def.windows().iter().map(|w| w.label()).collect();
        assert_eq!(
            labels,
            vec!["(-inf, -13]", "(-13, -7]", "(-7, -4]", "(-4, -2]", "(-2, 0)"]
        );
    }

    #[test]
    fn minimal_two_strata_case() {
        let def = StrataDefinition::new(vec![-1]).unwrap();
        assert_eq!(def.n_strata(), 2);
        let labels: Vec<String> = def.windows().iter().map(|w| w.label()).collect();
        assert_eq!(labels, vec!["(-inf, -1]", "(-1, 0)"]);
    }

    #[test]
    fn non_decreasing_cut_points_are_rejected() {
        assert!(matches!(
            StrataDefinition::new(vec![-2, -2, -5]),
            Err(StrataError::NotDecreasing(-2, -2))
        ));
        assert!(matches!(
            StrataDefinition::new(vec![0, -3]),
            Err(StrataError::NonNegativeCut(0))
        ));
        assert!(matches!(StrataDefinition::new(vec![]), Err(StrataError::Empty)));
    }

    #[test]
    fn assign_follows_upper_inclusive_convention() {
        let def = canonical();
        assert_eq!(def.assign(-5).unwrap(), 2); // (-7, -4]
        assert_eq!(def.assign(-13).unwrap(), 0); // boundary belongs below
        assert_eq!(def.assign(-4).unwrap(), 2);
        assert_eq!(def.assign(-3).unwrap(), 3);
        assert_eq!(def.assign(-1).unwrap(), 4);
        assert_eq!(def.assign(-100).unwrap(), 0);
        assert!(matches!(def.assign(0), Err(StrataError::ExcludedDay(0))));
        assert!(matches!(def.assign(3), Err(StrataError::ExcludedDay(3))));
    }

    #[test]
    fn assign_is_monotone_in_day_offset() {
        let def = canonical();
        let mut prev = 0;
        for t in -40..0 {
            let k = def.assign(t).unwrap();
            assert!(k >= prev, "assign not monotone at {t}");
            prev = k;
        }
    }

    #[test]
    fn assign_agrees_with_window_scan() {
        let def = canonical();
        let windows = def.windows();
        for t in -200..0 {
            let k = def.assign(t).unwrap();
            let hits: Vec<usize> = windows
                .iter()
                .filter(|w| w.contains(t))
                .map(|w| w.index)
                .collect();
            assert_eq!(hits, vec![k], "offset {t}");
        }
    }

    mod truncation {
        use super::*;
        use crate::cohort::{impute_locf, AlignedCohort, DaySelection, Outcome, PatientPanel};
        use std::collections::BTreeMap;

        /// One patient observed on the given offsets, panel pre-imputation.
        fn one_patient_cohort(total_los_days: u32, observed: &[i32]) -> AlignedCohort {
            let discharge = chrono::NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
            let mut rows = BTreeMap::new();
            let mut mask = BTreeMap::new();
            for &t in observed {
                rows.insert(t, vec![Some(1.0 + t as f64)]);
                mask.insert(t, vec![true]);
            }
            AlignedCohort {
                variable_names: vec!["lab".into()],
                patients: vec![PatientPanel {
                    patient_id: "P".into(),
                    outcome: Outcome::Died,
                    total_los_days,
                    admission_date: discharge
                        - chrono::Duration::days(i64::from(total_los_days) - 1),
                    discharge_date: discharge,
                    rows,
                    observed_mask: mask,
                }],
                imputed: false,
            }
        }

        #[test]
        fn short_stay_contributes_only_its_window_overlap() {
            // total stay of 5 days (offsets -4..0); (-7, -4] intersects at -4 only
            let def = StrataDefinition::parse("-1,-2,-4,-7,-13").unwrap();
            let cohort = impute_locf(&one_patient_cohort(5, &[-4, -3, -2, -1, 0]));
            let set = truncated_training_set(&cohort, &def, 2, DaySelection::Observed);
            assert_eq!(set.data.offsets, vec![-4]);
            assert_eq!(set.n_patients, 1);
            assert_eq!(set.n_deaths, 1);
        }

        #[test]
        fn left_truncation_excludes_stays_too_short_for_the_window() {
            let def = StrataDefinition::parse("-1,-2,-4,-7,-13").unwrap();
            let cohort = impute_locf(&one_patient_cohort(3, &[-2, -1, 0]));
            let set = truncated_training_set(&cohort, &def, 0, DaySelection::Observed);
            assert!(set.is_empty());
            assert_eq!(set.n_patients, 0);
        }

        #[test]
        fn populated_mode_also_counts_imputed_days() {
            // observed at -6 only; imputation fills -5..0. Strict sampling
            // sees one day in (-7, -4], populated sampling sees three.
            let def = StrataDefinition::parse("-4,-7").unwrap();
            let cohort = impute_locf(&one_patient_cohort(8, &[-6]));
            let strict = truncated_training_set(&cohort, &def, 1, DaySelection::Observed);
            let loose = truncated_training_set(&cohort, &def, 1, DaySelection::Populated);
            assert_eq!(strict.data.offsets, vec![-6]);
            assert_eq!(loose.data.offsets, vec![-6, -5, -4]);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arbitrary_cuts() -> impl Strategy<Value = Vec<i32>> {
            proptest::collection::btree_set(-400i32..=-1, 1..8)
                .prop_map(|s| s.into_iter().collect::<Vec<i32>>())
        }

        proptest! {
            #[test]
            fn windows_partition_negative_offsets(cuts in arbitrary_cuts()) {
                let def = StrataDefinition::new(cuts).unwrap();
                let windows = def.windows();
                for t in (-1500..0).chain([-10000, -5000]) {
                    let containing = windows.iter().filter(|w| w.contains(t)).count();
                    prop_assert_eq!(containing, 1, "offset {} in {} windows", t, containing);
                    let k = def.assign(t).unwrap();
                    prop_assert!(windows[k].contains(t));
                }
                prop_assert!(def.assign(0).is_err());
            }
        }
    }
}
