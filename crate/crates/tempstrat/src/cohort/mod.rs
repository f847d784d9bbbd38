//! Cohort construction: ingest raw longitudinal records, right-align each
//! patient on their outcome date, aggregate to a daily panel, impute by
//! carrying the last observation forward, and expose labeled per-day feature
//! vectors.
//!
//! Day offsets are negative integers with 0 the outcome day; the remaining
//! length of stay on a day equals the negated offset. Cohort construction is
//! single-threaded per file; an [`AlignedCohort`] is immutable afterwards and
//! safe to share across threads.

mod schema;

pub use schema::{ingest_csv, ingest_reader, SchemaConfig};

use std::collections::BTreeMap;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::DenseMatrix;

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error at line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("schema column {0:?} not found in header")]
    MissingColumn(String),
    #[error("line {line}: missing patient id")]
    MissingId { line: u64 },
    #[error("line {line}: malformed timestamp {value:?} in column {column:?}")]
    Timestamp {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: malformed number {value:?} in column {column:?}")]
    Number {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: unknown outcome code {code:?}")]
    UnknownOutcome { line: u64, code: String },
    #[error("patient {0}: conflicting outcome codes across rows")]
    InconsistentOutcome(String),
    #[error("patient {patient}: conflicting values for {field}")]
    InconsistentField { patient: String, field: &'static str },
    #[error("patient {patient}: missing {field}")]
    MissingField { patient: String, field: &'static str },
    #[error("patient {0}: record timestamped after discharge")]
    RecordAfterDischarge(String),
    #[error("patient {0}: record timestamped before admission")]
    RecordBeforeAdmission(String),
    #[error("patient {0}: admission after discharge")]
    AdmissionAfterDischarge(String),
    #[error("patient {0} appears more than once in the metadata")]
    DuplicatePatient(String),
    #[error("patient {0} has records but no metadata entry")]
    UnknownPatientRecord(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("history window must span at least 2 days, got {0}")]
    InvalidWindow(u32),
    #[error("derived variable {0:?} collides with an existing variable")]
    DuplicateVariable(String),
    #[error("operation requires an imputed cohort")]
    NotImputed,
}

/// Binary end-of-stay outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Outcome {
    Survived,
    Died,
}

impl Outcome {
    pub fn as_u8(self) -> u8 {
        match self {
            Outcome::Survived => 0,
            Outcome::Died => 1,
        }
    }
}

impl From<Outcome> for u8 {
    fn from(o: Outcome) -> u8 {
        o.as_u8()
    }
}

impl TryFrom<u8> for Outcome {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(Outcome::Survived),
            1 => Ok(Outcome::Died),
            other => Err(format!("invalid outcome code {other}")),
        }
    }
}

/// One raw measurement row: a timestamped set of lab values plus the
/// patient-level stay metadata. `labs` holds only observed values; absence
/// means missing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub patient_id: String,
    pub record_time: NaiveDateTime,
    pub admission_time: NaiveDateTime,
    pub discharge_time: NaiveDateTime,
    pub outcome: Outcome,
    pub labs: BTreeMap<String, f64>,
}

/// Patient-level stay metadata, present even for patients without any
/// timestamped record.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientMeta {
    pub patient_id: String,
    pub outcome: Outcome,
    pub admission_time: NaiveDateTime,
    pub discharge_time: NaiveDateTime,
}

/// Output of ingestion: records in file order plus every patient's metadata
/// in first-appearance order.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub records: Vec<RawRecord>,
    pub patients: Vec<PatientMeta>,
    pub variable_names: Vec<String>,
}

impl Ingested {
    /// Build an `Ingested` from records alone (metadata derived from the
    /// records, variables from the union of observed lab names). Intended
    /// for programmatic construction in tests and examples.
    pub fn from_records(records: Vec<RawRecord>) -> Result<Self, CohortError> {
        let mut patients: Vec<PatientMeta> = Vec::new();
        let mut vars = std::collections::BTreeSet::new();
        for r in &records {
            vars.extend(r.labs.keys().cloned());
            match patients.iter().find(|m| m.patient_id == r.patient_id) {
                None => patients.push(PatientMeta {
                    patient_id: r.patient_id.clone(),
                    outcome: r.outcome,
                    admission_time: r.admission_time,
                    discharge_time: r.discharge_time,
                }),
                Some(m) => {
                    if m.outcome != r.outcome {
                        return Err(CohortError::InconsistentOutcome(r.patient_id.clone()));
                    }
                    if m.admission_time != r.admission_time {
                        return Err(CohortError::InconsistentField {
                            patient: r.patient_id.clone(),
                            field: "admission_time",
                        });
                    }
                    if m.discharge_time != r.discharge_time {
                        return Err(CohortError::InconsistentField {
                            patient: r.patient_id.clone(),
                            field: "discharge_time",
                        });
                    }
                }
            }
        }
        Ok(Ingested {
            records,
            patients,
            variable_names: vars.into_iter().collect(),
        })
    }
}

/// A day's feature values, aligned with `AlignedCohort::variable_names`.
pub type FeatureVector = Vec<Option<f64>>;

/// One patient's right-aligned daily panel. Keys of `rows` are day offsets
/// (0 = outcome day); offsets lie in `[-(total_los_days - 1), 0]`.
/// `observed_mask` is true exactly where a value was measured that day
/// rather than imputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientPanel {
    pub patient_id: String,
    pub outcome: Outcome,
    pub total_los_days: u32,
    pub admission_date: NaiveDate,
    pub discharge_date: NaiveDate,
    pub rows: BTreeMap<i32, FeatureVector>,
    pub observed_mask: BTreeMap<i32, Vec<bool>>,
}

impl PatientPanel {
    /// First day offset carrying an actual observation, if any.
    pub fn first_observed_offset(&self) -> Option<i32> {
        self.observed_mask
            .iter()
            .find(|(_, mask)| mask.iter().any(|&m| m))
            .map(|(&t, _)| t)
    }

    pub fn has_observation_at(&self, offset: i32) -> bool {
        self.observed_mask
            .get(&offset)
            .is_some_and(|mask| mask.iter().any(|&m| m))
    }
}

/// The full right-aligned cohort: per-patient daily panels over one shared
/// ordered variable list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedCohort {
    pub variable_names: Vec<String>,
    pub patients: Vec<PatientPanel>,
    pub imputed: bool,
}

/// Which (patient, day) pairs count as samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DaySelection {
    /// Days with at least one actually observed value. This is how sample
    /// days are counted throughout training and evaluation: a day without
    /// new data is not an independent sample.
    #[default]
    Observed,
    /// Any populated row, including fully imputed ones.
    Populated,
}

/// Right-align records on the discharge date and collapse them to one row
/// per (patient, calendar day). When several records touch the same day,
/// each variable keeps its latest non-missing value (ties on `record_time`
/// broken by later input position). Patients without records get empty
/// panels.
pub fn align_and_aggregate(ingested: &Ingested) -> Result<AlignedCohort, CohortError> {
    let mut known = std::collections::BTreeSet::new();
    for meta in &ingested.patients {
        if !known.insert(meta.patient_id.as_str()) {
            return Err(CohortError::DuplicatePatient(meta.patient_id.clone()));
        }
    }
    for record in &ingested.records {
        if !known.contains(record.patient_id.as_str()) {
            return Err(CohortError::UnknownPatientRecord(record.patient_id.clone()));
        }
    }

    let var_index: BTreeMap<&str, usize> = ingested
        .variable_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let n_vars = ingested.variable_names.len();

    // per variable, the winning observation so far: (record_time, seq, value)
    type DayCells = BTreeMap<i32, Vec<Option<(NaiveDateTime, usize, f64)>>>;
    let mut cells: BTreeMap<&str, DayCells> = BTreeMap::new();

    for (seq, record) in ingested.records.iter().enumerate() {
        if record.record_time > record.discharge_time {
            return Err(CohortError::RecordAfterDischarge(record.patient_id.clone()));
        }
        if record.record_time < record.admission_time {
            return Err(CohortError::RecordBeforeAdmission(record.patient_id.clone()));
        }
        let offset = (record.record_time.date() - record.discharge_time.date()).num_days() as i32;
        let day = cells
            .entry(record.patient_id.as_str())
            .or_default()
            .entry(offset)
            .or_insert_with(|| vec![None; n_vars]);
        for (name, &value) in &record.labs {
            let Some(&idx) = var_index.get(name.as_str()) else {
                return Err(CohortError::UnknownVariable(name.clone()));
            };
            let candidate = (record.record_time, seq, value);
            let keep = match day[idx] {
                None => true,
                Some((t, s, _)) => (record.record_time, seq) > (t, s),
            };
            if keep {
                day[idx] = Some(candidate);
            }
        }
    }

    let mut panels = Vec::with_capacity(ingested.patients.len());
    for meta in &ingested.patients {
        if meta.admission_time > meta.discharge_time {
            return Err(CohortError::AdmissionAfterDischarge(meta.patient_id.clone()));
        }
        let admission_date = meta.admission_time.date();
        let discharge_date = meta.discharge_time.date();
        let total_los_days = (discharge_date - admission_date).num_days() as u32 + 1;
        let mut rows = BTreeMap::new();
        let mut observed_mask = BTreeMap::new();
        if let Some(days) = cells.get(meta.patient_id.as_str()) {
            for (&offset, day) in days {
                let values: FeatureVector = day.iter().map(|c| c.map(|(_, _, v)| v)).collect();
                let mask: Vec<bool> = day.iter().map(|c| c.is_some()).collect();
                rows.insert(offset, values);
                observed_mask.insert(offset, mask);
            }
        }
        panels.push(PatientPanel {
            patient_id: meta.patient_id.clone(),
            outcome: meta.outcome,
            total_los_days,
            admission_date,
            discharge_date,
            rows,
            observed_mask,
        });
    }

    Ok(AlignedCohort {
        variable_names: ingested.variable_names.clone(),
        patients: panels,
        imputed: false,
    })
}

/// Last-observation-carried-forward imputation with unbounded lookback.
///
/// For every patient, every offset from their first observation to 0 is
/// materialized; each variable carries its most recent observed value at or
/// before that offset. Variables never observed stay missing, and the
/// observed mask is preserved so imputed cells remain distinguishable.
pub fn impute_locf(cohort: &AlignedCohort) -> AlignedCohort {
    let n_vars = cohort.variable_names.len();
    let mut out = cohort.clone();
    for panel in &mut out.patients {
        let Some(first) = panel.first_observed_offset() else {
            continue;
        };
        let mut carry: Vec<Option<f64>> = vec![None; n_vars];
        for offset in first..=0 {
            let mask = panel
                .observed_mask
                .entry(offset)
                .or_insert_with(|| vec![false; n_vars]);
            let row = panel
                .rows
                .entry(offset)
                .or_insert_with(|| vec![None; n_vars]);
            for v in 0..n_vars {
                if mask[v] {
                    carry[v] = row[v];
                } else {
                    row[v] = carry[v];
                }
            }
        }
    }
    out.imputed = true;
    out
}

fn history_stats(points: &[(i32, f64)]) -> (f64, f64, f64, f64) {
    let n = points.len() as f64;
    let mean_t = points.iter().map(|(t, _)| *t as f64).sum::<f64>() / n;
    let mean_v = points.iter().map(|(_, v)| v).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_t = 0.0;
    let mut var_v = 0.0;
    for &(t, v) in points {
        let dt = t as f64 - mean_t;
        let dv = v - mean_v;
        cov += dt * dv;
        var_t += dt * dt;
        var_v += dv * dv;
    }
    let slope = cov / var_t; // offsets are distinct days, var_t > 0 for n >= 2
    let std = (var_v / (n - 1.0)).sqrt();
    let diff = points[points.len() - 1].1 - points[points.len() - 2].1;
    (mean_v, slope, std, diff)
}

/// Append, per selected variable, four derived variables (trailing-window
/// mean, least-squares slope, sample standard deviation, and first-order
/// difference) computed over the observed values within the trailing
/// `window` days. Days with fewer than two observations in the window get
/// missing derived values.
pub fn derive_history_features(
    cohort: &AlignedCohort,
    vars: &[String],
    window: u32,
) -> Result<AlignedCohort, CohortError> {
    if window < 2 {
        return Err(CohortError::InvalidWindow(window));
    }
    let mut indices = Vec::with_capacity(vars.len());
    for v in vars {
        let idx = cohort
            .variable_names
            .iter()
            .position(|n| n == v)
            .ok_or_else(|| CohortError::UnknownVariable(v.clone()))?;
        indices.push(idx);
    }
    let mut out = cohort.clone();
    let mut new_names = Vec::with_capacity(vars.len() * 4);
    for v in vars {
        for kind in ["mean", "slope", "std", "diff"] {
            let name = format!("{v}__{kind}_w{window}");
            if cohort.variable_names.contains(&name) {
                return Err(CohortError::DuplicateVariable(name));
            }
            new_names.push(name);
        }
    }
    out.variable_names.extend(new_names);

    let span = window as i32;
    for panel in &mut out.patients {
        // Observed series per selected variable, in offset order.
        let series: Vec<Vec<(i32, f64)>> = indices
            .iter()
            .map(|&idx| {
                panel
                    .observed_mask
                    .iter()
                    .filter(|(_, m)| m[idx])
                    .filter_map(|(&t, _)| panel.rows[&t][idx].map(|v| (t, v)))
                    .collect()
            })
            .collect();
        let offsets: Vec<i32> = panel.rows.keys().copied().collect();
        for t in offsets {
            let row = panel.rows.get_mut(&t).expect("offset from keys");
            let mask = panel.observed_mask.get_mut(&t).expect("offset from keys");
            for s in &series {
                let window_points: Vec<(i32, f64)> = s
                    .iter()
                    .copied()
                    .filter(|&(ti, _)| ti > t - span && ti <= t)
                    .collect();
                if window_points.len() >= 2 {
                    let (mean, slope, std, diff) = history_stats(&window_points);
                    row.extend([Some(mean), Some(slope), Some(std), Some(diff)]);
                } else {
                    row.extend([None; 4]);
                }
                mask.extend([false; 4]);
            }
        }
    }
    Ok(out)
}

/// Labeled per-day feature matrix over every (patient, offset) pair selected
/// by `predicate` and `selection`. Row order is deterministic: patient
/// ingest order, then offset ascending. Labels replicate the patient
/// outcome.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub x: DenseMatrix,
    pub labels: Vec<u8>,
    pub groups: Vec<String>,
    pub offsets: Vec<i32>,
    pub patient_indices: Vec<usize>,
}

pub fn feature_matrix(
    cohort: &AlignedCohort,
    predicate: impl Fn(i32) -> bool,
    selection: DaySelection,
) -> FeatureMatrix {
    let n_vars = cohort.variable_names.len();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    let mut offsets = Vec::new();
    let mut patient_indices = Vec::new();
    for (pi, panel) in cohort.patients.iter().enumerate() {
        for (&offset, values) in &panel.rows {
            if !predicate(offset) {
                continue;
            }
            if selection == DaySelection::Observed && !panel.has_observation_at(offset) {
                continue;
            }
            rows.push(values.clone());
            labels.push(panel.outcome.as_u8());
            groups.push(panel.patient_id.clone());
            offsets.push(offset);
            patient_indices.push(pi);
        }
    }
    FeatureMatrix {
        x: DenseMatrix::from_rows(&rows, n_vars),
        labels,
        groups,
        offsets,
        patient_indices,
    }
}

/// Cohort-level summary used by the ingest command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n_patients: usize,
    pub n_deaths: usize,
    pub n_variables: usize,
    pub n_populated_days: usize,
    pub n_observed_days: usize,
    /// Per day offset, the number of patients with an actual observation
    /// that day (the right-aligned data-density profile).
    pub observed_density: BTreeMap<i32, usize>,
}

impl AlignedCohort {
    pub fn n_deaths(&self) -> usize {
        self.patients
            .iter()
            .filter(|p| p.outcome == Outcome::Died)
            .count()
    }

    pub fn summarize(&self) -> CohortSummary {
        let mut density: BTreeMap<i32, usize> = BTreeMap::new();
        let mut observed_days = 0;
        let mut populated_days = 0;
        for panel in &self.patients {
            populated_days += panel.rows.len();
            for (&t, mask) in &panel.observed_mask {
                if mask.iter().any(|&m| m) {
                    observed_days += 1;
                    *density.entry(t).or_insert(0) += 1;
                }
            }
        }
        CohortSummary {
            n_patients: self.patients.len(),
            n_deaths: self.n_deaths(),
            n_variables: self.variable_names.len(),
            n_populated_days: populated_days,
            n_observed_days: observed_days,
            observed_density: density,
        }
    }

    /// Canonical JSON dump (patients -> offsets -> values/mask), stable
    /// byte-for-byte for golden-file comparisons.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cohort serialization cannot fail")
    }

    pub fn from_canonical_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S").unwrap()
    }

    fn record(
        pid: &str,
        time: &str,
        adm: &str,
        dis: &str,
        outcome: Outcome,
        labs: &[(&str, f64)],
    ) -> RawRecord {
        RawRecord {
            patient_id: pid.to_string(),
            record_time: ts(time),
            admission_time: ts(adm),
            discharge_time: ts(dis),
            outcome,
            labs: labs.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
        }
    }

    const ADM: &str = "2020-02-01 06:00:00";
    const DIS: &str = "2020-02-08 20:00:00";

    fn cohort_of(records: Vec<RawRecord>) -> AlignedCohort {
        align_and_aggregate(&Ingested::from_records(records).unwrap()).unwrap()
    }

    #[test]
    fn offsets_are_relative_to_discharge_day() {
        let cohort = cohort_of(vec![
            record("P1", "2020-02-08 09:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 250.0)]),
            record("P1", "2020-02-05 09:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 300.0)]),
        ]);
        let panel = &cohort.patients[0];
        assert_eq!(panel.rows.keys().copied().collect::<Vec<_>>(), vec![-3, 0]);
        assert_eq!(panel.total_los_days, 8);
    }

    #[test]
    fn same_day_records_collapse_per_variable_to_latest() {
        let cohort = cohort_of(vec![
            record("P1", "2020-02-05 08:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 300.0)]),
            record("P1", "2020-02-05 12:00:00", ADM, DIS, Outcome::Survived, &[("CRP", 10.0)]),
        ]);
        let panel = &cohort.patients[0];
        let vars = &cohort.variable_names;
        let row = &panel.rows[&-3];
        let ldh = vars.iter().position(|v| v == "LDH").unwrap();
        let crp = vars.iter().position(|v| v == "CRP").unwrap();
        assert_eq!(row[ldh], Some(300.0));
        assert_eq!(row[crp], Some(10.0));
    }

    #[test]
    fn later_same_day_value_wins() {
        let cohort = cohort_of(vec![
            record("P1", "2020-02-05 08:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 300.0)]),
            record("P1", "2020-02-05 12:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 320.0)]),
        ]);
        assert_eq!(cohort.patients[0].rows[&-3][0], Some(320.0));
    }

    #[test]
    fn record_after_discharge_is_fatal() {
        let err = align_and_aggregate(
            &Ingested::from_records(vec![record(
                "P1",
                "2020-02-08 21:00:00",
                ADM,
                DIS,
                Outcome::Survived,
                &[("LDH", 1.0)],
            )])
            .unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, CohortError::RecordAfterDischarge(p) if p == "P1"));
    }

    #[test]
    fn shuffled_record_order_yields_identical_panels() {
        use rand::prelude::*;
        let base = vec![
            record("P1", "2020-02-02 08:00:00", ADM, DIS, Outcome::Died, &[("LDH", 1.0)]),
            record("P1", "2020-02-04 09:00:00", ADM, DIS, Outcome::Died, &[("LDH", 2.0), ("CRP", 5.0)]),
            record("P2", "2020-02-03 10:00:00", ADM, DIS, Outcome::Survived, &[("CRP", 3.0)]),
            record("P1", "2020-02-04 11:00:00", ADM, DIS, Outcome::Died, &[("LDH", 3.0)]),
            record("P2", "2020-02-08 10:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 4.0)]),
        ];
        let reference = cohort_of(base.clone());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let mut shuffled = base.clone();
            shuffled.shuffle(&mut rng);
            let cohort = cohort_of(shuffled);
            for panel in &reference.patients {
                let other = cohort
                    .patients
                    .iter()
                    .find(|p| p.patient_id == panel.patient_id)
                    .unwrap();
                assert_eq!(panel, other);
            }
        }
    }

    #[test]
    fn realignment_of_reconstructed_records_is_idempotent() {
        let cohort = cohort_of(vec![
            record("P1", "2020-02-02 08:00:00", ADM, DIS, Outcome::Died, &[("LDH", 1.0)]),
            record("P1", "2020-02-05 09:00:00", ADM, DIS, Outcome::Died, &[("CRP", 2.0)]),
        ]);
        // Rebuild one record per populated (day, observed value) and re-align.
        let mut records = Vec::new();
        for panel in &cohort.patients {
            for (&offset, mask) in &panel.observed_mask {
                let date = panel.discharge_date + chrono::Duration::days(offset as i64);
                let labs: BTreeMap<String, f64> = mask
                    .iter()
                    .enumerate()
                    .filter(|(_, &m)| m)
                    .map(|(i, _)| {
                        (
                            cohort.variable_names[i].clone(),
                            panel.rows[&offset][i].unwrap(),
                        )
                    })
                    .collect();
                records.push(RawRecord {
                    patient_id: panel.patient_id.clone(),
                    record_time: date.and_hms_opt(12, 0, 0).unwrap(),
                    admission_time: ts(ADM),
                    discharge_time: ts(DIS),
                    outcome: panel.outcome,
                    labs,
                });
            }
        }
        let rebuilt = cohort_of(records);
        for (a, b) in cohort.patients.iter().zip(&rebuilt.patients) {
            assert_eq!(a.rows, b.rows);
            assert_eq!(a.observed_mask, b.observed_mask);
        }
    }

    #[test]
    fn locf_carries_values_forward_to_outcome_day() {
        let cohort = impute_locf(&cohort_of(vec![record(
            "P1",
            "2020-02-02 08:00:00",
            ADM,
            DIS,
            Outcome::Survived,
            &[("LDH", 300.0)],
        )]));
        let panel = &cohort.patients[0];
        for t in -6..=0 {
            assert_eq!(panel.rows[&t][0], Some(300.0), "offset {t}");
            assert_eq!(panel.observed_mask[&t][0], t == -6, "mask at {t}");
        }
    }

    #[test]
    fn locf_newer_observation_overrides_carry() {
        let cohort = impute_locf(&cohort_of(vec![
            record("P1", "2020-02-02 08:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 300.0)]),
            record("P1", "2020-02-06 08:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 350.0)]),
        ]));
        let panel = &cohort.patients[0];
        for t in -6..=-3 {
            assert_eq!(panel.rows[&t][0], Some(300.0));
        }
        for t in -2..=0 {
            assert_eq!(panel.rows[&t][0], Some(350.0));
        }
    }

    #[test]
    fn never_observed_variable_stays_missing() {
        let cohort = impute_locf(&cohort_of(vec![
            record("P1", "2020-02-02 08:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 300.0)]),
            record("P2", "2020-02-02 08:00:00", ADM, DIS, Outcome::Died, &[("CRP", 9.0)]),
        ]));
        let p1 = &cohort.patients[0];
        let crp = cohort.variable_names.iter().position(|v| v == "CRP").unwrap();
        for t in -6..=0 {
            assert_eq!(p1.rows[&t][crp], None);
        }
    }

    #[test]
    fn locf_sources_precede_their_targets() {
        // Causality: every imputed value equals the most recent observed one.
        let cohort = impute_locf(&cohort_of(vec![
            record("P1", "2020-02-02 08:00:00", ADM, DIS, Outcome::Died, &[("LDH", 1.0)]),
            record("P1", "2020-02-04 08:00:00", ADM, DIS, Outcome::Died, &[("LDH", 2.0), ("CRP", 7.0)]),
            record("P1", "2020-02-07 08:00:00", ADM, DIS, Outcome::Died, &[("CRP", 8.0)]),
        ]));
        let panel = &cohort.patients[0];
        for (&t, row) in &panel.rows {
            for (v, value) in row.iter().enumerate() {
                if panel.observed_mask[&t][v] {
                    continue;
                }
                let Some(value) = value else { continue };
                let source = panel
                    .observed_mask
                    .range(..=t)
                    .rev()
                    .find(|(_, m)| m[v])
                    .map(|(&s, _)| s)
                    .expect("imputed cell must have an observed source");
                assert!(source <= t);
                assert_eq!(panel.rows[&source][v], Some(*value));
            }
        }
    }

    #[test]
    fn history_features_two_point_example() {
        let cohort = impute_locf(&cohort_of(vec![
            record("P1", "2020-02-05 08:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 10.0)]),
            record("P1", "2020-02-07 08:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 20.0)]),
        ]));
        let derived = derive_history_features(&cohort, &["LDH".to_string()], 7).unwrap();
        let names = &derived.variable_names;
        let mean_idx = names.iter().position(|n| n == "LDH__mean_w7").unwrap();
        let diff_idx = names.iter().position(|n| n == "LDH__diff_w7").unwrap();
        let row = &derived.patients[0].rows[&-1];
        assert_eq!(row[mean_idx], Some(15.0));
        assert_eq!(row[diff_idx], Some(10.0));
    }

    #[test]
    fn single_observation_in_window_leaves_derived_missing() {
        let cohort = impute_locf(&cohort_of(vec![record(
            "P1",
            "2020-02-05 08:00:00",
            ADM,
            DIS,
            Outcome::Survived,
            &[("LDH", 10.0)],
        )]));
        let derived = derive_history_features(&cohort, &["LDH".to_string()], 7).unwrap();
        let row = &derived.patients[0].rows[&-3];
        assert_eq!(&row[1..], &[None, None, None, None]);
    }

    #[test]
    fn slope_matches_least_squares_fit() {
        // values 1, 2, 3 at offsets -2, -1, 0 -> slope 1.0 per day. Oracle:
        // direct least-squares normal equations on the same points.
        let cohort = impute_locf(&cohort_of(vec![
            record("P1", "2020-02-06 08:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 1.0)]),
            record("P1", "2020-02-07 08:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 2.0)]),
            record("P1", "2020-02-08 08:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 3.0)]),
        ]));
        let derived = derive_history_features(&cohort, &["LDH".to_string()], 7).unwrap();
        let slope_idx = derived
            .variable_names
            .iter()
            .position(|n| n == "LDH__slope_w7")
            .unwrap();
        let got = derived.patients[0].rows[&0][slope_idx].unwrap();

        let pts = [(-2.0f64, 1.0f64), (-1.0, 2.0), (0.0, 3.0)];
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let oracle = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!((got - oracle).abs() < 1e-12);
        assert!((got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_history_variable_is_fatal() {
        let cohort = impute_locf(&cohort_of(vec![record(
            "P1",
            "2020-02-05 08:00:00",
            ADM,
            DIS,
            Outcome::Survived,
            &[("LDH", 10.0)],
        )]));
        let err = derive_history_features(&cohort, &["nope".to_string()], 7).unwrap_err();
        assert!(matches!(err, CohortError::UnknownVariable(v) if v == "nope"));
    }

    #[test]
    fn feature_matrix_counts_match_brute_force() {
        let cohort = impute_locf(&cohort_of(vec![
            record("P1", "2020-02-04 08:00:00", ADM, DIS, Outcome::Died, &[("LDH", 1.0)]),
            record("P2", "2020-02-06 08:00:00", ADM, DIS, Outcome::Survived, &[("LDH", 2.0)]),
            record("P2", "2020-02-08 08:00:00", ADM, DIS, Outcome::Survived, &[("CRP", 3.0)]),
        ]));
        for (name, pred) in [
            ("zero", Box::new(|t: i32| t == 0) as Box<dyn Fn(i32) -> bool>),
            ("none", Box::new(|_| false)),
            ("interval", Box::new(|t: i32| -7 < t && t <= -4)),
        ] {
            let fm = feature_matrix(&cohort, &pred, DaySelection::Populated);
            let mut expected = 0;
            for panel in &cohort.patients {
                expected += panel.rows.keys().filter(|&&t| pred(t)).count();
            }
            assert_eq!(fm.x.n_rows(), expected, "predicate {name}");
            assert_eq!(fm.labels.len(), expected);
            assert_eq!(fm.groups.len(), expected);
        }
    }

    #[test]
    fn interval_predicate_selects_member_offsets() {
        let cohort = cohort_of(vec![
            record("P1", "2020-02-04 08:00:00", ADM, DIS, Outcome::Died, &[("LDH", 1.0)]),
            record("P1", "2020-02-03 08:00:00", ADM, DIS, Outcome::Died, &[("LDH", 2.0)]),
        ]);
        // offsets -5 and -4; interval (-7, -4] keeps both
        let fm = feature_matrix(&cohort, |t| -7 < t && t <= -4, DaySelection::Observed);
        assert_eq!(fm.offsets, vec![-5, -4]);
    }

    #[test]
    fn empty_panels_contribute_no_rows() {
        let ingested = Ingested {
            records: vec![],
            patients: vec![PatientMeta {
                patient_id: "P1".into(),
                outcome: Outcome::Survived,
                admission_time: ts(ADM),
                discharge_time: ts(DIS),
            }],
            variable_names: vec!["LDH".into()],
        };
        let cohort = impute_locf(&align_and_aggregate(&ingested).unwrap());
        assert_eq!(cohort.patients.len(), 1);
        let fm = feature_matrix(&cohort, |_| true, DaySelection::Populated);
        assert_eq!(fm.x.n_rows(), 0);
    }

    #[test]
    fn duplicate_and_orphan_patients_are_rejected() {
        let meta = PatientMeta {
            patient_id: "P1".into(),
            outcome: Outcome::Survived,
            admission_time: ts(ADM),
            discharge_time: ts(DIS),
        };
        let dup = Ingested {
            records: vec![],
            patients: vec![meta.clone(), meta.clone()],
            variable_names: vec!["LDH".into()],
        };
        assert!(matches!(
            align_and_aggregate(&dup),
            Err(CohortError::DuplicatePatient(p)) if p == "P1"
        ));

        let orphan = Ingested {
            records: vec![record(
                "P2",
                "2020-02-03 08:00:00",
                ADM,
                DIS,
                Outcome::Died,
                &[("LDH", 1.0)],
            )],
            patients: vec![meta],
            variable_names: vec!["LDH".into()],
        };
        assert!(matches!(
            align_and_aggregate(&orphan),
            Err(CohortError::UnknownPatientRecord(p)) if p == "P2"
        ));
    }

    #[test]
    fn canonical_json_round_trips() {
        let cohort = impute_locf(&cohort_of(vec![
            record("P1", "2020-02-04 08:00:00", ADM, DIS, Outcome::Died, &[("LDH", 1.5)]),
        ]));
        let json = cohort.to_canonical_json();
        let restored = AlignedCohort::from_canonical_json(&json).unwrap();
        assert_eq!(cohort, restored);
        assert_eq!(json, restored.to_canonical_json());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// (patient, day offset in -7..=0, hour, var index, value)
        type ObsSpec = (u8, i8, u8, u8, i16);

        fn cohort_from_spec(spec: &[ObsSpec]) -> AlignedCohort {
            let vars = ["v0", "v1", "v2"];
            let records: Vec<RawRecord> = spec
                .iter()
                .map(|&(p, day, hour, var, value)| {
                    let date = ts(DIS).date() + chrono::Duration::days(i64::from(day));
                    RawRecord {
                        patient_id: format!("P{}", p % 3),
                        record_time: date.and_hms_opt(6 + u32::from(hour % 12), 0, 0).unwrap(),
                        admission_time: ts(ADM),
                        discharge_time: ts(DIS),
                        outcome: Outcome::Survived,
                        labs: [(vars[(var % 3) as usize].to_string(), f64::from(value))]
                            .into_iter()
                            .collect(),
                    }
                })
                .collect();
            cohort_of(records)
        }

        proptest! {
            /// LOCF causality and materialization: every imputed cell's
            /// source is the most recent observed value at or before it,
            /// and every offset from the first observation to 0 exists.
            #[test]
            fn locf_is_causal_and_materializes_to_outcome_day(
                spec in proptest::collection::vec(
                    (0u8..3, -7i8..=0, 0u8..12, 0u8..3, -500i16..500),
                    1..24,
                )
            ) {
                let aligned = cohort_from_spec(&spec);
                let cohort = impute_locf(&aligned);
                for panel in &cohort.patients {
                    let Some(first) = panel.first_observed_offset() else { continue };
                    for t in first..=0 {
                        prop_assert!(panel.rows.contains_key(&t), "offset {t} missing");
                    }
                    for (&t, row) in &panel.rows {
                        for (v, value) in row.iter().enumerate() {
                            if panel.observed_mask[&t][v] {
                                continue;
                            }
                            let Some(value) = value else { continue };
                            let source = panel
                                .observed_mask
                                .range(..=t)
                                .rev()
                                .find(|(_, m)| m[v])
                                .map(|(&s, _)| s);
                            let source = source.expect("imputed cell needs an observed source");
                            prop_assert!(source <= t);
                            prop_assert_eq!(panel.rows[&source][v], Some(*value));
                        }
                    }
                }
            }

            /// Aggregation keeps, per (day, variable), the latest value.
            #[test]
            fn same_day_collapse_keeps_latest_by_record_time(
                spec in proptest::collection::vec(
                    (0u8..2, -4i8..=0, 0u8..12, 0u8..2, -500i16..500),
                    1..16,
                )
            ) {
                let cohort = cohort_from_spec(&spec);
                for panel in &cohort.patients {
                    for (&t, row) in &panel.rows {
                        for (v, value) in row.iter().enumerate() {
                            let Some(value) = value else { continue };
                            // brute force: scan the spec for the winning record
                            let expected = spec
                                .iter()
                                .filter(|&&(p, day, _, var, _)| {
                                    format!("P{}", p % 3) == panel.patient_id
                                        && i32::from(day) == t
                                        && (var % 3) as usize == v
                                })
                                .max_by_key(|&&(_, _, hour, _, _)| hour % 12)
                                .map(|&(_, _, _, _, val)| f64::from(val));
                            // ties on the hour are broken by input order, so
                            // only assert when the maximum is unique
                            let max_hour = spec
                                .iter()
                                .filter(|&&(p, day, _, var, _)| {
                                    format!("P{}", p % 3) == panel.patient_id
                                        && i32::from(day) == t
                                        && (var % 3) as usize == v
                                })
                                .map(|&(_, _, hour, _, _)| hour % 12)
                                .max();
                            let unique = spec
                                .iter()
                                .filter(|&&(p, day, hour, var, _)| {
                                    format!("P{}", p % 3) == panel.patient_id
                                        && i32::from(day) == t
                                        && (var % 3) as usize == v
                                        && Some(hour % 12) == max_hour
                                })
                                .count()
                                == 1;
                            if unique {
                                prop_assert_eq!(Some(*value), expected);
                            }
                        }
                    }
                }
            }
        }
    }
}
