//! CSV schema configuration and ingestion of raw longitudinal records.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{CohortError, Ingested, Outcome, PatientMeta, RawRecord};

fn default_missing() -> Vec<String> {
    vec![String::new(), "NA".to_string()]
}

fn default_died() -> Vec<String> {
    vec!["1".to_string()]
}

fn default_survived() -> Vec<String> {
    vec!["0".to_string()]
}

/// Maps CSV columns to their roles. Any column not named by a role and not
/// listed in `labs` is treated as a lab variable when `labs` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub id: String,
    pub record_time: String,
    pub admission_time: String,
    pub discharge_time: String,
    pub outcome: String,
    /// Explicit lab columns; `None` means every remaining column.
    #[serde(default)]
    pub labs: Option<Vec<String>>,
    /// Cell contents treated as missing.
    #[serde(default = "default_missing")]
    pub missing_values: Vec<String>,
    #[serde(default = "default_died")]
    pub died_codes: Vec<String>,
    #[serde(default = "default_survived")]
    pub survived_codes: Vec<String>,
}

impl SchemaConfig {
    /// Conventional column names used by the bundled generator and examples.
    pub fn standard() -> Self {
        SchemaConfig {
            id: "patient_id".to_string(),
            record_time: "record_time".to_string(),
            admission_time: "admission_time".to_string(),
            discharge_time: "discharge_time".to_string(),
            outcome: "outcome".to_string(),
            labs: None,
            missing_values: default_missing(),
            died_codes: default_died(),
            survived_codes: default_survived(),
        }
    }
}

const TIMESTAMP_FORMATS: &[&str] = &[
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M",
];

fn parse_timestamp(value: &str, column: &str, line: u64) -> Result<NaiveDateTime, CohortError> {
    for fmt in TIMESTAMP_FORMATS {
        if let Ok(ts) = NaiveDateTime::parse_from_str(value, fmt) {
            return Ok(ts);
        }
    }
    if let Ok(d) = chrono::NaiveDate::parse_from_str(value, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight is valid"));
    }
    Err(CohortError::Timestamp {
        line,
        column: column.to_string(),
        value: value.to_string(),
    })
}

struct PendingPatient {
    meta_order: usize,
    outcome: Option<Outcome>,
    admission: Option<NaiveDateTime>,
    discharge: Option<NaiveDateTime>,
}

struct PendingRecord {
    patient_id: String,
    record_time: NaiveDateTime,
    labs: BTreeMap<String, f64>,
}

/// Ingest a records CSV. One [`RawRecord`] is produced per row carrying a
/// measurement timestamp; rows without one contribute only patient metadata
/// (admission/discharge times and outcome), which may also repeat on record
/// rows. Patients whose rows are all metadata are kept in
/// [`Ingested::patients`] so cohort counts are not distorted.
pub fn ingest_csv(path: &Path, schema: &SchemaConfig) -> Result<Ingested, CohortError> {
    let file = std::fs::File::open(path).map_err(|source| CohortError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ingest_reader(file, schema)
}

pub fn ingest_reader<R: std::io::Read>(
    reader: R,
    schema: &SchemaConfig,
) -> Result<Ingested, CohortError> {
    let mut csv = csv::ReaderBuilder::new().from_reader(reader);
    let headers: Vec<String> = csv
        .headers()
        .map_err(|e| CohortError::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let find = |name: &str| -> Result<usize, CohortError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CohortError::MissingColumn(name.to_string()))
    };
    let id_col = find(&schema.id)?;
    let time_col = find(&schema.record_time)?;
    let adm_col = find(&schema.admission_time)?;
    let dis_col = find(&schema.discharge_time)?;
    let out_col = find(&schema.outcome)?;
    let role_cols = [id_col, time_col, adm_col, dis_col, out_col];

    let lab_cols: Vec<(usize, String)> = match &schema.labs {
        Some(names) => names
            .iter()
            .map(|n| find(n).map(|i| (i, n.clone())))
            .collect::<Result<Vec<_>, _>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| !role_cols.contains(i))
            .map(|(i, h)| (i, h.clone()))
            .collect(),
    };
    let variable_names: Vec<String> = lab_cols.iter().map(|(_, n)| n.clone()).collect();

    let is_missing = |cell: &str| schema.missing_values.iter().any(|m| m == cell);

    let mut patients: BTreeMap<String, PendingPatient> = BTreeMap::new();
    let mut order = 0usize;
    let mut pending: Vec<PendingRecord> = Vec::new();

    for row in csv.records() {
        let record = row.map_err(|e| CohortError::Csv {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = |i: usize| record.get(i).unwrap_or("").trim();

        let id = cell(id_col);
        if is_missing(id) {
            return Err(CohortError::MissingId { line });
        }
        let entry = patients.entry(id.to_string()).or_insert_with(|| {
            let p = PendingPatient {
                meta_order: order,
                outcome: None,
                admission: None,
                discharge: None,
            };
            order += 1;
            p
        });

        let out_cell = cell(out_col);
        if !is_missing(out_cell) {
            let parsed = if schema.died_codes.iter().any(|c| c == out_cell) {
                Outcome::Died
            } else if schema.survived_codes.iter().any(|c| c == out_cell) {
                Outcome::Survived
            } else {
                return Err(CohortError::UnknownOutcome {
                    line,
                    code: out_cell.to_string(),
                });
            };
            match entry.outcome {
                None => entry.outcome = Some(parsed),
                Some(prev) if prev != parsed => {
                    return Err(CohortError::InconsistentOutcome(id.to_string()))
                }
                Some(_) => {}
            }
        }
        for (col, field, slot) in [
            (adm_col, "admission_time", &mut entry.admission),
            (dis_col, "discharge_time", &mut entry.discharge),
        ] {
            let c = cell(col);
            if !is_missing(c) {
                let ts = parse_timestamp(c, &headers[col], line)?;
                match slot {
                    None => *slot = Some(ts),
                    Some(prev) if *prev != ts => {
                        return Err(CohortError::InconsistentField {
                            patient: id.to_string(),
                            field,
                        })
                    }
                    Some(_) => {}
                }
            }
        }

        let time_cell = cell(time_col);
        if is_missing(time_cell) {
            continue; // metadata-only row
        }
        let record_time = parse_timestamp(time_cell, &headers[time_col], line)?;
        let mut labs = BTreeMap::new();
        for (col, name) in &lab_cols {
            let c = cell(*col);
            if is_missing(c) {
                continue;
            }
            let value: f64 = c.parse().map_err(|_| CohortError::Number {
                line,
                column: name.clone(),
                value: c.to_string(),
            })?;
            labs.insert(name.clone(), value);
        }
        pending.push(PendingRecord {
            patient_id: id.to_string(),
            record_time,
            labs,
        });
    }

    let mut metas: Vec<(usize, PatientMeta)> = Vec::with_capacity(patients.len());
    for (id, p) in &patients {
        let outcome = p.outcome.ok_or_else(|| CohortError::MissingField {
            patient: id.clone(),
            field: "outcome",
        })?;
        let admission = p.admission.ok_or_else(|| CohortError::MissingField {
            patient: id.clone(),
            field: "admission_time",
        })?;
        let discharge = p.discharge.ok_or_else(|| CohortError::MissingField {
            patient: id.clone(),
            field: "discharge_time",
        })?;
        metas.push((
            p.meta_order,
            PatientMeta {
                patient_id: id.clone(),
                outcome,
                admission_time: admission,
                discharge_time: discharge,
            },
        ));
    }
    metas.sort_by_key(|(order, _)| *order);

    let records = pending
        .into_iter()
        .map(|r| {
            let meta = &patients[&r.patient_id];
            RawRecord {
                patient_id: r.patient_id,
                record_time: r.record_time,
                admission_time: meta.admission.expect("checked above"),
                discharge_time: meta.discharge.expect("checked above"),
                outcome: meta.outcome.expect("checked above"),
                labs: r.labs,
            }
        })
        .collect();

    Ok(Ingested {
        records,
        patients: metas.into_iter().map(|(_, m)| m).collect(),
        variable_names,
    })
}
