//! Run configuration: one JSON file drives every command. Flags may
//! override the seed, strata and output directory. All randomness flows
//! from the single master seed `cv.seed` through named sub-streams.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boosting::HyperParams;
use crate::cohort::{DaySelection, SchemaConfig};
use crate::eval::{CvSettings, DayAxis};
use crate::predictor::PredictorParams;
use crate::strata::StrataDefinition;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cv.split {0:?} must sum to 1")]
    SplitSum([f64; 3]),
    #[error("cv.split {split:?} is inconsistent with k={k}: expected ({expected:?})")]
    SplitFolds { split: [f64; 3], k: usize, expected: [f64; 3] },
    #[error("cv.k must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("cv.repeats must be at least 1")]
    NoRepeats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub train_csv: PathBuf,
    #[serde(default)]
    pub test_csv: Option<PathBuf>,
    pub schema: SchemaConfig,
}

fn default_k() -> usize {
    5
}

fn default_repeats() -> usize {
    100
}

fn default_split() -> [f64; 3] {
    [0.6, 0.2, 0.2]
}

/// Cross-validation settings. `split` states the train/validation/test
/// fractions the folding realizes: with k folds one fold is the test
/// cohort, one the validation cohort, the rest train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    /// Master seed; reproducibility is mandatory, so there is no default.
    pub seed: u64,
}

/// Optional history-feature derivation applied to the training cohort after
/// imputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeriveConfig {
    pub vars: Vec<String>,
    pub window: u32,
}

fn default_features() -> Vec<String> {
    vec!["LDH".into(), "lymphocyte".into(), "hs-CRP".into()]
}

fn default_axis() -> DayAxis {
    DayAxis::Offset
}

fn default_min_patients() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    #[serde(default = "default_features")]
    pub features: Vec<String>,
    #[serde(default = "default_axis")]
    pub axis: DayAxis,
    #[serde(default = "default_min_patients")]
    pub min_patients: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            features: default_features(),
            axis: default_axis(),
            min_patients: default_min_patients(),
        }
    }
}

fn default_strata_params() -> HyperParams {
    HyperParams {
        l2_lambda: 0.02,
        ..HyperParams::default()
    }
}

fn default_threshold() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub strata: StrataDefinition,
    #[serde(default = "default_strata_params")]
    pub strata_params: HyperParams,
    #[serde(default)]
    pub stratum_params: HyperParams,
    pub cv: CvConfig,
    #[serde(default)]
    pub selection: DaySelection,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub derive_features: Option<DeriveConfig>,
    #[serde(default)]
    pub baseline: BaselineConfig,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cv.k < 2 {
            return Err(ConfigError::TooFewFolds(self.cv.k));
        }
        if self.cv.repeats == 0 {
            return Err(ConfigError::NoRepeats);
        }
        let sum: f64 = self.cv.split.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::SplitSum(self.cv.split));
        }
        let k = self.cv.k as f64;
        let expected = if self.cv.k >= 3 {
            [(k - 2.0) / k, 1.0 / k, 1.0 / k]
        } else {
            [0.5, 0.0, 0.5]
        };
        if self
            .cv
            .split
            .iter()
            .zip(&expected)
            .any(|(a, b)| (a - b).abs() > 1e-9)
        {
            return Err(ConfigError::SplitFolds {
                split: self.cv.split,
                k: self.cv.k,
                expected,
            });
        }
        Ok(())
    }

    /// Submodel parameters seeded from the master seed.
    pub fn predictor_params(&self) -> PredictorParams {
        PredictorParams {
            strata: self.strata_params.clone(),
            stratum: self.stratum_params.clone(),
            selection: self.selection,
            validation_fraction: self.cv.split[1],
            seed: self.cv.seed,
        }
    }

    pub fn cv_settings(&self) -> CvSettings {
        CvSettings {
            k: self.cv.k,
            repeats: self.cv.repeats,
            seed: self.cv.seed,
            threshold: self.threshold,
        }
    }

    /// Ready-to-run configuration for the bundled synthetic reference data.
    pub fn for_reference_data(
        train_csv: PathBuf,
        test_csv: Option<PathBuf>,
        output_dir: PathBuf,
        seed: u64,
    ) -> Self {
        RunConfig {
            dataset: DatasetConfig {
                train_csv,
                test_csv,
                schema: SchemaConfig::standard(),
            },
            strata: StrataDefinition::parse(crate::synth::REFERENCE_STRATA)
                .expect("reference strata are valid"),
            strata_params: default_strata_params(),
            stratum_params: HyperParams::default(),
            cv: CvConfig {
                k: 5,
                repeats: 20,
                split: default_split(),
                seed,
            },
            selection: DaySelection::Observed,
            threshold: 0.5,
            derive_features: None,
            baseline: BaselineConfig::default(),
            output_dir,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }
}
