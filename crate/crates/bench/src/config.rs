use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

pub const MB: usize = 1024 * 1024;
pub const DEFAULT_FILE_BYTES: usize = 500 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Rules,
    Attributes,
    FileSize,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Rules => "rules",
            ExperimentKind::Attributes => "attributes",
            ExperimentKind::FileSize => "filesize",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.to_ascii_lowercase().as_str() {
            "rules" => Ok(Self::Rules),
            "attributes" | "attrs" => Ok(Self::Attributes),
            "filesize" | "file-size" | "size" => Ok(Self::FileSize),
            _ => Err(ConfigError::UnknownExperiment(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnclaveSelection {
    Off,
    On,
    Both,
}

impl EnclaveSelection {
    pub fn flags(self) -> &'static [bool] {
        match self {
            EnclaveSelection::Off => &[false],
            EnclaveSelection::On => &[true],
            EnclaveSelection::Both => &[false, true],
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("unknown experiment {0:?} (expected rules, attributes or filesize)")]
    UnknownExperiment(String),
    #[error("sweep is empty")]
    EmptySweep,
    #[error("sweep must be strictly increasing")]
    NotIncreasing,
    #[error("sweep values must be positive")]
    ZeroValue,
    #[error("need at least 3 repetitions, got {0}")]
    TooFewRepetitions(usize),
    #[error("{0} must be positive")]
    ZeroParameter(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    pub experiment: ExperimentKind,
    /// Rule counts, attributes per rule, or file sizes in bytes.
    pub sweep: Vec<usize>,
    pub attrs_per_rule: usize,
    pub rules: usize,
    pub file_bytes: usize,
    pub repetitions: usize,
    pub enclave: EnclaveSelection,
    pub output: Option<PathBuf>,
}

/// One measured configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Point {
    pub rules: usize,
    pub attrs_per_rule: usize,
    pub file_bytes: usize,
}

impl Point {
    pub fn leaf_count(&self) -> usize {
        self.rules * self.attrs_per_rule
    }
}

impl BenchConfig {
    /// The standard parameter grid for `experiment`.
    pub fn standard(experiment: ExperimentKind) -> Self {
        let (sweep, attrs_per_rule, rules, file_bytes) = match experiment {
            ExperimentKind::Rules => (vec![1, 5, 10, 15, 20], 5, 10, DEFAULT_FILE_BYTES),
            ExperimentKind::Attributes => (vec![2, 4, 6, 8, 10], 5, 10, DEFAULT_FILE_BYTES),
            ExperimentKind::FileSize => (vec![MB, 10 * MB, 25 * MB, 50 * MB], 5, 10, DEFAULT_FILE_BYTES),
        };
        Self {
            experiment,
            sweep,
            attrs_per_rule,
            rules,
            file_bytes,
            repetitions: 5,
            enclave: EnclaveSelection::Both,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sweep.is_empty() {
            return Err(ConfigError::EmptySweep);
        }
        if self.sweep.contains(&0) {
            return Err(ConfigError::ZeroValue);
        }
        if self.sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::NotIncreasing);
        }
        if self.repetitions < 3 {
            return Err(ConfigError::TooFewRepetitions(self.repetitions));
        }
        for (name, v) in
            [("attrs_per_rule", self.attrs_per_rule), ("rules", self.rules), ("file_bytes", self.file_bytes)]
        {
            if v == 0 {
                return Err(ConfigError::ZeroParameter(name));
            }
        }
        Ok(())
    }

    pub fn point(&self, value: usize) -> Point {
        let mut p = Point { rules: self.rules, attrs_per_rule: self.attrs_per_rule, file_bytes: self.file_bytes };
        match self.experiment {
            ExperimentKind::Rules => p.rules = value,
            ExperimentKind::Attributes => p.attrs_per_rule = value,
            ExperimentKind::FileSize => p.file_bytes = value,
        }
        p
    }
}
