//! Benchmark harness and command-line front end.
//!
//! [`run_bench`] sweeps one parameter (rule count, attributes per rule, or
//! file size) and times encryption and decryption both directly and through
//! the enclave, producing [`BenchRecord`]s and optionally a CSV file with
//! header [`CSV_HEADER`].

pub mod analysis;
pub mod cli;
pub mod config;
pub mod policy_gen;
pub mod record;
pub mod runner;

pub use config::{BenchConfig, ConfigError, EnclaveSelection, ExperimentKind, Point};
pub use policy_gen::{generate_policy, rule_attribute_set, rule_attributes};
pub use record::{summarize, write_csv, write_csv_file, BenchRecord, Phase, CSV_HEADER};
pub use runner::{run_bench, BenchError};
