use std::fmt;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::config::ExperimentKind;

pub const CSV_HEADER: &str = "experiment,param,phase,enclave,median_ms,mean_ms,min_ms,reps";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Encrypt,
    Decrypt,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Encrypt => "encrypt",
            Phase::Decrypt => "decrypt",
        })
    }
}

fn on_off<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(if *v { "on" } else { "off" })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub experiment: ExperimentKind,
    pub param: usize,
    pub phase: Phase,
    #[serde(serialize_with = "on_off")]
    pub enclave: bool,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub reps: usize,
    /// Median of the ABE part alone; only measured on the direct path.
    #[serde(skip)]
    pub kem_median_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub median: f64,
    pub mean: f64,
    pub min: f64,
}

pub fn summarize(samples: &[f64]) -> Summary {
    assert!(!samples.is_empty());
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let median = if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 };
    Summary { median, mean: s.iter().sum::<f64>() / n as f64, min: s[0] }
}

pub fn write_csv<W: std::io::Write>(out: W, records: &[BenchRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, records: &[BenchRecord]) -> Result<(), csv::Error> {
    write_csv(std::fs::File::create(path)?, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_row_format() {
        let r = BenchRecord {
            experiment: ExperimentKind::FileSize,
            param: 1048576,
            phase: Phase::Decrypt,
            enclave: true,
            median_ms: 1.5,
            mean_ms: 2.0,
            min_ms: 1.0,
            reps: 5,
            kem_median_ms: Some(0.3),
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next(), Some("filesize,1048576,decrypt,on,1.5,2.0,1.0,5"));

        let mut empty = Vec::new();
        write_csv(&mut empty, &[]).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim_end(), CSV_HEADER);
    }

    proptest! {
        #[test]
        fn summary_ordering(samples in proptest::collection::vec(0.0f64..1e6, 1..50)) {
            let s = summarize(&samples);
            prop_assert!(s.min <= s.median);
            prop_assert!(s.min <= s.mean);
            prop_assert!(s.median <= samples.iter().cloned().fold(f64::MIN, f64::max));
        }
    }
}
