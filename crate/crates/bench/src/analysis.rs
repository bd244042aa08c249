//! Trend checks over benchmark records.

use crate::record::{BenchRecord, Phase};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares. Needs at least two distinct x values.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - (slope * x + intercept)).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(LinearFit { slope, intercept, r_squared })
}

pub fn is_non_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] <= w[1])
}

/// (max - min) / mean.
pub fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (max - min) / mean
}

/// Records for one phase and enclave flag, ordered by parameter.
pub fn series(records: &[BenchRecord], phase: Phase, enclave: bool) -> Vec<&BenchRecord> {
    let mut out: Vec<&BenchRecord> = records.iter().filter(|r| r.phase == phase && r.enclave == enclave).collect();
    out.sort_by_key(|r| r.param);
    out
}

/// Enclave-on median over enclave-off median for each matched record pair.
pub fn overhead_ratios(records: &[BenchRecord]) -> Vec<(Phase, usize, f64)> {
    let mut out = Vec::new();
    for phase in [Phase::Encrypt, Phase::Decrypt] {
        let off = series(records, phase, false);
        for on in series(records, phase, true) {
            if let Some(o) = off.iter().find(|o| o.param == on.param) {
                out.push((phase, on.param, on.median_ms / o.median_ms));
            }
        }
    }
    out
}
