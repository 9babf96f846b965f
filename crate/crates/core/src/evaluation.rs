//! Accuracy indices and per-step timing statistics.
//!
//! Three indices per state variable:
//!
//! * `tau1` — RMS of the estimate-vs-measurement relative error; samples with
//!   a zero measurement are excluded and counted.
//! * `tau2` — ratio of estimate RMSE to measurement RMSE about the truth;
//!   below one means the filter beats the raw measurements.
//! * `tau3` — plain RMSE of the estimate against the truth.

use std::time::Duration;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::TimeWindow;

/// RMS relative error against the measurements.
pub fn tau1(estimates: &[f64], measurements: &[f64]) -> Result<(f64, usize)> {
    assert_eq!(estimates.len(), measurements.len());
    let mut acc = 0.0;
    let mut n = 0usize;
    let mut excluded = 0usize;
    for (x_hat, x_z) in estimates.iter().zip(measurements) {
        if *x_z == 0.0 {
            excluded += 1;
            continue;
        }
        acc += ((x_hat - x_z) / x_z).powi(2);
        n += 1;
    }
    if n == 0 {
        return Err(Error::IndexUndefined(
            "tau1: every sample had a zero measurement".into(),
        ));
    }
    Ok(((acc / n as f64).sqrt(), excluded))
}

/// Estimate RMSE over measurement RMSE, both about the truth.
pub fn tau2(estimates: &[f64], measurements: &[f64], truth: &[f64]) -> Result<f64> {
    assert_eq!(estimates.len(), truth.len());
    assert_eq!(measurements.len(), truth.len());
    let num: f64 = estimates
        .iter()
        .zip(truth)
        .map(|(x_hat, x)| (x_hat - x).powi(2))
        .sum();
    let den: f64 = measurements
        .iter()
        .zip(truth)
        .map(|(x_z, x)| (x_z - x).powi(2))
        .sum();
    if den <= 0.0 {
        return Err(Error::IndexUndefined(
            "tau2: zero measurement error about the truth".into(),
        ));
    }
    Ok((num / den).sqrt())
}

/// RMSE of the estimate against the truth.
pub fn tau3(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    assert_eq!(estimates.len(), truth.len());
    if estimates.is_empty() {
        return Err(Error::IndexUndefined("tau3: no samples".into()));
    }
    let acc: f64 = estimates
        .iter()
        .zip(truth)
        .map(|(x_hat, x)| (x_hat - x).powi(2))
        .sum();
    Ok((acc / estimates.len() as f64).sqrt())
}

/// Indices of one state variable over one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariableIndices {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau1: Option<f64>,
    pub tau1_excluded: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau2: Option<f64>,
    pub tau3: f64,
}

/// Index report for one filter over one window. Measured variables carry all
/// three indices; the transient voltages only have truth to compare against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexReport {
    pub n: usize,
    pub eq_p_tau3: f64,
    pub ed_p_tau3: f64,
    pub window: TimeWindow,
    pub delta: VariableIndices,
    pub omega: VariableIndices,
}

impl IndexReport {
    /// Both reports must cover the same window and sample count.
    pub fn check_comparable(&self, other: &IndexReport) -> Result<()> {
        if self.window != other.window || self.n != other.n {
            return Err(Error::WindowMismatch(format!(
                "[{}, {}] n={} vs [{}, {}] n={}",
                self.window.t_start_s,
                self.window.t_end_s,
                self.n,
                other.window.t_start_s,
                other.window.t_end_s,
                other.n
            )));
        }
        Ok(())
    }
}

/// Wall-clock timing of one filter step, split by stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepTiming {
    pub forecast: Duration,
    pub update: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingReport {
    /// Steps measured, warm-up excluded.
    pub steps: usize,
    pub mean_total_ms: f64,
    pub max_total_ms: f64,
    pub mean_forecast_ms: f64,
    pub mean_update_ms: f64,
}

const WARMUP_STEPS: usize = 10;

/// Per-step statistics with the first ten steps treated as warm-up.
pub fn timing_profile(timings: &[StepTiming]) -> TimingReport {
    let body = if timings.len() > WARMUP_STEPS {
        &timings[WARMUP_STEPS..]
    } else {
        timings
    };
    let ms = |d: Duration| d.as_secs_f64() * 1e3;
    let n = body.len().max(1) as f64;
    let mean_forecast_ms = body.iter().map(|t| ms(t.forecast)).sum::<f64>() / n;
    let mean_update_ms = body.iter().map(|t| ms(t.update)).sum::<f64>() / n;
    let max_total_ms = body
        .iter()
        .map(|t| ms(t.forecast) + ms(t.update))
        .fold(0.0, f64::max);
    TimingReport {
        steps: body.len(),
        mean_total_ms: mean_forecast_ms + mean_update_ms,
        max_total_ms,
        mean_forecast_ms,
        mean_update_ms,
    }
}
