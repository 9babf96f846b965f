//! Forecast-vs-estimate attack identification.
//!
//! During attack-free operation the filtering stage barely moves the
//! forecast, so the largest observed gap `‖x̂_post − x̂_pred‖` over a clean
//! run bounds normal behavior. A later sample whose gap exceeds that bound
//! is flagged; equality is not flagged.

use nalgebra::Vector4;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdentificationState {
    pub d_j: Option<f64>,
}

impl IdentificationState {
    pub fn calibrated(d_j: f64) -> Self {
        Self { d_j: Some(d_j) }
    }
}

/// Identification threshold: maximum gap norm over a clean run, optionally
/// widened by a safety factor.
pub fn calibrate_dj(gaps: &[f64], safety_factor: f64) -> Result<f64> {
    if gaps.is_empty() {
        return Err(Error::Invalid("cannot calibrate on an empty run".into()));
    }
    if !(safety_factor > 0.0) {
        return Err(Error::Invalid("safety factor must be positive".into()));
    }
    let max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite {
            context: "calibration gaps".into(),
        });
    }
    Ok(max * safety_factor)
}

/// Flag a sample as attacked when the forecast-vs-estimate gap exceeds the
/// calibrated threshold.
pub fn identify_attack(
    x_post: &Vector4<f64>,
    x_pred: &Vector4<f64>,
    id: &IdentificationState,
) -> Result<bool> {
    let d_j = id.d_j.ok_or(Error::Uncalibrated)?;
    Ok((x_post - x_pred).norm() > d_j)
}
