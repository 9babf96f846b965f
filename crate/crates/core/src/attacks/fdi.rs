//! False-data injection against the linearized measurement model.
//!
//! The attacker corrupts the state estimate by `c` and the measurement by
//! `a = H·c`. Because `(z + H·c) − H·(x̂ + c) = z − H·x̂`, the linearized
//! residual is unchanged and residual-based bad-data detection passes as
//! long as the residual was below the threshold to begin with. Injections
//! whose post-attack residual exceeds the detection threshold are withheld
//! and logged.

use nalgebra::{Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AttackLog, AttackLogEntry, AttackOutcome, JacobianH};
use crate::error::{Error, Result};
use crate::measurement::MeasurementSample;
use crate::TimeWindow;

/// Where the Jacobian is evaluated while the attack runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdiLinearization {
    /// Re-linearize at the filter forecast of every attacked sample.
    #[default]
    PerSample,
    /// Freeze the Jacobian from the first windowed sample.
    WindowStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdiConfig {
    /// Standard deviation of each component of the state-error vector c.
    pub sigma_c: f64,
    pub window: TimeWindow,
    /// Bad-data detection threshold on the linearized residual norm.
    pub b_j: f64,
    #[serde(default)]
    pub linearization: FdiLinearization,
    pub seed: u64,
}

impl FdiConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.sigma_c.is_finite() || self.sigma_c < 0.0 {
            return Err(Error::Invalid("FDI sigma_c must be finite and >= 0".into()));
        }
        if !(self.b_j > 0.0) {
            return Err(Error::Invalid("FDI detection threshold b_j must be positive".into()));
        }
        TimeWindow::new(self.window.t_start_s, self.window.t_end_s).map(|_| ())
    }
}

/// Measurement-space attack vector for a state-space error c.
pub fn build_fdi(c: &Vector4<f64>, h: &JacobianH) -> Vector3<f64> {
    h.h * c
}

/// Draw a state-error vector with i.i.d. N(0, sigma_c²) components.
pub fn draw_attack_vector(sigma_c: f64, rng: &mut ChaCha8Rng) -> Vector4<f64> {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    Vector4::from_fn(|_, _| unit.sample(rng) * sigma_c)
}

/// Bad-data detection seen from the attacker: pass iff the linearized
/// residual norm stays within the threshold.
pub fn stealth_check(z_a: &Vector3<f64>, x_hat_a: &Vector4<f64>, h: &JacobianH, b_j: f64) -> bool {
    (z_a - h.h * x_hat_a).norm() <= b_j
}

/// Per-sample filter feedback consumed by [`apply_fdi`].
///
/// `forecast` must yield the filter's one-step state forecast and the
/// measurement Jacobian at it, before the sample's measurement is consumed;
/// `advance` then feeds the filter whatever measurement the estimator will
/// actually see. Both are called for every sample in stream order.
pub trait FdiFeedback {
    fn forecast(&mut self, k: usize, sample: &MeasurementSample)
        -> Result<Option<(Vector4<f64>, JacobianH)>>;
    fn advance(&mut self, k: usize, z: &Vector3<f64>, sample: &MeasurementSample) -> Result<()>;
}

/// Apply the FDI attack over its window.
///
/// A fresh c is drawn per windowed sample; each injection is subjected to
/// the stealth check and withheld (not clipped) on failure. Samples outside
/// the window pass through untouched.
pub fn apply_fdi<F: FdiFeedback>(
    stream: &[MeasurementSample],
    config: &FdiConfig,
    feedback: &mut F,
) -> Result<(Vec<MeasurementSample>, AttackLog)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(stream.len());
    let mut log = AttackLog::default();
    let mut frozen: Option<(Vector4<f64>, JacobianH)> = None;

    for (k, sample) in stream.iter().enumerate() {
        // Forecast/advance are called for every sample in order, so a filter
        // provider advances exactly once per sample.
        let forecast = feedback.forecast(k, sample)?;
        let delivered = if config.window.contains(sample.t) {
            let (x_pred, h) = forecast.ok_or(Error::MissingFeedback { index: k })?;
            let (x_pred, h) = match config.linearization {
                FdiLinearization::PerSample => (x_pred, h),
                FdiLinearization::WindowStart => *frozen.get_or_insert((x_pred, h)),
            };
            let z = sample.z();
            let c = draw_attack_vector(config.sigma_c, &mut rng);
            let a = build_fdi(&c, &h);
            let z_a = z + a;
            let x_hat_a = x_pred + c;
            let residual_before = (z - h.h * x_pred).norm();
            let residual_after = (z_a - h.h * x_hat_a).norm();
            if stealth_check(&z_a, &x_hat_a, &h, config.b_j) {
                log.entries.push(AttackLogEntry {
                    k,
                    t: sample.t,
                    outcome: AttackOutcome::Injected,
                    a: Some(a),
                    mask: None,
                    residual_before: Some(residual_before),
                    residual_after: Some(residual_after),
                });
                sample.with_z(&z_a)
            } else {
                log.entries.push(AttackLogEntry {
                    k,
                    t: sample.t,
                    outcome: AttackOutcome::SkippedStealth,
                    a: Some(a),
                    mask: None,
                    residual_before: Some(residual_before),
                    residual_after: Some(residual_after),
                });
                *sample
            }
        } else {
            *sample
        };
        feedback.advance(k, &delivered.z(), &delivered)?;
        out.push(delivered);
    }
    Ok((out, log))
}
