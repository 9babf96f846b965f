//! Denial-of-service packet-loss channel.
//!
//! Transmission states are Bernoulli: a packet is lost with probability
//! `rho`. A transmission mask of length `d + 1` is drawn per windowed sample
//! (current sample first, then the d preceding moments) for fidelity to the
//! consecutive-loss bookkeeping; the estimator consumes only the current
//! sample's element. Lost vectors arrive zeroed by default, or as a repeat
//! of the last delivered vector under hold-last semantics.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AttackLog, AttackLogEntry, AttackOutcome};
use crate::error::{Error, Result};
use crate::measurement::MeasurementSample;
use crate::TimeWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossSemantics {
    /// Lost measurement vectors are element-wise zeroed.
    #[default]
    Zeroed,
    /// Lost vectors repeat the last successfully delivered vector.
    HoldLast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DosConfig {
    /// Packet-loss probability, in (0, 1].
    pub rho: f64,
    /// Maximum consecutive-loss bookkeeping depth (mask length is d + 1).
    pub d: usize,
    pub window: TimeWindow,
    #[serde(default)]
    pub semantics: LossSemantics,
    /// Force delivery once a loss run reaches d samples.
    #[serde(default)]
    pub limit_consecutive: bool,
    pub seed: u64,
}

impl DosConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Invalid(format!(
                "DoS loss probability rho must be in (0, 1], got {}",
                self.rho
            )));
        }
        if self.d < 1 {
            return Err(Error::Invalid("DoS consecutive-loss depth d must be >= 1".into()));
        }
        TimeWindow::new(self.window.t_start_s, self.window.t_end_s).map(|_| ())
    }
}

/// Draw a transmission mask of length `d + 1`: `false` marks a lost packet,
/// each element independently lost with probability `rho`.
pub fn draw_dos_mask(config: &DosConfig, rng: &mut ChaCha8Rng) -> Vec<bool> {
    (0..=config.d).map(|_| rng.random::<f64>() >= config.rho).collect()
}

/// Apply the DoS channel over its window.
pub fn apply_dos(
    stream: &[MeasurementSample],
    config: &DosConfig,
) -> Result<(Vec<MeasurementSample>, AttackLog)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(stream.len());
    let mut log = AttackLog::default();
    let mut last_delivered: Option<MeasurementSample> = None;
    let mut loss_run = 0usize;

    for (k, sample) in stream.iter().enumerate() {
        if !config.window.contains(sample.t) {
            last_delivered = Some(*sample);
            loss_run = 0;
            out.push(*sample);
            continue;
        }
        let mut mask = draw_dos_mask(config, &mut rng);
        if config.limit_consecutive && loss_run >= config.d {
            mask[0] = true;
        }
        let lost = !mask[0];
        let delivered = if lost {
            loss_run += 1;
            let mut s = match config.semantics {
                LossSemantics::Zeroed => sample.with_z(&nalgebra::Vector3::zeros()),
                LossSemantics::HoldLast => {
                    let held = last_delivered.as_ref().unwrap_or(sample);
                    sample.with_z(&held.z())
                }
            };
            s.valid = [false; 3];
            s
        } else {
            loss_run = 0;
            last_delivered = Some(*sample);
            *sample
        };
        log.entries.push(AttackLogEntry {
            k,
            t: sample.t,
            outcome: if lost {
                AttackOutcome::Lost
            } else {
                AttackOutcome::Delivered
            },
            a: None,
            mask: Some(mask),
            residual_before: None,
            residual_after: None,
        });
        out.push(delivered);
    }
    Ok((out, log))
}
