//! Measurement-stream attack channels.
//!
//! [`fdi`] constructs stealthy false-data injections `a = H·c` against the
//! linearized measurement model, so the residual a bad-data detector sees is
//! unchanged. [`dos`] is a Bernoulli packet-loss channel that zeroes (or
//! holds) lost measurement vectors.

pub mod dos;
pub mod fdi;

use nalgebra::{Matrix3x4, Vector3, Vector4};

use crate::dynamics::{GeneratorParams, GeneratorState};
use crate::measurement::pe_partials;

pub use dos::{apply_dos, draw_dos_mask, DosConfig, LossSemantics};
pub use fdi::{
    apply_fdi, build_fdi, draw_attack_vector, stealth_check, FdiConfig, FdiFeedback, FdiLinearization,
};

/// Measurement Jacobian at a linearization point.
///
/// Rows follow the measured channels `[δ, ω, Pe]`; columns the state order
/// `[δ, ω, Eq', Ed']`. The first two rows are canonical unit rows; the third
/// holds the analytic partials of the electrical-power channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianH {
    pub h: Matrix3x4<f64>,
    /// State at which the partials were evaluated.
    pub point: Vector4<f64>,
}

impl JacobianH {
    pub fn l1(&self) -> f64 {
        self.h[(2, 0)]
    }

    pub fn l2(&self) -> f64 {
        self.h[(2, 2)]
    }

    pub fn l3(&self) -> f64 {
        self.h[(2, 3)]
    }
}

/// Analytic measurement Jacobian at a state and terminal phasor.
pub fn jacobian_h(point: &GeneratorState, u: f64, phi: f64, params: &GeneratorParams) -> JacobianH {
    let p = pe_partials(point, u, phi, params);
    let h = Matrix3x4::new(
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        p.d_delta, 0.0, p.d_eq_p, p.d_ed_p,
    );
    JacobianH {
        h,
        point: point.as_vector(),
    }
}

/// Outcome of one windowed sample in an attack log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackOutcome {
    /// FDI vector injected (stealth check passed).
    Injected,
    /// FDI vector withheld because the stealth check failed.
    SkippedStealth,
    /// DoS packet lost.
    Lost,
    /// DoS packet delivered.
    Delivered,
}

impl AttackOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttackOutcome::Injected => "injected",
            AttackOutcome::SkippedStealth => "skipped-stealth",
            AttackOutcome::Lost => "lost",
            AttackOutcome::Delivered => "delivered",
        }
    }
}

/// Per-sample record covering exactly the samples inside the attack window.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackLogEntry {
    pub k: usize,
    pub t: f64,
    pub outcome: AttackOutcome,
    /// Injected vector (FDI only).
    pub a: Option<Vector3<f64>>,
    /// Transmission mask, current sample first (DoS only).
    pub mask: Option<Vec<bool>>,
    /// Linearized residual norm before the attack (FDI only).
    pub residual_before: Option<f64>,
    /// Linearized residual norm after the attack (FDI only).
    pub residual_after: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttackLog {
    pub entries: Vec<AttackLogEntry>,
}

impl AttackLog {
    pub fn write<W: std::io::Write>(&self, mut w: W) -> crate::error::Result<()> {
        writeln!(w, "k,t,outcome,a_delta,a_omega,a_pe,mask,residual_before,residual_after")?;
        for e in &self.entries {
            let a = e
                .a
                .map(|a| format!("{},{},{}", a[0], a[1], a[2]))
                .unwrap_or_else(|| ",,".into());
            let mask = e
                .mask
                .as_ref()
                .map(|m| m.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>())
                .unwrap_or_default();
            let rb = e.residual_before.map(|v| v.to_string()).unwrap_or_default();
            let ra = e.residual_after.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{a},{mask},{rb},{ra}", e.k, e.t, e.outcome.as_str())?;
        }
        Ok(())
    }
}
