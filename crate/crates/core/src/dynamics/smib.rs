//! Single-machine–infinite-bus network.
//!
//! The machine feeds an infinite bus of magnitude `v_inf` (phase reference 0)
//! through a lossless external reactance `x_e`. With the crate's stator sign
//! convention the network closure is linear in the transient voltages:
//!
//! `i_d = (Eq' − v_inf·cos δ)/(x_dp + x_e)`,
//! `i_q = (v_inf·sin δ + Ed')/(x_qp + x_e)`.
//!
//! A fault window temporarily swaps the bus voltage (or the line reactance)
//! and restores it afterward.

use serde::{Deserialize, Serialize};

use super::{GeneratorParams, GeneratorState, StatorSolution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmibParams {
    /// Infinite-bus voltage magnitude (pu).
    pub v_inf: f64,
    /// External (line plus transformer) reactance (pu).
    pub x_e: f64,
    /// Optional fault window.
    pub fault: Option<FaultWindow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultWindow {
    /// Fault application time (s).
    pub t_on: f64,
    /// Fault clearing time (s).
    pub t_off: f64,
    pub kind: FaultKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FaultKind {
    /// Bus voltage collapses to `factor · v_inf` during the fault.
    BusVoltageDip { factor: f64 },
    /// Line reactance steps to `x_e_fault` during the fault.
    ReactanceStep { x_e_fault: f64 },
}

impl SmibParams {
    pub fn validate(&self) -> Result<()> {
        if !self.v_inf.is_finite() || !self.x_e.is_finite() {
            return Err(Error::NonFinite {
                context: "SMIB parameters".into(),
            });
        }
        if self.x_e <= 0.0 {
            return Err(Error::Invalid("external reactance x_e must be positive".into()));
        }
        if self.v_inf < 0.0 {
            return Err(Error::Invalid("infinite-bus voltage must be >= 0".into()));
        }
        if let Some(f) = &self.fault {
            if !(f.t_on < f.t_off) {
                return Err(Error::Invalid(format!(
                    "fault window requires t_on < t_off, got [{}, {}]",
                    f.t_on, f.t_off
                )));
            }
            match f.kind {
                FaultKind::BusVoltageDip { factor } => {
                    if !(0.0..=1.0).contains(&factor) {
                        return Err(Error::Invalid("fault voltage dip factor must be in [0, 1]".into()));
                    }
                }
                FaultKind::ReactanceStep { x_e_fault } => {
                    if x_e_fault <= 0.0 {
                        return Err(Error::Invalid("faulted reactance must be positive".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Effective (v_inf, x_e) at time t, honoring the fault window
    /// `[t_on, t_off)`.
    pub fn network_at(&self, t: f64) -> (f64, f64) {
        match &self.fault {
            Some(f) if t >= f.t_on && t < f.t_off => match f.kind {
                FaultKind::BusVoltageDip { factor } => (self.v_inf * factor, self.x_e),
                FaultKind::ReactanceStep { x_e_fault } => (self.v_inf, x_e_fault),
            },
            _ => (self.v_inf, self.x_e),
        }
    }
}

/// Terminal boundary produced by the network solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkSolution {
    pub u: f64,
    pub phi: f64,
    pub stator: StatorSolution,
}

/// Machine state derivative with the network resolved in place: the stator
/// algebra is instantaneous, so the terminal phasor follows the state inside
/// every integration stage. Mechanical torque and field voltage are held.
pub fn smib_derivative(
    state: &GeneratorState,
    t_m: f64,
    e_f: f64,
    v_inf: f64,
    x_e: f64,
    params: &GeneratorParams,
) -> nalgebra::Vector4<f64> {
    let net = smib_terminal(state, v_inf, x_e, params);
    let s = &net.stator;
    nalgebra::Vector4::new(
        state.omega - 1.0,
        (t_m - s.t_e - params.d * (state.omega - 1.0)) / params.t_j,
        (e_f - state.eq_p - (params.x_d - params.x_dp) * s.i_d) / params.t_d0p,
        (-state.ed_p + (params.x_q - params.x_qp) * s.i_q) / params.t_q0p,
    )
}

/// Classical RK4 advance of the network-closed machine.
pub fn rk4_step_smib(
    state: &GeneratorState,
    t_m: f64,
    e_f: f64,
    v_inf: f64,
    x_e: f64,
    params: &GeneratorParams,
    dt: f64,
) -> crate::error::Result<GeneratorState> {
    if !(dt > 0.0) {
        return Err(crate::error::Error::Invalid(format!(
            "rk4 step requires dt > 0, got {dt}"
        )));
    }
    let x0 = state.as_vector();
    let eval = |v: &nalgebra::Vector4<f64>| {
        smib_derivative(&GeneratorState::from_vector(v), t_m, e_f, v_inf, x_e, params)
    };
    let k1 = eval(&x0);
    let k2 = eval(&(x0 + k1 * (dt / 2.0)));
    let k3 = eval(&(x0 + k2 * (dt / 2.0)));
    let k4 = eval(&(x0 + k3 * dt));
    let x1 = x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let next = GeneratorState::from_vector(&x1);
    if !next.is_finite() {
        return Err(crate::error::Error::NonFinite {
            context: "smib rk4 step result".into(),
        });
    }
    Ok(next)
}

/// Solve the SMIB network for the terminal phasor and stator quantities at a
/// given machine state.
pub fn smib_terminal(
    state: &GeneratorState,
    v_inf: f64,
    x_e: f64,
    params: &GeneratorParams,
) -> NetworkSolution {
    let (sin_d, cos_d) = state.delta.sin_cos();
    let i_d = (state.eq_p - v_inf * cos_d) / (params.x_dp + x_e);
    let i_q = (v_inf * sin_d + state.ed_p) / (params.x_qp + x_e);
    let v_d = params.x_qp * i_q - state.ed_p;
    let v_q = state.eq_p - params.x_dp * i_d;
    let u = (v_d * v_d + v_q * v_q).sqrt();
    // delta − phi = atan2(v_d, v_q)
    let phi = state.delta - v_d.atan2(v_q);
    let p_e = v_d * i_d + v_q * i_q;
    NetworkSolution {
        u,
        phi,
        stator: StatorSolution {
            i_d,
            i_q,
            v_d,
            v_q,
            p_e,
            t_e: p_e,
        },
    }
}
