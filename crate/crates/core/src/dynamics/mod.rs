//! Ground-truth generator dynamics.
//!
//! Fourth-order two-axis machine model with state `[delta, omega, Eq', Ed']`,
//! closed by droop-governed mechanical torque and a static exciter. The
//! terminal boundary comes either from a single-machine–infinite-bus network
//! solve ([`smib`]) or from an ingested terminal-voltage trace ([`trace`]).
//!
//! Sign convention for the stator closure:
//! `v_q = Eq' − X_d'·i_d` and `v_d = X_q'·i_q − Ed'`, i.e.
//! `i_d = (Eq' − v_q)/X_d'` and `i_q = (v_d + Ed')/X_q'`. This is the unique
//! choice under which `v_d·i_d + v_q·i_q` equals the closed-form electrical
//! power used by the measurement model, including the sign of its `Ed'` term.

pub mod exciter;
pub mod governor;
pub mod init;
pub mod simulate;
pub mod smib;
pub mod trace;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use exciter::{exciter_step, ExciterParams, ExciterState};
pub use governor::{governor_step, GovernorParams, GovernorState};
pub use init::{steady_state_init, InitTarget, OperatingPoint};
pub use simulate::{simulate_truth, simulate_truth_from_trace, TruthScenario, TruthTrajectory};
pub use smib::{FaultKind, FaultWindow, SmibParams};
pub use trace::{ingest_trace, read_trace, write_trace, TracePoint};

/// Electrical parameters of the machine, per unit on its own base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Inertia time constant (s).
    pub t_j: f64,
    /// Damping coefficient (pu torque per pu speed deviation).
    pub d: f64,
    /// d-axis transient open-circuit time constant (s).
    pub t_d0p: f64,
    /// q-axis transient open-circuit time constant (s).
    pub t_q0p: f64,
    /// d-axis synchronous reactance (pu).
    pub x_d: f64,
    /// d-axis transient reactance (pu).
    pub x_dp: f64,
    /// q-axis synchronous reactance (pu).
    pub x_q: f64,
    /// q-axis transient reactance (pu).
    pub x_qp: f64,
}

impl GeneratorParams {
    /// Canonical desk-scale machine. Chosen so the q-axis transient mode is
    /// stable under this crate's stator sign convention (requires
    /// `x_q < 2·x_qp`) and the swing mode completes a couple of cycles
    /// within a 20 s run.
    pub fn default_machine() -> Self {
        Self {
            t_j: 4.0,
            d: 2.0,
            t_d0p: 6.0,
            t_q0p: 0.8,
            x_d: 1.6,
            x_dp: 0.3,
            x_q: 0.7,
            x_qp: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.t_j, self.d, self.t_d0p, self.t_q0p, self.x_d, self.x_dp, self.x_q, self.x_qp,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "generator parameters".into(),
            });
        }
        if self.t_j <= 0.0 || self.t_d0p <= 0.0 || self.t_q0p <= 0.0 {
            return Err(Error::Invalid(
                "generator time constants must be positive".into(),
            ));
        }
        if !(self.x_d > self.x_dp && self.x_dp > 0.0) {
            return Err(Error::Invalid("require x_d > x_dp > 0".into()));
        }
        if !(self.x_q > self.x_qp && self.x_qp > 0.0) {
            return Err(Error::Invalid("require x_q > x_qp > 0".into()));
        }
        Ok(())
    }
}

/// Dynamic state of the machine: rotor angle (rad), rotor speed (pu, 1.0 is
/// synchronous), q- and d-axis transient voltages (pu).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorState {
    pub delta: f64,
    pub omega: f64,
    pub eq_p: f64,
    pub ed_p: f64,
}

impl GeneratorState {
    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.delta, self.omega, self.eq_p, self.ed_p)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self {
            delta: v[0],
            omega: v[1],
            eq_p: v[2],
            ed_p: v[3],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.delta.is_finite() && self.omega.is_finite() && self.eq_p.is_finite() && self.ed_p.is_finite()
    }
}

/// Exogenous inputs held constant over one integration step: mechanical
/// torque, field voltage, and the terminal voltage phasor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub t_m: f64,
    pub e_f: f64,
    pub u: f64,
    pub phi: f64,
}

impl ControlInput {
    pub fn is_finite(&self) -> bool {
        self.t_m.is_finite() && self.e_f.is_finite() && self.u.is_finite() && self.phi.is_finite()
    }
}

/// Algebraic stator solution at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatorSolution {
    pub i_d: f64,
    pub i_q: f64,
    pub v_d: f64,
    pub v_q: f64,
    pub p_e: f64,
    pub t_e: f64,
}

/// Solve the stator algebra at a given state and terminal phasor.
///
/// Electromagnetic torque is identified with electrical power (per-unit
/// electromechanical convention near synchronous speed).
pub fn stator_solve(
    state: &GeneratorState,
    u: f64,
    phi: f64,
    params: &GeneratorParams,
) -> Result<StatorSolution> {
    if !state.is_finite() || !u.is_finite() || !phi.is_finite() {
        return Err(Error::NonFinite {
            context: "stator_solve input".into(),
        });
    }
    if u < 0.0 {
        return Err(Error::Invalid("terminal voltage magnitude must be >= 0".into()));
    }
    let theta = state.delta - phi;
    let v_d = u * theta.sin();
    let v_q = u * theta.cos();
    let i_d = (state.eq_p - v_q) / params.x_dp;
    let i_q = (v_d + state.ed_p) / params.x_qp;
    let p_e = v_d * i_d + v_q * i_q;
    Ok(StatorSolution {
        i_d,
        i_q,
        v_d,
        v_q,
        p_e,
        t_e: p_e,
    })
}

/// Time derivative of the four machine states.
pub fn state_derivative(
    state: &GeneratorState,
    input: &ControlInput,
    params: &GeneratorParams,
) -> Result<Vector4<f64>> {
    if !input.is_finite() {
        return Err(Error::NonFinite {
            context: "state_derivative input".into(),
        });
    }
    let stator = stator_solve(state, input.u, input.phi, params)?;
    let d_delta = state.omega - 1.0;
    let d_omega = (input.t_m - stator.t_e - params.d * (state.omega - 1.0)) / params.t_j;
    let d_eq_p = (input.e_f - state.eq_p - (params.x_d - params.x_dp) * stator.i_d) / params.t_d0p;
    let d_ed_p = (-state.ed_p + (params.x_q - params.x_qp) * stator.i_q) / params.t_q0p;
    Ok(Vector4::new(d_delta, d_omega, d_eq_p, d_ed_p))
}

/// Classical four-stage Runge–Kutta advance with inputs held constant.
pub fn rk4_step(
    state: &GeneratorState,
    input: &ControlInput,
    params: &GeneratorParams,
    dt: f64,
) -> Result<GeneratorState> {
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("rk4 step requires dt > 0, got {dt}")));
    }
    let x0 = state.as_vector();
    let k1 = state_derivative(state, input, params)?;
    let k2 = state_derivative(&GeneratorState::from_vector(&(x0 + k1 * (dt / 2.0))), input, params)?;
    let k3 = state_derivative(&GeneratorState::from_vector(&(x0 + k2 * (dt / 2.0))), input, params)?;
    let k4 = state_derivative(&GeneratorState::from_vector(&(x0 + k3 * dt)), input, params)?;
    let x1 = x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let next = GeneratorState::from_vector(&x1);
    if !next.is_finite() {
        return Err(Error::NonFinite {
            context: "rk4 step result".into(),
        });
    }
    Ok(next)
}
