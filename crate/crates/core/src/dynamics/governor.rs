//! Droop governor: speed-error gain plus servo and turbine lags, with an
//! optional lead-lag / reheater stage.
//!
//! Topology: `cmd = t_ref + r_inv·(omega_ref − omega)` clamped to
//! `[0, t_max]`, then first-order lags `t_s` and `t_c`, then a lead-lag
//! `(1 + t_3 s)/(1 + t_4 s)` and a reheater lag `t_5`. Any stage with a zero
//! time constant is bypassed. Stages advance by exact discretization of the
//! scalar lag ODE, so a settled governor stays settled to machine precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GovernorParams {
    /// Rated rotor speed (pu).
    pub omega_ref: f64,
    /// Steady-state droop gain 1/r (pu torque per pu speed).
    pub r_inv: f64,
    /// Maximum power order (pu).
    pub t_max: f64,
    /// Servo time constant (s).
    pub t_s: f64,
    /// Turbine time constant (s).
    pub t_c: f64,
    /// Lead time constant of the optional lead-lag stage (s).
    pub t_3: f64,
    /// Lag time constant of the optional lead-lag stage (s); 0 bypasses it.
    pub t_4: f64,
    /// Reheater time constant (s); 0 bypasses it.
    pub t_5: f64,
}

impl GovernorParams {
    pub fn default_governor() -> Self {
        Self {
            omega_ref: 1.0,
            r_inv: 25.0,
            t_max: 1.2,
            t_s: 0.1,
            t_c: 0.3,
            t_3: 0.0,
            t_4: 0.0,
            t_5: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.omega_ref,
            self.r_inv,
            self.t_max,
            self.t_s,
            self.t_c,
            self.t_3,
            self.t_4,
            self.t_5,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "governor parameters".into(),
            });
        }
        if self.t_s <= 0.0 || self.t_c <= 0.0 {
            return Err(Error::Invalid("governor lags t_s, t_c must be positive".into()));
        }
        if self.t_max <= 0.0 {
            return Err(Error::Invalid("governor t_max must be positive".into()));
        }
        if self.t_3 < 0.0 || self.t_4 < 0.0 || self.t_5 < 0.0 {
            return Err(Error::Invalid("governor t_3, t_4, t_5 must be >= 0".into()));
        }
        Ok(())
    }
}

/// Internal governor states plus the scheduled torque reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GovernorState {
    pub t_ref: f64,
    pub servo: f64,
    pub turbine: f64,
    pub lead_lag: f64,
    pub reheater: f64,
}

impl GovernorState {
    /// Governor settled at a scheduled torque, as after steady-state init.
    pub fn settled(t_ref: f64) -> Self {
        Self {
            t_ref,
            servo: t_ref,
            turbine: t_ref,
            lead_lag: t_ref,
            reheater: t_ref,
        }
    }
}

/// Exact one-step update of a first-order lag with the input held constant.
fn lag_step(state: f64, input: f64, tau: f64, dt: f64) -> f64 {
    if tau == 0.0 {
        input
    } else {
        input + (state - input) * (-dt / tau).exp()
    }
}

/// Advance the governor one step and return the mechanical torque output.
pub fn governor_step(
    omega: f64,
    state: &GovernorState,
    params: &GovernorParams,
    dt: f64,
) -> (f64, GovernorState) {
    debug_assert!(dt > 0.0);
    let cmd = (state.t_ref + params.r_inv * (params.omega_ref - omega)).clamp(0.0, params.t_max);
    let servo = lag_step(state.servo, cmd, params.t_s, dt);
    let turbine = lag_step(state.turbine, servo, params.t_c, dt);
    let (lead_lag, ll_out) = if params.t_4 == 0.0 {
        (turbine, turbine)
    } else {
        let x = lag_step(state.lead_lag, turbine, params.t_4, dt);
        (x, x + params.t_3 / params.t_4 * (turbine - x))
    };
    let reheater = lag_step(state.reheater, ll_out, params.t_5, dt);
    let next = GovernorState {
        t_ref: state.t_ref,
        servo,
        turbine,
        lead_lag,
        reheater,
    };
    (reheater, next)
}
