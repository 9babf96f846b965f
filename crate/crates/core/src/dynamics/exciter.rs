//! Static exciter: first-order voltage regulator with feedback gain and
//! output limits.
//!
//! Regulator state `x` obeys `t_a·dx/dt = k_a·(v_ref − u + v_b − k_g·x) − x`,
//! advanced by exact discretization with the terminal voltage held over the
//! step. Field voltage is `x` clamped to `[e_f_min, e_f_max]`. The effective
//! regulator setpoint lives in [`ExciterState`] because steady-state
//! initialization solves it from the required field voltage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExciterParams {
    /// Voltage regulator gain.
    pub k_a: f64,
    /// Voltage regulator time constant (s).
    pub t_a: f64,
    /// Feedback constant.
    pub k_g: f64,
    /// Potential circuit voltage output (pu), an additive input bias.
    pub v_b: f64,
    /// Regulator setpoint (pu); solved during init when absent.
    pub v_ref: Option<f64>,
    /// Field voltage floor (pu).
    pub e_f_min: f64,
    /// Field voltage ceiling (pu).
    pub e_f_max: f64,
}

impl ExciterParams {
    pub fn default_exciter() -> Self {
        Self {
            k_a: 50.0,
            t_a: 0.1,
            k_g: 0.0,
            v_b: 0.0,
            v_ref: None,
            e_f_min: 0.0,
            e_f_max: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.k_a, self.t_a, self.k_g, self.v_b, self.e_f_min, self.e_f_max];
        if all.iter().any(|v| !v.is_finite()) || self.v_ref.is_some_and(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "exciter parameters".into(),
            });
        }
        if self.k_a <= 0.0 || self.t_a <= 0.0 {
            return Err(Error::Invalid("exciter requires k_a > 0 and t_a > 0".into()));
        }
        if self.e_f_min >= self.e_f_max {
            return Err(Error::Invalid("exciter limits require e_f_min < e_f_max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExciterState {
    /// Regulator output state (pre-limit field voltage).
    pub regulator: f64,
    /// Effective setpoint in use.
    pub v_ref: f64,
}

impl ExciterState {
    /// Exciter settled so that the regulator holds `e_f0` at terminal voltage
    /// `u0`. Solves the setpoint unless the parameters pin one.
    pub fn settled(e_f0: f64, u0: f64, params: &ExciterParams) -> Self {
        let v_ref = params
            .v_ref
            .unwrap_or_else(|| e_f0 * (1.0 + params.k_a * params.k_g) / params.k_a + u0 - params.v_b);
        Self {
            regulator: e_f0,
            v_ref,
        }
    }
}

/// Advance the exciter one step and return the field voltage output.
pub fn exciter_step(
    u: f64,
    state: &ExciterState,
    params: &ExciterParams,
    dt: f64,
) -> (f64, ExciterState) {
    debug_assert!(dt > 0.0);
    // dx/dt = (b - a·x)/t_a with the terminal voltage held.
    let a = 1.0 + params.k_a * params.k_g;
    let b = params.k_a * (state.v_ref - u + params.v_b);
    let target = b / a;
    let regulator = target + (state.regulator - target) * (-a * dt / params.t_a).exp();
    let e_f = regulator.clamp(params.e_f_min, params.e_f_max);
    (
        e_f,
        ExciterState {
            regulator,
            v_ref: state.v_ref,
        },
    )
}
