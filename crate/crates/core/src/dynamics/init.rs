//! Steady-state initialization from a terminal operating target.
//!
//! Produces a machine state, inputs, and settled controller states at which
//! every state derivative vanishes. The rotor angle comes from a q-axis
//! locator consistent with this crate's stator convention: the q-axis lies
//! along `V̄ + j·(2·x_qp − x_q)·Ī`, which embeds the steady-state relation
//! `v_d = (2·x_qp − x_q)·i_q` implied by the Ed' equation.

use super::exciter::{ExciterParams, ExciterState};
use super::governor::{GovernorParams, GovernorState};
use super::smib::SmibParams;
use super::{state_derivative, stator_solve, ControlInput, GeneratorParams, GeneratorState, StatorSolution};
use crate::error::{Error, Result};

/// Operating target for initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitTarget {
    /// Explicit terminal boundary: active power, reactive power, voltage
    /// magnitude and phase. Used with trace-driven runs.
    TerminalPqu { p0: f64, q0: f64, u0: f64, phi0: f64 },
    /// Terminal power and voltage against a SMIB network; reactive power and
    /// terminal phase follow from the power flow over `x_e`.
    SmibPu { p0: f64, u0: f64 },
}

/// Settled operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub state: GeneratorState,
    pub input: ControlInput,
    pub stator: StatorSolution,
    pub governor: GovernorState,
    pub exciter: ExciterState,
    /// Reactive power at the terminal (derived for SMIB targets).
    pub q0: f64,
}

/// Solve for the equilibrium consistent with the target, machine parameters,
/// and controller settling.
pub fn steady_state_init(
    target: &InitTarget,
    gen: &GeneratorParams,
    gov: &GovernorParams,
    exc: &ExciterParams,
    smib: Option<&SmibParams>,
) -> Result<OperatingPoint> {
    gen.validate()?;
    gov.validate()?;
    exc.validate()?;

    let (p0, q0, u0, phi0) = match *target {
        InitTarget::TerminalPqu { p0, q0, u0, phi0 } => (p0, q0, u0, phi0),
        InitTarget::SmibPu { p0, u0 } => {
            let net = smib.ok_or_else(|| {
                Error::Invalid("SMIB initialization target requires network parameters".into())
            })?;
            net.validate()?;
            let sin_phi = p0 * net.x_e / (u0 * net.v_inf);
            if !(sin_phi.abs() <= 1.0) {
                return Err(Error::Infeasible(format!(
                    "requested power {p0} exceeds the transfer limit of x_e = {} at u0 = {u0}",
                    net.x_e
                )));
            }
            let phi0 = sin_phi.asin();
            // Terminal current from the line flow, then Q = Im(V·conj(I)).
            let (vx, vy) = (u0 * phi0.cos(), u0 * phi0.sin());
            let (ix, iy) = (vy / net.x_e, -(vx - net.v_inf) / net.x_e);
            let q0 = vy * ix - vx * iy;
            (p0, q0, u0, phi0)
        }
    };

    if !(u0 > 0.0) {
        return Err(Error::Infeasible(format!("terminal voltage u0 = {u0} must be positive")));
    }
    if [p0, q0, u0, phi0].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "initialization target".into(),
        });
    }

    // Terminal phasor and conjugate-power current in network coordinates.
    let (vx, vy) = (u0 * phi0.cos(), u0 * phi0.sin());
    let (ix, iy) = ((p0 * vx + q0 * vy) / (u0 * u0), (p0 * vy - q0 * vx) / (u0 * u0));
    let i_mag = (ix * ix + iy * iy).sqrt();
    let beta = iy.atan2(ix);

    // q-axis locator.
    let kappa = 2.0 * gen.x_qp - gen.x_q;
    let ex = vx - kappa * iy;
    let ey = vy + kappa * ix;
    if ex == 0.0 && ey == 0.0 {
        return Err(Error::Infeasible("q-axis locator degenerate at this target".into()));
    }
    let delta0 = ey.atan2(ex);

    let theta = delta0 - phi0;
    let v_d = u0 * theta.sin();
    let v_q = u0 * theta.cos();
    let i_d = i_mag * (delta0 - beta).sin();
    let i_q = i_mag * (delta0 - beta).cos();

    let eq_p0 = v_q + gen.x_dp * i_d;
    let ed_p0 = gen.x_qp * i_q - v_d;
    if eq_p0 <= 0.0 {
        return Err(Error::Infeasible(format!(
            "required q-axis transient voltage {eq_p0:.4} is not positive at this target"
        )));
    }

    let state = GeneratorState {
        delta: delta0,
        omega: 1.0,
        eq_p: eq_p0,
        ed_p: ed_p0,
    };
    let stator = stator_solve(&state, u0, phi0, gen)?;
    let t_m0 = stator.t_e;
    let e_f0 = eq_p0 + (gen.x_d - gen.x_dp) * i_d;
    if t_m0 > gov.t_max {
        return Err(Error::Infeasible(format!(
            "scheduled torque {t_m0:.4} exceeds governor t_max {}",
            gov.t_max
        )));
    }
    if e_f0 < exc.e_f_min || e_f0 > exc.e_f_max {
        return Err(Error::Infeasible(format!(
            "required field voltage {e_f0:.4} violates exciter limits [{}, {}]",
            exc.e_f_min, exc.e_f_max
        )));
    }

    let input = ControlInput {
        t_m: t_m0,
        e_f: e_f0,
        u: u0,
        phi: phi0,
    };
    let derivative = state_derivative(&state, &input, gen)?;
    if derivative.amax() > 1e-8 {
        return Err(Error::Infeasible(format!(
            "initialization residual {:.3e} exceeds 1e-8",
            derivative.amax()
        )));
    }

    Ok(OperatingPoint {
        state,
        input,
        stator,
        governor: GovernorState::settled(t_m0),
        exciter: ExciterState::settled(e_f0, u0, exc),
        q0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks() -> (GeneratorParams, GovernorParams, ExciterParams) {
        (
            GeneratorParams::default_machine(),
            GovernorParams::default_governor(),
            ExciterParams::default_exciter(),
        )
    }

    #[test]
    fn no_load_point_is_trivial() {
        let (gen, gov, exc) = blocks();
        let op = steady_state_init(
            &InitTarget::TerminalPqu {
                p0: 0.0,
                q0: 0.0,
                u0: 1.0,
                phi0: 0.0,
            },
            &gen,
            &gov,
            &exc,
            None,
        )
        .unwrap();
        assert!(op.state.ed_p.abs() < 1e-12);
        assert!((op.state.omega - 1.0).abs() < 1e-15);
        assert!(op.input.t_m.abs() < 1e-12);
        assert!((op.state.eq_p - 1.0).abs() < 1e-12);
        assert!((op.state.delta - 0.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_residual_below_threshold_for_feasible_targets() {
        let (gen, gov, exc) = blocks();
        for &(p0, q0) in &[(0.3, 0.1), (0.8, 0.3), (0.5, -0.1), (1.0, 0.4)] {
            let op = steady_state_init(
                &InitTarget::TerminalPqu {
                    p0,
                    q0,
                    u0: 1.0,
                    phi0: 0.1,
                },
                &gen,
                &gov,
                &exc,
                None,
            )
            .unwrap();
            let d = state_derivative(&op.state, &op.input, &gen).unwrap();
            assert!(d.amax() <= 1e-8, "residual {} at ({p0}, {q0})", d.amax());
            assert!((op.stator.p_e - p0).abs() < 1e-10);
        }
    }

    #[test]
    fn smib_target_matches_line_flow() {
        let (gen, gov, exc) = blocks();
        let smib = SmibParams {
            v_inf: 1.0,
            x_e: 0.3,
            fault: None,
        };
        let op = steady_state_init(&InitTarget::SmibPu { p0: 0.8, u0: 1.0 }, &gen, &gov, &exc, Some(&smib))
            .unwrap();
        assert!((op.stator.p_e - 0.8).abs() < 1e-10);
        // The SMIB network solve must reproduce the same terminal boundary.
        let net = super::super::smib::smib_terminal(&op.state, smib.v_inf, smib.x_e, &gen);
        assert!((net.u - op.input.u).abs() < 1e-10);
        assert!((net.phi - op.input.phi).abs() < 1e-10);
    }

    #[test]
    fn infeasible_transfer_reports_error() {
        let (gen, gov, exc) = blocks();
        let smib = SmibParams {
            v_inf: 1.0,
            x_e: 0.3,
            fault: None,
        };
        let err = steady_state_init(&InitTarget::SmibPu { p0: 5.0, u0: 1.0 }, &gen, &gov, &exc, Some(&smib))
            .unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)), "got {err:?}");
    }

    #[test]
    fn deep_underexcited_target_reports_infeasible_eq() {
        let (gen, gov, exc) = blocks();
        let err = steady_state_init(
            &InitTarget::TerminalPqu {
                p0: 0.0,
                q0: -3.0,
                u0: 0.4,
                phi0: 0.0,
            },
            &gen,
            &gov,
            &exc,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)), "got {err:?}");
    }
}
