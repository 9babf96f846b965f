//! Closed-loop truth simulation.

use serde::{Deserialize, Serialize};

use super::exciter::{exciter_step, ExciterParams};
use super::governor::{governor_step, GovernorParams};
use super::init::{steady_state_init, InitTarget, OperatingPoint};
use super::smib::{rk4_step_smib, smib_terminal, SmibParams};
use super::trace::TracePoint;
use super::{rk4_step, stator_solve, ControlInput, GeneratorParams, GeneratorState, StatorSolution};
use crate::error::{Error, Result};

/// Complete scenario for a SMIB truth run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthScenario {
    pub generator: GeneratorParams,
    pub governor: GovernorParams,
    pub exciter: ExciterParams,
    pub smib: SmibParams,
    /// Pre-fault terminal active power (pu).
    pub p0: f64,
    /// Pre-fault terminal voltage magnitude (pu).
    pub u0: f64,
    pub duration_s: f64,
    pub dt_s: f64,
}

/// Uniformly sampled ground-truth record.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTrajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<GeneratorState>,
    pub inputs: Vec<ControlInput>,
    pub stator: Vec<StatorSolution>,
}

impl TruthTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn step_count(duration_s: f64, dt_s: f64) -> Result<usize> {
    if !(dt_s > 0.0) || !(duration_s > 0.0) {
        return Err(Error::Invalid(format!(
            "duration {duration_s} s and dt {dt_s} s must be positive"
        )));
    }
    let n = (duration_s / dt_s).round();
    if ((n * dt_s) - duration_s).abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "duration {duration_s} s is not an integer multiple of dt {dt_s} s"
        )));
    }
    Ok(n as usize)
}

/// Integrate the closed-loop machine against the SMIB network.
///
/// Governor and exciter advance once per step with their inputs held, and
/// their outputs are held over the following machine step.
pub fn simulate_truth(sc: &TruthScenario) -> Result<TruthTrajectory> {
    sc.generator.validate()?;
    sc.governor.validate()?;
    sc.exciter.validate()?;
    sc.smib.validate()?;
    let n_steps = step_count(sc.duration_s, sc.dt_s)?;

    let op = steady_state_init(
        &InitTarget::SmibPu { p0: sc.p0, u0: sc.u0 },
        &sc.generator,
        &sc.governor,
        &sc.exciter,
        Some(&sc.smib),
    )?;

    let mut traj = TruthTrajectory {
        dt: sc.dt_s,
        times: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity(n_steps + 1),
        inputs: Vec::with_capacity(n_steps + 1),
        stator: Vec::with_capacity(n_steps + 1),
    };

    let mut state = op.state;
    let mut gov = op.governor;
    let mut exc = op.exciter;
    let mut t_m_hold = op.input.t_m;
    let mut e_f_hold = op.input.e_f;

    for k in 0..=n_steps {
        let t = k as f64 * sc.dt_s;
        let (v_inf, x_e) = sc.smib.network_at(t);
        let net = smib_terminal(&state, v_inf, x_e, &sc.generator);
        let input = ControlInput {
            t_m: t_m_hold,
            e_f: e_f_hold,
            u: net.u,
            phi: net.phi,
        };
        traj.times.push(t);
        traj.states.push(state);
        traj.inputs.push(input);
        traj.stator.push(net.stator);

        if k == n_steps {
            break;
        }
        // The network parameters active over [t, t + dt) drive this step.
        state = rk4_step_smib(&state, t_m_hold, e_f_hold, v_inf, x_e, &sc.generator, sc.dt_s)
            .map_err(|e| Error::Divergence {
                t,
                context: format!("truth integration: {e}"),
            })?;
        let (t_m, gov_next) = governor_step(traj.states[k].omega, &gov, &sc.governor, sc.dt_s);
        let (e_f, exc_next) = exciter_step(net.u, &exc, &sc.exciter, sc.dt_s);
        t_m_hold = t_m;
        e_f_hold = e_f;
        gov = gov_next;
        exc = exc_next;
    }
    Ok(traj)
}

/// Integrate the closed-loop machine against an externally supplied terminal
/// voltage trace. The trace fixes `(u, phi)` per step; governor and exciter
/// behave as in [`simulate_truth`].
pub fn simulate_truth_from_trace(
    trace: &[TracePoint],
    op: &OperatingPoint,
    gen: &GeneratorParams,
    gov_params: &GovernorParams,
    exc_params: &ExciterParams,
) -> Result<TruthTrajectory> {
    if trace.len() < 2 {
        return Err(Error::Invalid("trace must contain at least two points".into()));
    }
    let dt = trace[1].t - trace[0].t;

    let mut traj = TruthTrajectory {
        dt,
        times: Vec::with_capacity(trace.len()),
        states: Vec::with_capacity(trace.len()),
        inputs: Vec::with_capacity(trace.len()),
        stator: Vec::with_capacity(trace.len()),
    };

    let mut state = op.state;
    let mut gov = op.governor;
    let mut exc = op.exciter;
    let mut t_m_hold = op.input.t_m;
    let mut e_f_hold = op.input.e_f;

    for (k, point) in trace.iter().enumerate() {
        let input = ControlInput {
            t_m: t_m_hold,
            e_f: e_f_hold,
            u: point.u,
            phi: point.phi,
        };
        traj.times.push(point.t);
        traj.states.push(state);
        traj.inputs.push(input);
        traj.stator.push(stator_solve(&state, point.u, point.phi, gen)?);

        if k + 1 == trace.len() {
            break;
        }
        state = rk4_step(&state, &input, gen, dt).map_err(|e| Error::Divergence {
            t: point.t,
            context: format!("trace-driven integration: {e}"),
        })?;
        let (t_m, gov_next) = governor_step(traj.states[k].omega, &gov, gov_params, dt);
        let (e_f, exc_next) = exciter_step(point.u, &exc, exc_params, dt);
        t_m_hold = t_m;
        e_f_hold = e_f;
        gov = gov_next;
        exc = exc_next;
    }
    Ok(traj)
}
