//! End-to-end pipeline: truth → measurements → attack → filters → indices.
//!
//! Both filters consume the identical attacked stream, share the same
//! assumed noise model, and start from the same perturbed initial estimate.
//! The FDI channel gets its per-sample forecasts from a replica filter that
//! tracks the stream exactly as the estimators will see it.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::config::{AttackConfig, ScenarioConfig};
use crate::attacks::{apply_dos, apply_fdi, jacobian_h, AttackLog, FdiFeedback, JacobianH};
use crate::dynamics::{
    exciter_step, governor_step, steady_state_init, ExciterParams, ExciterState, GeneratorParams,
    GeneratorState, GovernorParams, GovernorState, InitTarget, OperatingPoint, TruthTrajectory,
};
use crate::error::{Error, Result};
use crate::estimators::{
    calibrate_dj, forecast, identify_attack, measurement_update, rckf_update, IdentificationState,
    SqrtRepair,
};
use crate::evaluation::{
    tau1, tau2, tau3, timing_profile, IndexReport, StepTiming, TimingReport, VariableIndices,
};
use crate::measurement::{noise_covariance, sample_stream, MeasurementSample, NoiseModel};
use crate::seed::derive_seed;
use crate::TimeWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Ckf,
    Rckf,
}

impl FilterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterKind::Ckf => "ckf",
            FilterKind::Rckf => "rckf",
        }
    }
}

/// Which filters a pipeline run drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterSelection {
    Ckf,
    Rckf,
    #[default]
    Both,
}

impl FilterSelection {
    pub fn kinds(&self) -> Vec<FilterKind> {
        match self {
            FilterSelection::Ckf => vec![FilterKind::Ckf],
            FilterSelection::Rckf => vec![FilterKind::Rckf],
            FilterSelection::Both => vec![FilterKind::Ckf, FilterKind::Rckf],
        }
    }
}

impl std::str::FromStr for FilterSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ckf" => Ok(FilterSelection::Ckf),
            "rckf" => Ok(FilterSelection::Rckf),
            "both" => Ok(FilterSelection::Both),
            other => Err(Error::Invalid(format!("unknown filter selection '{other}'"))),
        }
    }
}

/// One exported estimator sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub k: usize,
    pub t: f64,
    pub x_pred: Vector4<f64>,
    pub x_post: Vector4<f64>,
    pub p_diag: Vector4<f64>,
    pub innovation: Vector3<f64>,
    /// Diagonal of the innovation covariance actually used in the gain.
    pub innovation_cov_diag: Vector3<f64>,
    pub r_used_diag: Vector3<f64>,
    pub huber_triggered: bool,
    pub gap: f64,
    pub flag: Option<bool>,
}

/// Numerical health accumulated over a filter run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterHealth {
    /// Worst covariance asymmetry observed before symmetrization.
    pub max_asymmetry: f64,
    /// Diagonal-jitter repairs with the step index they occurred at.
    pub repairs: Vec<(usize, SqrtRepair)>,
}

impl FilterHealth {
    fn absorb(&mut self, step: usize, asymmetry: f64, repair: Option<SqrtRepair>) {
        self.max_asymmetry = self.max_asymmetry.max(asymmetry);
        if let Some(r) = repair {
            self.repairs.push((step, r));
        }
    }

    /// Smallest pre-repair eigenvalue seen, if any repair happened.
    pub fn worst_repair_min_eig(&self) -> Option<f64> {
        self.repairs
            .iter()
            .map(|(_, r)| r.min_eig)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }
}

/// Completed filter pass over a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRunResult {
    pub kind: FilterKind,
    /// Initial estimate the pass started from.
    pub x0: Vector4<f64>,
    pub rows: Vec<TrajectoryRow>,
    pub timings: Vec<StepTiming>,
    pub health: FilterHealth,
    pub huber_triggers: usize,
}

impl FilterRunResult {
    pub fn gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gap).collect()
    }

    /// Apply an identification threshold to every row past the startup
    /// warmup; earlier rows stay unevaluated.
    pub fn apply_identification(&mut self, d_j: f64, warmup_samples: usize) -> Result<()> {
        let id = IdentificationState::calibrated(d_j);
        for row in &mut self.rows {
            row.flag = if row.k > warmup_samples {
                Some(identify_attack(&row.x_post, &row.x_pred, &id)?)
            } else {
                None
            };
        }
        Ok(())
    }

    pub fn flags_in_window(&self, window: &TimeWindow) -> usize {
        self.rows
            .iter()
            .filter(|r| window.contains(r.t) && r.flag == Some(true))
            .count()
    }
}

/// Sequential filter driver: forecast with governor/exciter replicas, then
/// the plain or robust cubature update.
pub struct FilterRun {
    kind: FilterKind,
    gen: GeneratorParams,
    gov_params: GovernorParams,
    exc_params: ExciterParams,
    noise: NoiseModel,
    huber_c: f64,
    dt: f64,
    x0: Vector4<f64>,
    x_hat: Vector4<f64>,
    p: Matrix4<f64>,
    q: Matrix4<f64>,
    gov: GovernorState,
    exc: ExciterState,
    t_m_hold: f64,
    e_f_hold: f64,
    prev_u: f64,
    prev_phi: f64,
    k: usize,
    rows: Vec<TrajectoryRow>,
    timings: Vec<StepTiming>,
    health: FilterHealth,
    huber_triggers: usize,
}

/// Forecast half of one filter step.
pub struct StepForecast {
    pub x_pred: Vector4<f64>,
    pub p_pred: Matrix4<f64>,
    pub r: Matrix3<f64>,
    forecast_elapsed: std::time::Duration,
}

impl FilterRun {
    /// Start a filter at the first stream sample. The initial estimate is the
    /// caller's (already perturbed) guess; controller replicas start settled
    /// at the operating point.
    pub fn new(
        kind: FilterKind,
        config: &ScenarioConfig,
        op: &OperatingPoint,
        x0: Vector4<f64>,
        first_sample: &MeasurementSample,
    ) -> Self {
        let filter_dt = 1.0 / config.sim.sample_rate_hz;
        Self {
            kind,
            gen: config.generator(),
            gov_params: config.governor(),
            exc_params: config.exciter(),
            noise: config.noise_model(),
            huber_c: config.filter.huber_c,
            dt: filter_dt,
            x0,
            x_hat: x0,
            p: Matrix4::from_diagonal(&Vector4::from_row_slice(&config.filter.p0_diag)),
            q: Matrix4::from_diagonal(&Vector4::from_row_slice(&config.filter.q_diag)),
            gov: op.governor,
            exc: op.exciter,
            t_m_hold: op.input.t_m,
            e_f_hold: op.input.e_f,
            prev_u: first_sample.u_meas,
            prev_phi: first_sample.phi_meas,
            k: 0,
            rows: Vec::new(),
            timings: Vec::new(),
            health: FilterHealth::default(),
            huber_triggers: 0,
        }
    }

    pub fn state(&self) -> (Vector4<f64>, Matrix4<f64>) {
        (self.x_hat, self.p)
    }

    /// Forecast to the sample's time and build the assumed measurement
    /// covariance at the forecast point.
    pub fn begin_step(&mut self, sample: &MeasurementSample) -> Result<StepForecast> {
        let started = Instant::now();
        let input = crate::dynamics::ControlInput {
            t_m: self.t_m_hold,
            e_f: self.e_f_hold,
            u: self.prev_u,
            phi: self.prev_phi,
        };
        let fs = crate::estimators::FilterState {
            x_hat: self.x_hat,
            p: self.p,
            q: self.q,
            k: self.k,
        };
        let fc = forecast(&fs, &input, &self.gen, self.dt)?;
        self.health.absorb(self.k, fc.asymmetry, fc.repair);
        let r = noise_covariance(
            &GeneratorState::from_vector(&fc.x_pred),
            sample.u_meas,
            sample.phi_meas,
            &self.gen,
            &self.noise,
        );
        Ok(StepForecast {
            x_pred: fc.x_pred,
            p_pred: fc.p_pred,
            r,
            forecast_elapsed: started.elapsed(),
        })
    }

    /// Complete the step with the measurement the estimator actually sees.
    pub fn finish_step(
        &mut self,
        fc: &StepForecast,
        z: &Vector3<f64>,
        sample: &MeasurementSample,
    ) -> Result<()> {
        let started = Instant::now();
        let res = match self.kind {
            FilterKind::Ckf => measurement_update(
                &fc.x_pred,
                &fc.p_pred,
                z,
                &fc.r,
                sample.u_meas,
                sample.phi_meas,
                &self.gen,
            )?,
            FilterKind::Rckf => rckf_update(
                &fc.x_pred,
                &fc.p_pred,
                z,
                &fc.r,
                self.huber_c,
                sample.u_meas,
                sample.phi_meas,
                &self.gen,
            )?,
        };
        let update_elapsed = started.elapsed();
        self.health.absorb(self.k + 1, res.asymmetry, res.repair);
        self.huber_triggers += res.huber_triggered as usize;

        self.x_hat = res.x_post;
        self.p = res.p_post;
        self.k += 1;

        // Controller replicas: governor on the estimated speed, exciter on
        // the measured terminal voltage; outputs held over the next step.
        let (t_m, gov) = governor_step(res.x_post[1], &self.gov, &self.gov_params, self.dt);
        let (e_f, exc) = exciter_step(sample.u_meas, &self.exc, &self.exc_params, self.dt);
        self.t_m_hold = t_m;
        self.e_f_hold = e_f;
        self.gov = gov;
        self.exc = exc;
        self.prev_u = sample.u_meas;
        self.prev_phi = sample.phi_meas;

        self.rows.push(TrajectoryRow {
            k: self.k,
            t: sample.t,
            x_pred: fc.x_pred,
            x_post: res.x_post,
            p_diag: res.p_post.diagonal(),
            innovation: res.innovation,
            innovation_cov_diag: res.p_zz.diagonal(),
            r_used_diag: res.r_used.diagonal(),
            huber_triggered: res.huber_triggered,
            gap: (res.x_post - fc.x_pred).norm(),
            flag: None,
        });
        self.timings.push(StepTiming {
            forecast: fc.forecast_elapsed,
            update: update_elapsed,
        });
        Ok(())
    }

    /// Drive one full step from a stream sample.
    pub fn step(&mut self, sample: &MeasurementSample) -> Result<()> {
        let fc = self.begin_step(sample)?;
        self.finish_step(&fc, &sample.z(), sample)
    }

    pub fn into_result(self) -> FilterRunResult {
        FilterRunResult {
            kind: self.kind,
            x0: self.x0,
            rows: self.rows,
            timings: self.timings,
            health: self.health,
            huber_triggers: self.huber_triggers,
        }
    }
}

/// Run one filter over a full stream. The first sample initializes; every
/// later sample is one forecast/update step.
pub fn run_filter(
    kind: FilterKind,
    config: &ScenarioConfig,
    op: &OperatingPoint,
    x0: Vector4<f64>,
    stream: &[MeasurementSample],
) -> Result<FilterRunResult> {
    if stream.len() < 2 {
        return Err(Error::Invalid("stream must contain at least two samples".into()));
    }
    let stream_dt = stream[1].t - stream[0].t;
    let expected_dt = 1.0 / config.sim.sample_rate_hz;
    if (stream_dt - expected_dt).abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "stream step {stream_dt} s does not match the configured sample rate ({expected_dt} s)"
        )));
    }
    let mut run = FilterRun::new(kind, config, op, x0, &stream[0]);
    for (i, sample) in stream.iter().enumerate().skip(1) {
        run.step(sample)
            .map_err(|e| Error::stage("estimate", i, e))?;
    }
    Ok(run.into_result())
}

/// Replica filter that supplies per-sample forecasts and Jacobians to the
/// FDI channel, then advances on whatever measurement was delivered.
pub struct ReplicaFeedback {
    run: FilterRun,
    pending: Option<StepForecast>,
}

impl ReplicaFeedback {
    pub fn new(config: &ScenarioConfig, op: &OperatingPoint, x0: Vector4<f64>, first: &MeasurementSample) -> Self {
        Self {
            run: FilterRun::new(FilterKind::Ckf, config, op, x0, first),
            pending: None,
        }
    }
}

impl FdiFeedback for ReplicaFeedback {
    fn forecast(
        &mut self,
        k: usize,
        sample: &MeasurementSample,
    ) -> Result<Option<(Vector4<f64>, JacobianH)>> {
        if k == 0 {
            // The filter is initialized at the first sample; its best guess
            // is the initial estimate itself.
            let (x_hat, _) = self.run.state();
            let h = jacobian_h(
                &GeneratorState::from_vector(&x_hat),
                sample.u_meas,
                sample.phi_meas,
                &self.run.gen,
            );
            return Ok(Some((x_hat, h)));
        }
        let fc = self.run.begin_step(sample)?;
        let h = jacobian_h(
            &GeneratorState::from_vector(&fc.x_pred),
            sample.u_meas,
            sample.phi_meas,
            &self.run.gen,
        );
        let x_pred = fc.x_pred;
        self.pending = Some(fc);
        Ok(Some((x_pred, h)))
    }

    fn advance(&mut self, k: usize, z: &Vector3<f64>, sample: &MeasurementSample) -> Result<()> {
        if k == 0 {
            return Ok(());
        }
        let fc = self
            .pending
            .take()
            .ok_or(Error::MissingFeedback { index: k })?;
        self.run.finish_step(&fc, z, sample)
    }
}

/// Outcome of one filter within a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kind: FilterKind,
    /// Calibration pass over the paired clean stream.
    pub clean: FilterRunResult,
    /// Main pass over the attacked stream, identification flags applied.
    pub attacked: FilterRunResult,
    pub d_j: f64,
    pub indices_full: IndexReport,
    pub indices_window: Option<IndexReport>,
    pub timing: TimingReport,
    pub flags_in_window: usize,
}

/// Full per-run record.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub config: ScenarioConfig,
    pub resolved_config_toml: String,
    pub truth: TruthTrajectory,
    pub clean_stream: Vec<MeasurementSample>,
    pub attacked_stream: Vec<MeasurementSample>,
    pub attack_log: AttackLog,
    pub outcomes: Vec<FilterOutcome>,
}

impl RunArtifact {
    pub fn outcome(&self, kind: FilterKind) -> Option<&FilterOutcome> {
        self.outcomes.iter().find(|o| o.kind == kind)
    }
}

/// Initial filter estimate: the true initial state perturbed at measurement
/// level on the measured channels and at the prior level on the transient
/// voltages.
fn initial_estimate(config: &ScenarioConfig, op: &OperatingPoint) -> Vector4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "filter-init"));
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = config.noise_model();
    let mut draw = |sigma: f64| unit.sample(&mut rng) * sigma;
    op.state.as_vector()
        + Vector4::new(
            draw(noise.sigma_delta),
            draw(noise.sigma_omega),
            draw(config.filter.p0_diag[2].sqrt()),
            draw(config.filter.p0_diag[3].sqrt()),
        )
}

/// Execute the full pipeline for one scenario.
pub fn run_pipeline(config: &ScenarioConfig, selection: FilterSelection) -> Result<RunArtifact> {
    config.validate()?;
    let resolved_config_toml = config.to_toml_string()?;

    // Stage 1: equations and truth.
    let op = steady_state_init(
        &InitTarget::SmibPu {
            p0: config.network.p0_pu,
            u0: config.network.u0_pu,
        },
        &config.generator(),
        &config.governor(),
        &config.exciter(),
        Some(&config.smib()),
    )
    .map_err(|e| Error::stage("construct", 0, e))?;
    let truth = crate::dynamics::simulate_truth(&config.truth_scenario())
        .map_err(|e| Error::stage("construct", 0, e))?;
    let clean_stream = sample_stream(
        &truth,
        &config.generator(),
        &config.noise_model(),
        config.sim.sample_rate_hz,
    )
    .map_err(|e| Error::stage("construct", 0, e))?;

    let x0 = initial_estimate(config, &op);

    // Stages 2–3: attack modelling and implementation on the stream.
    let (attacked_stream, attack_log) = match &config.attack {
        AttackConfig::None => (clean_stream.clone(), AttackLog::default()),
        AttackConfig::Fdi { .. } => {
            let fdi = config.fdi_config().expect("fdi config");
            let mut replica = ReplicaFeedback::new(config, &op, x0, &clean_stream[0]);
            apply_fdi(&clean_stream, &fdi, &mut replica)
                .map_err(|e| Error::stage("attack", 0, e))?
        }
        AttackConfig::Dos { .. } => {
            let dos = config.dos_config().expect("dos config");
            apply_dos(&clean_stream, &dos).map_err(|e| Error::stage("attack", 0, e))?
        }
    };

    // Stage 4: calibration pass (paired clean stream), then the main pass.
    let window = config.attack.window();
    let full_window = TimeWindow {
        t_start_s: 0.0,
        t_end_s: config.sim.duration_s,
    };
    let stride = (1.0 / (config.sim.sample_rate_hz * config.sim.dt_s)).round() as usize;

    let mut outcomes = Vec::new();
    for kind in selection.kinds() {
        let clean = run_filter(kind, config, &op, x0, &clean_stream)?;
        let warmup = config.filter.dj_warmup_samples;
        let d_j = match config.filter.dj {
            Some(v) => v,
            None => {
                let gaps = clean.gaps();
                let body = if gaps.len() > warmup { &gaps[warmup..] } else { &gaps[..] };
                calibrate_dj(body, config.filter.dj_safety)
                    .map_err(|e| Error::stage("calibrate", 0, e))?
            }
        };
        let mut attacked = run_filter(kind, config, &op, x0, &attacked_stream)?;
        attacked.apply_identification(d_j, warmup)?;

        let indices_full = series_indices(&attacked.rows, &attacked_stream, &truth, stride, &full_window)
            .map_err(|e| Error::stage("evaluate", 0, e))?;
        let indices_window = match &window {
            Some(w) => Some(
                series_indices(&attacked.rows, &attacked_stream, &truth, stride, w)
                    .map_err(|e| Error::stage("evaluate", 0, e))?,
            ),
            None => None,
        };
        let timing = timing_profile(&attacked.timings);
        let flags_in_window = window
            .as_ref()
            .map(|w| attacked.flags_in_window(w))
            .unwrap_or(0);
        outcomes.push(FilterOutcome {
            kind,
            clean,
            attacked,
            d_j,
            indices_full,
            indices_window,
            timing,
            flags_in_window,
        });
    }

    Ok(RunArtifact {
        config: config.clone(),
        resolved_config_toml,
        truth,
        clean_stream,
        attacked_stream,
        attack_log,
        outcomes,
    })
}

/// Indices of one filter trajectory against a stream and the truth, over one
/// window.
pub fn series_indices(
    rows: &[TrajectoryRow],
    stream: &[MeasurementSample],
    truth: &TruthTrajectory,
    stride: usize,
    window: &TimeWindow,
) -> Result<IndexReport> {
    let mut est = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    let mut meas = [Vec::new(), Vec::new()];
    let mut tru = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for row in rows {
        if !window.contains(row.t) {
            continue;
        }
        let sample = &stream[row.k];
        let state = &truth.states[row.k * stride];
        for (i, series) in est.iter_mut().enumerate() {
            series.push(row.x_post[i]);
        }
        meas[0].push(sample.delta_z);
        meas[1].push(sample.omega_z);
        tru[0].push(state.delta);
        tru[1].push(state.omega);
        tru[2].push(state.eq_p);
        tru[3].push(state.ed_p);
    }
    let n = est[0].len();
    if n == 0 {
        return Err(Error::IndexUndefined(format!(
            "no samples in window [{}, {}]",
            window.t_start_s, window.t_end_s
        )));
    }
    let var = |i: usize| -> Result<VariableIndices> {
        let (tau1_v, excluded) = match tau1(&est[i], &meas[i]) {
            Ok((v, excluded)) => (Some(v), excluded),
            Err(Error::IndexUndefined(_)) => (None, n),
            Err(e) => return Err(e),
        };
        let tau2_v = match tau2(&est[i], &meas[i], &tru[i]) {
            Ok(v) => Some(v),
            Err(Error::IndexUndefined(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(VariableIndices {
            tau1: tau1_v,
            tau1_excluded: excluded,
            tau2: tau2_v,
            tau3: tau3(&est[i], &tru[i])?,
        })
    };
    Ok(IndexReport {
        n,
        eq_p_tau3: tau3(&est[2], &tru[2])?,
        ed_p_tau3: tau3(&est[3], &tru[3])?,
        window: *window,
        delta: var(0)?,
        omega: var(1)?,
    })
}

#[derive(Serialize)]
struct FilterIndicesDoc {
    d_j: f64,
    huber_triggers: usize,
    flags_in_window: usize,
    mean_gap: f64,
    full: IndexReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    attack_window: Option<IndexReport>,
}

#[derive(Serialize)]
struct IndicesDoc {
    seed: u64,
    attack: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    ckf: Option<FilterIndicesDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rckf: Option<FilterIndicesDoc>,
}

#[derive(Serialize)]
struct TimingDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    ckf: Option<TimingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rckf: Option<TimingReport>,
}

fn write_trajectory<W: Write>(rows: &[TrajectoryRow], mut w: W) -> Result<()> {
    writeln!(
        w,
        "k,t,x_pred_delta,x_pred_omega,x_pred_eqp,x_pred_edp,\
         x_post_delta,x_post_omega,x_post_eqp,x_post_edp,\
         p_delta,p_omega,p_eqp,p_edp,\
         innov_delta,innov_omega,innov_pe,\
         r_delta,r_omega,r_pe,huber,gap,flag"
    )?;
    for r in rows {
        let flag = match r.flag {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.t,
            r.x_pred[0],
            r.x_pred[1],
            r.x_pred[2],
            r.x_pred[3],
            r.x_post[0],
            r.x_post[1],
            r.x_post[2],
            r.x_post[3],
            r.p_diag[0],
            r.p_diag[1],
            r.p_diag[2],
            r.p_diag[3],
            r.innovation[0],
            r.innovation[1],
            r.innovation[2],
            r.r_used_diag[0],
            r.r_used_diag[1],
            r.r_used_diag[2],
            r.huber_triggered as u8,
            r.gap,
            flag
        )?;
    }
    Ok(())
}

/// Write a run artifact into a directory. Every file except `timing.toml`
/// is a pure function of (config, seed).
pub fn write_artifact<P: AsRef<Path>>(artifact: &RunArtifact, dir: P) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), &artifact.resolved_config_toml)?;

    let mut truth = Vec::new();
    crate::dynamics::write_trace(&artifact.truth, &mut truth)?;
    std::fs::write(dir.join("truth.csv"), truth)?;

    let mut clean = Vec::new();
    crate::measurement::write_stream(&artifact.clean_stream, &mut clean)?;
    std::fs::write(dir.join("measurements_clean.csv"), clean)?;

    let mut attacked = Vec::new();
    crate::measurement::write_stream(&artifact.attacked_stream, &mut attacked)?;
    std::fs::write(dir.join("measurements_attacked.csv"), attacked)?;

    if !artifact.attack_log.entries.is_empty() {
        let mut log = Vec::new();
        artifact.attack_log.write(&mut log)?;
        std::fs::write(dir.join("attack_log.csv"), log)?;
    }

    let mut indices = IndicesDoc {
        seed: artifact.config.seed,
        attack: artifact.config.attack.kind_str(),
        ckf: None,
        rckf: None,
    };
    let mut timing = TimingDoc {
        ckf: None,
        rckf: None,
    };
    for outcome in &artifact.outcomes {
        let mut main = Vec::new();
        write_trajectory(&outcome.attacked.rows, &mut main)?;
        std::fs::write(dir.join(format!("{}.csv", outcome.kind.as_str())), main)?;
        let mut calib = Vec::new();
        write_trajectory(&outcome.clean.rows, &mut calib)?;
        std::fs::write(dir.join(format!("{}_clean.csv", outcome.kind.as_str())), calib)?;

        let n = outcome.attacked.rows.len().max(1) as f64;
        let doc = FilterIndicesDoc {
            d_j: outcome.d_j,
            huber_triggers: outcome.attacked.huber_triggers,
            flags_in_window: outcome.flags_in_window,
            mean_gap: outcome.attacked.rows.iter().map(|r| r.gap).sum::<f64>() / n,
            full: outcome.indices_full,
            attack_window: outcome.indices_window,
        };
        match outcome.kind {
            FilterKind::Ckf => {
                indices.ckf = Some(doc);
                timing.ckf = Some(outcome.timing);
            }
            FilterKind::Rckf => {
                indices.rckf = Some(doc);
                timing.rckf = Some(outcome.timing);
            }
        }
    }
    std::fs::write(
        dir.join("indices.toml"),
        toml::to_string(&indices).map_err(|e| Error::ConfigParse(e.to_string()))?,
    )?;
    std::fs::write(
        dir.join("timing.toml"),
        toml::to_string(&timing).map_err(|e| Error::ConfigParse(e.to_string()))?,
    )?;
    Ok(())
}

/// Write one plottable file per state variable (plus electrical power):
/// time, truth, measurement where available, the estimate of each filter
/// that ran, and the attack-window marker.
pub fn emit_plots_data<P: AsRef<Path>>(artifact: &RunArtifact, dir: P) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let stride = (1.0
        / (artifact.config.sim.sample_rate_hz * artifact.config.sim.dt_s))
        .round() as usize;
    let window = artifact.config.attack.window();
    let ckf = artifact.outcome(FilterKind::Ckf);
    let rckf = artifact.outcome(FilterKind::Rckf);

    struct VarSpec {
        name: &'static str,
        truth: fn(&GeneratorState) -> f64,
        meas: Option<fn(&MeasurementSample) -> f64>,
        state_index: usize,
    }
    let vars = [
        VarSpec {
            name: "delta",
            truth: |s| s.delta,
            meas: Some(|m| m.delta_z),
            state_index: 0,
        },
        VarSpec {
            name: "omega",
            truth: |s| s.omega,
            meas: Some(|m| m.omega_z),
            state_index: 1,
        },
        VarSpec {
            name: "eqp",
            truth: |s| s.eq_p,
            meas: None,
            state_index: 2,
        },
        VarSpec {
            name: "edp",
            truth: |s| s.ed_p,
            meas: None,
            state_index: 3,
        },
    ];

    for var in vars {
        let mut text = String::new();
        let mut header = vec!["t", "truth"];
        if var.meas.is_some() {
            header.push("measurement");
        }
        if ckf.is_some() {
            header.push("ckf");
        }
        if rckf.is_some() {
            header.push("rckf");
        }
        header.push("attack_window");
        text.push_str(&header.join(","));
        text.push('\n');

        for (i, sample) in artifact.attacked_stream.iter().enumerate() {
            let state = &artifact.truth.states[i * stride];
            let mut fields = vec![sample.t.to_string(), (var.truth)(state).to_string()];
            if let Some(meas) = var.meas {
                fields.push(meas(sample).to_string());
            }
            for outcome in [ckf, rckf].into_iter().flatten() {
                let value = if i == 0 {
                    // The filters are initialized at the first sample.
                    outcome.attacked.x0[var.state_index]
                } else {
                    outcome.attacked.rows[i - 1].x_post[var.state_index]
                };
                fields.push(value.to_string());
            }
            let marker = window.map(|w| w.contains(sample.t)).unwrap_or(false);
            fields.push((marker as u8).to_string());
            text.push_str(&fields.join(","));
            text.push('\n');
        }
        std::fs::write(dir.join(format!("{}.csv", var.name)), text)?;
    }
    Ok(())
}
