//! PMU measurement model.
//!
//! Measured channels are rotor angle, rotor speed, and electrical power:
//!
//! `Pe = (U²/2)·sin(2(δ−φ))·(1/x_qp − 1/x_dp) + U·sin(δ−φ)·Eq'/x_dp
//!       + U·cos(δ−φ)·Ed'/x_qp`
//!
//! together with the terminal phasor `(U, φ)` the filters consume as input.
//! Two sigma sets coexist on purpose: the simulation sigmas generate the
//! noise actually injected into streams, while the `r_*` constants feed the
//! filters' assumed measurement covariance. The electrical-power variance is
//! propagated from the terminal-phasor uncertainty through the analytic
//! partials of `Pe`.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{GeneratorParams, GeneratorState, TruthTrajectory};
use crate::error::{Error, Result};

/// Noise configuration for stream generation and for the filters' assumed
/// measurement covariance. The two sets deliberately coexist: what gets
/// injected into a stream need not match what a filter assumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Rotor-angle measurement std (rad).
    pub sigma_delta: f64,
    /// Rotor-speed measurement std (pu).
    pub sigma_omega: f64,
    /// Terminal-voltage magnitude std, fractional.
    pub sigma_u_frac: f64,
    /// Terminal-voltage phase std (rad).
    pub sigma_phi: f64,
    /// Assumed-covariance rotor-angle std (rad).
    pub r_sigma_delta: f64,
    /// Assumed-covariance rotor-speed std (pu).
    pub r_sigma_omega: f64,
    /// Assumed-covariance voltage magnitude std, fractional.
    pub r_sigma_u_frac: f64,
    /// Assumed-covariance voltage phase std (rad).
    pub r_sigma_phi: f64,
    /// Seed for stream generation.
    pub seed: u64,
}

impl NoiseModel {
    /// Conventional sigmas: 2° rotor angle, 0.1% rotor speed, 0.1% / 0.1°
    /// terminal phasor; assumed covariance reuses the channel sigmas and
    /// propagates 0.2% / 0.2° into the power channel.
    pub fn pmu_defaults(seed: u64) -> Self {
        Self {
            sigma_delta: 2.0_f64.to_radians(),
            sigma_omega: 0.001,
            sigma_u_frac: 0.001,
            sigma_phi: 0.1_f64.to_radians(),
            r_sigma_delta: 2.0_f64.to_radians(),
            r_sigma_omega: 0.001,
            r_sigma_u_frac: 0.002,
            r_sigma_phi: 0.2_f64.to_radians(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.sigma_delta,
            self.sigma_omega,
            self.sigma_u_frac,
            self.sigma_phi,
            self.r_sigma_delta,
            self.r_sigma_omega,
            self.r_sigma_u_frac,
            self.r_sigma_phi,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid("noise sigmas must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// One PMU frame: measured channels, terminal phasor, per-channel validity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSample {
    pub t: f64,
    pub delta_z: f64,
    pub omega_z: f64,
    pub pe_z: f64,
    pub u_meas: f64,
    pub phi_meas: f64,
    /// Validity of [delta_z, omega_z, pe_z]; cleared by packet loss.
    pub valid: [bool; 3],
}

impl MeasurementSample {
    pub fn z(&self) -> Vector3<f64> {
        Vector3::new(self.delta_z, self.omega_z, self.pe_z)
    }

    pub fn with_z(&self, z: &Vector3<f64>) -> Self {
        Self {
            delta_z: z[0],
            omega_z: z[1],
            pe_z: z[2],
            ..*self
        }
    }
}

/// Noise-free measurement vector `[δ, ω, Pe]` at a state and terminal phasor.
pub fn measure(state: &GeneratorState, u: f64, phi: f64, params: &GeneratorParams) -> Vector3<f64> {
    Vector3::new(
        state.delta,
        state.omega,
        pe_closed_form(state, u, phi, params),
    )
}

fn pe_closed_form(state: &GeneratorState, u: f64, phi: f64, params: &GeneratorParams) -> f64 {
    let theta = state.delta - phi;
    let a = 1.0 / params.x_qp - 1.0 / params.x_dp;
    u * u / 2.0 * (2.0 * theta).sin() * a
        + u * theta.sin() * state.eq_p / params.x_dp
        + u * theta.cos() * state.ed_p / params.x_qp
}

/// Analytic partial derivatives of the electrical-power channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PePartials {
    pub d_u: f64,
    pub d_phi: f64,
    pub d_delta: f64,
    pub d_eq_p: f64,
    pub d_ed_p: f64,
}

pub fn pe_partials(state: &GeneratorState, u: f64, phi: f64, params: &GeneratorParams) -> PePartials {
    let theta = state.delta - phi;
    let (sin_t, cos_t) = theta.sin_cos();
    let (sin_2t, cos_2t) = (2.0 * theta).sin_cos();
    let a = 1.0 / params.x_qp - 1.0 / params.x_dp;
    let d_u = u * sin_2t * a + sin_t * state.eq_p / params.x_dp + cos_t * state.ed_p / params.x_qp;
    let d_delta =
        u * u * cos_2t * a + u * cos_t * state.eq_p / params.x_dp - u * sin_t * state.ed_p / params.x_qp;
    PePartials {
        d_u,
        d_phi: -d_delta,
        d_delta,
        d_eq_p: u * sin_t / params.x_dp,
        d_ed_p: u * cos_t / params.x_qp,
    }
}

/// Diagonal measurement covariance at an operating point, built from the
/// assumed-covariance constants of the noise model.
pub fn noise_covariance(
    state: &GeneratorState,
    u: f64,
    phi: f64,
    params: &GeneratorParams,
    model: &NoiseModel,
) -> Matrix3<f64> {
    let p = pe_partials(state, u, phi, params);
    let sigma_u = model.r_sigma_u_frac * u;
    let var_pe = (p.d_u * sigma_u).powi(2) + (p.d_phi * model.r_sigma_phi).powi(2);
    Matrix3::from_diagonal(&Vector3::new(
        model.r_sigma_delta.powi(2),
        model.r_sigma_omega.powi(2),
        var_pe,
    ))
}

/// Per-sample electrical-power noise std implied by the simulation sigmas.
fn pe_sim_sigma(state: &GeneratorState, u: f64, phi: f64, params: &GeneratorParams, model: &NoiseModel) -> f64 {
    let p = pe_partials(state, u, phi, params);
    let sigma_u = model.sigma_u_frac * u;
    ((p.d_u * sigma_u).powi(2) + (p.d_phi * model.sigma_phi).powi(2)).sqrt()
}

/// Sample a PMU stream from a truth trajectory at the given rate.
///
/// The rate must divide the trajectory grid. Noise is independent zero-mean
/// Gaussian per channel and per sample; the electrical-power channel's sigma
/// is propagated from the simulation terminal sigmas at the true operating
/// point. Deterministic under a fixed seed: exactly five unit-normal draws
/// are consumed per sample.
pub fn sample_stream(
    truth: &TruthTrajectory,
    params: &GeneratorParams,
    model: &NoiseModel,
    rate_hz: f64,
) -> Result<Vec<MeasurementSample>> {
    model.validate()?;
    if !(rate_hz > 0.0) {
        return Err(Error::Invalid(format!("sample rate {rate_hz} Hz must be positive")));
    }
    let stride_f = 1.0 / (rate_hz * truth.dt);
    let stride = stride_f.round();
    if stride < 1.0 || (stride_f - stride).abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "sample rate {rate_hz} Hz incompatible with truth step {} s",
            truth.dt
        )));
    }
    let stride = stride as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut stream = Vec::with_capacity(truth.len() / stride + 1);
    for k in (0..truth.len()).step_by(stride) {
        let state = &truth.states[k];
        let input = &truth.inputs[k];
        let z = measure(state, input.u, input.phi, params);
        let pe_sigma = pe_sim_sigma(state, input.u, input.phi, params, model);
        let n: [f64; 5] = std::array::from_fn(|_| unit.sample(&mut rng));
        stream.push(MeasurementSample {
            t: truth.times[k],
            delta_z: z[0] + n[0] * model.sigma_delta,
            omega_z: z[1] + n[1] * model.sigma_omega,
            pe_z: z[2] + n[2] * pe_sigma,
            u_meas: input.u + n[3] * model.sigma_u_frac * input.u,
            phi_meas: input.phi + n[4] * model.sigma_phi,
            valid: [true; 3],
        });
    }
    Ok(stream)
}

/// Write a measurement stream with validity flags.
pub fn write_stream<W: Write>(stream: &[MeasurementSample], mut w: W) -> Result<()> {
    writeln!(w, "t,delta_z,omega_z,pe_z,u_meas,phi_meas,valid_delta,valid_omega,valid_pe")?;
    for s in stream {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            s.t,
            s.delta_z,
            s.omega_z,
            s.pe_z,
            s.u_meas,
            s.phi_meas,
            s.valid[0] as u8,
            s.valid[1] as u8,
            s.valid[2] as u8
        )?;
    }
    Ok(())
}

/// Read a measurement stream written by [`write_stream`]. Validity columns
/// are optional and default to valid.
pub fn read_stream<R: BufRead>(reader: R) -> Result<Vec<MeasurementSample>> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => {
            return Err(Error::TraceFormat {
                row: 0,
                message: "empty stream file".into(),
            })
        }
    };
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_ascii_lowercase()).collect();
    let need = ["t", "delta_z", "omega_z", "pe_z", "u_meas", "phi_meas"];
    let mut idx = [0usize; 6];
    for (j, name) in need.iter().enumerate() {
        idx[j] = columns.iter().position(|c| c == name).ok_or_else(|| Error::TraceFormat {
            row: 1,
            message: format!("missing column {name}"),
        })?;
    }
    let vidx: Vec<Option<usize>> = ["valid_delta", "valid_omega", "valid_pe"]
        .iter()
        .map(|name| columns.iter().position(|c| c == *name))
        .collect();

    let mut out = Vec::new();
    for (i, line) in lines {
        let row = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::TraceFormat {
                row,
                message: format!("expected {} fields, found {}", columns.len(), fields.len()),
            });
        }
        let parse = |i: usize| -> Result<f64> {
            let v: f64 = fields[i].parse().map_err(|_| Error::TraceFormat {
                row,
                message: format!("cannot parse '{}'", fields[i]),
            })?;
            if !v.is_finite() {
                return Err(Error::TraceFormat {
                    row,
                    message: "non-finite value".into(),
                });
            }
            Ok(v)
        };
        let mut valid = [true; 3];
        for (j, vi) in vidx.iter().enumerate() {
            if let Some(vi) = vi {
                valid[j] = fields[*vi] != "0";
            }
        }
        out.push(MeasurementSample {
            t: parse(idx[0])?,
            delta_z: parse(idx[1])?,
            omega_z: parse(idx[2])?,
            pe_z: parse(idx[3])?,
            u_meas: parse(idx[4])?,
            phi_meas: parse(idx[5])?,
            valid,
        });
    }
    if out.is_empty() {
        return Err(Error::TraceFormat {
            row: 0,
            message: "stream contains no data rows".into(),
        });
    }
    Ok(out)
}

/// Read a measurement stream from a file path.
pub fn read_stream_path<P: AsRef<Path>>(path: P) -> Result<Vec<MeasurementSample>> {
    let file = std::fs::File::open(path)?;
    read_stream(std::io::BufReader::new(file))
}
