//! Terminal-voltage trace files.
//!
//! Comma-separated text with a header row. Required columns `t`, `u`, `phi`
//! (seconds, per-unit, radians); optional columns `delta`, `omega`, `eqp`,
//! `edp` carry truth states. Timestamps must be strictly increasing on a
//! uniform grid.

use std::io::{BufRead, Write};
use std::path::Path;

use super::{GeneratorState, TruthTrajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub u: f64,
    pub phi: f64,
    pub state: Option<GeneratorState>,
}

const STEP_JITTER_TOL: f64 = 1e-9;

/// Parse and validate a trace from a reader.
pub fn ingest_trace<R: BufRead>(reader: R) -> Result<Vec<TracePoint>> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((idx, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break (idx, line);
            }
            None => {
                return Err(Error::TraceFormat {
                    row: 0,
                    message: "empty trace file".into(),
                })
            }
        }
    };
    let columns: Vec<String> = header
        .1
        .split(',')
        .map(|c| c.trim().to_ascii_lowercase())
        .collect();
    let col = |name: &str| columns.iter().position(|c| c == name);
    let (it, iu, iphi) = match (col("t"), col("u"), col("phi")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(Error::TraceFormat {
                row: header.0 + 1,
                message: format!("header must contain columns t, u, phi; found {columns:?}"),
            })
        }
    };
    let state_cols = match (col("delta"), col("omega"), col("eqp"), col("edp")) {
        (Some(a), Some(b), Some(c), Some(d)) => Some((a, b, c, d)),
        (None, None, None, None) => None,
        _ => {
            return Err(Error::TraceFormat {
                row: header.0 + 1,
                message: "state columns delta, omega, eqp, edp must appear together".into(),
            })
        }
    };

    let mut points = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
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
                message: format!("cannot parse '{}' in column {}", fields[i], columns[i]),
            })?;
            if !v.is_finite() {
                return Err(Error::TraceFormat {
                    row,
                    message: format!("non-finite value in column {}", columns[i]),
                });
            }
            Ok(v)
        };
        let state = match state_cols {
            Some((a, b, c, d)) => Some(GeneratorState {
                delta: parse(a)?,
                omega: parse(b)?,
                eq_p: parse(c)?,
                ed_p: parse(d)?,
            }),
            None => None,
        };
        let point = TracePoint {
            t: parse(it)?,
            u: parse(iu)?,
            phi: parse(iphi)?,
            state,
        };
        if point.u < 0.0 {
            return Err(Error::TraceFormat {
                row,
                message: "terminal voltage magnitude must be >= 0".into(),
            });
        }
        if let Some(prev) = points.last() {
            let prev: &TracePoint = prev;
            if point.t <= prev.t {
                return Err(Error::TraceFormat {
                    row,
                    message: format!("timestamps must strictly increase ({} after {})", point.t, prev.t),
                });
            }
        }
        points.push(point);
    }
    if points.is_empty() {
        return Err(Error::TraceFormat {
            row: 0,
            message: "trace contains no data rows".into(),
        });
    }
    if points.len() >= 2 {
        let dt = points[1].t - points[0].t;
        for (k, pair) in points.windows(2).enumerate() {
            let step = pair[1].t - pair[0].t;
            if (step - dt).abs() > STEP_JITTER_TOL {
                return Err(Error::TraceFormat {
                    row: k + 3, // header + first row of the offending pair + 1
                    message: format!("non-uniform step {step} (expected {dt})"),
                });
            }
        }
    }
    Ok(points)
}

/// Read a trace from a file path.
pub fn read_trace<P: AsRef<Path>>(path: P) -> Result<Vec<TracePoint>> {
    let file = std::fs::File::open(path)?;
    ingest_trace(std::io::BufReader::new(file))
}

/// Write a truth trajectory as a trace file, states included.
pub fn write_trace<W: Write>(traj: &TruthTrajectory, mut w: W) -> Result<()> {
    writeln!(w, "t,u,phi,delta,omega,eqp,edp")?;
    for k in 0..traj.len() {
        let s = &traj.states[k];
        let i = &traj.inputs[k];
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            traj.times[k], i.u, i.phi, s.delta, s.omega, s.eq_p, s.ed_p
        )?;
    }
    Ok(())
}
