//! Batch execution across scenarios and seeds, with an aggregated summary
//! table mirroring the per-scenario index layout.

use std::collections::BTreeMap;

use super::config::ScenarioConfig;
use super::pipeline::{run_pipeline, FilterKind, FilterSelection, RunArtifact};
use crate::error::{Error, Result};
use crate::evaluation::IndexReport;

/// One completed (or failed) batch cell.
pub struct BatchRun {
    pub scenario: String,
    pub seed: u64,
    pub result: Result<RunArtifact>,
}

pub struct BatchOutcome {
    pub runs: Vec<BatchRun>,
    pub summary: String,
}

/// Mean and standard deviation over seeds.
#[derive(Debug, Clone, Copy, Default)]
struct Aggregate {
    values: [f64; 2],
    count: usize,
}

impl Aggregate {
    fn push(&mut self, v: f64) {
        self.values[0] += v;
        self.values[1] += v * v;
        self.count += 1;
    }

    fn mean(&self) -> f64 {
        self.values[0] / self.count.max(1) as f64
    }

    fn std(&self) -> f64 {
        let n = self.count.max(1) as f64;
        let m = self.mean();
        (self.values[1] / n - m * m).max(0.0).sqrt()
    }
}

/// Run every scenario with every seed, sequentially and independently.
/// Failures are recorded per run and do not stop the batch.
pub fn run_batch(
    scenarios: &[(String, ScenarioConfig)],
    seeds: &[u64],
    selection: FilterSelection,
) -> Result<BatchOutcome> {
    if scenarios.is_empty() {
        return Err(Error::Invalid("batch needs at least one scenario".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Invalid("batch needs at least one seed".into()));
    }
    let mut runs = Vec::with_capacity(scenarios.len() * seeds.len());
    for (name, config) in scenarios {
        for &seed in seeds {
            let config = config.clone().with_seed(seed);
            runs.push(BatchRun {
                scenario: name.clone(),
                seed,
                result: run_pipeline(&config, selection),
            });
        }
    }
    let summary = summarize(&runs);
    Ok(BatchOutcome { runs, summary })
}

fn pick(report: &IndexReport, variable: &str, index: &str) -> Option<f64> {
    let v = match variable {
        "delta" => &report.delta,
        "omega" => &report.omega,
        _ => return None,
    };
    match index {
        "tau1" => v.tau1,
        "tau2" => v.tau2,
        "tau3" => Some(v.tau3),
        _ => None,
    }
}

/// Aligned text table: one block per scenario, rows per index × variable,
/// columns per filter (mean ± std over seeds).
pub fn summarize(runs: &[BatchRun]) -> String {
    type Key = (String, &'static str, &'static str, &'static str);
    let mut cells: BTreeMap<Key, Aggregate> = BTreeMap::new();
    let mut scenario_order: Vec<String> = Vec::new();
    let mut failures: Vec<String> = Vec::new();

    for run in runs {
        if !scenario_order.contains(&run.scenario) {
            scenario_order.push(run.scenario.clone());
        }
        let artifact = match &run.result {
            Ok(a) => a,
            Err(e) => {
                failures.push(format!("{} seed {}: {e}", run.scenario, run.seed));
                continue;
            }
        };
        for outcome in &artifact.outcomes {
            let filter = outcome.kind.as_str();
            let report = outcome.indices_window.as_ref().unwrap_or(&outcome.indices_full);
            for index in ["tau1", "tau2", "tau3"] {
                for variable in ["delta", "omega"] {
                    if let Some(v) = pick(report, variable, index) {
                        cells
                            .entry((run.scenario.clone(), index_static(index), var_static(variable), filter_static(filter)))
                            .or_default()
                            .push(v);
                    }
                }
            }
        }
    }

    let mut out = String::new();
    let seeds = runs
        .iter()
        .map(|r| r.seed)
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    out.push_str(&format!(
        "{:<12} {:>5} {:>6} {:>24} {:>24}\n",
        "scenario", "index", "var", "ckf (mean±std)", "rckf (mean±std)"
    ));
    for scenario in &scenario_order {
        for index in ["tau1", "tau2", "tau3"] {
            for variable in ["delta", "omega"] {
                let cell = |filter: &'static str| {
                    cells
                        .get(&(scenario.clone(), index, var_static(variable), filter))
                        .map(|a| format!("{:.4e} ± {:.2e}", a.mean(), a.std()))
                        .unwrap_or_else(|| "-".into())
                };
                out.push_str(&format!(
                    "{:<12} {:>5} {:>6} {:>24} {:>24}\n",
                    scenario,
                    index,
                    variable,
                    cell("ckf"),
                    cell("rckf")
                ));
            }
        }
    }
    out.push_str(&format!("\nseeds per scenario: {seeds}\n"));
    if !failures.is_empty() {
        out.push_str("\nfailed runs:\n");
        for f in &failures {
            out.push_str(&format!("  {f}\n"));
        }
    }
    out
}

fn index_static(s: &str) -> &'static str {
    match s {
        "tau1" => "tau1",
        "tau2" => "tau2",
        _ => "tau3",
    }
}

fn var_static(s: &str) -> &'static str {
    match s {
        "delta" => "delta",
        _ => "omega",
    }
}

fn filter_static(s: &str) -> &'static str {
    match s {
        "ckf" => "ckf",
        _ => "rckf",
    }
}

/// Median CKF/RCKF ratio of an index across paired runs; used for
/// conservative cross-filter comparisons.
pub fn median_ratio<F>(runs: &[BatchRun], pick_value: F) -> Result<f64>
where
    F: Fn(&RunArtifact, FilterKind) -> Option<f64>,
{
    let mut ratios = Vec::new();
    for run in runs {
        let artifact = run.result.as_ref().map_err(|e| Error::Invalid(e.to_string()))?;
        let a = pick_value(artifact, FilterKind::Ckf);
        let b = pick_value(artifact, FilterKind::Rckf);
        if let (Some(a), Some(b)) = (a, b) {
            if b > 0.0 {
                ratios.push(a / b);
            }
        }
    }
    if ratios.is_empty() {
        return Err(Error::IndexUndefined("no ratios to aggregate".into()));
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ratios[ratios.len() / 2])
}
