//! `dse` — scenario driver for generator dynamic state estimation under
//! measurement attacks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dse_core::dynamics::{simulate_truth, write_trace};
use dse_core::harness::{
    emit_plots_data, ninebus_family, run_batch, run_filter, run_pipeline, sixtyeightbus_family,
    write_artifact, AttackConfig, FilterSelection, ScenarioConfig,
};
use dse_core::measurement::{read_stream_path, sample_stream, write_stream};
use dse_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "dse",
    about = "Dynamic state estimation of a synchronous generator under FDI/DoS measurement attacks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario configuration file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario preset.
    #[arg(long, value_parser = ["ninebus", "sixtyeightbus"])]
    preset: Option<String>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut config = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)?;
                ScenarioConfig::from_toml_str(&text)?
            }
            (None, Some(preset)) => match preset.as_str() {
                "ninebus" => ScenarioConfig::preset_ninebus(),
                "sixtyeightbus" => ScenarioConfig::preset_sixtyeightbus(),
                other => return Err(Error::Invalid(format!("unknown preset '{other}'"))),
            },
            (None, None) => {
                return Err(Error::Invalid(
                    "either --config <file> or --preset <name> is required".into(),
                ))
            }
        };
        if let Some(seed) = self.seed {
            config = config.with_seed(seed);
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate ground truth and write the trace (plus a clean PMU stream).
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the configured attack to a measurement stream file.
    Attack {
        #[command(flatten)]
        config: ConfigArgs,
        /// Clean measurement stream (CSV).
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the filters over a measurement stream file.
    Estimate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Measurement stream (CSV), possibly attacked.
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Which filters to run.
        #[arg(long, default_value = "both", value_parser = ["ckf", "rckf", "both"])]
        filter: String,
    },
    /// Full pipeline: truth, measurements, attack, filters, indices.
    Pipeline {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "both", value_parser = ["ckf", "rckf", "both"])]
        filter: String,
        /// Also write per-variable plottable files.
        #[arg(long)]
        plots: bool,
    },
    /// Run a scenario family (or one config) across seeds and summarize.
    Batch {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated seed list, e.g. 1,2,3,4,5.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "both", value_parser = ["ckf", "rckf", "both"])]
        filter: String,
    },
    /// Print the index summary of one or more completed run directories.
    Report {
        /// Run directories containing indices.toml.
        #[arg(long, required = true, num_args = 1..)]
        run: Vec<PathBuf>,
    },
}

fn selection(filter: &str) -> Result<FilterSelection> {
    filter.parse()
}

fn cmd_simulate(config: &ScenarioConfig, out: &PathBuf) -> Result<()> {
    let truth = simulate_truth(&config.truth_scenario())?;
    let stream = sample_stream(
        &truth,
        &config.generator(),
        &config.noise_model(),
        config.sim.sample_rate_hz,
    )?;
    std::fs::create_dir_all(out)?;
    let mut trace = Vec::new();
    write_trace(&truth, &mut trace)?;
    std::fs::write(out.join("truth.csv"), trace)?;
    let mut meas = Vec::new();
    write_stream(&stream, &mut meas)?;
    std::fs::write(out.join("measurements_clean.csv"), meas)?;
    std::fs::write(out.join("config.toml"), config.to_toml_string()?)?;
    println!("wrote truth ({} samples) to {}", truth.len(), out.display());
    Ok(())
}

fn cmd_attack(config: &ScenarioConfig, stream_path: &PathBuf, out: &PathBuf) -> Result<()> {
    let stream = read_stream_path(stream_path)?;
    let (attacked, log) = match &config.attack {
        AttackConfig::None => {
            return Err(Error::Invalid(
                "config has attack.kind = \"none\"; nothing to apply".into(),
            ))
        }
        AttackConfig::Dos { .. } => {
            let dos = config.dos_config().expect("dos config");
            dse_core::attacks::apply_dos(&stream, &dos)?
        }
        AttackConfig::Fdi { .. } => {
            let fdi = config.fdi_config().expect("fdi config");
            // The stealth check needs filter forecasts: run a replica filter
            // from the configured operating point.
            let op = dse_core::dynamics::steady_state_init(
                &dse_core::dynamics::InitTarget::SmibPu {
                    p0: config.network.p0_pu,
                    u0: config.network.u0_pu,
                },
                &config.generator(),
                &config.governor(),
                &config.exciter(),
                Some(&config.smib()),
            )?;
            let x0 = op.state.as_vector();
            let mut replica = dse_core::harness::ReplicaFeedback::new(config, &op, x0, &stream[0]);
            dse_core::attacks::apply_fdi(&stream, &fdi, &mut replica)?
        }
    };
    std::fs::create_dir_all(out)?;
    let mut buf = Vec::new();
    write_stream(&attacked, &mut buf)?;
    std::fs::write(out.join("measurements_attacked.csv"), buf)?;
    let mut logbuf = Vec::new();
    log.write(&mut logbuf)?;
    std::fs::write(out.join("attack_log.csv"), logbuf)?;
    println!(
        "attacked {} of {} samples; log written to {}",
        log.entries.len(),
        attacked.len(),
        out.display()
    );
    Ok(())
}

fn cmd_estimate(config: &ScenarioConfig, stream_path: &PathBuf, out: &PathBuf, filter: &str) -> Result<()> {
    let stream = read_stream_path(stream_path)?;
    let op = dse_core::dynamics::steady_state_init(
        &dse_core::dynamics::InitTarget::SmibPu {
            p0: config.network.p0_pu,
            u0: config.network.u0_pu,
        },
        &config.generator(),
        &config.governor(),
        &config.exciter(),
        Some(&config.smib()),
    )?;
    let x0 = op.state.as_vector();
    std::fs::create_dir_all(out)?;
    for kind in selection(filter)?.kinds() {
        let mut result = run_filter(kind, config, &op, x0, &stream)?;
        if let Some(d_j) = config.filter.dj {
            result.apply_identification(d_j, config.filter.dj_warmup_samples)?;
        }
        let name = format!("{}.csv", kind.as_str());
        let mut buf = Vec::new();
        write_trajectory_csv(&result, &mut buf)?;
        std::fs::write(out.join(&name), buf)?;
        println!("wrote {} ({} rows)", out.join(&name).display(), result.rows.len());
    }
    Ok(())
}

fn write_trajectory_csv(result: &dse_core::harness::FilterRunResult, w: &mut Vec<u8>) -> Result<()> {
    use std::io::Write;
    writeln!(
        w,
        "k,t,x_post_delta,x_post_omega,x_post_eqp,x_post_edp,gap,flag"
    )?;
    for r in &result.rows {
        let flag = match r.flag {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.k, r.t, r.x_post[0], r.x_post[1], r.x_post[2], r.x_post[3], r.gap, flag
        )?;
    }
    Ok(())
}

fn cmd_pipeline(config: &ScenarioConfig, out: &PathBuf, filter: &str, plots: bool) -> Result<()> {
    let artifact = run_pipeline(config, selection(filter)?)?;
    write_artifact(&artifact, out)?;
    if plots {
        emit_plots_data(&artifact, out.join("plots"))?;
    }
    for outcome in &artifact.outcomes {
        let report = outcome.indices_window.as_ref().unwrap_or(&outcome.indices_full);
        println!(
            "{}: tau3(delta) = {:.4e}, tau3(omega) = {:.4e}, flags in window = {}",
            outcome.kind.as_str(),
            report.delta.tau3,
            report.omega.tau3,
            outcome.flags_in_window
        );
    }
    println!("artifact written to {}", out.display());
    Ok(())
}

fn cmd_batch(args: &ConfigArgs, seeds: &[u64], out: &PathBuf, filter: &str) -> Result<()> {
    let scenarios: Vec<(String, ScenarioConfig)> = match (&args.config, args.preset.as_deref()) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            vec![("config".to_string(), ScenarioConfig::from_toml_str(&text)?)]
        }
        (None, Some("ninebus")) => ninebus_family(),
        (None, Some("sixtyeightbus")) => sixtyeightbus_family(),
        _ => {
            return Err(Error::Invalid(
                "batch requires --config <file> or --preset <name>".into(),
            ))
        }
    };
    let outcome = run_batch(&scenarios, seeds, selection(filter)?)?;
    std::fs::create_dir_all(out)?;
    for run in &outcome.runs {
        let dir = out.join(format!("{}-seed{}", run.scenario, run.seed));
        match &run.result {
            Ok(artifact) => write_artifact(artifact, &dir)?,
            Err(e) => eprintln!("run {} seed {} failed: {e}", run.scenario, run.seed),
        }
    }
    std::fs::write(out.join("summary.txt"), &outcome.summary)?;
    print!("{}", outcome.summary);
    Ok(())
}

fn cmd_report(runs: &[PathBuf]) -> Result<()> {
    for dir in runs {
        let path = dir.join("indices.toml");
        let text = std::fs::read_to_string(&path)?;
        println!("== {} ==", dir.display());
        print!("{text}");
        println!();
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate { config, out } => cmd_simulate(&config.resolve()?, out),
        Command::Attack { config, stream, out } => cmd_attack(&config.resolve()?, stream, out),
        Command::Estimate {
            config,
            stream,
            out,
            filter,
        } => cmd_estimate(&config.resolve()?, stream, out, filter),
        Command::Pipeline {
            config,
            out,
            filter,
            plots,
        } => cmd_pipeline(&config.resolve()?, out, filter, *plots),
        Command::Batch {
            config,
            seeds,
            out,
            filter,
        } => cmd_batch(config, seeds, out, filter),
        Command::Report { run } => cmd_report(run),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
