//! Command-line front end of `swapsqueeze`: configuration resolution,
//! dispatch to the experiments and deterministic output.

pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use swapsqueeze::experiments::{
    ku_comparison, perturbation_study, run_dynamics, run_sweep, Partner, SweepResponse, SweepSpec, SweepVariable,
};
use swapsqueeze::hamiltonian::{detuning_ratio_for_cancellation, effective_couplings, EffectiveCouplings};
use swapsqueeze::{LevelScheme, ModelParams, SpinQuantum};

pub use config::{parse_config, Cli, Command, Flags, RunConfig};
use output::{format_g17, pretty_json, write_atomic};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Simulation(#[from] swapsqueeze::Error),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<std::io::Error> for CliError {
    fn from(source: std::io::Error) -> Self {
        Self::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }
    }
}

/// Runs one resolved configuration. Without an output path the CSV goes to
/// `out` and any summary to `diag`.
pub fn run(cfg: &RunConfig, out: &mut dyn Write, diag: &mut dyn Write) -> Result<(), CliError> {
    match cfg.command {
        Command::Dynamics => dynamics(cfg, out),
        Command::SweepTstar | Command::SweepRmin => sweep(cfg, out, diag),
        Command::Perturb => perturb(cfg, out, diag),
        Command::KuCompare => ku_compare(cfg, out, diag),
        Command::Levelscheme => levelscheme(cfg, out),
    }
}

fn spins(cfg: &RunConfig) -> (SpinQuantum, SpinQuantum) {
    (
        SpinQuantum::from_twice(cfg.two_s.unwrap_or(0)),
        SpinQuantum::from_twice(cfg.two_j.unwrap_or(0)),
    )
}

fn emit(cfg: &RunConfig, csv: &str, summary: Option<String>, out: &mut dyn Write, diag: &mut dyn Write) -> Result<(), CliError> {
    match &cfg.output {
        Some(path) => {
            output::emit_with_metadata(path, csv, cfg)?;
            if let Some(summary) = summary {
                write_atomic(&output::sibling(path, ".summary.json"), summary.as_bytes())?;
            }
        }
        None => {
            out.write_all(csv.as_bytes())?;
            if let Some(summary) = summary {
                diag.write_all(summary.as_bytes())?;
            }
        }
    }
    Ok(())
}

fn dynamics(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let (spin, field) = spins(cfg);
    let run = run_dynamics(spin, field, ModelParams::new(cfg.alpha, cfg.beta), cfg.t_max(), &cfg.propagator)?;
    match &cfg.output {
        Some(path) => output::emit_timeseries(&run, path, cfg),
        None => Ok(out.write_all(output::timeseries_csv(&run).as_bytes())?),
    }
}

fn sweep(cfg: &RunConfig, out: &mut dyn Write, diag: &mut dyn Write) -> Result<(), CliError> {
    let (variable, response, partner) = match cfg.command {
        Command::SweepTstar => (SweepVariable::J, SweepResponse::TStar, cfg.two_s),
        _ => (SweepVariable::S, SweepResponse::RMin, cfg.two_j),
    };
    let partner = match (cfg.ratio, partner) {
        (Some(ratio), _) => Partner::Ratio(ratio),
        (None, Some(twice)) => Partner::Fixed(SpinQuantum::from_twice(twice)),
        (None, None) => return Err(CliError::Config(format!("`{}` needs a partner spin", cfg.command))),
    };
    let spec = SweepSpec {
        variable,
        values: cfg.values.iter().map(|&v| SpinQuantum::from_twice(v)).collect(),
        partner,
        params: ModelParams::new(cfg.alpha, cfg.beta),
        t_max: cfg.t_max(),
        dt: cfg.dt(),
        propagator: cfg.propagator,
        minimum: cfg.minimum,
        threads: cfg.threads,
    };
    let result = run_sweep(&spec, response)?;
    match &cfg.output {
        Some(path) => output::emit_sweep(&result, path, cfg),
        None => {
            let summary = serde_json::to_string(&output::SweepSummary::from(&result))? + "\n";
            emit(cfg, &output::sweep_csv(&result), Some(summary), out, diag)
        }
    }
}

#[derive(Serialize)]
struct PerturbationSummary {
    beta: f64,
    t_star: Option<f64>,
    r_min: Option<f64>,
    max_r_before_t_star: Option<f64>,
    max_norm_drift: f64,
    max_energy_drift: f64,
    max_difference_drift: f64,
}

fn perturb(cfg: &RunConfig, out: &mut dyn Write, diag: &mut dyn Write) -> Result<(), CliError> {
    let (spin, field) = spins(cfg);
    let runs = perturbation_study(spin, field, cfg.alpha, &cfg.betas, cfg.t_max(), &cfg.propagator)?;
    let summary: Vec<PerturbationSummary> = runs
        .iter()
        .map(|run| PerturbationSummary {
            beta: run.beta,
            t_star: run.series.minimum.map(|m| m.t_star),
            r_min: run.series.minimum.map(|m| m.r_min),
            max_r_before_t_star: run.max_r_before_t_star,
            max_norm_drift: run.series.conservation.max_norm_drift,
            max_energy_drift: run.series.conservation.max_energy_drift,
            max_difference_drift: run.series.conservation.max_difference_drift,
        })
        .collect();
    emit(cfg, &output::perturbation_csv(&runs), Some(pretty_json(&summary)?), out, diag)
}

#[derive(Serialize)]
struct KuSummary<'a> {
    ku_max_deviation: f64,
    ku_transverse_max: f64,
    swap_transverse_max: f64,
    noise_floor: f64,
    swap_transverse_frequency: Option<f64>,
    note: Option<&'a str>,
}

fn ku_compare(cfg: &RunConfig, out: &mut dyn Write, diag: &mut dyn Write) -> Result<(), CliError> {
    let (spin, field) = spins(cfg);
    let cmp = ku_comparison(spin, field, cfg.alpha, cfg.t_max(), &cfg.propagator)?;
    let summary = KuSummary {
        ku_max_deviation: cmp.ku_max_deviation,
        ku_transverse_max: cmp.ku_transverse_max,
        swap_transverse_max: cmp.swap_transverse_max,
        noise_floor: cmp.noise_floor,
        swap_transverse_frequency: cmp.swap_transverse_frequency,
        note: cmp.note.as_deref(),
    };
    emit(cfg, &output::ku_csv(&cmp), Some(pretty_json(&summary)?), out, diag)
}

#[derive(Serialize)]
struct LevelSchemeReport {
    scheme: LevelScheme,
    cancellation_ratio: f64,
    couplings: EffectiveCouplings,
}

fn levelscheme(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let scheme = LevelScheme::rubidium87().with_detunings(cfg.delta, cfg.big_delta);
    let report = LevelSchemeReport {
        scheme,
        cancellation_ratio: detuning_ratio_for_cancellation(&scheme)?,
        couplings: effective_couplings(&scheme)?,
    };
    writeln!(out, "cancellation_ratio delta/Delta = {}", format_g17(report.cancellation_ratio))?;
    writeln!(out, "delta = {}, Delta = {}", format_g17(scheme.delta), format_g17(scheme.big_delta))?;
    writeln!(out, "diag_minus = {}", format_g17(report.couplings.diag_minus))?;
    writeln!(out, "diag_plus = {}", format_g17(report.couplings.diag_plus))?;
    writeln!(out, "offdiag = {}", format_g17(report.couplings.offdiag))?;
    if let Some(path) = &cfg.output {
        write_atomic(path, pretty_json(&report)?.as_bytes())?;
    }
    Ok(())
}
