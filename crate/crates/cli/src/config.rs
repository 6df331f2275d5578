//! Run configuration: command-line flags layered over an optional
//! `key = value` file layered over defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use swapsqueeze::experiments::MinimumKind;
use swapsqueeze::{Method, PropagatorConfig};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "swapsqueeze", version, about = "Spin squeezing by atom-photon entanglement swapping")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandLine,
}

#[derive(Debug, Subcommand)]
pub enum CommandLine {
    /// Time series of squeezing and entanglement for one (S, J).
    Dynamics(Flags),
    /// Time of maximum squeezing against J, with a log-log fit.
    SweepTstar(Flags),
    /// Depth of maximum squeezing against S, with a log-log fit.
    SweepRmin(Flags),
    /// r(t) for several strengths of the Jz Sz perturbation.
    Perturb(Flags),
    /// Mean spin under the swap and one-axis-twisting Hamiltonians.
    KuCompare(Flags),
    /// Effective couplings of the two-ground-state level scheme.
    Levelscheme(Flags),
}

impl CommandLine {
    pub fn split(self) -> (Command, Flags) {
        match self {
            Self::Dynamics(f) => (Command::Dynamics, f),
            Self::SweepTstar(f) => (Command::SweepTstar, f),
            Self::SweepRmin(f) => (Command::SweepRmin, f),
            Self::Perturb(f) => (Command::Perturb, f),
            Self::KuCompare(f) => (Command::KuCompare, f),
            Self::Levelscheme(f) => (Command::Levelscheme, f),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// File of `key = value` lines; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Twice the atomic spin S.
    #[arg(long)]
    pub two_s: Option<u32>,
    /// Twice the field spin J.
    #[arg(long)]
    pub two_j: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Final time in units of 1/alpha.
    #[arg(long, allow_hyphen_values = true)]
    pub t_max: Option<f64>,
    /// Sampling interval in units of 1/alpha.
    #[arg(long, allow_hyphen_values = true)]
    pub dt: Option<f64>,
    /// auto, dense_eig or krylov.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub dense_threshold: Option<usize>,
    #[arg(long)]
    pub krylov_max_dim: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub step_tolerance: Option<f64>,
    /// Comma-separated twice-spins of the swept quantum number.
    #[arg(long)]
    pub values: Option<String>,
    /// J/S held fixed during a sweep.
    #[arg(long, allow_hyphen_values = true)]
    pub ratio: Option<f64>,
    /// first or deepest local minimum of r(t).
    #[arg(long)]
    pub minimum: Option<String>,
    /// Sweep worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Comma-separated perturbation strengths.
    #[arg(long, allow_hyphen_values = true)]
    pub betas: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub big_delta: Option<f64>,
    /// Output file; metadata and summaries go next to it.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Dynamics,
    SweepTstar,
    SweepRmin,
    Perturb,
    KuCompare,
    Levelscheme,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dynamics => "dynamics",
            Self::SweepTstar => "sweep-tstar",
            Self::SweepRmin => "sweep-rmin",
            Self::Perturb => "perturb",
            Self::KuCompare => "ku-compare",
            Self::Levelscheme => "levelscheme",
        }
    }

    fn accepts(self, key: Key) -> bool {
        use Key::*;
        let evolution = matches!(key, Alpha | TMax | Dt | Method | DenseThreshold | KrylovMaxDim | StepTolerance | Output);
        match self {
            Self::Dynamics => evolution || matches!(key, TwoS | TwoJ | Beta),
            Self::SweepTstar => evolution || matches!(key, TwoS | Beta | Values | Ratio | Minimum | Threads),
            Self::SweepRmin => evolution || matches!(key, TwoJ | Beta | Values | Ratio | Minimum | Threads),
            Self::Perturb => evolution || matches!(key, TwoS | TwoJ | Betas),
            Self::KuCompare => evolution || matches!(key, TwoS | TwoJ),
            Self::Levelscheme => matches!(key, Delta | BigDelta | Output),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    TwoS,
    TwoJ,
    Alpha,
    Beta,
    TMax,
    Dt,
    Method,
    DenseThreshold,
    KrylovMaxDim,
    StepTolerance,
    Values,
    Ratio,
    Minimum,
    Threads,
    Betas,
    Delta,
    BigDelta,
    Output,
}

const KEYS: [(Key, &str); 18] = [
    (Key::TwoS, "two_s"),
    (Key::TwoJ, "two_j"),
    (Key::Alpha, "alpha"),
    (Key::Beta, "beta"),
    (Key::TMax, "t_max"),
    (Key::Dt, "dt"),
    (Key::Method, "method"),
    (Key::DenseThreshold, "dense_threshold"),
    (Key::KrylovMaxDim, "krylov_max_dim"),
    (Key::StepTolerance, "step_tolerance"),
    (Key::Values, "values"),
    (Key::Ratio, "ratio"),
    (Key::Minimum, "minimum"),
    (Key::Threads, "threads"),
    (Key::Betas, "betas"),
    (Key::Delta, "delta"),
    (Key::BigDelta, "big_delta"),
    (Key::Output, "output"),
];

impl Key {
    fn name(self) -> &'static str {
        KEYS.iter().find(|(k, _)| *k == self).map(|(_, n)| *n).unwrap_or("?")
    }

    fn parse(raw: &str) -> Option<Self> {
        let normalized = raw.trim().replace('-', "_");
        KEYS.iter().find(|(_, n)| *n == normalized).map(|(k, _)| *k)
    }
}

/// Where a setting came from, for diagnostics.
#[derive(Debug, Clone)]
struct Setting {
    value: String,
    origin: String,
}

type Settings = BTreeMap<Key, Setting>;

fn parse_file(path: &Path) -> Result<Settings, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_file_text(&text, &path.display().to_string())
}

fn parse_file_text(text: &str, name: &str) -> Result<Settings, CliError> {
    let mut settings = Settings::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let origin = format!("{name}:{}", n + 1);
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{origin}: expected `key = value`")))?;
        let key = Key::parse(key).ok_or_else(|| CliError::Config(format!("{origin}: unknown key `{}`", key.trim())))?;
        if settings.contains_key(&key) {
            return Err(CliError::Config(format!("{origin}: `{}` set twice", key.name())));
        }
        settings.insert(
            key,
            Setting {
                value: value.trim().to_string(),
                origin,
            },
        );
    }
    Ok(settings)
}

fn flag_settings(flags: &Flags) -> Settings {
    let mut settings = Settings::new();
    let mut put = |key: Key, value: Option<String>| {
        if let Some(value) = value {
            settings.insert(
                key,
                Setting {
                    value,
                    origin: format!("--{}", key.name().replace('_', "-")),
                },
            );
        }
    };
    put(Key::TwoS, flags.two_s.map(|v| v.to_string()));
    put(Key::TwoJ, flags.two_j.map(|v| v.to_string()));
    put(Key::Alpha, flags.alpha.map(|v| v.to_string()));
    put(Key::Beta, flags.beta.map(|v| v.to_string()));
    put(Key::TMax, flags.t_max.map(|v| v.to_string()));
    put(Key::Dt, flags.dt.map(|v| v.to_string()));
    put(Key::Method, flags.method.clone());
    put(Key::DenseThreshold, flags.dense_threshold.map(|v| v.to_string()));
    put(Key::KrylovMaxDim, flags.krylov_max_dim.map(|v| v.to_string()));
    put(Key::StepTolerance, flags.step_tolerance.map(|v| v.to_string()));
    put(Key::Values, flags.values.clone());
    put(Key::Ratio, flags.ratio.map(|v| v.to_string()));
    put(Key::Minimum, flags.minimum.clone());
    put(Key::Threads, flags.threads.map(|v| v.to_string()));
    put(Key::Betas, flags.betas.clone());
    put(Key::Delta, flags.delta.map(|v| v.to_string()));
    put(Key::BigDelta, flags.big_delta.map(|v| v.to_string()));
    put(Key::Output, flags.output.as_ref().map(|p| p.display().to_string()));
    settings
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub two_s: Option<u32>,
    pub two_j: Option<u32>,
    pub alpha: f64,
    pub beta: f64,
    pub t_max: Option<f64>,
    pub propagator: PropagatorConfig,
    pub values: Vec<u32>,
    pub ratio: Option<f64>,
    pub minimum: MinimumKind,
    pub threads: Option<usize>,
    pub betas: Vec<f64>,
    pub delta: f64,
    pub big_delta: f64,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    fn defaults(command: Command) -> Self {
        Self {
            command,
            two_s: None,
            two_j: None,
            alpha: 1.0,
            beta: 0.0,
            t_max: None,
            propagator: PropagatorConfig::default(),
            values: Vec::new(),
            ratio: None,
            minimum: match command {
                Command::SweepRmin => MinimumKind::Deepest,
                _ => MinimumKind::First,
            },
            threads: None,
            betas: vec![0.0, 0.1, 0.5],
            delta: 20.0,
            big_delta: 1.0,
            output: None,
        }
    }

    pub fn t_max(&self) -> f64 {
        self.t_max.unwrap_or(0.0)
    }

    pub fn dt(&self) -> f64 {
        self.propagator.dt
    }
}

fn value<T: FromStr>(s: &Setting, what: &str) -> Result<T, CliError> {
    s.value
        .parse()
        .map_err(|_| CliError::Config(format!("{}: `{}` is not a valid {what}", s.origin, s.value)))
}

fn list<T: FromStr>(s: &Setting, what: &str) -> Result<Vec<T>, CliError> {
    s.value
        .split(',')
        .map(|item| {
            item.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{}: `{}` is not a valid {what}", s.origin, item.trim())))
        })
        .collect()
}

fn range_error(s: &Setting, requirement: &str) -> CliError {
    CliError::Config(format!("{}: `{}` out of range ({requirement})", s.origin, s.value))
}

fn finite(s: &Setting) -> Result<f64, CliError> {
    let v: f64 = value(s, "number")?;
    if !v.is_finite() {
        return Err(range_error(s, "must be finite"));
    }
    Ok(v)
}

fn positive(s: &Setting) -> Result<f64, CliError> {
    let v = finite(s)?;
    if v <= 0.0 {
        return Err(range_error(s, "must be positive"));
    }
    Ok(v)
}

/// Resolves `flags` (and the file they name) for `command`.
pub fn parse_config(command: Command, flags: &Flags) -> Result<RunConfig, CliError> {
    let mut settings = match &flags.config {
        Some(path) => parse_file(path)?,
        None => Settings::new(),
    };
    settings.extend(flag_settings(flags));
    resolve(command, &settings)
}

fn resolve(command: Command, settings: &Settings) -> Result<RunConfig, CliError> {
    for (key, s) in settings {
        if !command.accepts(*key) {
            return Err(CliError::Config(format!(
                "{}: `{}` does not apply to `{command}`",
                s.origin,
                key.name()
            )));
        }
    }
    let mut cfg = RunConfig::defaults(command);
    for (key, s) in settings {
        match key {
            Key::TwoS => cfg.two_s = Some(value(s, "twice-spin")?),
            Key::TwoJ => cfg.two_j = Some(value(s, "twice-spin")?),
            Key::Alpha => cfg.alpha = finite(s)?,
            Key::Beta => cfg.beta = finite(s)?,
            Key::TMax => cfg.t_max = Some(positive(s)?),
            Key::Dt => cfg.propagator.dt = positive(s)?,
            Key::Method => {
                cfg.propagator.method =
                    Method::from_str(&s.value).map_err(|e| CliError::Config(format!("{}: {e}", s.origin)))?
            }
            Key::DenseThreshold => {
                cfg.propagator.dense_threshold = value(s, "integer")?;
                if cfg.propagator.dense_threshold < 2 {
                    return Err(range_error(s, "at least 2"));
                }
            }
            Key::KrylovMaxDim => {
                cfg.propagator.krylov_max_dim = value(s, "integer")?;
                if cfg.propagator.krylov_max_dim < 2 {
                    return Err(range_error(s, "at least 2"));
                }
            }
            Key::StepTolerance => cfg.propagator.step_tolerance = positive(s)?,
            Key::Values => {
                cfg.values = list(s, "twice-spin")?;
                if cfg.values.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(range_error(s, "must be strictly increasing"));
                }
                if cfg.values.contains(&0) {
                    return Err(range_error(s, "spins must be positive for a log-log fit"));
                }
            }
            Key::Ratio => cfg.ratio = Some(positive(s)?),
            Key::Minimum => {
                cfg.minimum =
                    MinimumKind::from_str(&s.value).map_err(|e| CliError::Config(format!("{}: {e}", s.origin)))?
            }
            Key::Threads => {
                let threads: usize = value(s, "integer")?;
                if threads == 0 {
                    return Err(range_error(s, "at least 1"));
                }
                cfg.threads = Some(threads);
            }
            Key::Betas => {
                cfg.betas = list(s, "number")?;
                if cfg.betas.iter().any(|b: &f64| !b.is_finite()) {
                    return Err(range_error(s, "must be finite"));
                }
            }
            Key::Delta => cfg.delta = finite(s)?,
            Key::BigDelta => cfg.big_delta = finite(s)?,
            Key::Output => cfg.output = Some(PathBuf::from(&s.value)),
        }
    }
    check_required(&cfg, settings)?;
    Ok(cfg)
}

fn check_required(cfg: &RunConfig, settings: &Settings) -> Result<(), CliError> {
    let missing = |what: &str| CliError::Config(format!("`{}` needs `{what}`", cfg.command));
    let command = cfg.command;
    if command != Command::Levelscheme && cfg.t_max.is_none() {
        return Err(missing("t_max"));
    }
    match command {
        Command::Dynamics | Command::Perturb | Command::KuCompare => {
            if cfg.two_s.is_none() {
                return Err(missing("two_s"));
            }
            if cfg.two_j.is_none() {
                return Err(missing("two_j"));
            }
        }
        Command::SweepTstar | Command::SweepRmin => {
            if cfg.values.is_empty() {
                return Err(missing("values"));
            }
            let partner = if command == Command::SweepTstar { cfg.two_s } else { cfg.two_j };
            let partner_key = if command == Command::SweepTstar { "two_s" } else { "two_j" };
            match (partner, cfg.ratio) {
                (None, None) => return Err(missing(&format!("either ratio or {partner_key}"))),
                (Some(_), Some(_)) => {
                    return Err(CliError::Config(format!(
                        "`{command}` takes ratio or {partner_key}, not both"
                    )))
                }
                _ => {}
            }
        }
        Command::Levelscheme => {}
    }
    if let (Some(t_max), Some(dt)) = (cfg.t_max, settings.get(&Key::Dt)) {
        if cfg.propagator.dt > t_max {
            return Err(range_error(dt, "dt must not exceed t_max"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(args: &[&str]) -> (Command, Flags) {
        let mut argv = vec!["swapsqueeze"];
        argv.extend_from_slice(args);
        Cli::try_parse_from(argv).unwrap().command.split()
    }

    fn resolve_args(args: &[&str]) -> Result<RunConfig, CliError> {
        let (command, f) = flags(args);
        parse_config(command, &f)
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn dynamics_flags_map_to_spins() {
        let cfg = resolve_args(&["dynamics", "--two-s", "4", "--two-j", "4", "--t-max", "3.1416"]).unwrap();
        assert_eq!(cfg.two_s, Some(4));
        assert_eq!(cfg.two_j, Some(4));
        assert_eq!(cfg.t_max, Some(3.1416));
        assert_eq!(cfg.alpha, 1.0);
        assert_eq!(cfg.propagator, PropagatorConfig::default());
    }

    #[test]
    fn beta_rejected_for_one_axis_twisting() {
        let err = resolve_args(&["ku-compare", "--two-s", "4", "--two-j", "4", "--t-max", "1", "--beta", "0.1"])
            .unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
    }

    #[test]
    fn missing_fields_reported() {
        let err = resolve_args(&["dynamics", "--two-s", "4", "--t-max", "1"]).unwrap_err();
        assert!(err.to_string().contains("two_j"));
        assert!(resolve_args(&["sweep-tstar", "--values", "40,48", "--t-max", "1"]).is_err());
        assert!(resolve_args(&["sweep-tstar", "--values", "40,48", "--t-max", "1", "--ratio", "2", "--two-s", "4"]).is_err());
    }

    #[test]
    fn out_of_range_values_rejected() {
        assert!(resolve_args(&["dynamics", "--two-s", "4", "--two-j", "4", "--t-max", "-1"]).is_err());
        assert!(resolve_args(&["dynamics", "--two-s", "4", "--two-j", "4", "--t-max", "1", "--dt", "0"]).is_err());
        assert!(resolve_args(&["dynamics", "--two-s", "4", "--two-j", "4", "--t-max", "1", "--dt", "2"]).is_err());
        assert!(resolve_args(&["dynamics", "--two-s", "4", "--two-j", "4", "--t-max", "1", "--method", "rk4"]).is_err());
        assert!(resolve_args(&["sweep-tstar", "--values", "48,40", "--ratio", "2", "--t-max", "1"]).is_err());
    }

    #[test]
    fn file_settings_and_precedence() {
        let file = parse_file_text("# fig 2\ntwo_s = 4\ntwo-j = 8\nt_max = 2 # comment\ndt = 0.05\n", "f").unwrap();
        let mut merged = file.clone();
        merged.extend(flag_settings(&Flags {
            dt: Some(0.1),
            ..Flags::default()
        }));
        let cfg = resolve(Command::Dynamics, &merged).unwrap();
        assert_eq!(cfg.two_j, Some(8));
        assert_eq!(cfg.propagator.dt, 0.1);
        assert_eq!(resolve(Command::Dynamics, &file).unwrap().propagator.dt, 0.05);
    }

    #[test]
    fn bad_files_rejected() {
        let err = parse_file_text("two_s = 4\ncolour = red\n", "f").unwrap_err();
        assert!(err.to_string().contains("f:2"), "{err}");
        assert!(parse_file_text("two_s 4\n", "f").is_err());
        assert!(parse_file_text("two_s = 4\ntwo_s = 6\n", "f").is_err());
    }

    #[test]
    fn levelscheme_defaults() {
        let cfg = resolve_args(&["levelscheme"]).unwrap();
        assert_eq!((cfg.delta, cfg.big_delta), (20.0, 1.0));
        assert!(resolve_args(&["levelscheme", "--two-s", "2"]).is_err());
    }

    #[test]
    fn sweep_defaults_differ_in_minimum() {
        let t = resolve_args(&["sweep-tstar", "--values", "40", "--ratio", "2", "--t-max", "1"]).unwrap();
        let r = resolve_args(&["sweep-rmin", "--values", "80", "--two-j", "80", "--t-max", "1"]).unwrap();
        assert_eq!(t.minimum, MinimumKind::First);
        assert_eq!(r.minimum, MinimumKind::Deepest);
    }
}
