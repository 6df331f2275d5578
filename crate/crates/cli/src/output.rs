//! Deterministic CSV and JSON serialization with atomic file replacement.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use swapsqueeze::experiments::{DynamicsRun, KuComparison, PerturbationRun, SweepResult, SweepVariable};

use crate::config::RunConfig;
use crate::CliError;

pub const TIMESERIES_HEADER: &str = "alpha_t,Sx,Sy,Sz,theta_z,dSzbar,r,xi2,entropy_J,schmidt_K";
pub const SWEEP_HEADER: &str = "param,t_star,r_min";
pub const PERTURB_HEADER: &str = "beta,alpha_t,r";
pub const KU_HEADER: &str = "alpha_t,swap_Sx,swap_Sy,swap_Sz,ku_Sx,ku_Sy,ku_Sz,ku_Sx_analytic,ku_xi2";

/// `printf("%.17g")`: 17 significant digits, trailing zeros dropped,
/// exponent form outside `1e-4 <= |x| < 1e17`. Negative zero prints as `0`
/// and undefined values as `NaN`.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exponent) = sci.split_once('e').expect("exponent form");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if !(-4..17).contains(&exponent) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exponent.abs())
    } else {
        let decimals = (16 - exponent) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn optional(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

fn csv_line(out: &mut String, fields: &[f64]) {
    let row: Vec<String> = fields.iter().map(|&v| format_g17(v)).collect();
    out.push_str(&row.join(","));
    out.push('\n');
}

pub fn timeseries_csv(run: &DynamicsRun) -> String {
    let mut out = format!("{TIMESERIES_HEADER}\n");
    for rec in &run.records {
        let [sx, sy, sz] = rec.moments.mean;
        let rep = &rec.report;
        csv_line(
            &mut out,
            &[
                rec.alpha_t,
                sx,
                sy,
                sz,
                rep.theta_z,
                rep.delta_s_zbar,
                optional(rep.r),
                optional(rep.xi2),
                rep.entropy_field,
                rep.schmidt_k,
            ],
        );
    }
    out
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for row in &result.rows {
        csv_line(&mut out, &[row.param, row.t_star, row.r_min]);
    }
    out
}

pub fn perturbation_csv(runs: &[PerturbationRun]) -> String {
    let mut out = format!("{PERTURB_HEADER}\n");
    for run in runs {
        for (&t, &r) in run.series.times.iter().zip(&run.series.r) {
            csv_line(&mut out, &[run.beta, t, r]);
        }
    }
    out
}

pub fn ku_csv(cmp: &KuComparison) -> String {
    let mut out = format!("{KU_HEADER}\n");
    for k in 0..cmp.times.len() {
        let [a, b, c] = cmp.swap_mean[k];
        let [d, e, f] = cmp.ku_mean[k];
        csv_line(&mut out, &[cmp.times[k], a, b, c, d, e, f, cmp.ku_analytic_sx[k], cmp.ku_xi2[k]]);
    }
    out
}

#[derive(Debug, Serialize)]
pub struct SweepRowSummary {
    pub param: f64,
    pub two_s: u32,
    pub two_j: u32,
    pub t_star: f64,
    pub r_min: f64,
    pub max_norm_drift: f64,
    pub max_energy_drift: f64,
    pub max_difference_drift: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub variable: &'static str,
    pub response: &'static str,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub rows: Vec<SweepRowSummary>,
}

impl From<&SweepResult> for SweepSummary {
    fn from(result: &SweepResult) -> Self {
        Self {
            variable: match result.variable {
                SweepVariable::S => "S",
                SweepVariable::J => "J",
            },
            response: match result.response {
                swapsqueeze::experiments::SweepResponse::TStar => "t_star",
                swapsqueeze::experiments::SweepResponse::RMin => "r_min",
            },
            slope: result.slope,
            slope_stderr: result.slope_stderr,
            intercept: result.intercept,
            residuals: result.residuals.clone(),
            rows: result
                .rows
                .iter()
                .map(|row| SweepRowSummary {
                    param: row.param,
                    two_s: row.space.spin.two_s(),
                    two_j: row.space.field.two_s(),
                    t_star: row.t_star,
                    r_min: row.r_min,
                    max_norm_drift: row.conservation.max_norm_drift,
                    max_energy_drift: row.conservation.max_energy_drift,
                    max_difference_drift: row.conservation.max_difference_drift,
                })
                .collect(),
        }
    }
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Config(format!("output path `{}` has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err)
}

/// `<dir>/<stem><suffix>` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum MetadataLine<'a> {
    Library { name: &'static str, version: &'static str },
    Config(&'a RunConfig),
}

/// JSON-lines metadata: the library version, then the resolved configuration.
pub fn metadata_jsonl(cfg: &RunConfig) -> Result<String, CliError> {
    let mut out = String::new();
    for line in [
        MetadataLine::Library {
            name: "swapsqueeze",
            version: env!("CARGO_PKG_VERSION"),
        },
        MetadataLine::Config(cfg),
    ] {
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn pretty_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes the primary CSV and its `.meta.jsonl` sibling.
pub fn emit_with_metadata(path: &Path, csv: &str, cfg: &RunConfig) -> Result<(), CliError> {
    write_atomic(path, csv.as_bytes())?;
    write_atomic(&sibling(path, ".meta.jsonl"), metadata_jsonl(cfg)?.as_bytes())
}

pub fn emit_timeseries(run: &DynamicsRun, path: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    if run.records.is_empty() {
        return Err(CliError::Config("no samples to write".into()));
    }
    emit_with_metadata(path, &timeseries_csv(run), cfg)
}

pub fn emit_sweep(result: &SweepResult, path: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    emit_with_metadata(path, &sweep_csv(result), cfg)?;
    write_atomic(&sibling(path, ".summary.json"), pretty_json(&SweepSummary::from(result))?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_printf() {
        let cases = [
            (0.0, "0"),
            (-0.0, "0"),
            (1.0, "1"),
            (2.0, "2"),
            (0.1, "0.10000000000000001"),
            (-1.5, "-1.5"),
            (1.0 / 3.0, "0.33333333333333331"),
            (123456.789, "123456.789"),
            (1e-5, "1.0000000000000001e-05"),
            (2.5e-13, "2.4999999999999999e-13"),
            (1e17, "1e+17"),
            (1e16, "10000000000000000"),
            (0.0001, "0.0001"),
            (std::f64::consts::PI, "3.1415926535897931"),
            (f64::NAN, "NaN"),
        ];
        for (x, expected) in cases {
            assert_eq!(format_g17(x), expected, "{x:e}");
        }
    }

    #[test]
    fn g17_round_trips() {
        for x in [0.1, 1.0 / 7.0, 6.02214076e23, -9.999_999_999_999_999e-5, 5e-324, f64::MAX] {
            assert_eq!(format_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("out/run.csv"), ".meta.jsonl"), PathBuf::from("out/run.meta.jsonl"));
        assert_eq!(sibling(Path::new("run"), ".summary.json"), PathBuf::from("run.summary.json"));
    }
}
