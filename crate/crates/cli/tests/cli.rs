use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use swapsqueeze::experiments::{ConservationCheck, SweepResponse, SweepResult, SweepRow, SweepVariable};
use swapsqueeze::fit::power_law_fit;
use swapsqueeze::{ProductSpace, SpinQuantum};
use swapsqueeze_cli::output::{pretty_json, sweep_csv, SweepSummary, SWEEP_HEADER, TIMESERIES_HEADER};

fn swapsqueeze(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swapsqueeze")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = swapsqueeze(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = swapsqueeze(args);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("swapsqueeze: "), "{stderr}");
    stderr
}

fn fields(line: &str) -> Vec<f64> {
    line.split(',').map(|v| v.parse().unwrap()).collect()
}

#[test]
fn timeseries_file_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    ok(&["dynamics", "--two-s", "4", "--two-j", "4", "--t-max", "1", "--dt", "0.1", "--output", path.to_str().unwrap()]);

    let csv = fs::read_to_string(&path).unwrap();
    assert!(!csv.contains('\r'));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], TIMESERIES_HEADER);
    assert_eq!(lines.len() - 1, 11);
    let first = fields(lines[1]);
    let expected = [0.0, 2.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0];
    for (got, want) in first.iter().zip(expected) {
        assert!((got - want).abs() < 1e-12, "{}", lines[1]);
    }

    let meta = fs::read_to_string(dir.path().join("run.meta.jsonl")).unwrap();
    let records: Vec<Value> = meta.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["record"], "library");
    assert_eq!(records[0]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(records[1]["record"], "config");
    assert_eq!(records[1]["two_s"], 4);
    assert_eq!(records[1]["t_max"], 1.0);
}

#[test]
fn row_count_follows_the_grid() {
    for (t_max, dt, rows) in [("0.25", "0.1", 3), ("0.5", "0.05", 11), ("0.01", "0.01", 2)] {
        let csv = ok(&["dynamics", "--two-s", "2", "--two-j", "2", "--t-max", t_max, "--dt", dt]);
        assert_eq!(csv.lines().count() - 1, rows, "t_max {t_max}, dt {dt}");
    }
}

#[test]
fn sweep_outputs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tstar.csv");
    ok(&[
        "sweep-tstar", "--values", "16,20,24", "--ratio", "2", "--t-max", "0.4", "--dt", "0.002", "--threads", "2",
        "--output", path.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], SWEEP_HEADER);
    let params: Vec<f64> = lines[1..].iter().map(|l| fields(l)[0]).collect();
    assert_eq!(params, [8.0, 10.0, 12.0]);

    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("tstar.summary.json")).unwrap()).unwrap();
    for key in ["slope", "slope_stderr", "intercept"] {
        assert!(summary[key].is_f64(), "{key}");
    }
    assert!((summary["slope"].as_f64().unwrap() + 1.0).abs() < 0.2);
    assert_eq!(summary["rows"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("tstar.meta.jsonl").exists());
}

#[test]
fn synthetic_inverse_law_has_unit_slope() {
    let js = [60.0, 64.0, 68.0];
    let t_star: Vec<f64> = js.iter().map(|j| 1.36 / j).collect();
    let fit = power_law_fit(&js, &t_star).unwrap();
    let conservation = ConservationCheck {
        max_norm_drift: 0.0,
        max_energy_drift: 0.0,
        max_difference_drift: 0.0,
        energy_scale: 1.0,
    };
    let rows = js
        .iter()
        .zip(&t_star)
        .map(|(&j, &t)| SweepRow {
            param: j,
            space: ProductSpace::new(SpinQuantum::integer(j as u32 / 2), SpinQuantum::integer(j as u32)),
            t_star: t,
            r_min: 0.8,
            conservation,
        })
        .collect();
    let result = SweepResult {
        variable: SweepVariable::J,
        response: SweepResponse::TStar,
        rows,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        intercept: fit.intercept,
        residuals: fit.residuals,
    };
    let json: Value = serde_json::from_str(&pretty_json(&SweepSummary::from(&result)).unwrap()).unwrap();
    assert!((json["slope"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert_eq!(sweep_csv(&result).lines().count(), 4);
}

#[test]
fn stdout_carries_csv_and_stderr_the_summary() {
    let out = swapsqueeze(&["sweep-rmin", "--values", "8,12", "--two-j", "16", "--t-max", "0.3", "--dt", "0.002"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("param,t_star,r_min\n"));
    let summary: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(summary["response"], "r_min");
}

#[test]
fn levelscheme_reports_the_cancellation_ratio() {
    let text = ok(&["levelscheme"]);
    assert!(text.starts_with("cancellation_ratio delta/Delta = "));
    for key in ["diag_minus", "diag_plus", "offdiag"] {
        assert!(text.contains(&format!("{key} = ")), "{key}");
    }
}

#[test]
fn invalid_input_is_rejected_with_one_line() {
    let base = ["--two-s", "4", "--two-j", "4", "--t-max", "1"];
    let with = |cmd: &str, extra: &[&str]| {
        let mut v = vec![cmd];
        v.extend(base);
        v.extend(extra);
        fails(&v)
    };
    assert!(with("ku-compare", &["--beta", "0.1"]).contains("beta"));
    with("dynamics", &["--t-max", "-1"]);
    with("dynamics", &["--dt", "2"]);
    with("dynamics", &["--method", "euler"]);
    fails(&["dynamics", "--two-s", "4"]);
    fails(&["sweep-tstar", "--values", "8", "--t-max", "1"]);
    fails(&["dynamics", "--no-such-flag"]);
    fails(&["bogus"]);
}

fn leftovers(dir: &Path) -> Vec<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".tmp"))
        .collect()
}

#[test]
fn unwritable_output_leaves_nothing_behind() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent").join("run.csv");
    let args = ["dynamics", "--two-s", "2", "--two-j", "2", "--t-max", "0.1", "--output"];
    let mut v = args.to_vec();
    v.push(missing.to_str().unwrap());
    fails(&v);
    assert!(!missing.exists());

    // A directory in the way makes the final rename fail.
    let blocked = dir.path().join("blocked.csv");
    fs::create_dir(&blocked).unwrap();
    let mut v = args.to_vec();
    v.push(blocked.to_str().unwrap());
    fails(&v);
    assert!(blocked.is_dir());
    assert!(leftovers(dir.path()).is_empty());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    fs::write(&config, "# small run\ntwo-s = 4\ntwo_j = 6\nt_max = 0.2\ndt = 0.1\n").unwrap();
    let config = config.to_str().unwrap();

    assert_eq!(ok(&["dynamics", "--config", config]).lines().count() - 1, 3);
    assert_eq!(ok(&["dynamics", "--config", config, "--t-max", "0.5"]).lines().count() - 1, 6);

    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "two_s = 4\ncolour = blue\n").unwrap();
    let msg = fails(&["dynamics", "--config", bad.to_str().unwrap(), "--t-max", "1", "--two-j", "4"]);
    assert!(msg.contains(":2"), "{msg}");
}
