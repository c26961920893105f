use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn qsmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsmc")).args(args).output().expect("binary runs")
}

fn aircraft() -> String {
    scenarios().join("aircraft.scenario").display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Copy of the benchmark scenario with one line replaced.
fn variant(dir: &Path, from: &str, to: &str) -> String {
    let text = fs::read_to_string(aircraft()).unwrap();
    assert!(text.contains(from));
    let path = dir.join("variant.scenario");
    fs::write(&path, text.replace(from, to)).unwrap();
    path.display().to_string()
}

const H_LINE: &str = "H = 0.035306 0.082634 0.076550; 0.011937 -0.210157 0.008324";

#[test]
fn run_writes_one_csv_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qsmc(&["run", &aircraft(), "--controller", "mm1", "--out", out, "--plot"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("aircraft_mm1.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("k,t,x1,"));
    assert_eq!(lines.count(), 2001);
    for tag in ["u", "x", "s"] {
        let svg = fs::read_to_string(dir.path().join(format!("aircraft_mm1_{tag}.svg"))).unwrap();
        assert!(svg.starts_with("<svg"));
    }
    let summary = fs::read_to_string(dir.path().join("aircraft_mm1_summary.toml")).unwrap();
    assert!(summary.contains("steps = 2000"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args =
        ["run", &aircraft(), "--controller", "mm2", "--noise", "0.005", "--seed", "4", "--horizon", "2", "--out", out];
    qsmc(&args);
    let first = fs::read(dir.path().join("aircraft_mm2.csv")).unwrap();
    qsmc(&args);
    assert_eq!(first, fs::read(dir.path().join("aircraft_mm2.csv")).unwrap());
}

#[test]
fn malformed_h_is_a_configuration_error_in_the_surface_section() {
    let dir = tempfile::tempdir().unwrap();
    let path = variant(dir.path(), H_LINE, "H = 0.035306 0.082634; 0.011937 -0.210157");
    let o = qsmc(&["run", &path]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("[surface] H (line 11)"), "{err}");
}

#[test]
fn singular_hcb_is_an_assumption_violation() {
    // H has full row rank, but its first row reads the unactuated yaw angle,
    // so HC·B has a zero row
    let dir = tempfile::tempdir().unwrap();
    let path = variant(dir.path(), H_LINE, "H = 0 0 1; 1 0 0");
    let o = qsmc(&["run", &path, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("surface assumption"));
}

#[test]
fn benchmark_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsmc(&["verify", &aircraft(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("CERTIFIED") && !stdout.contains("NOT CERTIFIED"));
    let report = fs::read_to_string(dir.path().join("aircraft_verify.toml")).unwrap();
    assert!(report.contains("certified = true"));
}

#[test]
fn alpha_outside_unit_interval_is_rejected() {
    for alpha in ["1.5", "0", "-0.2"] {
        let flag = format!("--alpha={alpha}");
        let o = qsmc(&["verify", &aircraft(), &flag]);
        assert_eq!(o.status.code(), Some(2), "alpha {alpha}: {}", stderr(&o));
        assert!(stderr(&o).contains("[controller] alpha"));
    }
}

#[test]
fn inconsistent_alpha_and_beta_are_rejected() {
    let o = qsmc(&["run", &aircraft(), "--alpha", "0.9", "--beta", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn destabilized_surface_fails_verification_with_radius_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenarios().join("aircraft_destabilized.scenario");
    let o = qsmc(&["verify", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("rho first") && stdout.contains("NOT CERTIFIED"));
    let o = qsmc(&["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn proposed_law_sweep_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsmc(&["sweep", &aircraft(), "--controller", "mm1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("expected 1 ± 0.3 → ok"));
}

#[test]
fn deadbeat_peak_sweep_reports_negative_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsmc(&[
        "sweep",
        &aircraft(),
        "--controller",
        "m1",
        "--metric",
        "u_peak",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let toml = fs::read_to_string(dir.path().join("aircraft_m1_sweep.toml")).unwrap();
    let slope: f64 =
        toml.lines().find_map(|l| l.strip_prefix("slope = ")).and_then(|v| v.parse().ok()).expect("slope recorded");
    assert!((-1.3..=-0.7).contains(&slope), "{slope}");
}

#[test]
fn unstable_ladder_point_is_flagged_and_excluded() {
    // β = 30 gives α = 1 − 30·0.04 < 0 at the coarsest period
    let dir = tempfile::tempdir().unwrap();
    let o = qsmc(&[
        "sweep",
        &aircraft(),
        "--controller",
        "mm1",
        "--beta",
        "30",
        "--ladder",
        "0.04,0.02,0.01,0.005",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(dir.path().join("aircraft_mm1_sweep.csv")).unwrap();
    let flags: Vec<&str> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(flags, vec!["true", "true", "true", "false"], "{csv}");
    assert!(String::from_utf8_lossy(&o.stdout).contains("over 3 points"));
}

#[test]
fn benchmark_prints_all_four_laws() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsmc(&["benchmark", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    for law in ["m1", "m2", "mm1", "mm2"] {
        assert!(stdout.lines().any(|l| l.trim_start().starts_with(law)));
        assert!(dir.path().join(format!("aircraft_{law}.csv")).exists());
    }
}

#[test]
fn unknown_controller_is_a_usage_error() {
    let o = qsmc(&["run", &aircraft(), "--controller", "mm3"]);
    assert_eq!(o.status.code(), Some(2));
}
