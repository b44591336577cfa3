use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use eeopa_cli::{parse_config, RunConfig, OUT_DIR_ENV};
use eeopa_core::experiments::{rows_from_csv, rows_to_csv, Algorithm};

fn eeopa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eeopa"))
        .args(args)
        .current_dir(dir)
        .env_remove(OUT_DIR_ENV)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_SWEEP: &str =
    "m_t = 2\nm_r = 2\ntheta_grid = 1e-4, 1e-3, 1e-2\np_bar_grid = 0.1, 0.3\nseed = 11\n";

#[test]
fn empty_config_file_gives_defaults() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.cfg"), "").unwrap();
    let c = parse_config(&fs::read_to_string(dir.path().join("empty.cfg")).unwrap()).unwrap();
    assert_eq!(c, RunConfig::default());
    assert_eq!(c.antenna().label(), "4x4");
}

#[test]
fn negative_theta_in_file_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "# qos\ntheta = -1\n").unwrap();
    let o = eeopa(dir.path(), &["capacity", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2: theta"), "{}", stderr(&o));
    assert!(!dir.path().join("eeopa-out").exists());
}

#[test]
fn unknown_key_and_subcommand_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "antennas = 4\n").unwrap();
    let o = eeopa(dir.path(), &["compare", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1: unknown key"));

    let o = eeopa(dir.path(), &["simulate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn missing_config_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = eeopa(dir.path(), &["compare", "--config", "nope.cfg"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_prefers_eeopa() {
    let dir = tempfile::tempdir().unwrap();
    let o = eeopa(
        dir.path(),
        &[
            "compare", "--theta", "1e-3", "--pbar", "0.1", "--out", "res",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = rows_from_csv(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(rows.len(), 8);
    let eta = |a| rows.iter().find(|r| r.algorithm == a).unwrap().eta;
    assert!(eta(Algorithm::Eeopa) > eta(Algorithm::Apa));
    assert!(dir.path().join("res/compare_4x4.csv").exists());
}

#[test]
fn emitted_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = eeopa(
        dir.path(),
        &["capacity", "--mt", "3", "--mr", "2", "--theta", "0.05"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("eeopa-out/capacity_3x2.csv")).unwrap();
    assert_eq!(text, String::from_utf8(o.stdout).unwrap());
    assert_eq!(rows_to_csv(&rows_from_csv(&text).unwrap()).unwrap(), text);
}

#[test]
fn sweep_is_reproducible_from_provenance() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sweep.cfg"), SMALL_SWEEP).unwrap();
    let o = eeopa(
        dir.path(),
        &["sweep", "--config", "sweep.cfg", "--out", "a"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = eeopa(
        dir.path(),
        &[
            "sweep",
            "--config",
            "a/sweep_2x2.provenance",
            "--out",
            "b",
            "--threads",
            "1",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a = fs::read(dir.path().join("a/sweep_2x2.csv")).unwrap();
    let b = fs::read(dir.path().join("b/sweep_2x2.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        String::from_utf8(a).unwrap().lines().count(),
        1 + 3 * 2 * 2 * 2
    );
    let script = fs::read_to_string(dir.path().join("a/sweep_2x2.gp")).unwrap();
    assert!(script.contains("\"sweep_2x2.csv\""));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_eeopa"))
        .args(["thresholds", "--mt", "2", "--mr", "2"])
        .current_dir(dir.path())
        .env(OUT_DIR_ENV, "from-env")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("from-env/thresholds_2x2.csv")).unwrap();
    assert!(table.starts_with("config,group,theta,p_bar,lambda_n,residual\n"));
    assert_eq!(table.lines().count(), 1 + 7 * 10 * 2);
}

#[test]
fn marginals_writes_curves_histograms_and_script() {
    let dir = tempfile::tempdir().unwrap();
    let o = eeopa(
        dir.path(),
        &["marginals", "--mt", "3", "--mr", "2", "--out", "m"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in [
        "marginal_3x2_g1.csv",
        "marginal_3x2_g2.csv",
        "histogram_3x2_g1.csv",
        "histogram_3x2_g2.csv",
        "marginals_3x2.gp",
    ] {
        assert!(dir.path().join("m").join(f).exists(), "{f}");
    }
    let again = eeopa(
        dir.path(),
        &["marginals", "--mt", "3", "--mr", "2", "--out", "n"],
    );
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(
        fs::read(dir.path().join("m/histogram_3x2_g1.csv")).unwrap(),
        fs::read(dir.path().join("n/histogram_3x2_g1.csv")).unwrap()
    );
}

#[test]
fn verify_passes_on_pristine_build() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("v.cfg"), "mc_samples = 100000\n").unwrap();
    let o = eeopa(dir.path(), &["verify", "--config", "v.cfg"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let report = fs::read_to_string(dir.path().join("eeopa-out/verify.txt")).unwrap();
    assert!(!report.contains("FAIL"));
    assert!(report.contains("DISCREPANCY"));
}
