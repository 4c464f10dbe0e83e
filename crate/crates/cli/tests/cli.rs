use std::path::Path;
use std::process::{Command, Output};

fn fracstep(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracstep"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("run fracstep")
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn gngf_weights_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracstep(dir.path(), &["weights", "--family", "gngf", "-p", "2", "--alpha", "0.5", "-n", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&dir.path().join("weights.csv"));
    assert_eq!(r.len(), 11);
    assert_eq!(r[0][1].parse::<f64>().unwrap(), 1.25);
    assert!(dir.path().join("weights.manifest.json").exists());
}

#[test]
fn fbdf_weights_and_starting_weights() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracstep(dir.path(), &["weights", "--family", "fbdf", "-p", "1", "--alpha", "0.5", "-n", "2", "--sigma", "0.5"]);
    assert!(o.status.success());
    let w: Vec<f64> = rows(&dir.path().join("weights.csv")).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(w, vec![1.0, -0.5, -0.125]);
    let s = rows(&dir.path().join("starting_weights.csv"));
    assert_eq!(s.len(), 3);
    assert_eq!(s[0].len(), 2);
}

#[test]
fn malformed_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracstep(dir.path(), &["weights", "--alpha", "abc", "-n", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = fracstep(dir.path(), &["weights", "--alpha", "1.5", "-n", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_stability_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracstep(dir.path(), &["stability", "--alpha", "0.9", "--kappa", "0", "--check"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&dir.path().join("stability_intervals.csv"));
    let t: f64 = r[0][2].parse().unwrap();
    assert!((t / 0.683 - 1.0).abs() < 0.05, "{t}");
}

#[test]
fn unbounded_interval_is_inf() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracstep(dir.path(), &["stability", "--alpha", "0.5", "--kappa", "1.4"]);
    assert!(o.status.success());
    assert_eq!(rows(&dir.path().join("stability_intervals.csv"))[0][2], "inf");
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[scheme]\nalpha = [0.5]\nbogus = 1\n").unwrap();
    let o = fracstep(dir.path(), &["solve", "--config", cfg.to_str().unwrap(), "--case", "1.2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_case_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracstep(dir.path(), &["solve", "--case", "9.9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn polynomial_case_check_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[scheme]\nalpha = [0.5]\n[problem]\ncase = \"1.2\"\ntau_sweep = \"2^-5..2^-7\"\n").unwrap();
    let o = fracstep(dir.path(), &["solve", "--config", cfg.to_str().unwrap(), "--check"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&dir.path().join("convergence_case1.2.csv"));
    assert_eq!(r.len(), 3);
    let e: f64 = r[0][1].parse().unwrap();
    assert!((e / 2.87e-4 - 1.0).abs() < 0.02, "{e}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["config"]["alphas"][0], 0.5);
}

#[test]
fn single_step_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracstep(dir.path(), &["solve", "--case", "1.1", "--tau", "2^-6", "--m", "2", "--t-end", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&dir.path().join("trajectory_case1.1_a0.4_m2_tau2^-6.csv"));
    assert_eq!(r.len(), 129);
    assert_eq!(r[0].len(), 4);
}

#[test]
fn reference_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracstep(dir.path(), &["solve", "--case", "1.3", "--alpha", "0.5", "--tau", "2^-10", "--t-end", "4", "--save-ref"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reference = dir.path().join("reference_case1.3_a0.5_m1_tau2^-10.csv");
    assert!(reference.exists());
    let o = fracstep(
        dir.path(),
        &["solve", "--case", "1.3", "--alpha", "0.5", "--tau-sweep", "2^-5..2^-7", "--t-end", "4", "--ref", reference.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&dir.path().join("convergence_case1.3.csv"));
    let e: Vec<f64> = r.iter().map(|x| x[1].parse().unwrap()).collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
}

#[test]
fn pde_case_writes_fields_and_timing() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracstep(dir.path(), &["solve", "--case", "2.1", "--h", "8", "--tau", "0.1", "--t-end", "1", "--snapshots", "0.5,1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rows(&dir.path().join("fields_case2.1_t1.csv")).len(), 64);
    assert!(dir.path().join("fields_case2.1_t0.5.csv").exists());
    assert_eq!(rows(&dir.path().join("timing_case2.1.csv")).len(), 10);
    assert!(dir.path().join("errors_case2.1.csv").exists());
}

#[test]
fn decay_case_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracstep(dir.path(), &["solve", "--case", "2.2", "--h", "8", "--tau", "0.1", "--t-end", "2", "--check"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fastconv_talbot_column_is_accurate() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracstep(dir.path(), &["fastconv-check", "-n", "1000"]);
    assert!(o.status.success());
    let worst = rows(&dir.path().join("fastconv_check.csv"))
        .iter()
        .map(|r| r[3].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn bench_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracstep(dir.path(), &["bench", "--pow", "6..7", "--repeats", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&dir.path().join("bench.csv"));
    assert_eq!(r.len(), 2);
    assert!(r[1][3].parse::<f64>().unwrap() < 1e-8);
}
