use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use imitation_cli::reproduce::{sha256_hex, Manifest};

const RPS_CONFIG: &str = r#"{
  "name": "rps feeble twin",
  "game": {"kind": "rps_feeble_twin", "d": 0.04},
  "field": {"kind": "mother", "protocol": {
    "selection": {"kind": "retry_other", "m": 4},
    "adoption": {"kind": "pairwise"}}},
  "integrator": {"horizon": 50, "sample_stride": 0.5},
  "initial": {"states": [[0.14285714285714285, 0.2857142857142857, 0.14285714285714285, 0.42857142857142855]],
              "random": {"count": 3}},
  "analyses": [{"kind": "tail_stats"}, {"kind": "twin_ratio", "i": 2, "j": 3}],
  "seed": 4
}"#;

fn imitate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imitate")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn simulate(config: &str, out: &Path) -> Output {
    imitate(&["simulate", "--config", config, "--out", out.to_str().unwrap()])
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "rps.json", RPS_CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(simulate(&cfg, &a).status.success());
    assert!(imitate(&["simulate", "--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "2"]).status.success());
    for k in 0..4 {
        let name = format!("trajectory_{k:03}.csv");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name}");
    }
    assert_eq!(fs::read(a.join("trajectory_report.json")).unwrap(), fs::read(b.join("trajectory_report.json")).unwrap());
    let csv = fs::read_to_string(a.join("trajectory_000.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,x3,x4,event\n0.0,0.14285714285714285,"));
    assert_eq!(csv.lines().count(), 1 + 101);
}

#[test]
fn seed_changes_sampled_starts_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "rps.json", RPS_CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(simulate(&cfg, &a).status.success());
    assert!(imitate(&["simulate", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "5"]).status.success());
    assert_eq!(fs::read(a.join("trajectory_000.csv")).unwrap(), fs::read(b.join("trajectory_000.csv")).unwrap());
    assert_ne!(fs::read(a.join("trajectory_001.csv")).unwrap(), fs::read(b.join("trajectory_001.csv")).unwrap());
}

#[test]
fn zero_horizon_writes_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = RPS_CONFIG.replace(r#""horizon": 50"#, r#""horizon": 0"#);
    let cfg = write(dir.path(), "zero.json", &text);
    let out = dir.path().join("out");
    assert!(simulate(&cfg, &out).status.success());
    let csv = fs::read_to_string(out.join("trajectory_000.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1], "0.0,0.14285714285714285,0.2857142857142857,0.14285714285714285,0.42857142857142855,");
}

#[test]
fn arity_mismatch_is_reported_with_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let text = RPS_CONFIG.replace("0.42857142857142855]]", "0.42857142857142855], [0.5, 0.5]]");
    let cfg = write(dir.path(), "bad.json", &text);
    let res = simulate(&cfg, &dir.path().join("out"));
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("/initial/states/1"), "{err}");

    let cfg = write(dir.path(), "typo.json", &RPS_CONFIG.replace(r#""d": 0.04"#, r#""d": "small""#));
    let err = String::from_utf8_lossy(&simulate(&cfg, &dir.path().join("out")).stderr).to_string();
    assert!(err.contains("/game/d"), "{err}");

    let cfg = write(dir.path(), "range.json", &RPS_CONFIG.replace(r#""i": 2, "j": 3"#, r#""i": 2, "j": 4"#));
    let err = String::from_utf8_lossy(&simulate(&cfg, &dir.path().join("out")).stderr).to_string();
    assert!(err.contains("/analyses/1"), "{err}");
}

#[test]
fn manifest_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "rps.json", RPS_CONFIG);
    let a = dir.path().join("a");
    assert!(simulate(&cfg, &a).status.success());
    let manifest: Manifest = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.seeds, vec![4]);
    assert_eq!(manifest.tool.version, env!("CARGO_PKG_VERSION"));
    for (name, sum) in &manifest.checksums {
        assert_eq!(&sha256_hex(&fs::read(a.join(name)).unwrap()), sum, "{name}");
    }
    let b = dir.path().join("b");
    let res = imitate(&["reproduce", "--manifest", a.join("manifest.json").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());

    // a tampered file is detected
    let mut m = manifest.clone();
    m.checksums.values_mut().next().unwrap().replace_range(0..4, "0000");
    let tampered = write(dir.path(), "tampered.json", &serde_json::to_string(&m).unwrap());
    let res = imitate(&["reproduce", "--manifest", &tampered, "--out", dir.path().join("c").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stdout).contains("differs"));
}

#[test]
fn sweep_and_figure_a_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.json", r#"{"m_values": [2], "ratios": [0.5, 0.6666666666666666, 0.8]}"#);
    let out = dir.path().join("s");
    let res = imitate(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][2], 0.0);
    assert!((rows[1][2] - 0.2).abs() < 1e-9);
    assert!(rows[2][2] > 1.0 / 3.0);
    let checks = fs::read_to_string(out.join("sweep_cross_check.csv")).unwrap();
    assert!(checks.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn verify_exit_code_follows_expectations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let res = imitate(&["verify", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    // replicator is not strictly advantaged to the rare twin
    let cfg = write(
        dir.path(),
        "wrong.json",
        r#"{"combos": [{"name": "fair+pairwise",
            "protocol": {"selection": {"kind": "fair"}, "adoption": {"kind": "pairwise"}},
            "expect": {"advantage_rarity": "holds"}}]}"#,
    );
    let res = imitate(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stdout).contains("MISMATCH"));
}

#[test]
fn figure_b_bundle_has_events_and_notes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let res = imitate(&["reproduce", "B", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let manifest: Manifest = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.config.figure.as_deref(), Some("B"));
    assert_eq!(manifest.checksums.len(), 8);
    let csv = fs::read_to_string(out.join("fig_b_threshold_000.csv")).unwrap();
    assert!(csv.contains(",L->R\n") && csv.contains(",R->L\n"));
}
