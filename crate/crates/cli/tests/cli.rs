use std::path::Path;
use std::process::{Command, Output};

fn iphoton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iphoton")).args(args).output().expect("spawn iphoton")
}

fn ok(args: &[&str]) -> Output {
    let out = iphoton(args);
    assert!(
        out.status.success(),
        "iphoton {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn simulate_small(dir: &str, extra: &[&str]) {
    for kind in ["photon", "control"] {
        let mut args = vec!["simulate", "--kind", kind, "--out", dir, "--trials", "600", "--sets", "3"];
        args.extend_from_slice(extra);
        ok(&args);
    }
}

#[test]
fn full_pipeline_produces_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, format!("output_dir = {dir:?}\n[tomography]\nn_sets = 3\ntrials_per_set = 600\n")).unwrap();
    let c = cfg.to_str().unwrap();
    for kind in ["photon", "control", "dephasing", "thermal-sweep"] {
        ok(&["simulate", "--kind", kind, "-c", c]);
    }
    ok(&["reconstruct", "-c", c, "--emit-plots"]);
    ok(&["characterize", "-c", c]);
    let out = ok(&["report", "-c", c]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("29.0 dB"));

    for f in [
        "photon_set2.iptrc",
        "control_set0_trials.csv",
        "reconstruction.json",
        "histogram.csv",
        "mode.csv",
        "window.csv",
        "characterization.json",
        "efficiency_curve.csv",
        "report.json",
        "report.csv",
        "config.resolved.toml",
    ] {
        assert!(tmp.path().join(f).exists(), "{f} missing");
    }

    let rec = json(&tmp.path().join("reconstruction.json"));
    let pops: Vec<f64> = rec["populations"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(pops.len(), 4);
    assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(pops[1] > 0.2, "rho11 = {}", pops[1]);

    let report = json(&tmp.path().join("report.json"));
    let entry = &report["per_gain"][0];
    assert_eq!(entry["gain_db"].as_f64(), Some(29.0));
    let f = entry["comparison"]["fidelity_expected"]["value"].as_f64().unwrap();
    assert!(f > 0.9 && f <= 1.0 + 1e-12, "{f}");
    assert_eq!(report["notes"].as_array().unwrap().len(), 3);

    // every manifest records the same resolved configuration
    let hashes: Vec<String> = ["simulate-photon", "reconstruct", "characterize", "report"]
        .iter()
        .map(|c| json(&tmp.path().join(format!("manifest.{c}.json")))["config_hash"].as_str().unwrap().to_string())
        .collect();
    assert!(hashes.windows(2).all(|w| w[0] == w[1]), "{hashes:?}");
    assert_eq!(hashes[0].len(), 64);
}

#[test]
fn same_seed_gives_identical_traces() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&["simulate", "--kind", "photon", "--out", d.path().to_str().unwrap(), "--trials", "300", "--sets", "2", "--seed", "11"]);
    }
    for f in ["photon_set0.iptrc", "photon_set1.iptrc", "photon_set1_trials.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_ne!(
        std::fs::read(a.path().join("photon_set0.iptrc")).unwrap(),
        std::fs::read(a.path().join("photon_set1.iptrc")).unwrap()
    );
}

#[test]
fn csv_traces_reconstruct_like_binary() {
    let bin = tempfile::tempdir().unwrap();
    let csv = tempfile::tempdir().unwrap();
    simulate_small(bin.path().to_str().unwrap(), &[]);
    simulate_small(csv.path().to_str().unwrap(), &["--format", "csv"]);
    ok(&["reconstruct", "--out", bin.path().to_str().unwrap()]);
    ok(&["reconstruct", "--out", csv.path().to_str().unwrap()]);
    let pa = json(&bin.path().join("reconstruction.json"))["populations"].clone();
    let pb = json(&csv.path().join("reconstruction.json"))["populations"].clone();
    for (x, y) in pa.as_array().unwrap().iter().zip(pb.as_array().unwrap()) {
        assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-6);
    }
}

#[test]
fn report_without_inputs_exits_5_and_lists_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = iphoton(&["report", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("characterization.json") && err.contains("reconstruction.json"), "{err}");
}

#[test]
fn characterize_and_reconstruct_without_inputs_exit_5() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    assert_eq!(iphoton(&["characterize", "--out", dir]).status.code(), Some(5));
    assert_eq!(iphoton(&["reconstruct", "--out", dir]).status.code(), Some(5));
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[chain]\ngain = 3.0\n").unwrap();
    let out = iphoton(&["simulate", "--kind", "photon", "-c", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gain"));

    let out = iphoton(&["simulate", "--kind", "photon", "--gain-db", "45", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = iphoton(&["reconstruct", "--mode-optimize", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = iphoton(&["characterize", "-c", tmp.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn grid_mismatch_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    simulate_small(dir, &[]);
    let cfg = tmp.path().join("other_grid.toml");
    std::fs::write(&cfg, "[protocol.grid]\ndt = 0.02\nn_samples = 2800\n").unwrap();
    let out = iphoton(&["reconstruct", "--out", dir, "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unpaired_inputs_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    simulate_small(dir, &[]);
    let p = |f: &str| tmp.path().join(f).to_str().unwrap().to_string();
    let (p0, p1, c0) = (p("photon_set0.iptrc"), p("photon_set1.iptrc"), p("control_set0.iptrc"));
    let out = iphoton(&["reconstruct", "--out", dir, "--photon", &p0, &p1, "--control", &c0]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn mode_optimization_does_not_worsen_vacuum_population() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    simulate_small(dir, &[]);
    let held = tempfile::tempdir().unwrap();
    simulate_small(held.path().to_str().unwrap(), &["--seed", "99"]);
    let hp = held.path().join("photon_set0.iptrc");
    let hc = held.path().join("control_set0.iptrc");
    ok(&[
        "reconstruct",
        "--out",
        dir,
        "--mode-optimize",
        "--held-out-photon",
        hp.to_str().unwrap(),
        "--held-out-control",
        hc.to_str().unwrap(),
    ]);
    let opt = json(&tmp.path().join("mode_optimization.json"));
    assert!(opt["rho00"].as_f64().unwrap() <= opt["initial_rho00"].as_f64().unwrap());
    assert_eq!(json(&tmp.path().join("reconstruction.json"))["mode_optimized"], true);
}
