use std::process::{Command, Output};

fn cpalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpalign")).args(args).output().unwrap()
}

#[test]
fn bench_reports_both_counts() {
    let out = cpalign(&["bench"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["global"]["mul"], 6_356_992);
    assert_eq!(v["blockwise"]["mul"], 11_571_712);
    assert_eq!(v["instrumented_matches"], true);
}

#[test]
fn gen_writes_a_readable_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.json");
    let out = cpalign(&["gen", "--template", "turning", "-o", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = cpalign::sim::Scenario::read_json(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(s.template, cpalign::sim::Template::Turning);
}

#[test]
fn check_passes_without_sweep() {
    let out = cpalign(&["check"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 10);
    assert!(!text.contains("FAIL"));
}

#[test]
fn bad_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[scenario]\nspeed = \"fast\"\n").unwrap();
    let out = cpalign(&["run", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario.speed"));
}

#[test]
fn unknown_codec_is_rejected() {
    let out = cpalign(&["run", "--codec", "zip"]);
    assert!(!out.status.success());
}

#[test]
fn weights_archive_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.cpaw");
    assert!(cpalign(&["weights", "-o", path.to_str().unwrap()]).status.success());
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"CPAW");
    let named = cpalign::numerics::NamedTensors::from_bytes(&bytes).unwrap();
    assert!(named.names().any(|n| n.starts_with("backbone.")));
    assert!(named.names().any(|n| n.starts_with("bevproj.")));
}

#[test]
fn run_writes_report_and_maps() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let maps = dir.path().join("maps");
    let out = cpalign(&[
        "run",
        "--time",
        "1.2",
        "--tau-ms",
        "100",
        "--codec",
        "int8",
        "-o",
        report.to_str().unwrap(),
        "--pgm-dir",
        maps.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert!(v["codec_mse"].as_f64().unwrap() > 0.0);
    assert!(v["detector"].as_str().unwrap().len() > 0);
    assert!(std::fs::read(maps.join("fused.pgm")).unwrap().starts_with(b"P5"));
}
