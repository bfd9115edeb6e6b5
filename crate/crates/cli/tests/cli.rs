use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lpns(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpns"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn small_twin(dir: &Path, delta: &str) -> Output {
    lpns(
        dir,
        &["twin", "--delta", delta, "--seed", "3", "n=32", "t_end=0.1", "dt=0.02", "viscosity=0.05"],
    )
}

#[test]
fn verify_lp_passes_and_hashes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = lpns(dir.path(), &["verify", "--suite", "lp"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("partition of unity residual"));
    let m = manifest(dir.path());
    let artifacts = m["artifacts"].as_array().unwrap();
    assert!(!artifacts.is_empty());
    for a in artifacts {
        let path = dir.path().join(a["path"].as_str().unwrap());
        assert!(path.exists(), "{path:?}");
        assert_eq!(a["bytes"].as_u64().unwrap(), fs::metadata(&path).unwrap().len());
    }
    assert_eq!(m["seeds"][0], 7);
}

#[test]
fn disabled_dealiasing_fails_bony_suite() {
    let dir = tempfile::tempdir().unwrap();
    let o = lpns(dir.path(), &["verify", "--suite", "bony", "--no-dealias"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Bony identity"), "{}", stderr(&o));
}

#[test]
fn bernstein_csv_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = lpns(d.path(), &["verify", "--suite", "bernstein", "--n", "32", "--seed", "7"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let name = "bernstein_n32_seed7.csv";
    let x = fs::read(a.path().join(name)).unwrap();
    let y = fs::read(b.path().join(name)).unwrap();
    assert!(!x.is_empty());
    assert_eq!(x, y);
}

#[test]
fn twin_then_report_on_identical_runs_gives_zero_w() {
    let dir = tempfile::tempdir().unwrap();
    let o = small_twin(dir.path(), "1e-4");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("u/trajectory.json").exists());
    assert!(dir.path().join("v/trajectory.json").exists());
    let m = manifest(dir.path());
    assert_eq!(m["seeds"].as_array().unwrap().last().unwrap(), 3);

    let rep = dir.path().join("rep");
    let u = dir.path().join("u");
    let o = lpns(
        &rep,
        &["report", "--u", u.to_str().unwrap(), "--v", u.to_str().unwrap(), "--triple", "0.5,6,2"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let w = fs::read_to_string(rep.join("w.csv")).unwrap();
    assert!(w.starts_with("t,W,"));
    let mut rows = 0;
    for line in w.lines().skip(1) {
        let w: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(w, 0.0, "{line}");
        rows += 1;
    }
    assert!(rows > 1);
}

#[test]
fn twin_outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&small_twin(a.path(), "1e-3")), 0);
    assert_eq!(code(&small_twin(b.path(), "1e-3")), 0);
    let (ma, mb) = (manifest(a.path()), manifest(b.path()));
    assert_eq!(ma["artifacts"], mb["artifacts"]);
}

#[test]
fn invalid_triple_is_rejected_before_loading() {
    let dir = tempfile::tempdir().unwrap();
    let o = lpns(
        dir.path(),
        &["report", "--u", "/does/not/exist", "--v", "/does/not/exist", "--triple", "0.5,6,8/3"],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("2/q + 3/p = 1 + r"), "{}", stderr(&o));
    let o = lpns(
        dir.path(),
        &["report", "--u", "/x", "--v", "/x", "--triple", "0.5,6,2", "--s", "1.5"],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("loss index"), "{}", stderr(&o));
}

#[test]
fn split_and_besov_on_a_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let o = lpns(dir.path(), &["simulate", "n=64", "t_end=0.02", "dt=0.01"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let snap = dir.path().join("trajectory/snap_000000.fld");
    let snap = snap.to_str().unwrap();

    let out = dir.path().join("split");
    let o = lpns(&out, &["split", "--snapshot", snap, "--p", "6", "--r", "0.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("split.json")).unwrap()).unwrap();
    assert_eq!(v["n"], v["formula_n"]);
    assert_eq!(v["q"].as_f64().unwrap(), 2.0);

    let o = lpns(&out, &["split", "--snapshot", snap, "--p", "6", "--q", "2.6667", "--r", "0.5"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("violates 2/q + 3/p = 1 + r"));

    let out = dir.path().join("besov");
    let o = lpns(&out, &["besov", "--snapshot", snap, "--s", "1", "--p", "inf"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("besov.json")).unwrap()).unwrap();
    // Taylor-Green sits in block 0 with unit amplitude
    assert!((v["norm"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn exit_codes_for_config_errors_and_aborts() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lpns(dir.path(), &["simulate", "nosuchkey=1"])), 2);
    assert_eq!(code(&lpns(dir.path(), &["simulate", "dt=0.3"])), 2);
    assert_eq!(code(&lpns(dir.path(), &["verify", "--suite", "nope"])), 2);
    let o = lpns(dir.path(), &["simulate", "dt=0.25", "amplitude=20"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("CFL"));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lpns"))
        .env("LPNS_OUT", dir.path())
        .args(["simulate", "n=16", "t_end=0.02", "dt=0.01"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("trajectory/trajectory.json").exists());
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small\nn = 16\ndt = 0.01\nt_end = 0.05\ninitial = random-divfree\nseed = 9\nslope = 5/3\nradius = 4\n")
        .unwrap();
    let o = lpns(dir.path(), &["simulate", "--config", cfg.to_str().unwrap(), "t_end=0.02"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = manifest(dir.path());
    let echo = m["config"].as_str().unwrap();
    assert!(echo.contains("t_end = 0.02"), "{echo}");
    assert_eq!(m["seeds"][0], 9);
}
