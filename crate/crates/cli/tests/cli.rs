use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn morphcomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphcomp"))
        .args(args)
        .output()
        .expect("spawn morphcomp")
}

fn ok(args: &[&str]) -> String {
    let out = morphcomp(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_trace_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "musfib",
        "--duration",
        "2",
        "--out",
        s(dir.path()),
    ]);
    let csv = fs::read_to_string(dir.path().join("musfib.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,y,yd,ydd,s1,a,contact"));
    assert_eq!(lines.count(), 2001);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("musfib.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["samples"], 2001);
    assert!(meta["reference_sha256"].is_string());
    assert!(dir.path().join("musfib.reference.csv").exists());
}

#[test]
fn model_flag_matches_positional() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "muslin",
        "--duration",
        "1",
        "--out",
        s(a.path()),
    ]);
    ok(&[
        "simulate",
        "--model",
        "muslin",
        "--duration",
        "1",
        "--out",
        s(b.path()),
    ]);
    assert_eq!(
        fs::read(a.path().join("muslin.csv")).unwrap(),
        fs::read(b.path().join("muslin.csv")).unwrap()
    );
}

#[test]
fn dcmot_without_reference_runs_musfib_first() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "dcmot",
        "--duration",
        "3",
        "--out",
        s(dir.path()),
    ]);
    assert!(dir.path().join("musfib.reference.csv").exists());
    let csv = fs::read_to_string(dir.path().join("dcmot.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 8);
    assert_eq!(csv.lines().count(), 3002);
}

#[test]
fn dcmot_accepts_explicit_reference() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "musfib",
        "--duration",
        "3",
        "--out",
        s(dir.path()),
    ]);
    let reference = dir.path().join("musfib.reference.csv");
    let other = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "dcmot",
        "--duration",
        "3",
        "--reference",
        s(&reference),
        "--out",
        s(other.path()),
    ]);
    assert!(other.path().join("dcmot.csv").exists());
    assert!(!other.path().join("musfib.csv").exists());
}

#[test]
fn measure_respects_bin_count() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "musfib",
        "--duration",
        "3",
        "--out",
        s(dir.path()),
    ]);
    ok(&[
        "simulate",
        "muslin",
        "--duration",
        "3",
        "--out",
        s(dir.path()),
    ]);
    let traces = [
        s(&dir.path().join("musfib.csv")).to_string(),
        s(&dir.path().join("muslin.csv")).to_string(),
    ];
    for bins in ["150", "300"] {
        let out = dir.path().join(format!("m{bins}"));
        let stdout = ok(&[
            "measure",
            &traces[0],
            &traces[1],
            "--bins",
            bins,
            "--out",
            s(&out),
        ]);
        assert!(stdout.contains(&format!("position={bins}")), "{stdout}");
        assert!(stdout.contains("MusFib") && stdout.contains("MusLin"));
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("measures.json")).unwrap()).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 2);
        assert!(fs::read_to_string(out.join("binning.txt"))
            .unwrap()
            .contains(&format!(" {bins}")));
    }
}

#[test]
fn state_series_has_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "musfib",
        "--duration",
        "2",
        "--out",
        s(dir.path()),
    ]);
    ok(&[
        "measure",
        s(&dir.path().join("musfib.csv")),
        "--state-series",
        "--out",
        s(dir.path()),
    ]);
    let csv = fs::read_to_string(dir.path().join("mc_state_musfib.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("t,mc_w,mc_mi,mc_w_smooth,mc_mi_smooth,y,contact")
    );
    // one value per transition t -> t+1
    assert_eq!(lines.count(), 2000);
}

#[test]
fn report_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&["report", "--duration", "3", "--out", s(d.path())]);
    }
    for name in [
        "musfib.csv",
        "muslin.csv",
        "dcmot.csv",
        "measures.txt",
        "measures.json",
        "sweep.csv",
        "binning.txt",
    ] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn sweep_writes_one_row_per_model_and_bin_count() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "musfib",
        "--duration",
        "2",
        "--out",
        s(dir.path()),
    ]);
    let stdout = ok(&[
        "sweep-bins",
        s(&dir.path().join("musfib.csv")),
        "--bins",
        "50,100",
    ]);
    assert_eq!(stdout.lines().count(), 3);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "musfib",
        "--duration",
        "1",
        "--out",
        s(dir.path()),
    ]);
    let trace = dir.path().join("musfib.csv");
    let cases: Vec<Vec<&str>> = vec![
        vec!["sweep-bins", s(&trace), "--bins", "300"],
        vec!["frobnicate"],
        vec!["simulate", "hexapod"],
        vec!["measure", "does-not-exist.csv"],
        vec![
            "simulate",
            "musfib",
            "--duration",
            "-1",
            "--out",
            s(dir.path()),
        ],
    ];
    for args in cases {
        let out = morphcomp(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn config_file_overrides_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# shorter run\nt_end = 1.5\nbins = 120\n").unwrap();
    ok(&[
        "simulate",
        "musfib",
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
    ]);
    let csv = fs::read_to_string(dir.path().join("musfib.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1502);
    let stdout = ok(&[
        "measure",
        s(&dir.path().join("musfib.csv")),
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
    ]);
    assert!(stdout.contains("position=120"));

    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let out = morphcomp(&[
        "simulate",
        "musfib",
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
