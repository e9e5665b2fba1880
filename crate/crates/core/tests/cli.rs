use std::path::Path;
use std::process::Command;

use fractv::grid::{GridDomain, ScalarField};
use fractv::io::{read_pgm, write_pbm, write_pgm};
use fractv::shapes::centered_disk;

fn fractv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fractv"))
}

fn write_inputs(dir: &Path) {
    let d = GridDomain::plane(20, 20, 1.0).unwrap();
    let e = centered_disk(d, 6.0);
    write_pbm(&e, dir.join("disk.pbm")).unwrap();
    let f = ScalarField::new(d, (0..d.len()).map(|i| if e.contains(i) { 0.8 } else { (i % 7) as f64 / 20.0 }).collect())
        .unwrap();
    write_pgm(&f, dir.join("img.pgm")).unwrap();
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = fractv().args(["denoise", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn denoise_writes_image_and_report() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    let out = fractv()
        .current_dir(dir.path())
        .args(["denoise", "--lambda", "0.6", "--levels", "8", "img.pgm", "out.pgm"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let u = read_pgm(dir.path().join("out.pgm"), 1.0).unwrap();
    assert_eq!(u.domain().shape(), [20, 20]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.json")).unwrap()).unwrap();
    assert_eq!(report["lambda"], 0.6);
    assert!(report["layers"].as_u64().unwrap() >= 1);
}

#[test]
fn cheeger_and_sweep_run_on_a_bitmap() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    let out = fractv().current_dir(dir.path()).args(["--json", "cheeger", "disk.pbm"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["calibrable"], true);
    let out = fractv().current_dir(dir.path()).args(["sweep", "--datum", "disk.pbm"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("lambda,d_min,d_max,jump"));
    assert_eq!(text.lines().count(), 42);
}

fn run_verify(dir: &Path, name: &str, extra: &[&str]) -> (bool, String) {
    let cfg = dir.join("verify.toml");
    std::fs::write(&cfg, "seed = 7\ninstances = 4\nwindow_2d = 24\n").unwrap();
    let out_dir = dir.join(name);
    let out = fractv()
        .args(["verify", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()])
        .args(extra)
        .output()
        .unwrap();
    (out.status.success(), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn verify_is_deterministic_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let (ok, _) = run_verify(dir.path(), "a", &[]);
    assert!(ok);
    run_verify(dir.path(), "b", &[]);
    for id in fractv::verify::theorem_ids() {
        let read = |run: &str| {
            let v: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(dir.path().join(run).join(format!("{id}.json"))).unwrap())
                    .unwrap();
            (v["passed"].clone(), v["worst_residual"].clone(), v["results"].clone())
        };
        assert_eq!(read("a"), read("b"), "{id}");
    }
    assert!(dir.path().join("a/summary.csv").exists());

    let (ok, text) = run_verify(dir.path(), "t", &["--tamper-offset", "1"]);
    assert!(!ok);
    let status = |id: &str| text.lines().find(|l| l.starts_with(id)).unwrap().split_whitespace().nth(1).unwrap().to_string();
    assert_eq!(status("scaling"), "FAIL");
    assert_eq!(status("coarea"), "pass");
}
