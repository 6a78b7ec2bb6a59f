use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rfchain(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rfchain"));
    cmd.args(args).env_remove("RFCHAIN_OUT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn shipped(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../config")
        .join(name)
        .display()
        .to_string()
}

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

#[test]
fn dcdc_eff_contains_reference_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = rfchain(&["-o", dir.path().to_str().unwrap(), "dcdc-eff"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let rows = read_rows(&dir.path().join("dcdc_efficiency.csv"));
    assert_eq!(rows.len(), 20);
    assert!(rows
        .iter()
        .any(|r| &r[0] == "1e-6" && &r[2] == "1.4" && &r[3] == "0.763"));
}

#[test]
fn uwb_pulse_with_explicit_mask() {
    let dir = tempfile::tempdir().unwrap();
    let mask = shipped("fcc_subghz_mask.csv");
    let out = rfchain(
        &[
            "-o",
            dir.path().to_str().unwrap(),
            "uwb-pulse",
            "--mask",
            &mask,
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains(": pass"), "{stdout}");
    let summary = read_rows(&dir.path().join("uwb_summary.csv"));
    let verdict = summary.iter().find(|r| &r[0] == "mask_verdict").unwrap();
    assert_eq!(&verdict[1], "pass");
    assert!(dir.path().join("uwb_psd.csv").exists());
    assert!(dir.path().join("uwb_waveform.csv").exists());
}

#[test]
fn tight_mask_is_reported_but_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("tight.csv");
    fs::write(&mask, "frequency_hz,limit_dbm\n1e6,-150\n5e9,-150\n").unwrap();
    let out = rfchain(
        &[
            "-o",
            dir.path().to_str().unwrap(),
            "uwb-pulse",
            "--mask",
            mask.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains(": fail"));
}

#[test]
fn missing_mask_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rfchain(
        &[
            "-o",
            dir.path().to_str().unwrap(),
            "uwb-pulse",
            "--mask",
            "/nonexistent/mask.csv",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn invalid_override_exits_1_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = rfchain(
        &[
            "-o",
            dir.path().to_str().unwrap(),
            "--dcdc.inductance",
            "-5",
            "dcdc-eff",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dcdc.inductance"));
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[dcdc]\nnot_a_key = 3\n").unwrap();
    let out = rfchain(&["-c", cfg.to_str().unwrap(), "dcdc-eff"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not_a_key"));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(rfchain(&["no-such-command"], &[]).status.code(), Some(64));
    assert_eq!(rfchain(&[], &[]).status.code(), Some(64));
    assert_eq!(
        rfchain(&["selftest", "--dcdc.inductance"], &[])
            .status
            .code(),
        Some(64)
    );
    assert_eq!(rfchain(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn output_directory_precedence() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let out = rfchain(&["lna-sweep"], &[("RFCHAIN_OUT", env_dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    assert!(env_dir.path().join("lna_nf.csv").exists());

    let out = rfchain(
        &["-o", flag_dir.path().to_str().unwrap(), "harvest-sweep"],
        &[("RFCHAIN_OUT", env_dir.path())],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(flag_dir.path().join("harvest_sweep.csv").exists());
    assert!(!env_dir.path().join("harvest_sweep.csv").exists());
}

#[test]
fn shipped_config_runs_every_command_deterministically() {
    let cfg = shipped("default.toml");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for cmd in ["harvest-sweep", "mppt-run", "link-psd", "lcadc-encode"] {
        for dir in [&a, &b] {
            let out = rfchain(&["-c", &cfg, "-o", dir.path().to_str().unwrap(), cmd], &[]);
            assert_eq!(out.status.code(), Some(0), "{cmd}");
        }
    }
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 12);
    for name in names {
        let x = fs::read(a.path().join(&name)).unwrap();
        let y = fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs between runs");
    }
}

#[test]
fn lcadc_encode_decodes_every_event() {
    let dir = tempfile::tempdir().unwrap();
    let out = rfchain(&["-o", dir.path().to_str().unwrap(), "lcadc-encode"], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("32 events, decoded 32 (match)"));
    let pulses = read_rows(&dir.path().join("lcadc_pulses.csv"));
    for p in pulses {
        let width: f64 = p[1].parse().unwrap();
        let expect = if &p[2] == "UP" { 40e-9 } else { 80e-9 };
        assert!((width - expect).abs() < 1e-15);
    }
}
