//! Acceptance suite. Each criterion is its own test and prints one
//! PASS/FAIL line; run with `--nocapture` to see them all.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use rfchain::acceptance::{self, CriterionResult, SELFTEST_BUDGET};
use rfchain::config::ScenarioConfig;
use rfchain::uwb::builtin_mask;

fn shipped_config() -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config/default.toml");
    ScenarioConfig::load(&path, &[]).expect("shipped config loads")
}

fn report(r: CriterionResult) {
    println!("{}", r.line());
    assert!(r.passed, "{}", r.line());
}

#[test]
fn criterion_01_dcm_closed_form() {
    report(acceptance::dcm_closed_form(shipped_config().seed));
}

#[test]
fn criterion_02_buckboost_independence() {
    report(acceptance::buckboost_independence(&shipped_config().dcdc));
}

#[test]
fn criterion_03_efficiency_reference() {
    report(acceptance::efficiency_reference(&shipped_config().dcdc));
}

#[test]
fn criterion_04_mppt_convergence() {
    let cfg = shipped_config();
    report(acceptance::mppt_convergence(&cfg.mppt.controller, cfg.seed));
}

#[test]
fn criterion_05_estimator_laws() {
    let cfg = shipped_config();
    report(acceptance::estimator_laws(
        &cfg.mppt.controller.estimator,
        cfg.seed,
    ));
}

#[test]
fn criterion_06_rectifier_anchors() {
    let cfg = shipped_config();
    report(acceptance::rectifier_anchors(
        &cfg.rectifier.model,
        cfg.seed,
    ));
}

#[test]
fn criterion_07_interface_math() {
    report(acceptance::interface_math());
}

#[test]
fn criterion_08_noise_figure() {
    report(acceptance::noise_figure(&shipped_config().lna.params));
}

#[test]
fn criterion_09_uwb_pipeline() {
    let cfg = shipped_config();
    report(acceptance::uwb_pipeline(
        &cfg.uwb,
        &builtin_mask(),
        cfg.seed,
    ));
}

#[test]
fn criterion_10_link_study() {
    let cfg = shipped_config();
    report(acceptance::link_study_trends(&cfg.uwb, cfg.seed));
}

#[test]
fn criterion_11_lcadc_round_trip() {
    let cfg = shipped_config();
    report(acceptance::lcadc_round_trip(
        &cfg.lcadc.pdm,
        cfg.lcadc.sample_rate,
        cfg.seed,
    ));
}

#[test]
fn criterion_12_selftest_binary() {
    let out_dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_rfchain"))
        .arg("--out")
        .arg(out_dir.path())
        .arg("selftest")
        .output()
        .expect("binary runs");
    let elapsed = start.elapsed();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let passed = out.status.code() == Some(0) && elapsed < SELFTEST_BUDGET;
    println!(
        "[{}] 12 selftest exits 0 within budget ({:.2} s): exit {:?}",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        out.status.code()
    );
    assert!(passed, "{stdout}");
    assert_eq!(stdout.matches("[PASS]").count(), 12, "{stdout}");
}
