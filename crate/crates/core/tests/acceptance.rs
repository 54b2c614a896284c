use std::io::Write;
use std::time::Instant;

use fractube::acceptance::{run_criterion, AcceptanceConfig};

fn run(id: u8) {
    let start = Instant::now();
    let report = run_criterion(id, &AcceptanceConfig::default()).expect("criterion run");
    let mut out = std::io::stdout().lock();
    writeln!(out, "{} in {:.1?}", report.summary_line(), start.elapsed()).unwrap();
    for c in &report.checks {
        writeln!(
            out,
            "    [{}] {}: measured {:.6e}, threshold {}",
            if c.pass { "pass" } else { "FAIL" },
            c.name,
            c.measured,
            c.threshold
        )
        .unwrap();
    }
    drop(out);
    assert!(
        report.pass(),
        "criterion {id} failed: {:?}",
        report.failed_checks()
    );
}

#[test]
fn criterion_01_asymptote() {
    run(1);
}

#[test]
fn criterion_02_spectral_power_bound() {
    run(2);
}

#[test]
fn criterion_03_two_discretizations() {
    run(3);
}

#[test]
fn criterion_04_band_function() {
    run(4);
}

#[test]
fn criterion_05_weyl_decay() {
    run(5);
}

#[test]
fn criterion_06_straight_tube_floor() {
    run(6);
}

#[test]
fn criterion_07_bound_state() {
    run(7);
}

#[test]
fn criterion_08_conjecture_probe() {
    run(8);
}

#[test]
fn criterion_09_extension_identity() {
    run(9);
}

#[test]
fn criterion_10_property_suites() {
    run(10);
}
