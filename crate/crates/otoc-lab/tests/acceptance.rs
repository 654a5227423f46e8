//! Desk-scale acceptance run: one test per verification check, each
//! printing its labeled outcome line (visible with `--nocapture`) and
//! failing if the check fails.
//!
//! Spectra are cached under the target tmp directory (override with the
//! `OTOC_LAB_CACHE` environment variable), so the heavy
//! diagonalizations at n = 11 and 12 are paid once and shared across
//! checks and repeated runs. A process-wide lock keeps the checks
//! serial: several of them work at the largest supported sizes and
//! should not compete for memory.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use otoc_lab::cache::CACHE_ENV_VAR;
use otoc_lab::verify::{self, CheckOutcome};

static SERIAL: Mutex<()> = Mutex::new(());

fn cache_dir() -> Option<PathBuf> {
    let dir = std::env::var_os(CACHE_ENV_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("spectrum-cache"));
    std::fs::create_dir_all(&dir).ok()?;
    Some(dir)
}

fn run(check: impl FnOnce(Option<&Path>) -> CheckOutcome) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let dir = cache_dir();
    let outcome = check(dir.as_deref());
    println!("{outcome}");
    assert!(outcome.passed, "{outcome}");
}

#[test]
fn check_1_spectrum_genericity() {
    run(verify::check_genericity);
}

#[test]
fn check_2_haar_baseline() {
    run(|_| verify::check_haar_baseline());
}

#[test]
fn check_3_route_agreement() {
    run(verify::check_route_agreement);
}

#[test]
fn check_4_brute_force_oracle() {
    run(verify::check_brute_force_oracle);
}

#[test]
fn check_5_fn_scaling() {
    run(verify::check_fn_scaling);
}

#[test]
fn check_6_plateau_residual() {
    run(verify::check_theorem_scaling);
}

#[test]
fn check_7_eth_diagnostics() {
    run(verify::check_eth_diagnostics);
}

#[test]
fn check_8_window_leakage() {
    run(verify::check_leakage);
}

#[test]
fn check_9_property_suite() {
    run(|_| verify::check_property_suite());
}
