//! End-to-end verification of the lab's headline results at desk scale.
//!
//! Each check recomputes its quantities from scratch (reusing the spectrum
//! cache when a directory is supplied) and reports one pass/fail outcome
//! with a human-readable detail line. The `verify` CLI subcommand and the
//! `acceptance` integration test both run these, so a green suite means
//! the library reproduces its reference results on this machine, not just
//! that the unit tests pass.
//!
//! The checks gate on tolerance bands and statistical agreement, never on
//! frozen output values; random inputs come from fixed seeds so every run
//! is reproducible.

use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cache;
use crate::error::Result;
use crate::eth::{diagonal_moment, diagonal_profile, fit_linear_response, DiagonalProfile};
use crate::haar::{haar_otoc_monte_carlo, random_hermitian, sample_haar_unitary};
use crate::linalg;
use crate::operators::{
    build_chain_hamiltonian, normalized_trace_inner, site_operator, PauliAxis, FIELD_X,
};
use crate::otoc::{
    generic_closed_form_average, sampled_infinite_time_average_with_mode, OtocQuery, TimeSampler,
};
use crate::par::Mode;
use crate::scaling::{
    power_law_fit, run_scaling_sweep, theorem_residual_series, Observable, ScalingSeries,
    SweepConfig,
};
use crate::spectral::{check_generic_spectrum, energy_diagonal_of_local_term};
use crate::spectral::{microcanonical_leakage, to_energy_basis, verify_against_model};
use crate::C64;

/// Number of checks in the suite.
pub const CHECK_COUNT: usize = 9;

/// Collision scan tolerance the genericity check reports at.
const GENERICITY_TOL: f64 = 1e-8;

/// Seed for the randomized Haar quadruple suite.
const HAAR_SUITE_SEED: u64 = 2026;

/// Result of one verification check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    /// Position in the suite, 1-based.
    pub id: usize,
    /// Short stable name, usable as a log or CSV key.
    pub name: &'static str,
    pub passed: bool,
    /// What was computed and how it compared to its band.
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "check {}/{} {:<22} {}  {}",
            self.id,
            CHECK_COUNT,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

/// Wrap a check body so evaluation errors become a failed outcome rather
/// than aborting the rest of the suite.
fn outcome(
    id: usize,
    name: &'static str,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CheckOutcome {
    match body() {
        Ok((passed, detail)) => CheckOutcome {
            id,
            name,
            passed,
            detail,
        },
        Err(e) => CheckOutcome {
            id,
            name,
            passed: false,
            detail: format!("could not evaluate: {e}"),
        },
    }
}

/// Run the whole suite in order, invoking `progress` as each check
/// completes. Returns all outcomes; the caller decides how to react to
/// failures.
pub fn run_all(cache_dir: Option<&Path>, mut progress: impl FnMut(&CheckOutcome)) -> Vec<CheckOutcome> {
    let checks: [fn(Option<&Path>) -> CheckOutcome; CHECK_COUNT] = [
        check_genericity,
        |_| check_haar_baseline(),
        check_route_agreement,
        check_brute_force_oracle,
        check_fn_scaling,
        check_theorem_scaling,
        check_eth_diagnostics,
        check_leakage,
        |_| check_property_suite(),
    ];
    let mut outcomes = Vec::with_capacity(CHECK_COUNT);
    for check in checks {
        let o = check(cache_dir);
        progress(&o);
        outcomes.push(o);
    }
    outcomes
}

/// Check 1: collision-free spectra where the closed forms assume them.
///
/// Scans g = 0.1 for n = 5..=10 at tolerance 1e-8 and requires zero
/// nontrivial additive collisions; separately requires that the g = 0
/// integrable point at n = 6 *does* get flagged. The 1e-8 scan is known
/// to trip on near-collisions at n = 9 and 10 even though every gap stays
/// comfortably above 1e-12, so the detail line carries a rescan at 1e-12
/// for diagnosis; the check still reports the 1e-8 result it is asked
/// for.
pub fn check_genericity(cache_dir: Option<&Path>) -> CheckOutcome {
    outcome(1, "spectrum-genericity", || {
        let mut lines = Vec::new();
        let mut all_clear = true;
        for n in 5..=10 {
            let model = build_chain_hamiltonian(n, 0.1)?;
            let (s, _) = cache::load_or_compute(cache_dir, &model)?;
            let report = check_generic_spectrum(s.energies(), GENERICITY_TOL)?;
            if report.passed() {
                lines.push(format!("n={n}: clear"));
            } else {
                all_clear = false;
                let fine = check_generic_spectrum(s.energies(), 1e-12)?;
                lines.push(format!(
                    "n={n}: {} collisions at {:.0e} (tightest additive gap {:.2e}; at 1e-12: {})",
                    report.n_violations(),
                    GENERICITY_TOL,
                    report.min_nontrivial_gap().unwrap_or(f64::NAN),
                    fine.n_violations(),
                ));
            }
        }
        let model0 = build_chain_hamiltonian(6, 0.0)?;
        let (s0, _) = cache::load_or_compute(cache_dir, &model0)?;
        let report0 = check_generic_spectrum(s0.energies(), GENERICITY_TOL)?;
        lines.push(format!(
            "g=0 n=6: {} collisions flagged",
            report0.n_violations()
        ));
        let degenerate_flagged = !report0.passed();
        Ok((all_clear && degenerate_flagged, lines.join("; ")))
    })
}

/// Check 2: Monte Carlo over Haar unitaries agrees with the closed form.
///
/// Twenty seeded random Hermitian quadruples spread over dimensions
/// 2, 4, 8 must each agree within 3 standard errors, and the 2x2 sigma-x
/// preset must reproduce its exact value of -1/3 within 3 standard errors
/// at 1e5 samples.
pub fn check_haar_baseline() -> CheckOutcome {
    outcome(2, "haar-baseline", || {
        let dims = [2usize, 4, 8];
        let mut max_sigma: f64 = 0.0;
        let mut agree = 0usize;
        for k in 0..20 {
            let dim = dims[k % dims.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(HAAR_SUITE_SEED);
            rng.set_stream(k as u64 + 1);
            let a = random_hermitian(dim, &mut rng);
            let b = random_hermitian(dim, &mut rng);
            let c = random_hermitian(dim, &mut rng);
            let d = random_hermitian(dim, &mut rng);
            let est = haar_otoc_monte_carlo(&a, &b, &c, &d, 2000, 1000 + k as u64)?;
            max_sigma = max_sigma.max(est.sigma_deviation());
            if est.sigma_deviation() <= 3.0 {
                agree += 1;
            }
        }

        // sigma-x quadruple at dim 2: closed form is exactly -1/3.
        let sx = Array2::from_shape_vec(
            (2, 2),
            vec![
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        )
        .expect("2x2 shape");
        let preset = haar_otoc_monte_carlo(&sx, &sx, &sx, &sx, 100_000, 7)?;
        let cf_exact = (preset.closed_form - C64::new(-1.0 / 3.0, 0.0)).norm() <= 1e-12;
        let preset_ok = preset.sigma_deviation() <= 3.0;

        let passed = agree == 20 && cf_exact && preset_ok;
        Ok((
            passed,
            format!(
                "{agree}/20 random quadruples within 3 se (worst {max_sigma:.2} se); \
                 sigma-x preset: mc {:.4} +/- {:.1e} vs exact -1/3 ({:.2} se)",
                preset.mc_value.re, preset.mc_std_error, preset.sigma_deviation()
            ),
        ))
    })
}

/// Check 3: the sampled time average and the collision-free closed form
/// are two routes to the same number.
///
/// For n = 5..=8 at g = 0.1 with every slot sigma-x on site 1, the
/// sampled estimate must land within 3 combined standard errors of the
/// closed form (whose error is zero).
pub fn check_route_agreement(cache_dir: Option<&Path>) -> CheckOutcome {
    outcome(3, "route-agreement", || {
        let mut lines = Vec::new();
        let mut all_ok = true;
        for n in 5..=8 {
            let model = build_chain_hamiltonian(n, 0.1)?;
            let (s, _) = cache::load_or_compute(cache_dir, &model)?;
            let report = check_generic_spectrum(s.energies(), GENERICITY_TOL)?;
            let x = to_energy_basis(&site_operator(PauliAxis::X, 1, n)?, &s)?;
            let q = OtocQuery::new(&x, &x, &x, &x, &s)?.with_genericity(&report)?;
            let exact = generic_closed_form_average(&q)?;
            let sampler = TimeSampler::new(310 + n as u64);
            let sampled =
                sampled_infinite_time_average_with_mode(&q, &sampler, 1e-3, Mode::default())?;
            let diff = (sampled.value - exact.value).norm();
            let band = 3.0 * sampled.std_error;
            let ok = sampled.converged && diff <= band;
            all_ok &= ok;
            lines.push(format!(
                "n={n}: |sampled-closed| {diff:.1e} vs 3 se {band:.1e} ({} samples)",
                sampled.samples
            ));
        }
        Ok((all_ok, lines.join("; ")))
    })
}

/// Time average of the OTOC phase factor, summed literally: keep every
/// quadruple (j,k,l,m) whose phase E_j - E_k + E_l - E_m vanishes within
/// `delta` and drop the rest. O(d^4), so only small chains — this is the
/// definitional oracle the closed form must match on collision-free
/// spectra.
fn delta_constrained_average(
    a: &Array2<C64>,
    b: &Array2<C64>,
    c: &Array2<C64>,
    d: &Array2<C64>,
    energies: &[f64],
    delta: f64,
) -> C64 {
    let dim = energies.len();
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..dim {
        for k in 0..dim {
            let ajk = a[[j, k]];
            for l in 0..dim {
                let bkl = b[[k, l]];
                let partial = energies[j] - energies[k] + energies[l];
                for m in 0..dim {
                    if (partial - energies[m]).abs() < delta {
                        acc += ajk * bkl * c[[l, m]] * d[[m, j]];
                    }
                }
            }
        }
    }
    acc / dim as f64
}

/// Check 4: the closed form matches the brute-force constrained sum.
///
/// On collision-free spectra the infinite-time average keeps exactly the
/// quadruples with vanishing phase; summing those directly is O(d^4) but
/// assumption-free. Runs n = 5 and 6 (the smallest collision-free sizes;
/// below n = 5 the g = 0.1 spectrum has additive collisions at 1e-8, so
/// the closed form does not apply and the comparison is undefined).
pub fn check_brute_force_oracle(cache_dir: Option<&Path>) -> CheckOutcome {
    outcome(4, "brute-force-oracle", || {
        let mut worst: f64 = 0.0;
        let mut lines = Vec::new();
        for n in 5..=6 {
            let model = build_chain_hamiltonian(n, 0.1)?;
            let (s, _) = cache::load_or_compute(cache_dir, &model)?;
            let report = check_generic_spectrum(s.energies(), GENERICITY_TOL)?;
            let x1 = to_energy_basis(&site_operator(PauliAxis::X, 1, n)?, &s)?;
            let z2 = to_energy_basis(&site_operator(PauliAxis::Z, 2, n)?, &s)?;
            for (label, b_op) in [("x1,x1,x1,x1", &x1), ("x1,z2,x1,z2", &z2)] {
                let q = OtocQuery::new(&x1, b_op, &x1, b_op, &s)?.with_genericity(&report)?;
                let closed = generic_closed_form_average(&q)?;
                let brute = delta_constrained_average(
                    x1.entries(),
                    b_op.entries(),
                    x1.entries(),
                    b_op.entries(),
                    s.energies(),
                    GENERICITY_TOL,
                );
                let diff = (closed.value - brute).norm();
                worst = worst.max(diff);
                lines.push(format!("n={n} {label}: |diff| {diff:.1e}"));
            }
        }
        Ok((worst <= 1e-9, format!("{} (tolerance 1e-9)", lines.join("; "))))
    })
}

/// Check 5: the late-time sigma-x correlator decays like a power law.
///
/// F_n over n = 5..=12 at g = 0.1 must be positive and strictly
/// decreasing; a power-law fit to the last five points must land in
/// [0.6, 1.0]; the prediction G_n must equal (14/15)/n to 1e-12; and the
/// gap G_n - F_n must fit an exponent in [1.6, 2.4].
pub fn check_fn_scaling(cache_dir: Option<&Path>) -> CheckOutcome {
    outcome(5, "fn-scaling", || {
        let mut fn_cfg = SweepConfig::new(Observable::Fn, 5, 12, 0.1);
        fn_cfg.cache_dir = cache_dir.map(Path::to_path_buf);
        let fn_series = run_scaling_sweep(&fn_cfg)?;
        if !fn_series.excluded().is_empty() {
            return Ok((
                false,
                format!(
                    "{} sizes were excluded from the F_n sweep",
                    fn_series.excluded().len()
                ),
            ));
        }
        let values: Vec<f64> = fn_series.points().iter().map(|p| p.value).collect();
        let positive = values.iter().all(|&v| v > 0.0);
        let decreasing = values.windows(2).all(|w| w[0] > w[1]);

        let gn_cfg = SweepConfig::new(Observable::Gn, 5, 12, 0.1);
        let gn_series = run_scaling_sweep(&gn_cfg)?;
        let mut gn_dev: f64 = 0.0;
        for p in gn_series.points() {
            gn_dev = gn_dev.max((p.value - (14.0 / 15.0) / p.n as f64).abs());
        }

        // G_n - F_n pointwise; both sweeps are deterministic, so this is
        // bit-identical to sweeping the difference observable directly
        // (the scaling tests pin that) without recomputing F_n.
        let mut diff_series = ScalingSeries::new(Observable::GnMinusFn.as_str(), 0.1);
        for (pf, pg) in fn_series.points().iter().zip(gn_series.points()) {
            diff_series.push_point(pf.n, pg.value - pf.value, 0.0)?;
        }

        let fit_f = power_law_fit(&fn_series, 5)?;
        let fit_gap = power_law_fit(&diff_series, 5)?;
        let f_ok = (0.6..=1.0).contains(&fit_f.exponent);
        let gap_ok = (1.6..=2.4).contains(&fit_gap.exponent);
        let gn_ok = gn_dev <= 1e-12;

        let passed = positive && decreasing && f_ok && gap_ok && gn_ok;
        Ok((
            passed,
            format!(
                "F_n positive {positive}, decreasing {decreasing}; tail-5 exponent {:.4} \
                 (band 0.6..1.0); gap exponent {:.4} (band 1.6..2.4); \
                 max |G_n - (14/15)/n| {gn_dev:.1e}",
                fit_f.exponent, fit_gap.exponent
            ),
        ))
    })
}

/// Check 6: the Hamiltonian-term correlator converges to its predicted
/// plateau at a power-law rate.
///
/// The residual |translation-averaged value - 2<H_i^2>^2/n| over
/// n = 6..=12 must fit a power law with exponent in [1.6, 2.4].
pub fn check_theorem_scaling(cache_dir: Option<&Path>) -> CheckOutcome {
    outcome(6, "plateau-residual", || {
        let series = theorem_residual_series(6, 12, 0.1, cache_dir)?;
        if !series.excluded().is_empty() {
            return Ok((
                false,
                format!("{} sizes were excluded", series.excluded().len()),
            ));
        }
        let fit = power_law_fit(&series, series.points().len())?;
        let ok = (1.6..=2.4).contains(&fit.exponent);
        Ok((
            ok,
            format!(
                "residual ~ {:.3} n^-{:.4} over n=6..12 (exponent band 1.6..2.4, \
                 log-rms {:.1e})",
                fit.amplitude, fit.exponent, fit.rms_log_residual
            ),
        ))
    })
}

/// Least-squares slope of `ys` against `xs` (for trend gates).
fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Check 7: diagonal matrix elements behave as thermalization predicts.
///
/// Three gates: (a) every local term has (H_i)_jj = E_j/n to 1e-9 for
/// n = 5..=10 (a translation-invariance identity, valid on the
/// collision-free sizes — n = 4 has an exactly degenerate pair, so the
/// eigenbasis there is not a translation eigenbasis and the identity is
/// ill-posed); (b) the fitted slope of the sigma-x diagonal profile at
/// n = 12, window 0.5, lands within 15% of the predicted -1.05/2.3625,
/// with the relative deviation shrinking in trend (negative
/// least-squares slope) over n = 8..=12; (c) n times the diagonal second
/// moment of sigma-x lands within 20% of 7/15 at n = 12 with the same
/// trend requirement.
pub fn check_eth_diagnostics(cache_dir: Option<&Path>) -> CheckOutcome {
    outcome(7, "eth-diagnostics", || {
        // (a) local-term diagonals ride the energy density exactly.
        let mut worst_identity: f64 = 0.0;
        for n in 5..=10 {
            let model = build_chain_hamiltonian(n, 0.1)?;
            let (s, _) = cache::load_or_compute(cache_dir, &model)?;
            let nf = n as f64;
            for i in 1..=n {
                let diag = energy_diagonal_of_local_term(&model, i, &s)?;
                for (j, v) in diag.iter().enumerate() {
                    worst_identity = worst_identity.max((v - s.energies()[j] / nf).norm());
                }
            }
        }
        let identity_ok = worst_identity <= 1e-9;

        // (b) + (c): slope and second moment of the sigma-x profile.
        let slope_target = FIELD_X / 2.3625;
        let moment_target = 7.0 / 15.0;
        let ns: Vec<f64> = (8..=12).map(|n| n as f64).collect();
        let mut slope_devs = Vec::new();
        let mut moment_devs = Vec::new();
        for n in 8..=12 {
            let model = build_chain_hamiltonian(n, 0.1)?;
            let (s, _) = cache::load_or_compute(cache_dir, &model)?;
            let x1 = to_energy_basis(&site_operator(PauliAxis::X, 1, n)?, &s)?;
            let profile = diagonal_profile(&x1, &s, n)?;
            let fit = fit_linear_response(&profile, 0.5)?;
            if fit.f1.im.abs() > 1e-8 {
                return Ok((
                    false,
                    format!("profile slope has imaginary part {:.1e}", fit.f1.im),
                ));
            }
            slope_devs.push((fit.f1.re - slope_target).abs() / slope_target.abs());
            let m2 = diagonal_moment(&x1, 2)?;
            moment_devs.push((n as f64 * m2 - moment_target).abs() / moment_target);
        }
        let slope_final_ok = *slope_devs.last().expect("five sizes") <= 0.15;
        let moment_final_ok = *moment_devs.last().expect("five sizes") <= 0.20;
        // "Shrinking in trend": the deviations need not fall at every
        // step (n=8 -> 9 overshoots), so the gate is a negative
        // least-squares slope of deviation against n.
        let slope_trend = ls_slope(&ns, &slope_devs);
        let moment_trend = ls_slope(&ns, &moment_devs);
        let trends_ok = slope_trend < 0.0 && moment_trend < 0.0;

        let passed = identity_ok && slope_final_ok && moment_final_ok && trends_ok;
        Ok((
            passed,
            format!(
                "max |(H_i)_jj - E_j/n| = {worst_identity:.1e} (tolerance 1e-9, n<=10); \
                 slope dev at n=12: {:.3} (<=0.15), trend {slope_trend:.4}/size; \
                 n*m2 dev at n=12: {:.3} (<=0.20), trend {moment_trend:.4}/size",
                slope_devs.last().expect("five sizes"),
                moment_devs.last().expect("five sizes"),
            ),
        ))
    })
}

/// Check 8: off-diagonal weight between separated energy windows decays
/// roughly exponentially with the window gap.
///
/// For sigma-x on site 1 at n = 10, the log of the leakage norm must be
/// strictly decreasing in the gap over gaps 1..=8 and approximately
/// linear: the RMS residual of a least-squares line must stay within 15%
/// of the total drop.
pub fn check_leakage(cache_dir: Option<&Path>) -> CheckOutcome {
    outcome(8, "window-leakage", || {
        let n = 10;
        let model = build_chain_hamiltonian(n, 0.1)?;
        let (s, _) = cache::load_or_compute(cache_dir, &model)?;
        let x1 = to_energy_basis(&site_operator(PauliAxis::X, 1, n)?, &s)?;
        let gaps: Vec<f64> = (1..=8).map(|k| k as f64).collect();
        let mut logs = Vec::new();
        for &gap in &gaps {
            let leak = microcanonical_leakage(&x1, s.energies(), 0.0, gap)?;
            if leak <= 0.0 {
                return Ok((false, format!("leakage vanished at gap {gap}")));
            }
            logs.push(leak.ln());
        }
        let monotone = logs.windows(2).all(|w| w[0] > w[1]);
        let slope = ls_slope(&gaps, &logs);
        let mg = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let ml = logs.iter().sum::<f64>() / logs.len() as f64;
        let rms = (gaps
            .iter()
            .zip(&logs)
            .map(|(&g, &l)| {
                let r = l - (ml + slope * (g - mg));
                r * r
            })
            .sum::<f64>()
            / gaps.len() as f64)
            .sqrt();
        let drop = logs.first().expect("eight gaps") - logs.last().expect("eight gaps");
        let linear_ok = rms <= 0.15 * drop;
        Ok((
            monotone && linear_ok,
            format!(
                "log-leakage monotone {monotone}; line fit rms {rms:.3} vs 15% of drop \
                 {:.3} (slope {slope:.3}/gap)",
                0.15 * drop
            ),
        ))
    })
}

/// Check 9: cross-module invariants hold at runtime.
///
/// A spot-check of the properties the unit suites enforce in depth:
/// eigendecomposition residual and unitarity, Hamiltonian Hermiticity and
/// trace identities, fit round-trips, Haar unitarity, and bitwise
/// parallel/serial agreement of both Monte Carlo routes.
pub fn check_property_suite() -> CheckOutcome {
    outcome(9, "property-suite", || {
        let mut lines = Vec::new();

        // Eigendecomposition: residual and orthonormality at n = 6.
        let model = build_chain_hamiltonian(6, 0.1)?;
        let s = crate::spectral::diagonalize_model(&model)?;
        verify_against_model(&s, &model)?;
        let v = s.eigenvectors();
        let gram = linalg::matmul(&linalg::adjoint(v), v);
        let mut ortho_dev: f64 = 0.0;
        for j in 0..s.dim() {
            for k in 0..s.dim() {
                let expect = if j == k { 1.0 } else { 0.0 };
                ortho_dev = ortho_dev.max((gram[[j, k]] - expect).norm());
            }
        }
        if ortho_dev > 1e-12 {
            return Ok((false, format!("eigenvector gram deviates by {ortho_dev:.1e}")));
        }
        lines.push(format!("eigenbasis orthonormal to {ortho_dev:.1e}"));

        // Hermiticity and trace identities of the chain at n = 6.
        let h = model.total();
        let herm = linalg::hermiticity_error(h.entries());
        if herm > 1e-14 {
            return Ok((false, format!("Hamiltonian Hermiticity error {herm:.1e}")));
        }
        let h1 = model.local_term(1)?;
        let h4 = model.local_term(4)?;
        let cross = normalized_trace_inner(&h1, &h4)?.norm();
        let m2_dense = normalized_trace_inner(&h1, &h1)?.re;
        let m2_total = normalized_trace_inner(h, &h1)?.re;
        if cross > 1e-12 || (m2_dense - 2.3625).abs() > 1e-12 || (m2_total - m2_dense).abs() > 1e-12
        {
            return Ok((
                false,
                format!(
                    "trace identities off: <H_1 H_4> = {cross:.1e}, <H_1^2> = {m2_dense}, \
                     <H H_1> = {m2_total}"
                ),
            ));
        }
        lines.push("trace identities hold to 1e-12".into());

        // Fit round-trips on synthetic data.
        let mut series = ScalingSeries::new("synthetic", 0.0);
        for n in 5..=12 {
            series.push_point(n, 3.7 * (n as f64).powf(-2.2), 0.0)?;
        }
        let fit = power_law_fit(&series, series.points().len())?;
        if (fit.amplitude - 3.7).abs() > 1e-10 || (fit.exponent - 2.2).abs() > 1e-10 {
            return Ok((
                false,
                format!(
                    "power-law round-trip off: {:.12} n^-{:.12}",
                    fit.amplitude, fit.exponent
                ),
            ));
        }
        let f0 = C64::new(0.3, -0.1);
        let f1 = C64::new(-0.8, 0.05);
        let points: Vec<(f64, C64)> = (0..40)
            .map(|k| {
                let e = -0.4 + 0.8 * k as f64 / 39.0;
                (e, f0 + f1 * e)
            })
            .collect();
        let profile = DiagonalProfile::from_points(points, "synthetic-line", 6)?;
        let line = fit_linear_response(&profile, 0.5)?;
        if (line.f0 - f0).norm() > 1e-12 || (line.f1 - f1).norm() > 1e-12 {
            return Ok((false, "linear-response round-trip off".into()));
        }
        lines.push("fit round-trips exact".into());

        // Haar sampler unitarity.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let u = sample_haar_unitary(8, &mut rng)?;
        let mut unit_dev: f64 = 0.0;
        let gram = linalg::matmul(&linalg::adjoint(&u), &u);
        for j in 0..8 {
            for k in 0..8 {
                let expect = if j == k { 1.0 } else { 0.0 };
                unit_dev = unit_dev.max((gram[[j, k]] - expect).norm());
            }
        }
        if unit_dev > 1e-12 {
            return Ok((false, format!("Haar sample unitarity off by {unit_dev:.1e}")));
        }
        lines.push(format!("Haar sample unitary to {unit_dev:.1e}"));

        // Parallel and sequential execution agree bitwise on both Monte
        // Carlo routes (identical per-sample streams, ordered pairwise
        // reduction).
        let report = check_generic_spectrum(s.energies(), GENERICITY_TOL)?;
        let x = to_energy_basis(&site_operator(PauliAxis::X, 1, 6)?, &s)?;
        let q = OtocQuery::new(&x, &x, &x, &x, &s)?.with_genericity(&report)?;
        let sampler = TimeSampler::new(17).with_max_samples(128)?;
        let par = sampled_infinite_time_average_with_mode(&q, &sampler, 1e-9, Mode::Parallel)?;
        let seq = sampled_infinite_time_average_with_mode(&q, &sampler, 1e-9, Mode::Sequential)?;
        let time_dev = (par.value - seq.value).norm().max((par.std_error - seq.std_error).abs());
        let a = random_hermitian(4, &mut rng);
        let b = random_hermitian(4, &mut rng);
        let hp = crate::haar::haar_otoc_monte_carlo_with_mode(&a, &b, &a, &b, 128, 5, Mode::Parallel)?;
        let hs =
            crate::haar::haar_otoc_monte_carlo_with_mode(&a, &b, &a, &b, 128, 5, Mode::Sequential)?;
        let haar_dev = (hp.mc_value - hs.mc_value).norm();
        if time_dev > 0.0 || haar_dev > 0.0 {
            return Ok((
                false,
                format!("parallel/serial drift: {time_dev:.1e} (time), {haar_dev:.1e} (haar)"),
            ));
        }
        lines.push("parallel == sequential bitwise".into());

        Ok((true, lines.join("; ")))
    })
}
