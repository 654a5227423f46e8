//! Size sweeps: compute a late-time observable across a range of chain
//! lengths, gate each point on the genericity scan, fit power laws, and
//! persist the series as reproducible artifacts.

use crate::cache::{self, CacheStatus};
use crate::error::{Error, Result};
use crate::operators::build_chain_hamiltonian;
use crate::otoc::{
    generic_closed_form_average, hamiltonian_term_prediction, leading_order_prediction,
    translation_averaged_fn, OtocQuery,
};
use crate::record;
use crate::spectral::{check_generic_spectrum, energy_basis_of_local_term};
use crate::C64;
use std::path::{Path, PathBuf};

/// Genericity gate for sweep points. Tighter than the default scan
/// tolerance on purpose: at 10^-8 the larger chains show accidental
/// near-collisions that would knock valid points out of the sweep, while
/// every nontrivial pair-sum gap observed through n = 12 stays far above
/// 10^-12. The scan itself still reports near misses for the record.
pub const SWEEP_GENERICITY_TOL: f64 = 1e-12;

/// Sanity bound on the imaginary part of observables that are real by
/// construction.
const IMAG_TOL: f64 = 1e-8;

/// What a sweep computes at each size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// Translation-averaged late-time OTOC of the field operator.
    Fn,
    /// Its leading-order prediction (exact arithmetic, no spectrum).
    Gn,
    /// The finite-size error `G_n - F_n`.
    GnMinusFn,
    /// `|avg_i OTOC(H_1, H_i) - 2<H_i^2>^2/n|`.
    TheoremResidual,
}

impl Observable {
    pub fn as_str(&self) -> &'static str {
        match self {
            Observable::Fn => "F_n",
            Observable::Gn => "G_n",
            Observable::GnMinusFn => "G_n_minus_F_n",
            Observable::TheoremResidual => "theorem_residual",
        }
    }

    /// Whether the observable needs a diagonalized, collision-free
    /// spectrum at each point.
    pub fn needs_genericity(&self) -> bool {
        !matches!(self, Observable::Gn)
    }
}

impl std::str::FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F_n" | "fn" => Ok(Observable::Fn),
            "G_n" | "gn" => Ok(Observable::Gn),
            "G_n_minus_F_n" | "gn-fn" => Ok(Observable::GnMinusFn),
            "theorem_residual" | "residual" => Ok(Observable::TheoremResidual),
            other => Err(Error::Domain(format!(
                "unknown observable '{other}'; expected F_n, G_n, G_n_minus_F_n \
                 or theorem_residual"
            ))),
        }
    }
}

impl std::fmt::Display for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything a sweep needs; hashed into the artifacts it produces.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub observable: Observable,
    /// Inclusive size range; `n_min > n_max` means an empty sweep.
    pub n_min: usize,
    pub n_max: usize,
    pub g: f64,
    /// Embedded in artifacts. The exact routes draw no randomness.
    pub seed: u64,
    pub genericity_tol: f64,
    /// Spectrum cache; `None` recomputes every diagonalization.
    pub cache_dir: Option<PathBuf>,
    /// Artifact directory; `None` skips persistence.
    pub output_dir: Option<PathBuf>,
    /// Tail length for the companion power-law fit artifact.
    pub tail: Option<usize>,
}

impl SweepConfig {
    pub fn new(observable: Observable, n_min: usize, n_max: usize, g: f64) -> Self {
        SweepConfig {
            observable,
            n_min,
            n_max,
            g,
            seed: 0,
            genericity_tol: SWEEP_GENERICITY_TOL,
            cache_dir: None,
            output_dir: None,
            tail: None,
        }
    }

    /// Canonical text form, the input of the artifact config hash.
    pub fn canonical_string(&self) -> String {
        format!(
            "observable={} n={}..{} g={} seed={} genericity_tol={:e} tail={:?}",
            self.observable, self.n_min, self.n_max, self.g, self.seed,
            self.genericity_tol, self.tail
        )
    }
}

/// One included sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub n: usize,
    pub value: f64,
    pub error: f64,
}

/// One point dropped from the sweep, with the reason kept for the record.
#[derive(Debug, Clone)]
pub struct ExcludedPoint {
    pub n: usize,
    pub reason: String,
}

/// An observable across chain sizes.
#[derive(Debug, Clone)]
pub struct ScalingSeries {
    observable: String,
    g: f64,
    points: Vec<ScalingPoint>,
    excluded: Vec<ExcludedPoint>,
}

impl ScalingSeries {
    pub fn new(observable: impl Into<String>, g: f64) -> Self {
        ScalingSeries {
            observable: observable.into(),
            g,
            points: Vec::new(),
            excluded: Vec::new(),
        }
    }

    /// Append a point; sizes must arrive strictly increasing.
    pub fn push_point(&mut self, n: usize, value: f64, error: f64) -> Result<()> {
        if let Some(last) = self.points.last() {
            if n <= last.n {
                return Err(Error::Contract(format!(
                    "series sizes must be strictly increasing; {n} after {}",
                    last.n
                )));
            }
        }
        if !(error >= 0.0) {
            return Err(Error::Domain(format!("negative error bar {error} at n={n}")));
        }
        self.points.push(ScalingPoint { n, value, error });
        Ok(())
    }

    pub fn push_excluded(&mut self, n: usize, reason: impl Into<String>) {
        self.excluded.push(ExcludedPoint {
            n,
            reason: reason.into(),
        });
    }

    pub fn observable(&self) -> &str {
        &self.observable
    }

    pub fn coupling(&self) -> f64 {
        self.g
    }

    pub fn points(&self) -> &[ScalingPoint] {
        &self.points
    }

    pub fn excluded(&self) -> &[ExcludedPoint] {
        &self.excluded
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `value ≈ amplitude * n^(-exponent)`; `exponent > 0` means decay.
#[derive(Debug, Clone, Copy)]
pub struct PowerLawFit {
    pub amplitude: f64,
    pub exponent: f64,
    /// Sizes of the first and last fitted points.
    pub fit_range: (usize, usize),
    pub rms_log_residual: f64,
}

/// Least-squares power law through the last `tail` points of a series.
pub fn power_law_fit(series: &ScalingSeries, tail: usize) -> Result<PowerLawFit> {
    if tail < 3 {
        return Err(Error::Domain(format!(
            "power-law fit needs a tail of at least 3 points, got {tail}"
        )));
    }
    let points = series.points();
    if points.len() < tail {
        return Err(Error::InsufficientData {
            context: "power_law_fit",
            needed: tail,
            found: points.len(),
        });
    }
    let tail_points = &points[points.len() - tail..];
    for p in tail_points {
        if !(p.value > 0.0) {
            return Err(Error::Domain(format!(
                "series value {} at n={} is not positive; a log-log fit \
                 is undefined there",
                p.value, p.n
            )));
        }
    }
    let m = tail as f64;
    let xs: Vec<f64> = tail_points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = tail_points.iter().map(|p| p.value.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        cov += (x - x_mean) * (y - y_mean);
        var += (x - x_mean) * (x - x_mean);
    }
    if var == 0.0 {
        return Err(Error::Numerical(
            "all tail sizes coincide; power-law slope undefined".into(),
        ));
    }
    let slope = cov / var;
    let intercept = y_mean - slope * x_mean;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    Ok(PowerLawFit {
        amplitude: intercept.exp(),
        exponent: -slope,
        fit_range: (tail_points[0].n, tail_points[tail - 1].n),
        rms_log_residual: (ss / m).sqrt(),
    })
}

/// Check the observable's value is real up to numerical noise and return
/// the real part.
fn real_part(n: usize, label: &str, v: C64) -> Result<f64> {
    if v.im.abs() > IMAG_TOL {
        return Err(Error::Numerical(format!(
            "{label} at n={n} has imaginary part {:.3e}; expected a real \
             observable",
            v.im
        )));
    }
    Ok(v.re)
}

/// Run one sweep: per size, build the model, obtain the spectrum (cache
/// or fresh), gate on genericity, and evaluate the observable. Points
/// failing the gate are excluded with a reason and the sweep continues.
/// With an output directory set, the series (and the tail fit, if
/// requested) are persisted as byte-deterministic artifacts.
pub fn run_scaling_sweep(config: &SweepConfig) -> Result<ScalingSeries> {
    let started = std::time::Instant::now();
    let mut series = ScalingSeries::new(config.observable.as_str(), config.g);
    for n in config.n_min..=config.n_max {
        match sweep_point(config, n)? {
            Ok(value) => series.push_point(n, value, 0.0)?,
            Err(reason) => series.push_excluded(n, reason),
        }
    }
    if let Some(dir) = &config.output_dir {
        persist_series(config, &series, started.elapsed().as_secs_f64(), dir)?;
    }
    Ok(series)
}

/// One size of the sweep: `Ok(Ok(value))`, `Ok(Err(reason))` when the
/// point is excluded, `Err` on genuine failures.
fn sweep_point(config: &SweepConfig, n: usize) -> Result<std::result::Result<f64, String>> {
    if !config.observable.needs_genericity() {
        return Ok(Ok(leading_order_prediction(n, config.g)?));
    }
    let model = build_chain_hamiltonian(n, config.g)?;
    let (spectral, status) = cache::load_or_compute(config.cache_dir.as_deref(), &model)?;
    if let CacheStatus::Rebuilt(reason) = &status {
        eprintln!("warning: spectrum cache entry for n={n} rebuilt: {reason}");
    }
    let report = check_generic_spectrum(spectral.energies(), config.genericity_tol)?;
    if !report.passed() {
        return Ok(Err(format!(
            "spectrum failed the genericity scan: {} nontrivial additive \
             collisions within {:.1e}",
            report.n_violations(),
            report.tolerance()
        )));
    }
    let value = match config.observable {
        Observable::Fn => {
            let est = translation_averaged_fn(&spectral, n, &report)?;
            real_part(n, "F_n", est.value)?
        }
        Observable::GnMinusFn => {
            let est = translation_averaged_fn(&spectral, n, &report)?;
            leading_order_prediction(n, config.g)? - real_part(n, "F_n", est.value)?
        }
        Observable::TheoremResidual => {
            let h1 = energy_basis_of_local_term(&model, 1, &spectral)?;
            let mut sum = C64::new(0.0, 0.0);
            for i in 1..=n {
                let hi = if i == 1 {
                    h1.clone()
                } else {
                    energy_basis_of_local_term(&model, i, &spectral)?
                };
                let q = OtocQuery::new(&h1, &hi, &h1, &hi, &spectral)?
                    .with_genericity(&report)?;
                sum += generic_closed_form_average(&q)?.value;
            }
            let avg = real_part(n, "averaged Hamiltonian-term OTOC", sum / n as f64)?;
            (avg - hamiltonian_term_prediction(&model)).abs()
        }
        Observable::Gn => unreachable!("handled above"),
    };
    Ok(Ok(value))
}

fn persist_series(
    config: &SweepConfig,
    series: &ScalingSeries,
    wall_time_s: f64,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let hash = record::config_hash(&config.canonical_string());
    let base = format!("scaling_{}_g{}", config.observable.as_str(), config.g);
    record::write_series_csv_file(series, config.seed, &hash, &dir.join(format!("{base}.csv")))?;
    if let Some(tail) = config.tail {
        let fit = power_law_fit(series, tail)?;
        let meta = record::RunMetadata::new(hash, config.seed, wall_time_s);
        let rec = record::FitRecord::new(series, &fit, meta);
        record::write_json_file(&rec, &dir.join(format!("{base}_fit.json")))?;
    }
    Ok(())
}

/// Residual of the Hamiltonian-term theorem across sizes:
/// `|avg_i OTOC(H_1, H_i) - 2<H_i^2>^2/n|` per n.
pub fn theorem_residual_series(
    n_min: usize,
    n_max: usize,
    g: f64,
    cache_dir: Option<&Path>,
) -> Result<ScalingSeries> {
    let mut config = SweepConfig::new(Observable::TheoremResidual, n_min, n_max, g);
    config.cache_dir = cache_dir.map(Path::to_path_buf);
    run_scaling_sweep(&config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn synthetic_series(amplitude: f64, exponent: f64) -> ScalingSeries {
        let mut s = ScalingSeries::new("synthetic", 0.0);
        for n in 5..=12 {
            s.push_point(n, amplitude * (n as f64).powf(-exponent), 0.0)
                .unwrap();
        }
        s
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let s = synthetic_series(2.0, 3.0);
        let fit = power_law_fit(&s, 5).unwrap();
        assert_abs_diff_eq!(fit.amplitude, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.exponent, 3.0, epsilon = 1e-12);
        assert!(fit.rms_log_residual < 1e-12);
        assert_eq!(fit.fit_range, (8, 12));
    }

    #[test]
    fn fit_round_trips_over_parameter_grid() {
        for &a in &[0.1, 1.0, 10.0] {
            for &b in &[0.5, 1.0, 2.0] {
                let s = synthetic_series(a, b);
                let fit = power_law_fit(&s, 6).unwrap();
                assert_abs_diff_eq!(fit.amplitude, a, epsilon = 1e-10);
                assert_abs_diff_eq!(fit.exponent, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn growing_series_gets_negative_exponent() {
        let mut s = ScalingSeries::new("growing", 0.0);
        for n in 5..=10 {
            s.push_point(n, 0.5 * (n as f64).powf(1.5), 0.0).unwrap();
        }
        let fit = power_law_fit(&s, 4).unwrap();
        assert_abs_diff_eq!(fit.exponent, -1.5, epsilon = 1e-10);
        assert!(fit.amplitude > 0.0);
    }

    #[test]
    fn nonpositive_tail_value_is_named() {
        let mut s = ScalingSeries::new("broken", 0.0);
        s.push_point(5, 1.0, 0.0).unwrap();
        s.push_point(6, 0.5, 0.0).unwrap();
        s.push_point(7, -0.25, 0.0).unwrap();
        s.push_point(8, 0.125, 0.0).unwrap();
        match power_law_fit(&s, 3) {
            Err(Error::Domain(msg)) => assert!(msg.contains("n=7"), "message: {msg}"),
            other => panic!("expected a domain error, got {other:?}"),
        }
    }

    #[test]
    fn tail_bounds_are_enforced() {
        let s = synthetic_series(1.0, 1.0);
        assert!(matches!(power_law_fit(&s, 2), Err(Error::Domain(_))));
        assert!(matches!(
            power_law_fit(&s, 9),
            Err(Error::InsufficientData { .. })
        ));
        assert!(power_law_fit(&s, 8).is_ok());
    }

    #[test]
    fn series_enforces_increasing_sizes() {
        let mut s = ScalingSeries::new("t", 0.1);
        s.push_point(5, 1.0, 0.0).unwrap();
        assert!(s.push_point(5, 1.0, 0.0).is_err());
        assert!(s.push_point(4, 1.0, 0.0).is_err());
        assert!(s.push_point(6, 1.0, -0.5).is_err());
        assert!(s.push_point(6, 1.0, 0.0).is_ok());
    }

    #[test]
    fn empty_range_gives_empty_series() {
        let config = SweepConfig::new(Observable::Fn, 8, 5, 0.1);
        let series = run_scaling_sweep(&config).unwrap();
        assert!(series.is_empty());
        assert!(series.excluded().is_empty());
    }

    #[test]
    fn leading_prediction_sweep_is_exact_arithmetic() {
        // No spectrum involved: sizes beyond the dense cap are fine.
        let config = SweepConfig::new(Observable::Gn, 5, 14, 0.1);
        let series = run_scaling_sweep(&config).unwrap();
        assert_eq!(series.points().len(), 10);
        for p in series.points() {
            assert_abs_diff_eq!(p.value, (14.0 / 15.0) / p.n as f64, epsilon = 1e-12);
            assert_eq!(p.error, 0.0);
        }
    }

    #[test]
    fn late_time_otoc_sweep_matches_direct_evaluation() {
        let config = SweepConfig::new(Observable::Fn, 5, 6, 0.1);
        let series = run_scaling_sweep(&config).unwrap();
        assert_eq!(series.points().len(), 2);
        assert!(series.excluded().is_empty());
        for p in series.points() {
            let model = build_chain_hamiltonian(p.n, 0.1).unwrap();
            let s = crate::spectral::diagonalize_model(&model).unwrap();
            let report = check_generic_spectrum(s.energies(), SWEEP_GENERICITY_TOL).unwrap();
            let direct = translation_averaged_fn(&s, p.n, &report).unwrap();
            assert_abs_diff_eq!(p.value, direct.value.re, epsilon = 1e-13);
        }
        // Monotone decreasing, positive, below the prediction.
        assert!(series.points()[0].value > series.points()[1].value);
        assert!(series.points()[1].value > 0.0);
    }

    #[test]
    fn difference_sweep_is_consistent_with_parts() {
        let fn_series =
            run_scaling_sweep(&SweepConfig::new(Observable::Fn, 5, 5, 0.1)).unwrap();
        let diff_series =
            run_scaling_sweep(&SweepConfig::new(Observable::GnMinusFn, 5, 5, 0.1)).unwrap();
        let g5 = leading_order_prediction(5, 0.1).unwrap();
        assert_abs_diff_eq!(
            diff_series.points()[0].value,
            g5 - fn_series.points()[0].value,
            epsilon = 1e-13
        );
    }

    #[test]
    fn degenerate_point_is_excluded_and_run_continues() {
        // g = 0 restores a reflection symmetry and the n=6 spectrum is
        // degenerate: the genericity gate must drop the point.
        let config = SweepConfig::new(Observable::Fn, 6, 6, 0.0);
        let series = run_scaling_sweep(&config).unwrap();
        assert!(series.is_empty());
        assert_eq!(series.excluded().len(), 1);
        assert_eq!(series.excluded()[0].n, 6);
        assert!(series.excluded()[0].reason.contains("genericity"));
    }

    #[test]
    fn theorem_residual_matches_frozen_value() {
        let series = theorem_residual_series(6, 6, 0.1, None).unwrap();
        assert_eq!(series.points().len(), 1);
        // Frozen from the independent reference implementation:
        // avg_i OTOC(H_1,H_i) = 1.29684838, prediction 1.86046875.
        assert_abs_diff_eq!(series.points()[0].value, 0.56362037, epsilon = 1e-7);
    }

    #[test]
    fn sweep_artifacts_are_byte_deterministic() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        for dir in [&dir_a, &dir_b] {
            let mut config = SweepConfig::new(Observable::Fn, 5, 6, 0.1);
            config.tail = None;
            config.output_dir = Some(dir.path().to_path_buf());
            run_scaling_sweep(&config).unwrap();
        }
        let name = "scaling_F_n_g0.1.csv";
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn observable_labels_round_trip() {
        for obs in [
            Observable::Fn,
            Observable::Gn,
            Observable::GnMinusFn,
            Observable::TheoremResidual,
        ] {
            let parsed: Observable = obs.as_str().parse().unwrap();
            assert_eq!(parsed, obs);
        }
        assert!("bogus".parse::<Observable>().is_err());
    }
}
