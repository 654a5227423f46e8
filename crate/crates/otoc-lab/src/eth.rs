//! Eigenstate-thermalization diagnostics: diagonal matrix-element
//! profiles, linear-response fits of the smooth profile function, moments
//! of the diagonal, and the spectral-concentration fraction.
//!
//! The smooth-profile picture says eigenstates with similar energy have
//! similar local expectation values, `X_jj ≈ f_X(E_j/n)`; the tools here
//! sample `f_X` at the eigenstates, fit its behavior near zero energy
//! density, and measure how sharply the spectrum concentrates there.

use crate::error::{Error, Result};
use crate::spectral::{EnergyBasisOperator, SpectralData};
use crate::C64;

/// Diagonal matrix elements of one operator against energy density:
/// the function `f_X` sampled at the eigenstates.
#[derive(Debug, Clone)]
pub struct DiagonalProfile {
    /// `(E_j/n, X_jj)` in spectral order.
    points: Vec<(f64, C64)>,
    operator_label: String,
    n: usize,
}

impl DiagonalProfile {
    /// Assemble a profile from raw points (kept public for synthetic
    /// fit-recovery tests and external data). Densities must be
    /// non-descending.
    pub fn from_points(
        points: Vec<(f64, C64)>,
        operator_label: impl Into<String>,
        n: usize,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("empty diagonal profile".into()));
        }
        if points.windows(2).any(|w| w[0].0 > w[1].0) {
            return Err(Error::Contract(
                "profile energy densities must be non-descending".into(),
            ));
        }
        Ok(DiagonalProfile {
            points,
            operator_label: operator_label.into(),
            n,
        })
    }

    pub fn points(&self) -> &[(f64, C64)] {
        &self.points
    }

    pub fn operator_label(&self) -> &str {
        &self.operator_label
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }
}

/// First-order behavior of a profile near zero energy density:
/// `f_X(e) ≈ f0 + f1 e` over `|e| < window`.
#[derive(Debug, Clone, Copy)]
pub struct EthFit {
    pub f0: C64,
    pub f1: C64,
    /// Energy-density half-width the fit was restricted to.
    pub window: f64,
    /// Root-mean-square residual over the in-window points.
    pub residual_rms: f64,
}

/// Minimum number of in-window points for a meaningful line fit.
const MIN_FIT_POINTS: usize = 10;

/// Sample the diagonal of `x` against energy density `E_j/n`.
pub fn diagonal_profile(
    x: &EnergyBasisOperator,
    s: &SpectralData,
    n: usize,
) -> Result<DiagonalProfile> {
    if x.tag() != s.tag() {
        return Err(Error::Contract(format!(
            "operator '{}' was built in basis {}, profile requested over {}",
            x.source_label(),
            x.tag(),
            s.tag()
        )));
    }
    if n != s.tag().n_sites() {
        return Err(Error::Contract(format!(
            "site count {n} inconsistent with spectrum {}",
            s.tag()
        )));
    }
    let nf = n as f64;
    let points = s
        .energies()
        .iter()
        .zip(x.diagonal())
        .map(|(&e, v)| (e / nf, v))
        .collect();
    DiagonalProfile::from_points(points, x.source_label(), n)
}

/// Least-squares line through the profile points with `|e| < window`.
pub fn fit_linear_response(profile: &DiagonalProfile, window: f64) -> Result<EthFit> {
    if !(window > 0.0) {
        return Err(Error::Domain(format!(
            "fit window must be positive, got {window}"
        )));
    }
    let used: Vec<(f64, C64)> = profile
        .points
        .iter()
        .copied()
        .filter(|(e, _)| e.abs() < window)
        .collect();
    if used.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            context: "fit_linear_response",
            needed: MIN_FIT_POINTS,
            found: used.len(),
        });
    }
    let m = used.len() as f64;
    let e_mean = used.iter().map(|(e, _)| e).sum::<f64>() / m;
    let v_mean = used.iter().map(|(_, v)| v).sum::<C64>() / m;
    let mut cov = C64::new(0.0, 0.0);
    let mut var = 0.0f64;
    for &(e, v) in &used {
        let de = e - e_mean;
        cov += (v - v_mean) * de;
        var += de * de;
    }
    if var == 0.0 {
        return Err(Error::Numerical(
            "all in-window energy densities coincide; slope is undefined".into(),
        ));
    }
    let f1 = cov / var;
    let f0 = v_mean - f1 * e_mean;
    let ss: f64 = used
        .iter()
        .map(|&(e, v)| (v - f0 - f1 * e).norm_sqr())
        .sum();
    Ok(EthFit {
        f0,
        f1,
        window,
        residual_rms: (ss / m).sqrt(),
    })
}

/// `(1/d) Σ_j |X_jj|^p` for `p` in {2, 4}.
pub fn diagonal_moment(x: &EnergyBasisOperator, p: u32) -> Result<f64> {
    if p != 2 && p != 4 {
        return Err(Error::Domain(format!(
            "diagonal moment is defined here for p in {{2, 4}}, got {p}"
        )));
    }
    let d = x.dim() as f64;
    let sum: f64 = x
        .diagonal()
        .iter()
        .map(|v| {
            let sq = v.norm_sqr();
            if p == 2 {
                sq
            } else {
                sq * sq
            }
        })
        .sum();
    Ok(sum / d)
}

/// Fraction of levels with `|E_j| >= n^theta`: how much of the spectrum
/// sits outside the zero-energy-density concentration window.
pub fn zero_density_fraction(energies: &[f64], n: usize, theta: f64) -> Result<f64> {
    if !(theta > 0.5 && theta < 1.0) {
        return Err(Error::Domain(format!(
            "threshold exponent must lie in (0.5, 1), got {theta}"
        )));
    }
    if energies.is_empty() {
        return Err(Error::Domain("empty spectrum".into()));
    }
    let threshold = (n as f64).powf(theta);
    let outside = energies.iter().filter(|e| e.abs() >= threshold).count();
    Ok(outside as f64 / energies.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_chain_hamiltonian, site_operator, DenseOperator, PauliAxis};
    use crate::spectral::{
        diagonalize_model, energy_basis_of_local_term, to_energy_basis,
    };
    use approx::assert_abs_diff_eq;

    fn chain(n: usize, g: f64) -> (crate::operators::HamiltonianModel, SpectralData) {
        let model = build_chain_hamiltonian(n, g).unwrap();
        let s = diagonalize_model(&model).unwrap();
        (model, s)
    }

    #[test]
    fn hamiltonian_term_profile_is_the_exact_line() {
        let n = 5;
        let (model, s) = chain(n, 0.1);
        for i in 1..=n {
            let hi = energy_basis_of_local_term(&model, i, &s).unwrap();
            let profile = diagonal_profile(&hi, &s, n).unwrap();
            for &(e, v) in profile.points() {
                assert!(
                    (v - C64::new(e, 0.0)).norm() < 1e-10,
                    "i={i}: ({e}, {v})"
                );
            }
            let fit = fit_linear_response(&profile, 0.7).unwrap();
            assert!(fit.f0.norm() < 1e-10);
            assert!((fit.f1 - C64::new(1.0, 0.0)).norm() < 1e-10);
            assert!(fit.residual_rms < 1e-10);
        }
    }

    #[test]
    fn identity_profile_is_flat_at_one() {
        let n = 4;
        let (_, s) = chain(n, 0.1);
        let id = to_energy_basis(&DenseOperator::identity(16).unwrap(), &s).unwrap();
        let profile = diagonal_profile(&id, &s, n).unwrap();
        assert_eq!(profile.points().len(), 16);
        for &(_, v) in profile.points() {
            assert!((v - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let fit = fit_linear_response(&profile, 10.0).unwrap();
        assert!((fit.f0 - C64::new(1.0, 0.0)).norm() < 1e-10);
        assert!(fit.f1.norm() < 1e-10);
    }

    #[test]
    fn traceless_operator_profile_has_zero_mean() {
        let n = 6;
        let (_, s) = chain(n, 0.1);
        let sx = site_operator(PauliAxis::X, 1, n).unwrap();
        let x = to_energy_basis(&sx, &s).unwrap();
        let profile = diagonal_profile(&x, &s, n).unwrap();
        let mean: C64 =
            profile.points().iter().map(|&(_, v)| v).sum::<C64>() / profile.points().len() as f64;
        assert!(mean.norm() < 1e-10, "mean {mean}");
    }

    #[test]
    fn synthetic_linear_profile_is_recovered_exactly() {
        let f0 = C64::new(0.3, -0.2);
        let f1 = C64::new(1.7, 0.1);
        let points: Vec<(f64, C64)> = (0..50)
            .map(|k| {
                let e = -0.5 + k as f64 / 49.0;
                (e, f0 + f1 * e)
            })
            .collect();
        let profile = DiagonalProfile::from_points(points, "synthetic", 8).unwrap();
        for window in [0.2, 0.4, 1.0] {
            let fit = fit_linear_response(&profile, window).unwrap();
            assert!((fit.f0 - f0).norm() < 1e-12, "window {window}");
            assert!((fit.f1 - f1).norm() < 1e-12, "window {window}");
            assert!(fit.residual_rms < 1e-12);
        }
    }

    #[test]
    fn fit_needs_enough_points_in_window() {
        let points: Vec<(f64, C64)> = (0..50)
            .map(|k| (-0.5 + k as f64 / 49.0, C64::new(1.0, 0.0)))
            .collect();
        let profile = DiagonalProfile::from_points(points, "flat", 8).unwrap();
        assert!(matches!(
            fit_linear_response(&profile, 0.04),
            Err(Error::InsufficientData { .. })
        ));
        assert!(fit_linear_response(&profile, -1.0).is_err());
    }

    #[test]
    fn unsorted_profile_is_rejected() {
        let points = vec![
            (0.5, C64::new(1.0, 0.0)),
            (-0.5, C64::new(1.0, 0.0)),
        ];
        assert!(DiagonalProfile::from_points(points, "bad", 2).is_err());
    }

    #[test]
    fn moment_of_identity_is_one() {
        let (_, s) = chain(3, 0.1);
        let id = to_energy_basis(&DenseOperator::identity(8).unwrap(), &s).unwrap();
        assert_abs_diff_eq!(diagonal_moment(&id, 2).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(diagonal_moment(&id, 4).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn moment_rejects_other_orders() {
        let (_, s) = chain(3, 0.1);
        let id = to_energy_basis(&DenseOperator::identity(8).unwrap(), &s).unwrap();
        assert!(matches!(diagonal_moment(&id, 3), Err(Error::Domain(_))));
        assert!(matches!(diagonal_moment(&id, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn moment_bridge_for_hamiltonian_terms() {
        // (H_i)_jj = E_j/n makes the second diagonal moment equal
        // <H^2>/n^2 = <H_i^2>/n.
        for n in [5usize, 6] {
            let (model, s) = chain(n, 0.1);
            let hi = energy_basis_of_local_term(&model, 2, &s).unwrap();
            let m2 = diagonal_moment(&hi, 2).unwrap();
            let want = model.local_term_second_moment() / n as f64;
            assert_abs_diff_eq!(m2, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_density_boundary_cases() {
        // Single-site sigma-z spectrum: both levels at |E| = 1 = 1^theta.
        assert_abs_diff_eq!(
            zero_density_fraction(&[-1.0, 1.0], 1, 0.51).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        // Threshold above every |E_j|.
        assert_abs_diff_eq!(
            zero_density_fraction(&[-0.5, 0.1, 0.4], 4, 0.9).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        // Plain counting.
        assert_abs_diff_eq!(
            zero_density_fraction(&[-3.0, -0.1, 0.0, 2.5], 2, 0.6).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn zero_density_rejects_bad_exponent() {
        for theta in [0.5, 1.0, 0.2, 1.7] {
            assert!(zero_density_fraction(&[1.0], 2, theta).is_err());
        }
    }

    #[test]
    fn profile_rejects_basis_mismatch() {
        let (_, s3) = chain(3, 0.1);
        let (_, s4) = chain(4, 0.1);
        let sx = site_operator(PauliAxis::X, 1, 4).unwrap();
        let x4 = to_energy_basis(&sx, &s4).unwrap();
        assert!(diagonal_profile(&x4, &s3, 3).is_err());
        assert!(diagonal_profile(&x4, &s4, 3).is_err());
    }
}
