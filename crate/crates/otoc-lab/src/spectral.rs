//! Exact diagonalization, energy-basis transforms, spectrum genericity,
//! energy moments, and the microcanonical leakage diagnostic.

use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::{DenseOperator, HamiltonianModel, MAX_SITES};
use crate::C64;
use ndarray::Array2;

/// Bumped whenever the model construction or diagonalization convention
/// changes; part of every cache key.
pub const BUILD_VERSION: u32 = 1;

/// Provenance key tying spectra and energy-basis operators to the model
/// they came from. Couplings are compared bit-exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelTag {
    n: u32,
    g_bits: u64,
    version: u32,
}

impl ModelTag {
    pub fn new(n: usize, g: f64) -> Self {
        ModelTag {
            n: n as u32,
            g_bits: g.to_bits(),
            version: BUILD_VERSION,
        }
    }

    pub fn of_model(model: &HamiltonianModel) -> Self {
        Self::new(model.n_sites(), model.coupling())
    }

    pub fn n_sites(&self) -> usize {
        self.n as usize
    }

    pub fn g(&self) -> f64 {
        f64::from_bits(self.g_bits)
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub(crate) fn from_raw(n: u32, g_bits: u64, version: u32) -> Self {
        ModelTag {
            n,
            g_bits,
            version,
        }
    }
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n={},g={},v={}", self.n, self.g(), self.version)
    }
}

/// Eigendecomposition of a chain Hamiltonian: `H = V diag(E) V†` with
/// ascending energies; column `j` of `V` is eigenstate `j`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    tag: ModelTag,
    energies: Vec<f64>,
    eigenvectors: Array2<C64>,
}

impl SpectralData {
    pub fn tag(&self) -> ModelTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn eigenvectors(&self) -> &Array2<C64> {
        &self.eigenvectors
    }

    pub(crate) fn from_parts(
        tag: ModelTag,
        energies: Vec<f64>,
        eigenvectors: Array2<C64>,
    ) -> Result<Self> {
        if eigenvectors.nrows() != energies.len() || eigenvectors.ncols() != energies.len() {
            return Err(Error::DimensionMismatch {
                context: "SpectralData::from_parts",
                expected: energies.len(),
                found: eigenvectors.nrows(),
            });
        }
        if !energies.windows(2).all(|w| w[0] <= w[1]) {
            return Err(Error::Contract("energies not sorted ascending".into()));
        }
        Ok(SpectralData {
            tag,
            energies,
            eigenvectors,
        })
    }
}

/// Operator expressed in the energy eigenbasis of a specific spectrum.
#[derive(Debug, Clone)]
pub struct EnergyBasisOperator {
    tag: ModelTag,
    source_label: String,
    entries: Array2<C64>,
}

impl EnergyBasisOperator {
    pub fn tag(&self) -> ModelTag {
        self.tag
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    /// Diagonal matrix elements X_jj.
    pub fn diagonal(&self) -> Vec<C64> {
        self.entries.diag().to_vec()
    }

    /// Transform back to the computational basis: `V B V†`.
    pub fn to_computational_basis(&self, s: &SpectralData) -> Result<Array2<C64>> {
        check_same_tag(self.tag, s.tag(), "to_computational_basis")?;
        let v = s.eigenvectors();
        Ok(linalg::matmul(
            &linalg::matmul(v, &self.entries),
            &linalg::adjoint(v),
        ))
    }
}

fn check_same_tag(a: ModelTag, b: ModelTag, context: &str) -> Result<()> {
    if a != b {
        return Err(Error::Contract(format!(
            "{context}: operators from different spectra ({a} vs {b})"
        )));
    }
    Ok(())
}

/// Exact diagonalization with built-in sanity checks.
///
/// Cheap checks run on every call: eigenvalue ordering, eigenvector column
/// norms, and the eigen-residual `H v_j - E_j v_j` on a deterministic
/// sample of columns. The full reconstruction and unitarity invariants are
/// exercised at small sizes by the test suite and, for every cached
/// spectrum, by [`verify_against_model`] on load.
pub fn diagonalize(h: &DenseOperator, tag: ModelTag) -> Result<SpectralData> {
    if !h.is_hermitian() {
        return Err(Error::Contract(format!(
            "diagonalize requires a Hermitian operator, got '{}'",
            h.label()
        )));
    }
    if h.dim() > (1 << MAX_SITES) {
        return Err(Error::ResourceLimit(format!(
            "dimension {} above dense cap {}",
            h.dim(),
            1usize << MAX_SITES
        )));
    }
    let eig = linalg::eigh(h.entries())?;
    let s = SpectralData::from_parts(tag, eig.energies, eig.vectors)?;

    // Column normalization.
    let d = s.dim();
    for j in 0..d {
        let norm: f64 = s
            .eigenvectors
            .column(j)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Numerical(format!(
                "eigenvector {j} has norm {norm}, expected 1"
            )));
        }
    }
    // Spot-check the eigen-residual on up to 16 spread-out columns.
    let scale = linalg::max_abs(h.entries()).max(1.0);
    let step = (d / 16).max(1);
    for j in (0..d).step_by(step) {
        let v = s.eigenvectors.column(j);
        let hv = h.entries().dot(&v);
        let mut worst = 0.0f64;
        for (t, hv_t) in hv.iter().enumerate() {
            worst = worst.max((hv_t - v[t] * s.energies[j]).norm());
        }
        if worst > 1e-9 * scale {
            return Err(Error::Numerical(format!(
                "eigen-residual {worst:.3e} on column {j} exceeds tolerance"
            )));
        }
    }
    Ok(s)
}

/// Diagonalize a chain model (convenience wrapper tagging the result).
pub fn diagonalize_model(model: &HamiltonianModel) -> Result<SpectralData> {
    diagonalize(model.total(), ModelTag::of_model(model))
}

/// Full residual check of a spectrum against its model, in O(n d^2) via
/// the Pauli-string structure: `max |H V - V diag(E)|` over all entries,
/// compared to `1e-9 * max|H_local| * n`. Used to validate cache loads.
pub fn verify_against_model(s: &SpectralData, model: &HamiltonianModel) -> Result<()> {
    if s.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "verify_against_model",
            expected: model.dim(),
            found: s.dim(),
        });
    }
    let v = s.eigenvectors();
    let mut hv = Array2::<C64>::zeros(v.raw_dim());
    for i in 1..=model.n_sites() {
        hv += &model.apply_local_term(i, v)?;
    }
    // Subtract V diag(E) column by column.
    for (j, &e) in s.energies().iter().enumerate() {
        let col = v.column(j);
        let mut res = hv.column_mut(j);
        res.zip_mut_with(&col, |r, &c| *r -= c * e);
    }
    let worst = linalg::max_abs(&hv);
    // The spectral radius bounds max|H|; local norms sum to a safe scale.
    let scale = model.local_term_norm()? * model.n_sites() as f64;
    if worst > 1e-9 * scale.max(1.0) {
        return Err(Error::Numerical(format!(
            "spectrum fails eigen-residual check: {worst:.3e}"
        )));
    }
    Ok(())
}

/// `V† X V`: the operator in the energy eigenbasis.
pub fn to_energy_basis(x: &DenseOperator, s: &SpectralData) -> Result<EnergyBasisOperator> {
    if x.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            context: "to_energy_basis",
            expected: s.dim(),
            found: x.dim(),
        });
    }
    let v = s.eigenvectors();
    let entries = linalg::matmul(&linalg::adjoint(v), &linalg::matmul(x.entries(), v));
    Ok(EnergyBasisOperator {
        tag: s.tag(),
        source_label: x.label().to_string(),
        entries,
    })
}

/// Energy-basis matrix of local Hamiltonian term `i`, exploiting the
/// string structure for the left factor (one dense product instead of two).
pub fn energy_basis_of_local_term(
    model: &HamiltonianModel,
    i: usize,
    s: &SpectralData,
) -> Result<EnergyBasisOperator> {
    check_same_tag(ModelTag::of_model(model), s.tag(), "energy_basis_of_local_term")?;
    let v = s.eigenvectors();
    let w = model.apply_local_term(i, v)?;
    let entries = linalg::matmul(&linalg::adjoint(v), &w);
    Ok(EnergyBasisOperator {
        tag: s.tag(),
        source_label: format!("H_{i}"),
        entries,
    })
}

/// Diagonal energy-basis elements `<j|H_i|j>` for one local term, in
/// O(d^2) without any dense matrix product.
pub fn energy_diagonal_of_local_term(
    model: &HamiltonianModel,
    i: usize,
    s: &SpectralData,
) -> Result<Vec<C64>> {
    check_same_tag(ModelTag::of_model(model), s.tag(), "energy_diagonal_of_local_term")?;
    let v = s.eigenvectors();
    let w = model.apply_local_term(i, v)?;
    let d = s.dim();
    let mut diag = vec![C64::new(0.0, 0.0); d];
    for j in 0..d {
        let vc = v.column(j);
        let wc = w.column(j);
        let mut acc = C64::new(0.0, 0.0);
        for t in 0..d {
            acc += vc[t].conj() * wc[t];
        }
        diag[j] = acc;
    }
    Ok(diag)
}

/// One nontrivial additive coincidence `E_p + E_r ~ E_q + E_s`.
/// Indices are 0-based positions in the sorted energy list, with
/// `p <= r`, `q <= s`, and `(p, r)` lexicographically before `(q, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Collision {
    pub p: u32,
    pub r: u32,
    pub q: u32,
    pub s: u32,
}

impl Collision {
    fn canonical(mut a: (u32, u32), mut b: (u32, u32)) -> Self {
        if a.1 < a.0 {
            a = (a.1, a.0);
        }
        if b.1 < b.0 {
            b = (b.1, b.0);
        }
        if b < a {
            std::mem::swap(&mut a, &mut b);
        }
        Collision {
            p: a.0,
            r: a.1,
            q: b.0,
            s: b.1,
        }
    }
}

/// Record of a collision together with the residual gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionRecord {
    pub collision: Collision,
    pub gap: f64,
}

/// Outcome of the generic-spectrum scan.
#[derive(Debug, Clone)]
pub struct GenericityReport {
    tolerance: f64,
    n_levels: usize,
    n_violations: u64,
    n_near_misses: u64,
    violations: Vec<CollisionRecord>,
    near_misses: Vec<CollisionRecord>,
    min_nontrivial_gap: Option<f64>,
    truncated: bool,
}

impl GenericityReport {
    pub fn passed(&self) -> bool {
        self.n_violations == 0
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    /// Total number of nontrivial quadruples with gap < tolerance.
    pub fn n_violations(&self) -> u64 {
        self.n_violations
    }

    /// Total number with gap in [tolerance, 10 * tolerance).
    pub fn n_near_misses(&self) -> u64 {
        self.n_near_misses
    }

    /// Recorded violations (capped; see [`Self::truncated`]).
    pub fn violations(&self) -> &[CollisionRecord] {
        &self.violations
    }

    pub fn near_misses(&self) -> &[CollisionRecord] {
        &self.near_misses
    }

    /// Smallest nontrivial |E_p + E_r - E_q - E_s| seen, if any pair of
    /// sums was compared.
    pub fn min_nontrivial_gap(&self) -> Option<f64> {
        self.min_nontrivial_gap
    }

    /// True when record lists were capped (counts remain exact unless the
    /// scan itself aborted, which also sets this flag).
    pub fn truncated(&self) -> bool {
        self.truncated
    }
}

/// Cap on stored collision records; counts keep accumulating past it.
const MAX_RECORDS: usize = 4096;
/// Hard cap on counted coincidences; beyond this the scan aborts with
/// `truncated = true` (only plausible for heavily degenerate spectra).
const MAX_COUNT: u64 = 10_000_000;

/// Scan a sorted spectrum for nontrivial additive coincidences
/// `E_p + E_r = E_q + E_s` within `tol`, reporting near-misses up to
/// `10 * tol`. Runs in O(d^2 log d) by sorting all pair sums.
///
/// A quadruple is trivial when its unordered index pairs {p,r} and {q,s}
/// coincide, which covers exactly ((p=q) and (r=s)) or ((p=s) and (r=q));
/// each unordered pair enters the scan once, so trivial quadruples are
/// never compared. Two-fold degeneracies E_a = E_b surface as collisions
/// such as {a,a} vs {a,b}.
pub fn check_generic_spectrum(energies: &[f64], tol: f64) -> Result<GenericityReport> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let d = energies.len();
    let mut report = GenericityReport {
        tolerance: tol,
        n_levels: d,
        n_violations: 0,
        n_near_misses: 0,
        violations: Vec::new(),
        near_misses: Vec::new(),
        min_nontrivial_gap: None,
        truncated: false,
    };
    if d < 2 {
        return Ok(report);
    }
    if d > u32::MAX as usize {
        return Err(Error::ResourceLimit("spectrum too large for scan".into()));
    }
    // All unordered pair sums (p <= r), sorted.
    let mut sums: Vec<(f64, u32, u32)> = Vec::with_capacity(d * (d + 1) / 2);
    for p in 0..d {
        for r in p..d {
            sums.push((energies[p] + energies[r], p as u32, r as u32));
        }
    }
    sums.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite energies"));

    let wide = 10.0 * tol;
    let mut min_gap = f64::INFINITY;
    'outer: for i in 0..sums.len() {
        if i + 1 < sums.len() {
            let adjacent = sums[i + 1].0 - sums[i].0;
            if adjacent < min_gap {
                min_gap = adjacent;
            }
        }
        for j in (i + 1)..sums.len() {
            let gap = sums[j].0 - sums[i].0;
            if gap >= wide {
                break;
            }
            let record = CollisionRecord {
                collision: Collision::canonical(
                    (sums[i].1, sums[i].2),
                    (sums[j].1, sums[j].2),
                ),
                gap,
            };
            if gap < tol {
                report.n_violations += 1;
                if report.violations.len() < MAX_RECORDS {
                    report.violations.push(record);
                } else {
                    report.truncated = true;
                }
            } else {
                report.n_near_misses += 1;
                if report.near_misses.len() < MAX_RECORDS {
                    report.near_misses.push(record);
                } else {
                    report.truncated = true;
                }
            }
            if report.n_violations + report.n_near_misses > MAX_COUNT {
                report.truncated = true;
                break 'outer;
            }
        }
    }
    if min_gap.is_finite() {
        report.min_nontrivial_gap = Some(min_gap);
    }
    Ok(report)
}

/// `(1/d) sum_j E_j^m`. The site count cross-checks that the spectrum is
/// complete (`d = 2^n`).
pub fn energy_moment(energies: &[f64], m: u32, n: usize) -> Result<f64> {
    if m < 1 {
        return Err(Error::Domain("moment order must be >= 1".into()));
    }
    let d = energies.len();
    if d != 1usize << n {
        return Err(Error::DimensionMismatch {
            context: "energy_moment",
            expected: 1usize << n,
            found: d,
        });
    }
    let sum: f64 = energies.iter().map(|&e| e.powi(m as i32)).sum();
    Ok(sum / d as f64)
}

/// Operator norm of the block of `X` connecting eigenstates with energy
/// below `eps` (rows) to eigenstates with energy at least `eps_prime`
/// (columns). Exponential decay of this quantity in `eps_prime - eps` is
/// the microcanonical leakage bound.
pub fn microcanonical_leakage(
    x: &EnergyBasisOperator,
    energies: &[f64],
    eps: f64,
    eps_prime: f64,
) -> Result<f64> {
    if !(eps < eps_prime) {
        return Err(Error::Domain(format!(
            "leakage window requires eps < eps_prime, got {eps} >= {eps_prime}"
        )));
    }
    if x.dim() != energies.len() {
        return Err(Error::DimensionMismatch {
            context: "microcanonical_leakage",
            expected: energies.len(),
            found: x.dim(),
        });
    }
    if !energies.windows(2).all(|w| w[0] <= w[1]) {
        return Err(Error::Contract("energies not sorted ascending".into()));
    }
    let rows = energies.partition_point(|&e| e < eps);
    let col_start = energies.partition_point(|&e| e < eps_prime);
    if rows == 0 || col_start == energies.len() {
        return Ok(0.0);
    }
    let block = x
        .entries()
        .slice(ndarray::s![0..rows, col_start..energies.len()])
        .to_owned();
    linalg::operator_norm(&block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_chain_hamiltonian, site_operator, PauliAxis};
    use approx::assert_abs_diff_eq;

    fn model_spectrum(n: usize, g: f64) -> (crate::operators::HamiltonianModel, SpectralData) {
        let m = build_chain_hamiltonian(n, g).unwrap();
        let s = diagonalize_model(&m).unwrap();
        (m, s)
    }

    #[test]
    fn sigma_z_spectrum() {
        // Single-site sigma^z: eigenvalues (-1, 1). diagonalize accepts any
        // Hermitian operator; the tag is just provenance.
        let sz = crate::operators::PauliString::single_site(
            PauliAxis::Z,
            1,
            1,
            C64::new(1.0, 0.0),
        )
        .unwrap()
        .matrix()
        .unwrap();
        let s = diagonalize(&sz, ModelTag::new(1, 0.0)).unwrap();
        assert_abs_diff_eq!(s.energies()[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.energies()[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn frozen_two_site_eigenvalues() {
        // Independent oracle values for n=2, g=0.
        let (_, s) = model_spectrum(2, 0.0);
        let want = [
            -2.932411578760549,
            -2.0,
            1.452149493702986,
            3.480262085057563,
        ];
        for (got, want) in s.energies().iter().zip(want) {
            assert_abs_diff_eq!(got, &want, epsilon = 1e-12);
        }
    }

    #[test]
    fn spectrum_sums_to_trace() {
        let (_, s) = model_spectrum(5, 0.1);
        let sum: f64 = s.energies().iter().sum();
        assert!(sum.abs() < 1e-9 * 32.0, "trace {sum}");
    }

    #[test]
    fn full_unitarity_and_reconstruction_small_n() {
        let (m, s) = model_spectrum(4, 0.1);
        let v = s.eigenvectors();
        let gram = linalg::matmul(&linalg::adjoint(v), v);
        let eye = ndarray::Array2::<C64>::eye(16);
        assert!(linalg::max_abs(&(&gram - &eye)) < 1e-10);
        let mut vd = v.clone();
        for (j, &e) in s.energies().iter().enumerate() {
            vd.column_mut(j).mapv_inplace(|z| z * e);
        }
        let rebuilt = linalg::matmul(&vd, &linalg::adjoint(v));
        let scale = linalg::max_abs(m.total().entries());
        assert!(linalg::max_abs(&(&rebuilt - m.total().entries())) < 1e-9 * scale);
    }

    #[test]
    fn verify_against_model_accepts_genuine_spectrum() {
        let (m, s) = model_spectrum(5, 0.1);
        verify_against_model(&s, &m).unwrap();
    }

    #[test]
    fn verify_against_model_rejects_tampered_spectrum() {
        let (m, s) = model_spectrum(4, 0.1);
        let mut energies = s.energies().to_vec();
        energies[3] += 1e-3;
        let bad = SpectralData::from_parts(s.tag(), energies, s.eigenvectors().clone()).unwrap();
        assert!(verify_against_model(&bad, &m).is_err());
    }

    #[test]
    fn diagonalize_rejects_non_hermitian() {
        let mut entries = ndarray::Array2::<C64>::zeros((2, 2));
        entries[[0, 1]] = C64::new(1.0, 0.0);
        let op = DenseOperator::from_entries("raise", entries).unwrap();
        assert!(matches!(
            diagonalize(&op, ModelTag::new(1, 0.0)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn energy_basis_of_hamiltonian_is_diagonal() {
        let (m, s) = model_spectrum(3, 0.1);
        let hb = to_energy_basis(m.total(), &s).unwrap();
        for j in 0..8 {
            for k in 0..8 {
                let want = if j == k {
                    C64::new(s.energies()[j], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                assert!((hb.entries()[[j, k]] - want).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn energy_basis_of_identity_is_identity() {
        let (_, s) = model_spectrum(3, 0.1);
        let id = DenseOperator::identity(8).unwrap();
        let ib = to_energy_basis(&id, &s).unwrap();
        let eye = ndarray::Array2::<C64>::eye(8);
        assert!(linalg::max_abs(&(ib.entries() - &eye)) < 1e-10);
    }

    #[test]
    fn basis_change_preserves_trace() {
        let (_, s) = model_spectrum(2, 0.1);
        let sx = site_operator(PauliAxis::X, 1, 2).unwrap();
        let xb = to_energy_basis(&sx, &s).unwrap();
        let diag_sum: C64 = xb.diagonal().into_iter().sum();
        assert!(diag_sum.norm() < 1e-10);
    }

    #[test]
    fn energy_basis_round_trip() {
        let (_, s) = model_spectrum(3, 0.1);
        let sx = site_operator(PauliAxis::X, 2, 3).unwrap();
        let xb = to_energy_basis(&sx, &s).unwrap();
        let back = xb.to_computational_basis(&s).unwrap();
        assert!(linalg::max_abs(&(&back - sx.entries())) < 1e-9);
    }

    #[test]
    fn local_term_energy_basis_matches_dense_route() {
        let (m, s) = model_spectrum(4, 0.1);
        let fast = energy_basis_of_local_term(&m, 2, &s).unwrap();
        let dense = to_energy_basis(&m.local_term(2).unwrap(), &s).unwrap();
        assert!(linalg::max_abs(&(fast.entries() - dense.entries())) < 1e-11);
        let diag = energy_diagonal_of_local_term(&m, 2, &s).unwrap();
        for (j, d) in diag.iter().enumerate() {
            assert!((d - fast.entries()[[j, j]]).norm() < 1e-12);
        }
    }

    #[test]
    fn sidon_set_is_generic() {
        let report = check_generic_spectrum(&[0.0, 1.0, 3.0, 7.0], 1e-6).unwrap();
        assert!(report.passed());
        assert_eq!(report.n_violations(), 0);
    }

    #[test]
    fn arithmetic_progression_is_not_generic() {
        let report = check_generic_spectrum(&[0.0, 1.0, 2.0, 3.0], 1e-6).unwrap();
        assert!(!report.passed());
        // 0+3 = 1+2 is one of the collisions; degenerate-free so all
        // violations involve four distinct indices or midpoints like 0+2=1+1.
        let has_0_3_1_2 = report.violations().iter().any(|v| {
            v.collision == Collision::canonical((0, 3), (1, 2))
        });
        assert!(has_0_3_1_2);
    }

    #[test]
    fn degeneracy_is_reported() {
        let report = check_generic_spectrum(&[0.0, 1.0, 1.0 + 1e-12, 5.0], 1e-8).unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn chain_spectrum_generic_at_small_n() {
        let (_, s) = model_spectrum(5, 0.1);
        let report = check_generic_spectrum(s.energies(), 1e-8).unwrap();
        assert!(report.passed(), "violations: {}", report.n_violations());
    }

    #[test]
    fn integrable_point_is_degenerate() {
        let (_, s) = model_spectrum(6, 0.0);
        let report = check_generic_spectrum(s.energies(), 1e-8).unwrap();
        assert!(!report.passed());
        assert!(report.n_violations() > 0);
    }

    /// Brute-force O(d^4) reference: every ordered quadruple, minus the
    /// trivial ones, canonicalized to unordered pair form.
    fn brute_force_collisions(energies: &[f64], tol: f64) -> std::collections::BTreeSet<(u32, u32, u32, u32)> {
        let d = energies.len();
        let mut set = std::collections::BTreeSet::new();
        for p in 0..d {
            for q in 0..d {
                for r in 0..d {
                    for s in 0..d {
                        let trivial = (p == q && r == s) || (p == s && r == q);
                        if trivial {
                            continue;
                        }
                        let gap =
                            (energies[p] + energies[r] - energies[q] - energies[s]).abs();
                        if gap < tol {
                            let c = Collision::canonical(
                                (p as u32, r as u32),
                                (q as u32, s as u32),
                            );
                            set.insert((c.p, c.r, c.q, c.s));
                        }
                    }
                }
            }
        }
        set
    }

    #[test]
    fn scan_matches_brute_force() {
        // Structured spectra with exact and near collisions plus the n=5
        // chain at the degenerate and generic couplings.
        let cases: Vec<Vec<f64>> = vec![
            vec![0.0, 1.0, 2.0, 3.0],
            vec![0.0, 1.0, 3.0, 7.0],
            vec![-1.0, -1.0, 1.0, 1.0],
            vec![0.0, 0.5, 1.0 - 5e-9, 1.5, 2.25],
            model_spectrum(5, 0.0).1.energies().to_vec(),
            model_spectrum(5, 0.1).1.energies().to_vec(),
        ];
        for energies in cases {
            let report = check_generic_spectrum(&energies, 1e-8).unwrap();
            let got: std::collections::BTreeSet<_> = report
                .violations()
                .iter()
                .map(|v| (v.collision.p, v.collision.r, v.collision.q, v.collision.s))
                .collect();
            let want = brute_force_collisions(&energies, 1e-8);
            assert_eq!(got, want, "spectrum {energies:?}");
            assert!(!report.truncated());
        }
    }

    #[test]
    fn moment_one_vanishes_two_matches_coupling() {
        let (m, s) = model_spectrum(5, 0.1);
        let m1 = energy_moment(s.energies(), 1, 5).unwrap();
        assert!(m1.abs() < 1e-9);
        let m2 = energy_moment(s.energies(), 2, 5).unwrap();
        let want = m.local_term_second_moment() * 5.0;
        assert!((m2 - want).abs() / want < 1e-8);
    }

    #[test]
    fn fourth_moment_matches_dense_trace_oracle() {
        // Independent evaluation of <H^4> at n=6 via tr((H^2)^2)/d.
        let (m, s) = model_spectrum(6, 0.1);
        let h2 = linalg::matmul(m.total().entries(), m.total().entries());
        let tr_h4 = linalg::trace_of_product(&h2, &h2) / 64.0;
        let m4 = energy_moment(s.energies(), 4, 6).unwrap();
        assert!((m4 - tr_h4.re).abs() / tr_h4.re.abs() < 1e-10);
        assert!(tr_h4.im.abs() < 1e-9);
    }

    #[test]
    fn leakage_of_hamiltonian_vanishes() {
        let (m, s) = model_spectrum(4, 0.1);
        let hb = to_energy_basis(m.total(), &s).unwrap();
        let leak = microcanonical_leakage(&hb, s.energies(), 0.0, 2.0).unwrap();
        assert!(leak < 1e-9, "leakage {leak}");
    }

    #[test]
    fn leakage_of_identity_vanishes() {
        let (_, s) = model_spectrum(4, 0.1);
        let id = DenseOperator::identity(16).unwrap();
        let ib = to_energy_basis(&id, &s).unwrap();
        let leak = microcanonical_leakage(&ib, s.energies(), -1.0, 1.0).unwrap();
        assert!(leak < 1e-12);
    }

    #[test]
    fn leakage_monotone_in_gap() {
        let (_, s) = model_spectrum(6, 0.1);
        let sx = site_operator(PauliAxis::X, 1, 6).unwrap();
        let xb = to_energy_basis(&sx, &s).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..=5 {
            let leak = microcanonical_leakage(&xb, s.energies(), 0.0, k as f64).unwrap();
            assert!(leak <= prev + 1e-12, "gap {k}: {leak} > {prev}");
            prev = leak;
        }
    }

    #[test]
    fn leakage_rejects_bad_window() {
        let (_, s) = model_spectrum(3, 0.1);
        let id = DenseOperator::identity(8).unwrap();
        let ib = to_energy_basis(&id, &s).unwrap();
        assert!(microcanonical_leakage(&ib, s.energies(), 1.0, 1.0).is_err());
    }

    #[test]
    fn empty_window_returns_zero() {
        let (_, s) = model_spectrum(3, 0.1);
        let sx = site_operator(PauliAxis::X, 1, 3).unwrap();
        let xb = to_energy_basis(&sx, &s).unwrap();
        // eps below the ground state: no rows selected.
        let emin = s.energies()[0];
        let leak = microcanonical_leakage(&xb, s.energies(), emin - 1.0, 0.0).unwrap();
        assert_eq!(leak, 0.0);
    }

    #[test]
    fn tag_mismatch_is_rejected() {
        let (_, s3) = model_spectrum(3, 0.1);
        let (m4, s4) = model_spectrum(4, 0.1);
        let h4 = to_energy_basis(m4.total(), &s4).unwrap();
        assert!(h4.to_computational_basis(&s3).is_err());
    }
}
