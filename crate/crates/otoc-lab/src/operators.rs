//! Pauli strings, dense operators, and the spin-chain Hamiltonian.
//!
//! Basis convention: a computational basis state of an `n`-site chain is an
//! integer `s < 2^n` whose bit `n - i` holds the z-eigenvalue of site `i`
//! (sites are 1-based, so site 1 is the most significant bit). A Pauli
//! string therefore acts on a basis index by flipping the bits of its X/Y
//! support and multiplying by a phase read off the Y/Z support, which keeps
//! every dense materialization and sparse application O(4^n) or better.

use crate::error::{Error, Result};
use crate::linalg;
use crate::C64;
use ndarray::Array2;
use std::fmt;

/// Largest chain length for which dense 2^n x 2^n matrices are allowed
/// (2^13 = 8192 keeps a single complex matrix close to 1 GiB).
pub const MAX_SITES: usize = 13;

/// Smallest chain length with a meaningful periodic nearest-neighbor bond.
pub const MIN_SITES: usize = 2;

/// Transverse/longitudinal field strengths of the chain model. The
/// integrability-breaking coupling `g` is a runtime parameter.
pub const FIELD_X: f64 = -1.05;
pub const FIELD_Z: f64 = 0.5;

/// Single-site Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    I,
    X,
    Y,
    Z,
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            PauliAxis::I => '1',
            PauliAxis::X => 'x',
            PauliAxis::Y => 'y',
            PauliAxis::Z => 'z',
        };
        write!(f, "{c}")
    }
}

/// A scalar multiple of a tensor product of single-site Pauli operators.
#[derive(Debug, Clone)]
pub struct PauliString {
    axes: Vec<PauliAxis>,
    coefficient: C64,
}

/// Bit index (0 = least significant) carrying site `site` of an `n`-site
/// chain.
#[inline]
pub fn bit_for_site(site: usize, n: usize) -> usize {
    debug_assert!(site >= 1 && site <= n);
    n - site
}

impl PauliString {
    /// Build a string from per-site axes (`axes.len()` = chain length).
    pub fn new(axes: Vec<PauliAxis>, coefficient: C64) -> Result<Self> {
        let n = axes.len();
        if n < 1 || n > MAX_SITES {
            return Err(Error::ResourceLimit(format!(
                "Pauli string on {n} sites outside supported range 1..={MAX_SITES}"
            )));
        }
        Ok(PauliString { axes, coefficient })
    }

    /// Identity-padded string with a single non-trivial site.
    pub fn single_site(axis: PauliAxis, site: usize, n: usize, coefficient: C64) -> Result<Self> {
        Self::multi_site(&[(axis, site)], n, coefficient)
    }

    /// Identity-padded string with the given (axis, site) factors.
    /// Sites are 1-based; listing a site twice is rejected.
    pub fn multi_site(factors: &[(PauliAxis, usize)], n: usize, coefficient: C64) -> Result<Self> {
        if n < 1 || n > MAX_SITES {
            return Err(Error::ResourceLimit(format!(
                "Pauli string on {n} sites outside supported range 1..={MAX_SITES}"
            )));
        }
        let mut axes = vec![PauliAxis::I; n];
        for &(axis, site) in factors {
            if site < 1 || site > n {
                return Err(Error::Domain(format!(
                    "site {site} outside 1..={n}"
                )));
            }
            if axes[site - 1] != PauliAxis::I {
                return Err(Error::Domain(format!("site {site} listed twice")));
            }
            axes[site - 1] = axis;
        }
        Ok(PauliString { axes, coefficient })
    }

    pub fn n_sites(&self) -> usize {
        self.axes.len()
    }

    pub fn coefficient(&self) -> C64 {
        self.coefficient
    }

    pub fn axes(&self) -> &[PauliAxis] {
        &self.axes
    }

    /// Scale the coefficient.
    pub fn scaled(&self, factor: C64) -> Self {
        PauliString {
            axes: self.axes.clone(),
            coefficient: self.coefficient * factor,
        }
    }

    /// Action on basis indices: the string maps `|t>` to
    /// `value(s) |s = t XOR flip_mask>`; equivalently its only nonzero
    /// entry in row `s` sits at column `s XOR flip_mask`.
    fn action(&self) -> StringAction {
        let n = self.axes.len();
        let mut flip = 0usize;
        let mut phase_mask = 0usize;
        let mut n_y = 0u32;
        for (idx, axis) in self.axes.iter().enumerate() {
            let site = idx + 1;
            let bit = 1usize << bit_for_site(site, n);
            match axis {
                PauliAxis::I => {}
                PauliAxis::X => flip |= bit,
                PauliAxis::Y => {
                    flip |= bit;
                    phase_mask |= bit;
                    n_y += 1;
                }
                PauliAxis::Z => phase_mask |= bit,
            }
        }
        // (-i)^{n_y} collects the y-factors; the parity of s on the Y/Z
        // support supplies the remaining sign.
        let base = self.coefficient * C64::new(0.0, -1.0).powu(n_y);
        StringAction {
            flip,
            phase_mask,
            base,
        }
    }

    /// Dense matrix of the string.
    pub fn matrix(&self) -> Result<DenseOperator> {
        let n = self.axes.len();
        let d = 1usize << n;
        let act = self.action();
        let mut entries = Array2::<C64>::zeros((d, d));
        for s in 0..d {
            entries[[s, s ^ act.flip]] += act.value(s);
        }
        // A Pauli-string matrix is Hermitian exactly when its coefficient
        // is real (the bare tensor product is Hermitian).
        let hermitian = self.coefficient.im == 0.0;
        DenseOperator::with_hermitian_flag(self.to_string(), entries, hermitian)
    }

    /// Left-multiply a dense matrix: returns `P * m` in O(d^2) using the
    /// permutation/phase structure instead of a full matrix product.
    pub fn apply_to_matrix(&self, m: &Array2<C64>) -> Result<Array2<C64>> {
        let d = 1usize << self.axes.len();
        if m.nrows() != d {
            return Err(Error::DimensionMismatch {
                context: "PauliString::apply_to_matrix",
                expected: d,
                found: m.nrows(),
            });
        }
        let mut out = Array2::<C64>::zeros(m.raw_dim());
        accumulate_action(&self.action(), m, &mut out);
        Ok(out)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+.4}{:+.4}i *", self.coefficient.re, self.coefficient.im)?;
        for axis in &self.axes {
            write!(f, " {axis}")?;
        }
        Ok(())
    }
}

/// Precomputed basis-index action of a Pauli string.
struct StringAction {
    flip: usize,
    phase_mask: usize,
    base: C64,
}

impl StringAction {
    #[inline]
    fn value(&self, s: usize) -> C64 {
        if (s & self.phase_mask).count_ones() & 1 == 1 {
            -self.base
        } else {
            self.base
        }
    }
}

/// `out += P * m` for the string with the given action.
fn accumulate_action(act: &StringAction, m: &Array2<C64>, out: &mut Array2<C64>) {
    let d = m.nrows();
    for s in 0..d {
        let w = act.value(s);
        let src = m.row(s ^ act.flip);
        let mut dst = out.row_mut(s);
        dst.zip_mut_with(&src, |o, &v| *o += w * v);
    }
}

/// Dense operator on the full chain Hilbert space.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    label: String,
    entries: Array2<C64>,
    hermitian: bool,
}

impl DenseOperator {
    /// Wrap entries, detecting Hermiticity within `1e-12 * max|entries|`.
    pub fn from_entries(label: impl Into<String>, entries: Array2<C64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::DimensionMismatch {
                context: "DenseOperator::from_entries",
                expected: r,
                found: c,
            });
        }
        if r == 0 {
            return Err(Error::Domain("empty operator".into()));
        }
        let scale = linalg::max_abs(&entries).max(1.0);
        let hermitian = linalg::hermiticity_error(&entries) <= 1e-12 * scale;
        Ok(DenseOperator {
            label: label.into(),
            entries,
            hermitian,
        })
    }

    fn with_hermitian_flag(
        label: impl Into<String>,
        entries: Array2<C64>,
        hermitian: bool,
    ) -> Result<Self> {
        let op = Self::from_entries(label, entries)?;
        debug_assert_eq!(op.hermitian, hermitian, "hermitian flag mismatch");
        Ok(op)
    }

    /// Identity on a `dim`-dimensional space.
    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("empty operator".into()));
        }
        Self::from_entries("I", Array2::<C64>::eye(dim))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    /// Infinite-temperature expectation `tr(X)/d`.
    pub fn normalized_trace(&self) -> C64 {
        let d = self.dim();
        self.entries.diag().sum() / d as f64
    }

    /// Write entries as CSV (`row,col,re,im`), for debugging small operators.
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> Result<()> {
        writeln!(w, "# operator={} dim={}", self.label, self.dim())?;
        writeln!(w, "row,col,re,im")?;
        for ((i, j), z) in self.entries.indexed_iter() {
            writeln!(w, "{i},{j},{:.17e},{:.17e}", z.re, z.im)?;
        }
        Ok(())
    }
}

/// `tr(X Y)/d` without forming the product.
pub fn normalized_trace_inner(x: &DenseOperator, y: &DenseOperator) -> Result<C64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            context: "normalized_trace_inner",
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(linalg::trace_of_product(x.entries(), y.entries()) / x.dim() as f64)
}

/// Single-site Pauli operator on an `n`-site chain, labeled like `sx3`.
pub fn site_operator(axis: PauliAxis, site: usize, n: usize) -> Result<DenseOperator> {
    check_chain_size(n)?;
    if axis == PauliAxis::I {
        return DenseOperator::identity(1 << n);
    }
    let s = PauliString::single_site(axis, site, n, C64::new(1.0, 0.0))?;
    let mut op = s.matrix()?;
    op.label = format!("s{axis}{site}");
    Ok(op)
}

fn check_chain_size(n: usize) -> Result<()> {
    if n < MIN_SITES {
        return Err(Error::Domain(format!(
            "chain length {n} below minimum {MIN_SITES}"
        )));
    }
    if n > MAX_SITES {
        return Err(Error::ResourceLimit(format!(
            "chain length {n} above dense-matrix cap {MAX_SITES}"
        )));
    }
    Ok(())
}

/// Periodic spin chain split into one local term per site.
///
/// Term `i` owns the Pauli strings starting at site `i`:
/// `H_i = sz_i sz_{i+1} - 1.05 sx_i + 0.5 sz_i + g sy_i sz_{i+1}`
/// (site `n+1` wraps to site 1). Assigning each string to the term at its
/// starting site makes distinct terms Hilbert-Schmidt orthogonal, so
/// `tr(H_j H_k) = 0` for `j != k` and `<H H_i> = <H_i^2>`.
#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    n: usize,
    g: f64,
    /// Strings of each local term, indexed by site - 1. Dense forms are
    /// materialized on demand: keeping n dense terms alive would cost
    /// n * 16 * 4^n bytes at the largest sizes.
    local_strings: Vec<Vec<PauliString>>,
    total: DenseOperator,
}

/// `<H_i^2>` of one chain term from the string coefficients alone:
/// distinct Pauli strings are Hilbert-Schmidt orthonormal, so the second
/// moment is the sum of squared coefficients, independent of both the
/// site and the chain length. Stays available beyond the dense-matrix
/// size cap.
pub fn chain_term_second_moment(g: f64) -> Result<f64> {
    if !g.is_finite() {
        return Err(Error::Domain(format!("coupling g={g} is not finite")));
    }
    // The coefficients are site- and length-independent; read them off
    // the two-site representative of the term.
    Ok(chain_term_block_strings(g)?
        .iter()
        .map(|s| s.coefficient.norm_sqr())
        .sum())
}

/// The four strings of one chain term on its two-site support, used by
/// the scalar helpers that must not build `2^n`-dimensional matrices.
fn chain_term_block_strings(g: f64) -> Result<[PauliString; 4]> {
    let one = C64::new(1.0, 0.0);
    Ok([
        PauliString::multi_site(&[(PauliAxis::Z, 1), (PauliAxis::Z, 2)], 2, one)?,
        PauliString::single_site(PauliAxis::X, 1, 2, one * FIELD_X)?,
        PauliString::single_site(PauliAxis::Z, 1, 2, one * FIELD_Z)?,
        PauliString::multi_site(&[(PauliAxis::Y, 1), (PauliAxis::Z, 2)], 2, one * g)?,
    ])
}

/// Build the chain Hamiltonian for `n` sites with coupling `g`.
pub fn build_chain_hamiltonian(n: usize, g: f64) -> Result<HamiltonianModel> {
    check_chain_size(n)?;
    if !g.is_finite() {
        return Err(Error::Domain(format!("coupling g={g} is not finite")));
    }
    let one = C64::new(1.0, 0.0);
    let mut local_strings = Vec::with_capacity(n);
    for site in 1..=n {
        let next = site % n + 1;
        let mut strings = vec![
            PauliString::multi_site(
                &[(PauliAxis::Z, site), (PauliAxis::Z, next)],
                n,
                one,
            )?,
            PauliString::single_site(PauliAxis::X, site, n, one * FIELD_X)?,
            PauliString::single_site(PauliAxis::Z, site, n, one * FIELD_Z)?,
        ];
        if g != 0.0 {
            strings.push(PauliString::multi_site(
                &[(PauliAxis::Y, site), (PauliAxis::Z, next)],
                n,
                one * g,
            )?);
        }
        local_strings.push(strings);
    }

    let d = 1usize << n;
    let mut entries = Array2::<C64>::zeros((d, d));
    for strings in &local_strings {
        for s in strings {
            let act = s.action();
            for row in 0..d {
                entries[[row, row ^ act.flip]] += act.value(row);
            }
        }
    }
    let total = DenseOperator::from_entries(format!("H[n={n},g={g}]"), entries)?;
    if !total.is_hermitian() {
        return Err(Error::Contract(
            "assembled Hamiltonian failed its Hermiticity check".into(),
        ));
    }
    Ok(HamiltonianModel {
        n,
        g,
        local_strings,
        total,
    })
}

impl HamiltonianModel {
    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn coupling(&self) -> f64 {
        self.g
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// The full Hamiltonian.
    pub fn total(&self) -> &DenseOperator {
        &self.total
    }

    /// Pauli strings of local term `i` (1-based site index).
    pub fn local_term_strings(&self, i: usize) -> Result<&[PauliString]> {
        if i < 1 || i > self.n {
            return Err(Error::Domain(format!(
                "local term index {i} outside 1..={}",
                self.n
            )));
        }
        Ok(&self.local_strings[i - 1])
    }

    /// Dense matrix of local term `i`, materialized on demand.
    pub fn local_term(&self, i: usize) -> Result<DenseOperator> {
        let strings = self.local_term_strings(i)?;
        let d = self.dim();
        let mut entries = Array2::<C64>::zeros((d, d));
        for s in strings {
            let act = s.action();
            for row in 0..d {
                entries[[row, row ^ act.flip]] += act.value(row);
            }
        }
        DenseOperator::from_entries(format!("H_{i}[n={},g={}]", self.n, self.g), entries)
    }

    /// `H_i * m` in O(d^2), using the string structure of term `i`.
    pub fn apply_local_term(&self, i: usize, m: &Array2<C64>) -> Result<Array2<C64>> {
        let strings = self.local_term_strings(i)?;
        let d = self.dim();
        if m.nrows() != d {
            return Err(Error::DimensionMismatch {
                context: "apply_local_term",
                expected: d,
                found: m.nrows(),
            });
        }
        let mut out = Array2::<C64>::zeros(m.raw_dim());
        for s in strings {
            accumulate_action(&s.action(), m, &mut out);
        }
        Ok(out)
    }

    /// `<H_i^2>`: by the orthogonality of distinct Pauli strings this is
    /// the sum of squared string coefficients, identical for every `i`.
    pub fn local_term_second_moment(&self) -> f64 {
        self.local_strings[0]
            .iter()
            .map(|s| s.coefficient.norm_sqr())
            .sum()
    }

    /// Operator norm of one local term. Each term is supported on two
    /// neighboring sites, so the norm is computed on the 4x4 block and is
    /// independent of the chain length.
    pub fn local_term_norm(&self) -> Result<f64> {
        let block = chain_term_block_strings(self.g)?;
        let mut entries = Array2::<C64>::zeros((4, 4));
        for s in &block {
            entries += s.matrix()?.entries();
        }
        linalg::operator_norm(&entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_site_pauli_matrices() {
        let sx = site_operator(PauliAxis::X, 1, 2).unwrap();
        let sy = site_operator(PauliAxis::Y, 2, 2).unwrap();
        let sz = site_operator(PauliAxis::Z, 1, 2).unwrap();
        // site 1 is the most significant bit: sx1 swaps |0b00> <-> |0b10>.
        assert_eq!(sx.entries()[[0, 2]], c(1.0, 0.0));
        assert_eq!(sx.entries()[[2, 0]], c(1.0, 0.0));
        assert_eq!(sx.entries()[[0, 0]], c(0.0, 0.0));
        // sy2 couples |0b00> and |0b01>: <0|sy|1> = -i.
        assert_eq!(sy.entries()[[0, 1]], c(0.0, -1.0));
        assert_eq!(sy.entries()[[1, 0]], c(0.0, 1.0));
        // sz1 reads the most significant bit.
        assert_eq!(sz.entries()[[0, 0]], c(1.0, 0.0));
        assert_eq!(sz.entries()[[3, 3]], c(-1.0, 0.0));
        assert!(sx.is_hermitian() && sy.is_hermitian() && sz.is_hermitian());
        assert_eq!(sx.label(), "sx1");
        assert_eq!(sy.label(), "sy2");
    }

    #[test]
    fn two_site_string_matches_kronecker_product() {
        // sy1 sz2 on two sites, built by hand from the Kronecker product.
        let s = PauliString::multi_site(
            &[(PauliAxis::Y, 1), (PauliAxis::Z, 2)],
            2,
            c(1.0, 0.0),
        )
        .unwrap();
        let m = s.matrix().unwrap();
        let sy = array![[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]];
        let sz = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        for a in 0..2 {
            for b in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        let want = sy[[a, x]] * sz[[b, y]];
                        let got = m.entries()[[2 * a + b, 2 * x + y]];
                        assert_abs_diff_eq!(got.re, want.re, epsilon = 1e-15);
                        assert_abs_diff_eq!(got.im, want.im, epsilon = 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn pauli_strings_are_orthonormal() {
        // Exhaustive check of <P Q> = delta_{PQ} on 2 sites (coefficient 1):
        // the 16 strings form an orthonormal basis under tr(..)/d.
        let axes = [PauliAxis::I, PauliAxis::X, PauliAxis::Y, PauliAxis::Z];
        let mut mats = Vec::new();
        for &a1 in &axes {
            for &a2 in &axes {
                let s = PauliString::new(vec![a1, a2], c(1.0, 0.0)).unwrap();
                mats.push(s.matrix().unwrap());
            }
        }
        for (p, mp) in mats.iter().enumerate() {
            for (q, mq) in mats.iter().enumerate() {
                let inner = normalized_trace_inner(mp, mq).unwrap();
                let want = if p == q { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(inner.re, want, epsilon = 1e-13);
                assert_abs_diff_eq!(inner.im, 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn string_hermiticity_follows_coefficient() {
        let real = PauliString::single_site(PauliAxis::Y, 1, 3, c(2.0, 0.0)).unwrap();
        assert!(real.matrix().unwrap().is_hermitian());
        let imag = PauliString::single_site(PauliAxis::Y, 1, 3, c(0.0, 1.0)).unwrap();
        assert!(!imag.matrix().unwrap().is_hermitian());
    }

    #[test]
    fn apply_to_matrix_matches_dense_product() {
        let s = PauliString::multi_site(
            &[(PauliAxis::Y, 2), (PauliAxis::X, 3)],
            4,
            c(0.7, 0.0),
        )
        .unwrap();
        let d = 16;
        let mut m = Array2::<C64>::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                m[[i, j]] = c(
                    ((i * 5 + j) % 7) as f64 - 3.0,
                    ((i + 3 * j) % 5) as f64 - 2.0,
                );
            }
        }
        let fast = s.apply_to_matrix(&m).unwrap();
        let dense = linalg::matmul(s.matrix().unwrap().entries(), &m);
        let diff = linalg::max_abs(&(&fast - &dense));
        assert!(diff < 1e-13, "sparse apply deviates by {diff}");
    }

    #[test]
    fn hamiltonian_matches_frozen_two_site_matrix() {
        // n=2, g=0: every entry known in closed form (two bonds wrap the
        // same pair of sites, so the zz coupling appears twice).
        let m = build_chain_hamiltonian(2, 0.0).unwrap();
        let want = [
            [3.0, -1.05, -1.05, 0.0],
            [-1.05, -2.0, 0.0, -1.05],
            [-1.05, 0.0, -2.0, -1.05],
            [0.0, -1.05, -1.05, 1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                let z = m.total().entries()[[i, j]];
                assert_abs_diff_eq!(z.re, want[i][j], epsilon = 1e-14);
                assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn local_terms_sum_to_total() {
        let m = build_chain_hamiltonian(3, 0.1).unwrap();
        let mut sum = Array2::<C64>::zeros((8, 8));
        for i in 1..=3 {
            sum += m.local_term(i).unwrap().entries();
        }
        let diff = linalg::max_abs(&(&sum - m.total().entries()));
        assert!(diff < 1e-14);
    }

    #[test]
    fn local_terms_are_hilbert_schmidt_orthogonal() {
        let m = build_chain_hamiltonian(5, 0.1).unwrap();
        for j in 1..=5 {
            let hj = m.local_term(j).unwrap();
            for k in 1..=5 {
                if j == k {
                    continue;
                }
                let hk = m.local_term(k).unwrap();
                let inner = normalized_trace_inner(&hj, &hk).unwrap();
                assert_abs_diff_eq!(inner.re, 0.0, epsilon = 1e-13);
                assert_abs_diff_eq!(inner.im, 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn second_moment_matches_dense_trace() {
        let m = build_chain_hamiltonian(4, 0.1).unwrap();
        // Coefficient formula...
        assert_abs_diff_eq!(
            m.local_term_second_moment(),
            1.0 + 1.05 * 1.05 + 0.25 + 0.01,
            epsilon = 1e-14
        );
        // ... agrees with the dense trace <H_2 H_2>.
        let h2 = m.local_term(2).unwrap();
        let dense = normalized_trace_inner(&h2, &h2).unwrap();
        assert_abs_diff_eq!(dense.re, m.local_term_second_moment(), epsilon = 1e-13);
        assert_abs_diff_eq!(dense.im, 0.0, epsilon = 1e-13);
        // ... and with the matrix-free scalar route.
        assert_abs_diff_eq!(
            chain_term_second_moment(0.1).unwrap(),
            m.local_term_second_moment(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn total_second_moment_is_extensive() {
        // <H^2>/n = <H_i^2> by term orthogonality.
        let m = build_chain_hamiltonian(5, 0.1).unwrap();
        let h2 = normalized_trace_inner(m.total(), m.total()).unwrap();
        assert_abs_diff_eq!(
            h2.re / 5.0,
            m.local_term_second_moment(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn g_zero_has_no_y_string() {
        let m = build_chain_hamiltonian(4, 0.0).unwrap();
        assert_eq!(m.local_term_strings(1).unwrap().len(), 3);
        let mg = build_chain_hamiltonian(4, 0.1).unwrap();
        assert_eq!(mg.local_term_strings(1).unwrap().len(), 4);
    }

    #[test]
    fn chain_size_limits() {
        assert!(matches!(
            build_chain_hamiltonian(1, 0.1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            build_chain_hamiltonian(MAX_SITES + 1, 0.1),
            Err(Error::ResourceLimit(_))
        ));
        assert!(matches!(
            build_chain_hamiltonian(4, f64::NAN),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn local_term_norm_is_size_independent() {
        let m4 = build_chain_hamiltonian(4, 0.1).unwrap();
        let m6 = build_chain_hamiltonian(6, 0.1).unwrap();
        let n4 = m4.local_term_norm().unwrap();
        let n6 = m6.local_term_norm().unwrap();
        assert_abs_diff_eq!(n4, n6, epsilon = 1e-13);
        // Sanity: the dense operator norm of H_1 on 4 sites matches the
        // two-site block computation.
        let h1 = m4.local_term(1).unwrap();
        let dense_norm = linalg::operator_norm(h1.entries()).unwrap();
        assert_abs_diff_eq!(n4, dense_norm, epsilon = 1e-10);
    }

    #[test]
    fn normalized_trace_of_identity() {
        let id = DenseOperator::identity(8).unwrap();
        let t = id.normalized_trace();
        assert_abs_diff_eq!(t.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.im, 0.0, epsilon = 1e-15);
    }
}
