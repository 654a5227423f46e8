//! Haar-random benchmark for infinite-time OTOC averages.
//!
//! When the eigenvector matrix of a Hamiltonian is replaced by a Haar
//! unitary, the average of `<A B' C D'>` over the ensemble (with
//! `X' = U X U†`) has an exact closed form in normalized traces. That
//! expression is the structureless baseline the chain results are
//! compared against, and the Monte Carlo estimator here cross-checks the
//! closed form itself.

use crate::error::{Error, Result};
use crate::linalg;
use crate::par::{self, Mode};
use crate::C64;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Largest dimension the sampler will attempt.
const MAX_HAAR_DIM: usize = 1 << 13;
/// Resampling cap for the (probability-zero) event of an exactly zero
/// diagonal in the QR factor.
const MAX_QR_ATTEMPTS: usize = 8;

/// Monte Carlo estimate bundled with the exact ensemble average.
#[derive(Debug, Clone, Copy)]
pub struct HaarEstimate {
    pub mc_value: C64,
    pub mc_std_error: f64,
    pub closed_form: C64,
    pub samples: usize,
    pub dim: usize,
}

impl HaarEstimate {
    /// Absolute MC-vs-closed-form deviation in units of the standard
    /// error (infinite if the spread is exactly zero but the values
    /// differ).
    pub fn sigma_deviation(&self) -> f64 {
        let diff = (self.mc_value - self.closed_form).norm();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.mc_std_error
        }
    }
}

/// Draw a Haar-distributed unitary.
///
/// A Ginibre matrix (i.i.d. standard complex Gaussian entries) is QR
/// factored and the phases of the R diagonal are pushed into Q, which
/// makes the factorization unique and Q exactly Haar. LAPACK reads our
/// row-major buffer as its transpose; since the Ginibre ensemble and the
/// Haar measure are both transpose-invariant, the result is Haar either
/// way.
pub fn sample_haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Array2<C64>> {
    if dim == 0 {
        return Err(Error::Domain("Haar unitary of dimension zero".into()));
    }
    if dim > MAX_HAAR_DIM {
        return Err(Error::ResourceLimit(format!(
            "Haar dimension {dim} above cap {MAX_HAAR_DIM}"
        )));
    }
    for _ in 0..MAX_QR_ATTEMPTS {
        let mut g = Array2::<C64>::zeros((dim, dim));
        for z in g.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z = C64::new(re, im);
        }
        if let Some(u) = haar_from_ginibre(g)? {
            return Ok(u);
        }
    }
    Err(Error::Numerical(format!(
        "QR diagonal vanished {MAX_QR_ATTEMPTS} times in a row; \
         random source looks broken"
    )))
}

/// QR with diagonal phase fix; `None` if an R diagonal entry is exactly
/// zero (caller resamples).
fn haar_from_ginibre(mut g: Array2<C64>) -> Result<Option<Array2<C64>>> {
    let dim = g.nrows();
    let n = dim as i32;
    let mut tau = vec![C64::new(0.0, 0.0); dim];
    let mut info = 0i32;
    let neg1 = -1i32;

    // Factor (workspace query, then the real call).
    let mut work_q = [C64::new(0.0, 0.0)];
    unsafe {
        lapack_sys::zgeqrf_(
            &n,
            &n,
            g.as_mut_ptr() as *mut _,
            &n,
            tau.as_mut_ptr() as *mut _,
            work_q.as_mut_ptr() as *mut _,
            &neg1,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!(
            "zgeqrf workspace query failed with info={info}"
        )));
    }
    let lwork = (work_q[0].re as i32).max(1);
    let mut work = vec![C64::new(0.0, 0.0); lwork as usize];
    unsafe {
        lapack_sys::zgeqrf_(
            &n,
            &n,
            g.as_mut_ptr() as *mut _,
            &n,
            tau.as_mut_ptr() as *mut _,
            work.as_mut_ptr() as *mut _,
            &lwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("zgeqrf failed with info={info}")));
    }

    // R's diagonal lives on the buffer diagonal in either storage order.
    let mut phases = Vec::with_capacity(dim);
    for j in 0..dim {
        let r = g[[j, j]];
        if r.norm() == 0.0 {
            return Ok(None);
        }
        phases.push(r / r.norm());
    }

    // Materialize Q in place.
    unsafe {
        lapack_sys::zungqr_(
            &n,
            &n,
            &n,
            g.as_mut_ptr() as *mut _,
            &n,
            tau.as_mut_ptr() as *mut _,
            work_q.as_mut_ptr() as *mut _,
            &neg1,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!(
            "zungqr workspace query failed with info={info}"
        )));
    }
    let lwork = (work_q[0].re as i32).max(1);
    let mut work = vec![C64::new(0.0, 0.0); lwork as usize];
    unsafe {
        lapack_sys::zungqr_(
            &n,
            &n,
            &n,
            g.as_mut_ptr() as *mut _,
            &n,
            tau.as_mut_ptr() as *mut _,
            work.as_mut_ptr() as *mut _,
            &lwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("zungqr failed with info={info}")));
    }

    // Our row-major view of the buffer now holds Q^T. Scaling LAPACK's
    // column j by its phase means scaling our row j.
    for (j, phase) in phases.iter().enumerate() {
        g.row_mut(j).mapv_inplace(|z| z * phase);
    }
    Ok(Some(g))
}

fn normalized_trace(x: &Array2<C64>) -> C64 {
    x.diag().sum() / x.nrows() as f64
}

/// A dense Hermitian matrix with i.i.d. Gaussian entries (before
/// symmetrization), for seeded cross-check fixtures.
pub(crate) fn random_hermitian(dim: usize, rng: &mut impl Rng) -> Array2<C64> {
    let g = Array2::from_shape_fn((dim, dim), |_| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    (&g + &linalg::adjoint(&g)) * C64::new(0.5, 0.0)
}

/// Deterministic Hermitian operator quadruple for Monte Carlo drills:
/// four independent Gaussian Hermitian matrices from a seeded generator
/// (stream 0, so draws never collide with the per-sample streams of
/// [`haar_otoc_monte_carlo`] run with the same seed).
pub fn seeded_hermitian_quadruple(dim: usize, seed: u64) -> Result<[Array2<C64>; 4]> {
    if dim < 2 {
        return Err(Error::Domain(
            "Haar ensemble average needs dimension at least 2".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok([
        random_hermitian(dim, &mut rng),
        random_hermitian(dim, &mut rng),
        random_hermitian(dim, &mut rng),
        random_hermitian(dim, &mut rng),
    ])
}

fn check_quadruple(ops: [&Array2<C64>; 4]) -> Result<usize> {
    let dim = ops[0].nrows();
    if dim < 2 {
        return Err(Error::Domain(
            "Haar ensemble average needs dimension at least 2".into(),
        ));
    }
    for op in ops {
        if op.nrows() != dim || op.ncols() != dim {
            return Err(Error::DimensionMismatch {
                context: "haar quadruple",
                expected: dim,
                found: if op.nrows() != dim { op.nrows() } else { op.ncols() },
            });
        }
    }
    Ok(dim)
}

/// Exact Haar ensemble average of `<A (UBU†) C (UDU†)>`:
///
/// `<AC><B><D> + <A><C><BD> - <A><B><C><D>
///  - <AC>_c <BD>_c / (d^2 - 1)`
///
/// with `<X>` the normalized trace and `<XY>_c = <XY> - <X><Y>`.
pub fn haar_otoc_closed_form(
    a: &Array2<C64>,
    b: &Array2<C64>,
    c: &Array2<C64>,
    d: &Array2<C64>,
) -> Result<C64> {
    let dim = check_quadruple([a, b, c, d])? as f64;
    let ta = normalized_trace(a);
    let tb = normalized_trace(b);
    let tc = normalized_trace(c);
    let td = normalized_trace(d);
    let tac = linalg::trace_of_product(a, c) / dim;
    let tbd = linalg::trace_of_product(b, d) / dim;
    let factorized = tac * tb * td + ta * tc * tbd - ta * tb * tc * td;
    let connected = (tac - ta * tc) * (tbd - tb * td) / (dim * dim - 1.0);
    Ok(factorized - connected)
}

/// Monte Carlo cross-check of [`haar_otoc_closed_form`]: draws unitaries,
/// computes `<A (UBU†) C (UDU†)>` per draw, and reports mean, standard
/// error, and the closed form side by side.
///
/// Sample `k` comes from stream `k` of a counter-based generator, so the
/// estimate is bitwise identical in parallel and sequential execution.
pub fn haar_otoc_monte_carlo(
    a: &Array2<C64>,
    b: &Array2<C64>,
    c: &Array2<C64>,
    d: &Array2<C64>,
    samples: usize,
    seed: u64,
) -> Result<HaarEstimate> {
    haar_otoc_monte_carlo_with_mode(a, b, c, d, samples, seed, Mode::default())
}

/// As [`haar_otoc_monte_carlo`], with explicit execution mode.
pub fn haar_otoc_monte_carlo_with_mode(
    a: &Array2<C64>,
    b: &Array2<C64>,
    c: &Array2<C64>,
    d: &Array2<C64>,
    samples: usize,
    seed: u64,
    mode: Mode,
) -> Result<HaarEstimate> {
    let dim = check_quadruple([a, b, c, d])?;
    if samples < 2 {
        return Err(Error::InsufficientData {
            context: "haar_otoc_monte_carlo",
            needed: 2,
            found: samples,
        });
    }
    let closed_form = haar_otoc_closed_form(a, b, c, d)?;
    let values: Vec<Result<C64>> = par::map_indexed(mode, samples, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64 + 1);
        let u = sample_haar_unitary(dim, &mut rng)?;
        let udag = linalg::adjoint(&u);
        let bu = linalg::matmul(&linalg::matmul(&u, b), &udag);
        let du = linalg::matmul(&linalg::matmul(&u, d), &udag);
        let ab = linalg::matmul(a, &bu);
        let cd = linalg::matmul(c, &du);
        Ok(linalg::trace_of_product(&ab, &cd) / dim as f64)
    });
    let values = values.into_iter().collect::<Result<Vec<C64>>>()?;
    let mean = values.iter().sum::<C64>() / samples as f64;
    let var_of_mean = values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>()
        / ((samples - 1) as f64 * samples as f64);
    Ok(HaarEstimate {
        mc_value: mean,
        mc_std_error: var_of_mean.max(0.0).sqrt(),
        closed_form,
        samples,
        dim,
    })
}
