//! Reachability tests for the aggregate network dynamics.
//!
//! Three mutually checking routes decide whether a pair `(A, B)` is
//! reachable:
//!
//! * Kalman rank: numerical row rank of `(B, AB, ..., A^{n-1}B)`, built by
//!   iterated multiplication so it shares nothing with the eigensolver;
//! * PBH: for every eigenvalue, the pencil `(lambda I - A | B)` must keep
//!   full row rank, otherwise a left eigenvector orthogonal to the input
//!   exists and is returned as a witness;
//! * Gramian: eigenvalues of the finite-horizon sum
//!   `W_T = sum_t A^t B B' (A')^t`.
//!
//! Leader-reachability applies these to `(A_f, B_f)` (followers driven by
//! leader states), base-reachability to `(A_l, B_l)` (leaders driven by the
//! base command).

use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix, DVector};

use crate::aggregate::AggregateSystem;
use crate::error::{Error, Result};
use crate::{real, Real};

/// Outcome of a reachability test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Reachable,
    Unreachable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Reachable => write!(f, "reachable"),
            Verdict::Unreachable => write!(f, "unreachable"),
        }
    }
}

/// Which route produced a [`ReachabilityReport`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    KalmanRank,
    Pbh,
    Gramian,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::KalmanRank => write!(f, "kalman-rank"),
            Method::Pbh => write!(f, "pbh"),
            Method::Gramian => write!(f, "gramian"),
        }
    }
}

/// Result of one reachability test, with enough detail to audit the rank
/// decision.
///
/// `singular_values` always satisfies
/// `rank = #(sigma > tolerance * max(1, sigma_max))` and is reported in
/// descending order. Its meaning depends on the route: singular values of
/// the controllability matrix (Kalman), square roots of the Gramian
/// eigenvalues (Gramian), or per-eigenvalue normalized pencil margins (PBH).
/// A failed PBH test carries the offending left eigenvector as `witness`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachabilityReport<T: Real> {
    pub verdict: Verdict,
    pub method: Method,
    pub rank: usize,
    pub state_dim: usize,
    pub singular_values: Vec<T>,
    pub tolerance: T,
    pub witness: Option<DVector<Complex<T>>>,
}

impl<T: Real> ReachabilityReport<T> {
    pub fn is_reachable(&self) -> bool {
        self.verdict == Verdict::Reachable
    }
}

/// Builds the controllability matrix `(B, AB, A^2 B, ..., A^{n-1} B)` by
/// iterated multiplication.
pub fn controllability_matrix<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    assert_eq!(a.nrows(), a.ncols(), "A must be square");
    assert_eq!(a.nrows(), b.nrows(), "B must have as many rows as A");
    let n = a.nrows();
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&block);
        if k + 1 < n {
            block = a * &block;
        }
    }
    out
}

/// Numerical rank of a matrix: the number of singular values above
/// `tol * max(1, sigma_max)`. Also returns all singular values in
/// descending order.
pub fn numerical_rank<T: Real>(m: &DMatrix<T>, tol: T) -> Result<(usize, Vec<T>)> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok((0, Vec::new()));
    }
    let svd = m
        .clone()
        .try_svd(false, false, T::default_epsilon(), 100_000)
        .ok_or_else(|| Error::Numerical("singular value decomposition did not converge".into()))?;
    let sigma: Vec<T> = svd.singular_values.iter().copied().collect();
    let threshold = tol * T::one().max(sigma[0]);
    let rank = sigma.iter().filter(|&&s| s > threshold).count();
    Ok((rank, sigma))
}

fn rank_report<T: Real>(
    method: Method,
    state_dim: usize,
    singular_values: Vec<T>,
    tolerance: T,
    witness: Option<DVector<Complex<T>>>,
) -> ReachabilityReport<T> {
    let sigma_max = singular_values.first().copied().unwrap_or_else(T::zero);
    let threshold = tolerance * T::one().max(sigma_max);
    let rank = singular_values.iter().filter(|&&s| s > threshold).count();
    ReachabilityReport {
        verdict: if rank == state_dim {
            Verdict::Reachable
        } else {
            Verdict::Unreachable
        },
        method,
        rank,
        state_dim,
        singular_values,
        tolerance,
        witness,
    }
}

/// Kalman rank test on `(A, B)`.
pub fn kalman_test<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, tol: T) -> Result<ReachabilityReport<T>> {
    let ctrl = controllability_matrix(a, b);
    let (_, sigma) = numerical_rank(&ctrl, tol)?;
    Ok(rank_report(Method::KalmanRank, a.nrows(), sigma, tol, None))
}

/// Decides leader-reachability: the Kalman test on `(A_f, B_f)`.
pub fn is_leader_reachable<T: Real>(
    agg: &AggregateSystem<T>,
    tol: T,
) -> Result<ReachabilityReport<T>> {
    kalman_test(&agg.a_f, &agg.b_f, tol)
}

/// Decides base-reachability: the Kalman test on `(A_l, B_l)`.
pub fn is_base_reachable<T: Real>(
    agg: &AggregateSystem<T>,
    tol: T,
) -> Result<ReachabilityReport<T>> {
    kalman_test(&agg.a_l, &agg.b_l, tol)
}

fn to_complex<T: Real>(m: &DMatrix<T>) -> DMatrix<Complex<T>> {
    m.map(|x| Complex::new(x, T::zero()))
}

/// PBH eigenvector test on `(A, B)`.
///
/// For each eigenvalue `lambda` of `A` the pencil `(lambda I - A | B)` is
/// examined: the pair is unreachable exactly when some pencil loses row rank,
/// i.e. when a left eigenvector `nu` with `nu^H B = 0` exists. The report's
/// singular values are the per-eigenvalue margins
/// `sigma_min(pencil) / max(1, sigma_max(pencil))`; the worst failing
/// eigenvalue contributes its left eigenvector as the witness. Working over
/// the full pencils (rather than single eigenvectors) keeps repeated
/// eigenvalues with multidimensional eigenspaces covered.
pub fn pbh_test<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, tol: T) -> Result<ReachabilityReport<T>> {
    assert_eq!(a.nrows(), a.ncols(), "A must be square");
    assert_eq!(a.nrows(), b.nrows(), "B must have as many rows as A");
    let n = a.nrows();
    let m = b.ncols();

    let schur = Schur::try_new(a.clone(), T::default_epsilon(), 100_000)
        .ok_or_else(|| Error::Numerical("eigenvalue computation did not converge".into()))?;
    let eigenvalues = schur.complex_eigenvalues();

    let ac = to_complex(a);
    let bc = to_complex(b);

    let mut margins: Vec<T> = Vec::with_capacity(n);
    let mut worst: Option<(T, DVector<Complex<T>>)> = None;

    for lambda in eigenvalues.iter() {
        let mut pencil = DMatrix::<Complex<T>>::zeros(n, n + m);
        let mut shifted = -ac.clone();
        for i in 0..n {
            shifted[(i, i)] += *lambda;
        }
        pencil.view_mut((0, 0), (n, n)).copy_from(&shifted);
        pencil.view_mut((0, n), (n, m)).copy_from(&bc);

        let svd = pencil
            .try_svd(true, false, T::default_epsilon(), 100_000)
            .ok_or_else(|| {
                Error::Numerical("singular value decomposition did not converge".into())
            })?;
        let sigma = &svd.singular_values;
        let sigma_max = sigma[0];
        let sigma_min = sigma[n - 1];
        let margin = sigma_min / T::one().max(sigma_max);
        margins.push(margin);

        if margin <= tol {
            let better = worst.as_ref().is_none_or(|(w, _)| margin < *w);
            if better {
                let u = svd.u.as_ref().expect("svd computed with u");
                let nu: DVector<Complex<T>> = u.column(n - 1).into_owned();
                worst = Some((margin, nu));
            }
        }
    }

    margins.sort_by(|x, y| y.partial_cmp(x).expect("margins are finite"));
    Ok(rank_report(
        Method::Pbh,
        n,
        margins,
        tol,
        worst.map(|(_, nu)| nu),
    ))
}

/// Finite-horizon reachability Gramian `W_T = sum_{t<T} A^t B B' (A')^t`.
pub fn reachability_gramian<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    horizon: usize,
) -> DMatrix<T> {
    assert_eq!(a.nrows(), a.ncols(), "A must be square");
    assert_eq!(a.nrows(), b.nrows(), "B must have as many rows as A");
    let n = a.nrows();
    let mut w = DMatrix::zeros(n, n);
    let mut term = b * b.transpose();
    for t in 0..horizon {
        w += &term;
        if t + 1 < horizon {
            term = a * term * a.transpose();
        }
    }
    w
}

/// Gramian-based reachability test on `(A, B)` at horizon `n`.
///
/// The reported singular values are the square roots of the Gramian
/// eigenvalues, which equal the singular values of the `n`-step steering
/// map, so the rank rule matches the other routes' scale.
pub fn gramian_test<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    tol: T,
) -> Result<ReachabilityReport<T>> {
    let n = a.nrows();
    let w = reachability_gramian(a, b, n);
    let eigen = w.symmetric_eigen();
    let mut sigma: Vec<T> = eigen
        .eigenvalues
        .iter()
        .map(|&ev| ev.max(T::zero()).sqrt())
        .collect();
    sigma.sort_by(|x, y| y.partial_cmp(x).expect("eigenvalues are finite"));
    Ok(rank_report(Method::Gramian, n, sigma, tol, None))
}

/// Runs the chosen test route on `(A, B)`.
pub fn test_pair<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    method: Method,
    tol: T,
) -> Result<ReachabilityReport<T>> {
    match method {
        Method::KalmanRank => kalman_test(a, b, tol),
        Method::Pbh => pbh_test(a, b, tol),
        Method::Gramian => gramian_test(a, b, tol),
    }
}

/// Normalized reachability margin of `(A, B)`: the `n`-th singular value of
/// the controllability matrix over `max(1, sigma_max)`. Zero for an
/// unreachable pair, positive and comparable across scales otherwise.
pub fn reachability_margin<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<T> {
    let ctrl = controllability_matrix(a, b);
    let (_, sigma) = numerical_rank(&ctrl, real(1e-10))?;
    let n = a.nrows();
    let smallest = sigma.get(n - 1).copied().unwrap_or_else(T::zero);
    Ok(smallest / T::one().max(sigma[0]))
}
