//! Small dense complex linear-algebra helpers on top of nalgebra.
//!
//! Everything in the crate works with `DMatrix<C64>`; these helpers collect
//! the handful of operations that recur across modules (Hilbert-Schmidt
//! products, Hermitian spectra, Kronecker products, PSD checks).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(k: usize) -> CMat {
    CMat::identity(k, k)
}

pub fn zeros(k: usize) -> CMat {
    CMat::zeros(k, k)
}

/// Build a matrix from real row-major rows.
pub fn real_matrix(rows: &[&[f64]]) -> CMat {
    let r = rows.len();
    let cols = rows.first().map_or(0, |x| x.len());
    CMat::from_fn(r, cols, |i, j| re(rows[i][j]))
}

/// Build a matrix from complex row-major rows.
pub fn complex_matrix(rows: &[&[C64]]) -> CMat {
    let r = rows.len();
    let cols = rows.first().map_or(0, |x| x.len());
    CMat::from_fn(r, cols, |i, j| rows[i][j])
}

pub fn diag(entries: &[C64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(entries))
}

pub fn real_diag(entries: &[f64]) -> CMat {
    CMat::from_fn(entries.len(), entries.len(), |i, j| {
        if i == j {
            re(entries[i])
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Hilbert-Schmidt norm, `sqrt(tr(A* A))`.
pub fn hs_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hilbert-Schmidt inner product `tr(A* B)`.
pub fn hs_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

/// `A X A*`.
pub fn sandwich(a: &CMat, x: &CMat) -> CMat {
    a * x * a.adjoint()
}

/// `A* X A`.
pub fn adjoint_sandwich(a: &CMat, x: &CMat) -> CMat {
    a.adjoint() * x * a
}

/// `tr(A X A*)` without forming the full product when possible.
pub fn sandwich_trace(a: &CMat, x: &CMat) -> f64 {
    // tr(A X A*) = tr(A* A X)
    let g = a.adjoint() * a;
    hs_inner(&g.adjoint(), x).re
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * re(0.5)
}

pub fn skew_norm(a: &CMat) -> f64 {
    hs_norm(&(a - a.adjoint())) * 0.5
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let h = hermitian_part(a);
    let eig = SymmetricEigen::new(h);
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.total_cmp(y));
    v
}

/// Eigen-decomposition of the Hermitian part of `a`: (ascending eigenvalues, unitary columns).
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let h = hermitian_part(a);
    let n = h.nrows();
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigenvalues(a).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigenvalues(a).last().copied().unwrap_or(0.0)
}

/// Trace norm of a Hermitian matrix (sum of absolute eigenvalues).
pub fn hermitian_trace_norm(a: &CMat) -> f64 {
    hermitian_eigenvalues(a).iter().map(|x| x.abs()).sum()
}

/// Kronecker product `A ⊗ B`; index `(a, b)` maps to `a * dim(B) + b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn conj(a: &CMat) -> CMat {
    a.map(|z| z.conj())
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Loewner order check `a ⪰ b - tol`.
pub fn psd_dominates(a: &CMat, b: &CMat, tol: f64) -> bool {
    min_eigenvalue(&(a - b)) >= -tol
}

/// `true` if `a` is (numerically) a real multiple of the identity.
pub fn is_scalar_identity(a: &CMat, tol: f64) -> bool {
    let k = a.nrows();
    if k == 0 {
        return true;
    }
    let s = trace(a) / re(k as f64);
    hs_norm(&(a - identity(k) * s)) <= tol
}
