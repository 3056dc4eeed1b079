//! Random instances for tests, benches and sampling estimators.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, c, re, CMat, CVec};
use crate::qtm::Qtm;

/// Complex Ginibre matrix with standard normal real and imaginary parts.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase correction).
pub fn unitary<R: Rng + ?Sized>(k: usize, rng: &mut R) -> CMat {
    let qr = ginibre(k, k, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { re(1.0) };
        for i in 0..k {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Unit vector drawn uniformly from the complex sphere.
pub fn pure_vector<R: Rng + ?Sized>(k: usize, rng: &mut R) -> CVec {
    let g = ginibre(k, 1, rng);
    let n = g.norm();
    CVec::from_iterator(k, g.iter().map(|z| z / n))
}

/// `|ψ⟩⟨ψ|` for a random unit vector.
pub fn pure_density<R: Rng + ?Sized>(k: usize, rng: &mut R) -> CMat {
    let v = pure_vector(k, rng);
    &v * v.adjoint()
}

/// Full-rank random density `G G* / tr(G G*)`.
pub fn density<R: Rng + ?Sized>(k: usize, rng: &mut R) -> CMat {
    let g = ginibre(k, k, rng);
    let m = &g * g.adjoint();
    let t = linalg::trace(&m).re;
    linalg::hermitian_part(&(m / re(t)))
}

/// Random bistochastic matrix as a convex mix of `terms` permutation matrices.
pub fn bistochastic<R: Rng + ?Sized>(n: usize, terms: usize, rng: &mut R) -> DMatrix<f64> {
    let weights: Vec<f64> = (0..terms.max(1)).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut p = DMatrix::zeros(n, n);
    let mut perm: Vec<usize> = (0..n).collect();
    for w in weights {
        perm.shuffle(rng);
        for (i, &j) in perm.iter().enumerate() {
            p[(j, i)] += w / total;
        }
    }
    p
}

/// Random unital QTM: `B_i^j = sqrt(p_ij) U_ij` with `P` bistochastic and
/// each `U_ij` Haar unitary.
pub fn unital_qtm<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Qtm {
    let p = bistochastic(n, n + 1, rng);
    let mut blocks = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let w = p[(j, i)];
            if w > 0.0 {
                blocks.push(((i, j), unitary(k, rng) * re(w.sqrt())));
            }
        }
    }
    Qtm::new(n, k, blocks).expect("bistochastic unitary mixture is a valid QTM")
}

/// Commuting normal pair `(B, C)` with `B*B + C*C = I`, sharing the random
/// eigenbasis `U`. Mode weights `|b_u|²` are drawn from `(lo, hi)`.
pub fn commuting_pair<R: Rng + ?Sized>(k: usize, lo: f64, hi: f64, rng: &mut R) -> (CMat, CMat) {
    let u = unitary(k, rng);
    let mut db = Vec::with_capacity(k);
    let mut dc = Vec::with_capacity(k);
    for _ in 0..k {
        let lambda: f64 = rng.random_range(lo..hi);
        let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let b: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        db.push(linalg::C64::from_polar(lambda.sqrt(), a));
        dc.push(linalg::C64::from_polar((1.0 - lambda).sqrt(), b));
    }
    let b = &u * linalg::diag(&db) * u.adjoint();
    let cm = &u * linalg::diag(&dc) * u.adjoint();
    (b, cm)
}

/// Commuting Hermitian pair `(L, R)` with `L² + R² = I`, returned with the
/// shared eigenbasis (columns of the third component).
pub fn commuting_hermitian_pair<R: Rng + ?Sized>(k: usize, rng: &mut R) -> (CMat, CMat, CMat) {
    let u = unitary(k, rng);
    let mut dl = Vec::with_capacity(k);
    let mut dr = Vec::with_capacity(k);
    for _ in 0..k {
        let t: f64 = rng.random_range(0.1..1.4);
        dl.push(t.cos());
        dr.push(t.sin());
    }
    let l = &u * linalg::real_diag(&dl) * u.adjoint();
    let r = &u * linalg::real_diag(&dr) * u.adjoint();
    (linalg::hermitian_part(&l), linalg::hermitian_part(&r), u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = unitary(4, &mut rng);
        assert!(linalg::hs_norm(&(u.adjoint() * &u - linalg::identity(4))) < 1e-12);
    }

    #[test]
    fn random_unital_qtm_is_unital() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            assert!(unital_qtm(3, 2, &mut rng).is_unital());
        }
    }

    #[test]
    fn commuting_pair_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (b, cm) = commuting_pair(3, 0.1, 0.9, &mut rng);
        let s = b.adjoint() * &b + cm.adjoint() * &cm;
        assert!(linalg::hs_norm(&(s - linalg::identity(3))) < 1e-12);
        assert!(linalg::hs_norm(&(&b * &cm - &cm * &b)) < 1e-12);
    }
}
