//! Closed forms for nearest-neighbour walks whose left and right matrices
//! `B` and `C` are normal and commute.
//!
//! Such a pair is diagonal in a common orthonormal basis `U`. Any path with
//! `l` left moves and `r` right moves then contributes
//! `tr(|D_B|^{2l} |D_C|^{2r} U* ρ U)`, which only sees the diagonal weights
//! `d_u = (U* ρ U)_{uu}`. Each mode `u` behaves like a classical walk with
//! left probability `λ_u = |D_B(u)|²` and right probability `μ_u = |D_C(u)|²`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, re, CMat, C64};
use crate::qtm::VectorState;
use crate::walk::{Boundary, LatticeWindow};

/// Residual threshold for normality, commutation and normalization checks.
pub const STRUCTURE_TOL: f64 = 1e-10;

/// Partial sums of `Σ γ_k` beyond this declare the series divergent.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// Coefficients for the generic Hermitian combination used to find a shared
/// eigenbasis. Any values off a measure-zero set work; fixed ones keep
/// results reproducible.
const GENERIC: [f64; 8] = [
    1.0,
    0.618_033_988_749_894_9,
    0.414_213_562_373_095,
    0.732_050_807_568_877_2,
    0.236_067_977_499_789_7,
    0.645_751_311_064_590_6,
    0.316_624_790_355_4,
    0.872_983_346_207_417,
];

/// A normal commuting pair with its joint diagonalization `B = U D_B U*`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutingPair {
    pub b: CMat,
    pub c: CMat,
    pub u: CMat,
    pub db: Vec<C64>,
    pub dc: Vec<C64>,
}

/// Mode weights `d_u` of a density and the per-mode pair `(λ_u, μ_u)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenWeights {
    pub weights: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

fn commutator_norm(a: &CMat, b: &CMat) -> f64 {
    linalg::hs_norm(&(a * b - b * a))
}

fn normality_residual(a: &CMat) -> f64 {
    commutator_norm(a, &a.adjoint())
}

/// Unitary whose columns diagonalize every matrix in `mats` (assumed normal
/// and pairwise commuting). Columns are ordered by their dominant coordinate
/// and phased so that coordinate is real and positive; for diagonal input
/// this returns the identity.
pub(crate) fn joint_eigenbasis(mats: &[&CMat]) -> CMat {
    let k = mats[0].nrows();
    let mut h = linalg::zeros(k);
    for (s, m) in mats.iter().enumerate() {
        let herm = linalg::hermitian_part(m);
        let anti = (*m - m.adjoint()) * c(0.0, -0.5);
        h += herm * re(GENERIC[(2 * s) % GENERIC.len()] * (1.0 + s as f64));
        h += anti * re(GENERIC[(2 * s + 1) % GENERIC.len()] * (1.0 + s as f64));
    }
    let (_, v) = linalg::hermitian_eigen(&h);
    let mut cols: Vec<(usize, Vec<C64>)> = (0..k)
        .map(|j| {
            let col: Vec<C64> = (0..k).map(|r| v[(r, j)]).collect();
            let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let lead = col.iter().position(|z| z.norm() >= max - 1e-8).unwrap_or(0);
            let phase = col[lead] / col[lead].norm();
            (lead, col.into_iter().map(|z| z / phase).collect())
        })
        .collect();
    cols.sort_by_key(|(lead, _)| *lead);
    CMat::from_fn(k, k, |r, j| cols[j].1[r])
}

/// Validate `(B, C)` and diagonalize them jointly.
pub fn diagonalize_pair(b: &CMat, cm: &CMat) -> Result<CommutingPair> {
    let k = b.nrows();
    if b.ncols() != k || cm.nrows() != k || cm.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, found: cm.nrows().max(b.ncols()) });
    }
    for m in [b, cm] {
        let r = normality_residual(m);
        if r >= STRUCTURE_TOL {
            return Err(Error::NotNormal { residual: r });
        }
    }
    let r = commutator_norm(b, cm);
    if r >= STRUCTURE_TOL {
        return Err(Error::NotCommuting { residual: r });
    }
    let r = linalg::hs_norm(&(b.adjoint() * b + cm.adjoint() * cm - linalg::identity(k)));
    if r >= STRUCTURE_TOL {
        return Err(Error::NotNormalized { residual: r });
    }
    let u = joint_eigenbasis(&[b, cm]);
    let db: Vec<C64> = (u.adjoint() * b * &u).diagonal().iter().copied().collect();
    let dc: Vec<C64> = (u.adjoint() * cm * &u).diagonal().iter().copied().collect();
    for (m, d) in [(b, &db), (cm, &dc)] {
        let r = linalg::hs_norm(&(m - &u * linalg::diag(d) * u.adjoint()));
        if r >= 1e-9 {
            return Err(Error::NumericalFailure {
                reason: format!("joint diagonalization residual {r:.3e}"),
            });
        }
    }
    Ok(CommutingPair { b: b.clone(), c: cm.clone(), u, db, dc })
}

impl CommutingPair {
    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    /// `λ_u = |D_B(u)|²` (left).
    pub fn lambda(&self) -> Vec<f64> {
        self.db.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `μ_u = |D_C(u)|²` (right).
    pub fn mu(&self) -> Vec<f64> {
        self.dc.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Diagonal weights of `U* ρ U` after validating `ρ`.
    pub fn weights(&self, rho: &CMat) -> Result<EigenWeights> {
        let k = self.dim();
        if rho.nrows() != k || rho.ncols() != k {
            return Err(Error::DimensionMismatch { expected: k, found: rho.nrows().max(rho.ncols()) });
        }
        let rho = VectorState::new(vec![rho.clone()])?.into_blocks().remove(0);
        let rotated = self.u.adjoint() * rho * &self.u;
        Ok(EigenWeights {
            weights: rotated.diagonal().iter().map(|z| z.re).collect(),
            lambda: self.lambda(),
            mu: self.mu(),
        })
    }

    /// Homogeneous window `lo..=hi` with `B` moving left and `C` moving right.
    pub fn window(&self, lo: i64, hi: i64, boundary: Boundary) -> Result<LatticeWindow> {
        LatticeWindow::nearest_neighbor(lo, hi, &self.b, &self.c, boundary)
    }
}

/// `C(n, r)`, exact in f64 while it stays below 2^53.
pub fn binomial(n: u64, r: u64) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    let mut acc = 1.0f64;
    for i in 1..=r {
        acc = acc * (n - r + i) as f64 / i as f64;
    }
    if acc < 9.0e15 {
        acc.round()
    } else {
        acc
    }
}

fn mode_power(x: f64, e: u64) -> f64 {
    if e == 0 {
        1.0
    } else {
        x.powi(e as i32)
    }
}

/// Probability of being at site `x` after `n` steps from `ρ_a ⊗ |a⟩⟨a|`.
pub fn site_probability(pair: &CommutingPair, rho_a: &CMat, a: i64, x: i64, n: u64) -> Result<f64> {
    let w = pair.weights(rho_a)?;
    let twice_r = n as i64 + x - a;
    if twice_r < 0 || twice_r % 2 != 0 || twice_r > 2 * n as i64 {
        return Ok(0.0);
    }
    let r = (twice_r / 2) as u64;
    let l = n - r;
    let value = if n <= 1000 {
        let mode_sum: f64 = (0..pair.dim())
            .map(|u| w.weights[u] * mode_power(w.lambda[u], l) * mode_power(w.mu[u], r))
            .sum();
        binomial(n, r) * mode_sum
    } else {
        // log space for large n
        let ln_binom = ln_gamma(n as f64 + 1.0) - ln_gamma(r as f64 + 1.0) - ln_gamma(l as f64 + 1.0);
        (0..pair.dim())
            .map(|u| {
                let t = ln_binom + log_pow(w.lambda[u], l) + log_pow(w.mu[u], r);
                w.weights[u] * t.exp()
            })
            .sum()
    };
    Ok(value.clamp(0.0, 1.0))
}

fn log_pow(x: f64, e: u64) -> f64 {
    if e == 0 {
        0.0
    } else {
        e as f64 * x.ln()
    }
}

/// Stirling series for `ln Γ(x)`, accurate to ~1e-15 relative for `x > 1000`.
fn ln_gamma(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x + 0.5 * (std::f64::consts::TAU).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// Probability that the walk started at `start = 0` visits `x` for the first
/// time at step `n`: `(|x| / n) p_x^(n)`.
pub fn first_visit_probability(pair: &CommutingPair, rho0: &CMat, start: i64, x: i64, n: u64) -> Result<f64> {
    if start != 0 {
        return Err(Error::StartNotOrigin { start });
    }
    if x == 0 || (n as i64) < x.abs() {
        return Err(Error::InvalidArgument(format!("need n >= |x| >= 1, got n = {n}, x = {x}")));
    }
    let p = site_probability(pair, rho0, 0, x, n)?;
    Ok(x.unsigned_abs() as f64 / n as f64 * p)
}

/// Per-mode ruin probabilities `h_u` from site `i` with target `{0}`.
pub fn gambler_mode_probabilities(pair: &CommutingPair, i: u64) -> Vec<f64> {
    pair.lambda()
        .iter()
        .zip(pair.mu())
        .map(|(&l, m)| if l >= m { 1.0 } else { (l / m).powi(i as i32) })
        .collect()
}

/// Probability of ever reaching `0` from site `i ≥ 1` with internal state `ρ`.
pub fn gambler_ruin(pair: &CommutingPair, rho: &CMat, i: u64) -> Result<f64> {
    if i == 0 {
        return Err(Error::InvalidArgument("start site must be at least 1".into()));
    }
    let w = pair.weights(rho)?;
    let h = gambler_mode_probabilities(pair, i);
    Ok(w.weights.iter().zip(&h).map(|(d, h)| d * h).sum::<f64>().clamp(0.0, 1.0))
}

type RateFn = dyn Fn(u64, usize) -> (f64, f64) + Send + Sync;

/// Site-dependent commuting walk on `{0, 1, 2, …}` for the ruin problem.
///
/// `rate(i, u)` returns `(λ_{i;u}, μ_{i;u})` for site `i ≥ 1` and mode `u`.
/// When `constant_from = Some(m)` the rates at sites `≥ m` equal those at
/// `m`, and the tail of `Σ γ_k` is summed in closed form.
pub struct BirthDeathSpec {
    u: CMat,
    rate: Box<RateFn>,
    constant_from: Option<u64>,
    max_terms: usize,
}

impl std::fmt::Debug for BirthDeathSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BirthDeathSpec")
            .field("dim", &self.u.nrows())
            .field("constant_from", &self.constant_from)
            .field("max_terms", &self.max_terms)
            .finish()
    }
}

impl BirthDeathSpec {
    /// `pairs[i - 1] = (L_i, R_i)` for `i = 1..=m`; the last pair repeats for all larger sites.
    pub fn from_matrices(pairs: &[(CMat, CMat)]) -> Result<Self> {
        let (l0, _) = pairs
            .first()
            .ok_or_else(|| Error::InvalidArgument("birth-and-death spec needs at least one site".into()))?;
        let k = l0.nrows();
        let mut all: Vec<&CMat> = Vec::with_capacity(2 * pairs.len());
        for (l, r) in pairs {
            if l.nrows() != k || l.ncols() != k || r.nrows() != k || r.ncols() != k {
                return Err(Error::DimensionMismatch { expected: k, found: l.nrows().max(r.nrows()) });
            }
            for m in [l, r] {
                let res = normality_residual(m);
                if res >= STRUCTURE_TOL {
                    return Err(Error::NotNormal { residual: res });
                }
            }
            let res = linalg::hs_norm(&(l.adjoint() * l + r.adjoint() * r - linalg::identity(k)));
            if res >= STRUCTURE_TOL {
                return Err(Error::NotNormalized { residual: res });
            }
            all.push(l);
            all.push(r);
        }
        for a in 0..all.len() {
            for b in (a + 1)..all.len() {
                let res = commutator_norm(all[a], all[b]);
                if res >= STRUCTURE_TOL {
                    return Err(Error::NotCommuting { residual: res });
                }
            }
        }
        let u = joint_eigenbasis(&all);
        let table: Vec<Vec<(f64, f64)>> = pairs
            .iter()
            .map(|(l, r)| {
                let dl = u.adjoint() * l * &u;
                let dr = u.adjoint() * r * &u;
                (0..k).map(|m| (dl[(m, m)].norm_sqr(), dr[(m, m)].norm_sqr())).collect()
            })
            .collect();
        let m = table.len() as u64;
        Ok(BirthDeathSpec {
            u,
            rate: Box::new(move |i, mode| table[(i.min(m) - 1) as usize][mode]),
            constant_from: Some(m),
            max_terms: 1_000_000,
        })
    }

    /// Rates given per mode in the eigenbasis `u`; sums are truncated after `max_terms` terms.
    pub fn from_rates<F>(u: CMat, rate: F, max_terms: usize) -> Result<Self>
    where
        F: Fn(u64, usize) -> (f64, f64) + Send + Sync + 'static,
    {
        let k = u.nrows();
        let res = linalg::hs_norm(&(u.adjoint() * &u - linalg::identity(k)));
        if res >= STRUCTURE_TOL {
            return Err(Error::InvalidArgument(format!("basis is not unitary (residual {res:.3e})")));
        }
        Ok(BirthDeathSpec { u, rate: Box::new(rate), constant_from: None, max_terms })
    }

    /// Declare the rates constant from site `m` on.
    pub fn with_constant_tail_from(mut self, m: u64) -> Self {
        self.constant_from = Some(m.max(1));
        self
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn basis(&self) -> &CMat {
        &self.u
    }

    fn rates(&self, i: u64, mode: usize) -> Result<(f64, f64)> {
        let (l, m) = (self.rate)(i, mode);
        if !(l >= 0.0 && m >= 0.0) || (l + m - 1.0).abs() > STRUCTURE_TOL {
            return Err(Error::NotNormalized { residual: (l + m - 1.0).abs() });
        }
        Ok((l, m))
    }

    /// `h_i` for one mode, from the series `Σ γ_k`.
    pub fn mode_probability(&self, mode: usize, i: u64) -> Result<f64> {
        let mut gamma = 1.0f64; // γ_0
        let mut total = 1.0f64;
        let mut tail = if i == 0 { 1.0 } else { 0.0 };
        let mut k: u64 = 0;
        loop {
            if let Some(m) = self.constant_from {
                if k + 1 >= m {
                    // γ_{k+j} = γ_k ρ^j for j ≥ 1, with ρ the ratio at site m
                    let (l, mu) = self.rates(m, mode)?;
                    if gamma == 0.0 {
                        break;
                    }
                    if mu == 0.0 || l >= mu {
                        return Ok(1.0);
                    }
                    let rho = l / mu;
                    let geo = gamma * rho / (1.0 - rho);
                    total += geo;
                    if i > k {
                        tail += gamma * rho.powi((i - k) as i32) / (1.0 - rho);
                    } else {
                        tail += geo;
                    }
                    break;
                }
            }
            k += 1;
            if k as usize > self.max_terms {
                return Err(Error::SeriesUndetermined { terms: self.max_terms });
            }
            let (l, mu) = self.rates(k, mode)?;
            if mu == 0.0 {
                if l > 0.0 && gamma > 0.0 {
                    return Ok(1.0);
                }
                gamma = 0.0;
            } else {
                gamma *= l / mu;
            }
            total += gamma;
            if k >= i {
                tail += gamma;
            }
            if total > DIVERGENCE_BOUND {
                return Ok(1.0);
            }
            if gamma == 0.0 {
                break;
            }
            let ratio = if mu > 0.0 { l / mu } else { f64::INFINITY };
            if self.constant_from.is_none() && ratio < 1.0 && k >= i && gamma * ratio / (1.0 - ratio) <= 1e-15 * total {
                break;
            }
        }
        Ok((tail / total).clamp(0.0, 1.0))
    }

    /// Diagonal weights of `U* ρ U`.
    pub fn weights(&self, rho: &CMat) -> Result<Vec<f64>> {
        let k = self.dim();
        if rho.nrows() != k || rho.ncols() != k {
            return Err(Error::DimensionMismatch { expected: k, found: rho.nrows().max(rho.ncols()) });
        }
        let rho = VectorState::new(vec![rho.clone()])?.into_blocks().remove(0);
        Ok((self.u.adjoint() * rho * &self.u).diagonal().iter().map(|z| z.re).collect())
    }
}

/// Probability of ever reaching `0` from site `i` with internal state `ρ`.
pub fn birth_death(spec: &BirthDeathSpec, rho: &CMat, i: u64) -> Result<f64> {
    if i == 0 {
        return Err(Error::InvalidArgument("start site must be at least 1".into()));
    }
    let w = spec.weights(rho)?;
    let mut acc = 0.0;
    for (mode, d) in w.iter().enumerate() {
        if d.abs() > 0.0 {
            acc += d * spec.mode_probability(mode, i)?;
        }
    }
    Ok(acc.clamp(0.0, 1.0))
}
