//! Singular spectra, the σ₂ ergodicity test, column diagnostics, invariant
//! states and Dobrushin-coefficient estimates.

use nalgebra::SVD;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{ChannelMatrix, VectorChannel};
use crate::error::{Error, Result};
use crate::linalg::{self, re, CMat};
use crate::par::{self, Execution};
use crate::qtm::{compose, Qtm, VectorState};
use crate::sample;

/// σ₂ at or above this value counts as "equal to one".
pub const ERGODIC_THRESHOLD: f64 = 1.0 - 1e-9;

/// Singular values in non-increasing order, with multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
}

impl SingularSpectrum {
    pub fn sigma(&self, i: usize) -> f64 {
        self.values.get(i).copied().unwrap_or(0.0)
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma(0)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma(1)
    }

    /// Distinct values (merged within `tol`) with their multiplicities.
    pub fn multiplicities(&self, tol: f64) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &v in &self.values {
            match out.last_mut() {
                Some((w, m)) if (*w - v).abs() <= tol => *m += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }
}

pub fn singular_values(m: &ChannelMatrix) -> Result<SingularSpectrum> {
    let svd = SVD::try_new(m.matrix().clone(), false, false, 1e-15, 10_000).ok_or_else(|| {
        Error::NumericalFailure { reason: "singular value decomposition did not converge".into() }
    })?;
    let mut values: Vec<f64> = svd.singular_values.iter().map(|s| s.max(0.0)).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(SingularSpectrum { values })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum ErgodicityDecision {
    Ergodic,
    NotErgodic {
        /// First family member (0-based) with σ₂ ≥ threshold.
        witness: usize,
        /// σ₂ fell inside `[1 - 1e-9, 1 - 1e-12)`: numerically ambiguous.
        borderline: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicityReport {
    pub sigma2: Vec<f64>,
    #[serde(flatten)]
    pub decision: ErgodicityDecision,
}

impl ErgodicityReport {
    pub fn is_ergodic(&self) -> bool {
        self.decision == ErgodicityDecision::Ergodic
    }
}

/// σ₂ criterion for a finite family of unital QTMs sharing their shape.
pub fn is_ergodic(family: &[Qtm]) -> Result<ErgodicityReport> {
    let first = family
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty family".into()))?;
    let mut sigma2 = Vec::with_capacity(family.len());
    for (j, q) in family.iter().enumerate() {
        if q.sites() != first.sites() || q.dim() != first.dim() {
            return Err(Error::ShapeMismatch {
                expected_sites: first.sites(),
                expected_dim: first.dim(),
                found_sites: q.sites(),
                found_dim: q.dim(),
            });
        }
        if !q.is_unital() {
            return Err(Error::NotUnital { index: j });
        }
        sigma2.push(singular_values(&q.channel_matrix())?.sigma2());
    }
    let decision = match sigma2.iter().position(|&s| s >= ERGODIC_THRESHOLD) {
        None => ErgodicityDecision::Ergodic,
        Some(witness) => ErgodicityDecision::NotErgodic {
            witness,
            borderline: sigma2[witness] < 1.0 - 1e-12,
        },
    };
    Ok(ErgodicityReport { sigma2, decision })
}

/// Blocks of `Φ(I ⊗ |j⟩⟨j|)`. For a single QTM block `i` is `B_j^i B_j^i*`.
pub fn column_gram<C: VectorChannel + ?Sized>(channel: &C, j: usize) -> Result<Vec<CMat>> {
    let (n, k) = (channel.sites(), channel.dim());
    if j >= n {
        return Err(Error::SiteOutOfRange { site: j as i64 + 1 });
    }
    let mut blocks = vec![linalg::zeros(k); n];
    blocks[j] = linalg::identity(k);
    Ok(channel.apply_blocks(&blocks))
}

/// Distance of column `j` from the maximally mixed column `[I/n, …, I/n]`,
/// measured on the Gram blocks.
pub fn column_distance<C: VectorChannel + ?Sized>(channel: &C, j: usize) -> Result<f64> {
    let n = channel.sites();
    let target = linalg::identity(channel.dim()) * re(1.0 / n as f64);
    let gram = column_gram(channel, j)?;
    Ok(gram.iter().map(|g| linalg::hs_norm(&(g - &target)).powi(2)).sum::<f64>().sqrt())
}

/// Largest Frobenius difference between Gram blocks of two columns in the
/// same row, over all rows and column pairs.
pub fn column_gap<C: VectorChannel + ?Sized>(channel: &C) -> Result<f64> {
    let n = channel.sites();
    let cols: Vec<Vec<CMat>> = (0..n).map(|j| column_gram(channel, j)).collect::<Result<_>>()?;
    let mut gap: f64 = 0.0;
    for a in 0..n {
        for b in (a + 1)..n {
            for (x, y) in cols[a].iter().zip(&cols[b]) {
                gap = gap.max(linalg::hs_norm(&(x - y)));
            }
        }
    }
    Ok(gap)
}

/// A nonhomogeneous chain: `schedule[t]` picks the family member used at step `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    family: Vec<Qtm>,
    schedule: Vec<usize>,
}

impl ChainSpec {
    pub fn new(family: Vec<Qtm>, schedule: Vec<usize>) -> Result<Self> {
        let first = family
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty family".into()))?;
        for q in &family {
            if q.sites() != first.sites() || q.dim() != first.dim() {
                return Err(Error::ShapeMismatch {
                    expected_sites: first.sites(),
                    expected_dim: first.dim(),
                    found_sites: q.sites(),
                    found_dim: q.dim(),
                });
            }
        }
        if let Some(&bad) = schedule.iter().find(|&&s| s >= family.len()) {
            return Err(Error::InvalidArgument(format!("schedule index {bad} outside family")));
        }
        Ok(ChainSpec { family, schedule })
    }

    /// `r` repetitions of a single QTM.
    pub fn homogeneous(qtm: Qtm, r: usize) -> Self {
        ChainSpec { family: vec![qtm], schedule: vec![0; r] }
    }

    pub fn family(&self) -> &[Qtm] {
        &self.family
    }

    pub fn schedule(&self) -> &[usize] {
        &self.schedule
    }

    /// Matrix representation of the first `r` steps (`r ≥ 1`).
    pub fn product(&self, r: usize) -> Result<ChannelMatrix> {
        if r == 0 || r > self.schedule.len() {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= r <= {}, got {r}",
                self.schedule.len()
            )));
        }
        let qtms: Vec<Qtm> = self.schedule[..r].iter().map(|&s| self.family[s].clone()).collect();
        compose(&qtms)
    }
}

/// Column-equalization gap of the `r`-step product of `chain`.
pub fn column_equalization_gap(chain: &ChainSpec, r: usize) -> Result<f64> {
    column_gap(&chain.product(r)?)
}

/// Fixed point reached by power iteration, with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub state: VectorState,
    pub iterations: usize,
    pub residual: f64,
}

/// Power iteration from the maximally mixed vector state.
pub fn invariant_state<C: VectorChannel + ?Sized>(
    channel: &C,
    tol: f64,
    max_iter: usize,
) -> Result<InvariantReport> {
    let start = VectorState::maximally_mixed(channel.sites(), channel.dim());
    invariant_state_from(channel, &start, tol, max_iter)
}

/// Power iteration from `start` until successive iterates differ by less
/// than `tol` in Hilbert-Schmidt norm.
pub fn invariant_state_from<C: VectorChannel + ?Sized>(
    channel: &C,
    start: &VectorState,
    tol: f64,
    max_iter: usize,
) -> Result<InvariantReport> {
    start.check_shape(channel.sites(), channel.dim())?;
    let mut current = start.blocks().to_vec();
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = channel.apply_blocks(&current);
        residual = next
            .iter()
            .zip(&current)
            .map(|(a, b)| linalg::hs_norm(&(a - b)).powi(2))
            .sum::<f64>()
            .sqrt();
        current = next;
        if residual < tol {
            return Ok(InvariantReport {
                state: VectorState::from_blocks_unchecked(current),
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NotConverged { iterations: max_iter, residual })
}

/// `r`-fold iterate of a channel, applied step by step.
#[derive(Debug, Clone, Copy)]
pub struct Power<'a, C: ?Sized> {
    pub channel: &'a C,
    pub r: usize,
}

impl<C: VectorChannel + ?Sized> VectorChannel for Power<'_, C> {
    fn sites(&self) -> usize {
        self.channel.sites()
    }

    fn dim(&self) -> usize {
        self.channel.dim()
    }

    fn apply_blocks(&self, blocks: &[CMat]) -> Vec<CMat> {
        let mut cur = blocks.to_vec();
        for _ in 0..self.r {
            cur = self.channel.apply_blocks(&cur);
        }
        cur
    }
}

/// `tr|X|` summed over blocks (unnormalized trace norm).
pub fn trace_norm(blocks: &[CMat]) -> f64 {
    blocks.iter().map(linalg::hermitian_trace_norm).sum()
}

/// `(1/kn) tr|X|`, the trace norm relative to the normalized trace.
pub fn normalized_trace_norm(blocks: &[CMat]) -> f64 {
    let k = blocks.first().map_or(1, |b| b.nrows());
    trace_norm(blocks) / (k * blocks.len()).max(1) as f64
}

/// `Tρ − Tη` for a pair of vector states.
pub fn pair_difference<C: VectorChannel + ?Sized>(
    channel: &C,
    rho: &VectorState,
    eta: &VectorState,
) -> Result<Vec<CMat>> {
    rho.check_shape(channel.sites(), channel.dim())?;
    eta.check_shape(channel.sites(), channel.dim())?;
    let a = channel.apply_blocks(rho.blocks());
    let b = channel.apply_blocks(eta.blocks());
    Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
}

/// Contraction `½ tr|Tρ − Tη|` of one pair.
pub fn pair_contraction<C: VectorChannel + ?Sized>(
    channel: &C,
    rho: &VectorState,
    eta: &VectorState,
) -> Result<f64> {
    Ok(0.5 * trace_norm(&pair_difference(channel, rho, eta)?))
}

/// Sampled Dobrushin coefficient: a lower bound on `sup ½ tr|Tρ − Tη|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DobrushinEstimate {
    pub lower_bound: f64,
    /// Number of extreme points evaluated (basis states plus random pure states).
    pub points: usize,
}

/// Evaluates every pair of the `kn` basis extreme points `|e_u⟩⟨e_u| ⊗ |i⟩⟨i|`
/// together with `samples` random pure states placed on random sites.
///
/// The supremum of a convex function over vector states is attained at pure
/// states on single sites, so pairs of such points suffice; the result is
/// still only a lower bound because the random part is finite.
pub fn dobrushin_coefficient<C: VectorChannel + Sync + ?Sized>(
    channel: &C,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> DobrushinEstimate {
    let (n, k) = (channel.sites(), channel.dim());
    let basis = n * k;
    let points = basis + samples;
    let images: Vec<Vec<CMat>> = par::map_indices(exec, points, |p| {
        let mut blocks = vec![linalg::zeros(k); n];
        if p < basis {
            let (site, u) = (p / k, p % k);
            blocks[site][(u, u)] = re(1.0);
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let site = rng.random_range(0..n);
            blocks[site] = sample::pure_density(k, &mut rng);
        }
        channel.apply_blocks(&blocks)
    });
    let rows: Vec<f64> = par::map_indices(exec, points, |a| {
        let mut best: f64 = 0.0;
        for b in (a + 1)..points {
            let diff: Vec<CMat> = images[a].iter().zip(&images[b]).map(|(x, y)| x - y).collect();
            best = best.max(0.5 * trace_norm(&diff));
        }
        best
    });
    DobrushinEstimate { lower_bound: rows.into_iter().fold(0.0, f64::max), points }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum WeakErgodicity {
    /// `δ(B^n0) ≤ 1 - 1e-6` on the sampled pairs.
    Witness { n0: usize, delta: f64 },
    /// No power up to `n_max` contracted; `deltas[r-1]` is the estimate for `B^r`.
    Undecided { n_max: usize, deltas: Vec<f64> },
}

/// Search `n0 ≤ n_max` for a contracting power of `qtm`.
pub fn weak_ergodicity_check(
    qtm: &Qtm,
    n_max: usize,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> WeakErgodicity {
    let mut deltas = Vec::with_capacity(n_max);
    for r in 1..=n_max {
        let est = dobrushin_coefficient(&Power { channel: qtm, r }, samples, seed, exec);
        if est.lower_bound <= 1.0 - 1e-6 {
            return WeakErgodicity::Witness { n0: r, delta: est.lower_bound };
        }
        deltas.push(est.lower_bound);
    }
    WeakErgodicity::Undecided { n_max, deltas }
}

/// Both sides of the column identity relating Gram blocks to the spectrum of `Φ*Φ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaloffCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// For a unital QTM and column `j`, compares `Σ_i ‖B_j^i* B_j^i − I/n‖²` with
/// `Σ_{l≥2} |d_lj|² σ_l²`, where `d_lj` are the coordinates of `I ⊗ |j⟩⟨j|`
/// in an eigenbasis of `Φ*Φ`.
///
/// The right side is evaluated as the full sum minus the top term `k/n`,
/// which avoids choosing a basis inside a degenerate top eigenspace.
pub fn saloff_identity_check(qtm: &Qtm, j: usize) -> Result<SaloffCheck> {
    if !qtm.is_unital() {
        return Err(Error::NotUnital { index: 0 });
    }
    let (n, k) = (qtm.sites(), qtm.dim());
    if j >= n {
        return Err(Error::SiteOutOfRange { site: j as i64 + 1 });
    }
    let target = linalg::identity(k) * re(1.0 / n as f64);
    let lhs: f64 = qtm
        .blocks()
        .filter(|((from, _), _)| *from == j)
        .map(|(_, b)| linalg::hs_norm(&(b.adjoint() * b - &target)).powi(2))
        .sum::<f64>()
        + (n - qtm.outgoing(j).len()) as f64 * linalg::hs_norm(&target).powi(2);

    let m = qtm.channel_matrix();
    let gram = m.matrix().adjoint() * m.matrix();
    let (values, vectors) = linalg::hermitian_eigen(&gram);
    let mut ej = vec![linalg::zeros(k); n];
    ej[j] = linalg::identity(k);
    let e = crate::channel::vec(&crate::channel::block_diagonal(&ej));
    let coords = vectors.adjoint() * e;
    let full: f64 = values.iter().zip(coords.iter()).map(|(l, d)| l * d.norm_sqr()).sum();
    let rhs = full - k as f64 / n as f64;
    Ok(SaloffCheck { lhs, rhs, residual: (lhs - rhs).abs() })
}
