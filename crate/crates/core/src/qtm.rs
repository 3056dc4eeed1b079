//! Quantum transition matrices and vector states.
//!
//! A QTM on `n` sites with internal dimension `k` is an `n × n` grid of
//! `k × k` blocks. The block `B_i^j` describes the transition from site `i`
//! to site `j`; missing blocks are zero. Each source site must satisfy the
//! column normalization `Σ_j B_i^j* B_i^j = I_k`.
//!
//! Indices in the Rust API are 0-based. Error messages and JSON documents use
//! 1-based site labels.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::channel::{ChannelMatrix, VectorChannel};
use crate::error::{Error, Result};
use crate::linalg::{self, re, CMat};

/// Default tolerance for normalization, trace and positivity checks.
pub const DEFAULT_TOL: f64 = 1e-10;

/// A validated quantum transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Qtm {
    sites: usize,
    dim: usize,
    /// `outgoing[i]` lists `(j, B_i^j)` for every nonzero block, sorted by `j`.
    outgoing: Vec<Vec<(usize, CMat)>>,
    unital: bool,
}

impl Qtm {
    /// Validate a raw block map `(from, to) -> block` with the default tolerance.
    pub fn new<I>(sites: usize, dim: usize, blocks: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((usize, usize), CMat)>,
    {
        Self::with_tolerance(sites, dim, blocks, DEFAULT_TOL)
    }

    pub fn with_tolerance<I>(sites: usize, dim: usize, blocks: I, tol: f64) -> Result<Self>
    where
        I: IntoIterator<Item = ((usize, usize), CMat)>,
    {
        if sites == 0 || dim == 0 {
            return Err(Error::InvalidArgument(
                "site count and internal dimension must be positive".into(),
            ));
        }
        let mut map: BTreeMap<(usize, usize), CMat> = BTreeMap::new();
        for ((from, to), block) in blocks {
            if from >= sites {
                return Err(Error::SiteOutOfRange { site: from as i64 + 1 });
            }
            if to >= sites {
                return Err(Error::SiteOutOfRange { site: to as i64 + 1 });
            }
            if block.nrows() != dim || block.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: if block.nrows() != dim { block.nrows() } else { block.ncols() },
                });
            }
            if !linalg::is_finite(&block) {
                return Err(Error::InvalidArgument(format!(
                    "block {}->{} has non-finite entries",
                    from + 1,
                    to + 1
                )));
            }
            if map.insert((from, to), block).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate block {}->{}",
                    from + 1,
                    to + 1
                )));
            }
        }
        let mut outgoing = vec![Vec::new(); sites];
        for ((from, to), block) in map {
            if block.iter().all(|z| z.norm_sqr() == 0.0) {
                continue;
            }
            outgoing[from].push((to, block));
        }
        let id = linalg::identity(dim);
        for (i, out) in outgoing.iter().enumerate() {
            let mut gram = linalg::zeros(dim);
            for (_, b) in out {
                gram += b.adjoint() * b;
            }
            let residual = linalg::hs_norm(&(gram - &id));
            if residual > tol {
                return Err(Error::ColumnNotNormalized { site: i as i64 + 1, residual });
            }
        }
        let mut qtm = Qtm { sites, dim, outgoing, unital: false };
        qtm.unital = qtm.unital_residual() <= tol;
        Ok(qtm)
    }

    /// Embed a column-stochastic matrix (`p[(j, i)]` is the probability of
    /// moving from `i` to `j`) with blocks `sqrt(p) I_k`.
    pub fn embed_classical(p: &DMatrix<f64>, dim: usize) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n || n == 0 {
            return Err(Error::NotStochastic { reason: "matrix must be square and nonempty".into() });
        }
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                let v = p[(j, i)];
                if v.is_nan() || v < 0.0 {
                    return Err(Error::NotStochastic {
                        reason: format!("entry ({}, {}) = {v} is negative", j + 1, i + 1),
                    });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::NotStochastic {
                    reason: format!("column {} sums to {sum}", i + 1),
                });
            }
        }
        let id = linalg::identity(dim);
        let blocks = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter_map(|(i, j)| {
            let v = p[(j, i)];
            (v > 0.0).then(|| ((i, j), &id * re(v.sqrt())))
        });
        Qtm::new(n, dim, blocks.collect::<Vec<_>>())
    }

    /// Identity QTM: every site maps to itself with `I_k`.
    pub fn identity(sites: usize, dim: usize) -> Self {
        let blocks = (0..sites).map(|i| ((i, i), linalg::identity(dim)));
        Qtm::new(sites, dim, blocks.collect::<Vec<_>>()).expect("identity QTM is valid")
    }

    /// Every block equal to `I / sqrt(n)`.
    pub fn maximally_mixed(sites: usize, dim: usize) -> Self {
        let b = linalg::identity(dim) * re(1.0 / (sites as f64).sqrt());
        let blocks = (0..sites).flat_map(|i| (0..sites).map(move |j| (i, j)));
        Qtm::new(sites, dim, blocks.map(|ij| (ij, b.clone())).collect::<Vec<_>>())
            .expect("maximally mixed QTM is valid")
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_unital(&self) -> bool {
        self.unital
    }

    /// Block for the transition `from -> to`, if nonzero.
    pub fn block(&self, from: usize, to: usize) -> Option<&CMat> {
        self.outgoing
            .get(from)?
            .binary_search_by_key(&to, |(j, _)| *j)
            .ok()
            .map(|pos| &self.outgoing[from][pos].1)
    }

    /// Nonzero blocks leaving `from`, as `(to, block)` pairs.
    pub fn outgoing(&self, from: usize) -> &[(usize, CMat)] {
        &self.outgoing[from]
    }

    /// All nonzero blocks as `((from, to), block)`.
    pub fn blocks(&self) -> impl Iterator<Item = ((usize, usize), &CMat)> + '_ {
        self.outgoing
            .iter()
            .enumerate()
            .flat_map(|(i, out)| out.iter().map(move |(j, b)| ((i, *j), b)))
    }

    pub fn block_count(&self) -> usize {
        self.outgoing.iter().map(Vec::len).sum()
    }

    /// Largest deviation of `Σ_i B_i^j B_i^j*` from the identity over target sites `j`.
    pub fn unital_residual(&self) -> f64 {
        let mut rows = vec![linalg::zeros(self.dim); self.sites];
        for ((_, j), b) in self.blocks() {
            rows[j] += b * b.adjoint();
        }
        let id = linalg::identity(self.dim);
        rows.iter().map(|g| linalg::hs_norm(&(g - &id))).fold(0.0, f64::max)
    }

    /// One step of the induced walk: output block `j` is `Σ_i B_i^j S_i B_i^j*`.
    pub fn apply(&self, state: &VectorState) -> Result<VectorState> {
        state.check_shape(self.sites, self.dim)?;
        let blocks = self.step_blocks(state.blocks()).iter().map(linalg::hermitian_part).collect();
        Ok(VectorState::from_blocks_unchecked(blocks))
    }

    pub(crate) fn step_blocks(&self, blocks: &[CMat]) -> Vec<CMat> {
        let mut out = vec![linalg::zeros(self.dim); self.sites];
        for (i, rho) in blocks.iter().enumerate() {
            if rho.iter().all(|z| z.norm_sqr() == 0.0) {
                continue;
            }
            for (j, b) in &self.outgoing[i] {
                out[*j] += linalg::sandwich(b, rho);
            }
        }
        out
    }

    /// Dense `(kn)² × (kn)²` representation of the induced channel, built
    /// block by block (site-major layout, row-major vec).
    pub fn channel_matrix(&self) -> ChannelMatrix {
        let k = self.dim;
        let d = self.sites * k;
        let mut m = CMat::zeros(d * d, d * d);
        for ((i, j), b) in self.blocks() {
            for a in 0..k {
                for bb in 0..k {
                    let row = (j * k + a) * d + (j * k + bb);
                    for cc in 0..k {
                        for e in 0..k {
                            let col = (i * k + cc) * d + (i * k + e);
                            m[(row, col)] += b[(a, cc)] * b[(bb, e)].conj();
                        }
                    }
                }
            }
        }
        ChannelMatrix::from_parts(self.sites, k, m)
    }

    /// Same walk with every block conjugate-transposed and direction reversed
    /// (`B_j^i* ` becomes the block `i -> j`). Only a QTM when `self` is unital.
    pub fn adjoint(&self) -> Result<Qtm> {
        let blocks: Vec<_> = self.blocks().map(|((i, j), b)| ((j, i), b.adjoint())).collect();
        Qtm::new(self.sites, self.dim, blocks)
    }
}

impl VectorChannel for Qtm {
    fn sites(&self) -> usize {
        self.sites
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_blocks(&self, blocks: &[CMat]) -> Vec<CMat> {
        self.step_blocks(blocks)
    }
}

/// Product of the matrix representations; the first QTM in the list acts first.
pub fn compose(qtms: &[Qtm]) -> Result<ChannelMatrix> {
    let first = qtms
        .first()
        .ok_or_else(|| Error::InvalidArgument("compose needs at least one QTM".into()))?;
    let mut acc = first.channel_matrix();
    for q in &qtms[1..] {
        if q.sites != first.sites || q.dim != first.dim {
            return Err(Error::ShapeMismatch {
                expected_sites: first.sites,
                expected_dim: first.dim,
                found_sites: q.sites,
                found_dim: q.dim,
            });
        }
        acc = acc.then(&q.channel_matrix())?;
    }
    Ok(acc)
}

/// A density of the form `Σ_i ρ_i ⊗ |i⟩⟨i|`, stored as its diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorState {
    blocks: Vec<CMat>,
}

impl VectorState {
    pub fn new(blocks: Vec<CMat>) -> Result<Self> {
        Self::with_tolerance(blocks, DEFAULT_TOL)
    }

    /// Validate blocks; Hermitian drift below `tol` is symmetrized away.
    pub fn with_tolerance(blocks: Vec<CMat>, tol: f64) -> Result<Self> {
        let dim = blocks
            .first()
            .map(|b| b.nrows())
            .ok_or_else(|| Error::InvalidState { reason: "no blocks".into() })?;
        let mut out = Vec::with_capacity(blocks.len());
        let mut total = 0.0;
        for (i, b) in blocks.into_iter().enumerate() {
            if b.nrows() != dim || b.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: b.nrows().max(b.ncols()) });
            }
            if !linalg::is_finite(&b) {
                return Err(Error::InvalidState { reason: format!("block {} not finite", i + 1) });
            }
            let skew = linalg::skew_norm(&b);
            if skew > tol {
                return Err(Error::InvalidState {
                    reason: format!("block {} is not Hermitian (skew {skew:.3e})", i + 1),
                });
            }
            let h = linalg::hermitian_part(&b);
            let min = linalg::min_eigenvalue(&h);
            if min < -tol {
                return Err(Error::InvalidState {
                    reason: format!("block {} has negative eigenvalue {min:.3e}", i + 1),
                });
            }
            total += linalg::trace(&h).re;
            out.push(h);
        }
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidState { reason: format!("total trace is {total}") });
        }
        Ok(VectorState { blocks: out })
    }

    pub(crate) fn from_blocks_unchecked(blocks: Vec<CMat>) -> Self {
        VectorState { blocks }
    }

    /// `I / (kn)` on every site.
    pub fn maximally_mixed(sites: usize, dim: usize) -> Self {
        let b = linalg::identity(dim) * re(1.0 / (sites * dim) as f64);
        VectorState { blocks: vec![b; sites] }
    }

    /// `ρ ⊗ |site⟩⟨site|`.
    pub fn localized(sites: usize, site: usize, rho: CMat) -> Result<Self> {
        if site >= sites {
            return Err(Error::SiteOutOfRange { site: site as i64 + 1 });
        }
        let dim = rho.nrows();
        let mut blocks = vec![linalg::zeros(dim); sites];
        blocks[site] = rho;
        VectorState::new(blocks)
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    pub fn sites(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    /// `tr(ρ_i)` per site.
    pub fn traces(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| linalg::trace(b).re).collect()
    }

    pub fn total_trace(&self) -> f64 {
        self.traces().iter().sum()
    }

    /// Smallest eigenvalue over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks.iter().map(linalg::min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// Hilbert-Schmidt distance between two vector states.
    pub fn distance(&self, other: &VectorState) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| linalg::hs_norm(&(a - b)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Convex combination `α self + (1-α) other`.
    pub fn mix(&self, other: &VectorState, alpha: f64) -> Result<VectorState> {
        other.check_shape(self.sites(), self.dim())?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a * re(alpha) + b * re(1.0 - alpha))
            .collect();
        Ok(VectorState { blocks })
    }

    pub(crate) fn check_shape(&self, sites: usize, dim: usize) -> Result<()> {
        if self.sites() != sites || self.dim() != dim {
            return Err(Error::ShapeMismatch {
                expected_sites: sites,
                expected_dim: dim,
                found_sites: self.sites(),
                found_dim: self.dim(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{real_diag, real_matrix};

    #[test]
    fn rejects_unnormalized_column() {
        let id = linalg::identity(2);
        let err = Qtm::new(2, 2, vec![((0, 0), id.clone()), ((0, 1), id)]).unwrap_err();
        match err {
            Error::ColumnNotNormalized { site, residual } => {
                assert_eq!(site, 1);
                assert!((residual - 2f64.sqrt()).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_wrong_block_dimension() {
        let err = Qtm::new(1, 2, vec![((0, 0), linalg::identity(3))]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 3 }));
    }

    #[test]
    fn identity_qtm_applies_as_identity() {
        let q = Qtm::identity(3, 2);
        let s = VectorState::new(vec![
            real_diag(&[0.1, 0.2]),
            real_matrix(&[&[0.2, 0.05], &[0.05, 0.1]]),
            real_diag(&[0.3, 0.1]),
        ])
        .unwrap();
        let out = q.apply(&s).unwrap();
        assert!(out.distance(&s) < 1e-15);
        assert!(q.is_unital());
    }

    #[test]
    fn maximally_mixed_averages_blocks() {
        let q = Qtm::maximally_mixed(2, 2);
        let s = VectorState::new(vec![real_diag(&[0.5, 0.1]), real_diag(&[0.0, 0.4])]).unwrap();
        let out = q.apply(&s).unwrap();
        let avg = (&s.blocks()[0] + &s.blocks()[1]) * re(0.5);
        for b in out.blocks() {
            assert!(linalg::hs_norm(&(b - &avg)) < 1e-15);
        }
    }

    #[test]
    fn embed_classical_reproduces_trace_evolution() {
        let p = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.1, 0.8]);
        let q = Qtm::embed_classical(&p, 2).unwrap();
        assert!(!q.is_unital());
        let s = VectorState::new(vec![real_diag(&[0.3, 0.1]), real_diag(&[0.2, 0.4])]).unwrap();
        let v = s.traces();
        let out = q.apply(&s).unwrap().traces();
        let pv = [0.9 * v[0] + 0.2 * v[1], 0.1 * v[0] + 0.8 * v[1]];
        assert!((out[0] - pv[0]).abs() < 1e-12);
        assert!((out[1] - pv[1]).abs() < 1e-12);
    }

    #[test]
    fn embed_identity_and_bistochastic_is_unital() {
        let q = Qtm::embed_classical(&DMatrix::identity(3, 3), 2).unwrap();
        assert_eq!(q.block_count(), 3);
        assert!(q.block(1, 1).is_some());
        let p = DMatrix::from_row_slice(2, 2, &[0.3, 0.7, 0.7, 0.3]);
        assert!(Qtm::embed_classical(&p, 2).unwrap().is_unital());
    }

    #[test]
    fn embed_rejects_non_stochastic() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.4, 0.5]);
        assert!(matches!(Qtm::embed_classical(&p, 1), Err(Error::NotStochastic { .. })));
        let p = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, -0.5, 1.0]);
        assert!(matches!(Qtm::embed_classical(&p, 1), Err(Error::NotStochastic { .. })));
    }

    #[test]
    fn vector_state_validation() {
        assert!(VectorState::new(vec![real_diag(&[0.5, 0.6])]).is_err());
        assert!(VectorState::new(vec![real_diag(&[1.2, -0.2])]).is_err());
        let skew = crate::linalg::complex_matrix(&[
            &[re(0.5), crate::linalg::c(0.0, 0.3)],
            &[crate::linalg::c(0.0, 0.3), re(0.5)],
        ]);
        assert!(VectorState::new(vec![skew]).is_err());
        // tiny skew drift is symmetrized
        let mut drift = real_diag(&[0.5, 0.5]);
        drift[(0, 1)] = crate::linalg::c(1e-13, 0.0);
        let s = VectorState::new(vec![drift]).unwrap();
        assert_eq!(s.blocks()[0][(0, 1)], s.blocks()[0][(1, 0)].conj());
    }

    #[test]
    fn compose_rejects_mismatched_shapes() {
        let err = compose(&[Qtm::identity(2, 1), Qtm::identity(3, 1)]).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }
}
