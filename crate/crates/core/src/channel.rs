//! Kraus and superoperator representations.
//!
//! # Conventions
//!
//! `vec` stacks matrix **rows** (row-major). With that convention
//! `vec(A X Bᵀ) = (A ⊗ B) vec(X)`, so the channel `X ↦ Σ A_i X A_i*` is
//! represented by `Σ A_i ⊗ conj(A_i)`. Texts that stack columns use
//! `conj(A_i) ⊗ A_i` instead; do not mix the two.
//!
//! Vector states on `n` sites with internal dimension `k` are embedded as
//! block-diagonal `(kn) × (kn)` matrices in site-major order: global index
//! `site * k + internal`. The transition block `L` from site `i` to site `j`
//! becomes the Kraus operator with `L` in block-row `j`, block-column `i`.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::qtm::{Qtm, VectorState, DEFAULT_TOL};

/// Anything that maps vector-state blocks to vector-state blocks linearly.
pub trait VectorChannel {
    fn sites(&self) -> usize;
    fn dim(&self) -> usize;
    fn apply_blocks(&self, blocks: &[CMat]) -> Vec<CMat>;
}

/// Row-major vectorization.
pub fn vec(a: &CMat) -> CVec {
    CVec::from_iterator(a.nrows() * a.ncols(), a.transpose().iter().copied())
}

/// Inverse of [`vec`] for a square `d × d` matrix.
pub fn unvec(v: &CVec, d: usize) -> Result<CMat> {
    if v.len() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, found: v.len() });
    }
    Ok(CMat::from_row_slice(d, d, v.as_slice()))
}

/// Block-diagonal embedding of vector-state blocks (site-major).
pub fn block_diagonal(blocks: &[CMat]) -> CMat {
    let k = blocks.first().map_or(0, |b| b.nrows());
    let d = k * blocks.len();
    let mut m = CMat::zeros(d, d);
    for (i, b) in blocks.iter().enumerate() {
        m.view_mut((i * k, i * k), (k, k)).copy_from(b);
    }
    m
}

/// Diagonal `k × k` blocks of a `(kn) × (kn)` matrix.
pub fn diagonal_blocks(m: &CMat, sites: usize, dim: usize) -> Vec<CMat> {
    (0..sites).map(|i| m.view((i * dim, i * dim), (dim, dim)).into_owned()).collect()
}

/// A trace-preserving set of Kraus operators on a `d`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    dim: usize,
    operators: Vec<CMat>,
}

impl KrausSet {
    pub fn new(operators: Vec<CMat>) -> Result<Self> {
        Self::with_tolerance(operators, DEFAULT_TOL)
    }

    pub fn with_tolerance(operators: Vec<CMat>, tol: f64) -> Result<Self> {
        let dim = operators
            .first()
            .map(|a| a.nrows())
            .ok_or_else(|| Error::InvalidArgument("empty Kraus set".into()))?;
        let mut gram = linalg::zeros(dim);
        for a in &operators {
            if a.nrows() != dim || a.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: a.nrows().max(a.ncols()) });
            }
            gram += a.adjoint() * a;
        }
        let residual = linalg::hs_norm(&(gram - linalg::identity(dim)));
        if residual > tol {
            return Err(Error::NotTracePreserving { residual });
        }
        Ok(KrausSet { dim, operators })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[CMat] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// `Σ A_i X A_i*`.
    pub fn apply(&self, x: &CMat) -> CMat {
        self.operators.iter().fold(linalg::zeros(self.dim), |acc, a| acc + linalg::sandwich(a, x))
    }

    /// `Σ A_i* X A_i`.
    pub fn apply_adjoint(&self, x: &CMat) -> CMat {
        self.operators
            .iter()
            .fold(linalg::zeros(self.dim), |acc, a| acc + linalg::adjoint_sandwich(a, x))
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        let s = self.operators.iter().fold(linalg::zeros(self.dim), |acc, a| acc + a * a.adjoint());
        linalg::hs_norm(&(s - linalg::identity(self.dim))) <= tol
    }
}

impl VectorChannel for KrausSet {
    fn sites(&self) -> usize {
        1
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_blocks(&self, blocks: &[CMat]) -> Vec<CMat> {
        vec![self.apply(&blocks[0])]
    }
}

/// One `(kn) × (kn)` Kraus operator per nonzero block of the QTM.
pub fn site_kraus(qtm: &Qtm) -> KrausSet {
    let k = qtm.dim();
    let d = qtm.sites() * k;
    let operators = qtm
        .blocks()
        .map(|((i, j), b)| {
            let mut a = CMat::zeros(d, d);
            a.view_mut((j * k, i * k), (k, k)).copy_from(b);
            a
        })
        .collect();
    KrausSet { dim: d, operators }
}

/// `[Φ] = Σ A_i ⊗ conj(A_i)`.
pub fn matrix_representation(kraus: &KrausSet) -> ChannelMatrix {
    let d = kraus.dim;
    let mut m = CMat::zeros(d * d, d * d);
    for a in &kraus.operators {
        m += linalg::kron(a, &linalg::conj(a));
    }
    ChannelMatrix { sites: 1, dim: d, mat: m }
}

/// Representation of the Hilbert-Schmidt adjoint `X ↦ Σ A_i* X A_i`.
pub fn adjoint_representation(kraus: &KrausSet) -> ChannelMatrix {
    let d = kraus.dim;
    let mut m = CMat::zeros(d * d, d * d);
    for a in &kraus.operators {
        let ad = a.adjoint();
        m += linalg::kron(&ad, &linalg::conj(&ad));
    }
    ChannelMatrix { sites: 1, dim: d, mat: m }
}

/// Dense superoperator acting on row-major vectorized `(kn) × (kn)` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    sites: usize,
    dim: usize,
    mat: CMat,
}

impl ChannelMatrix {
    pub(crate) fn from_parts(sites: usize, dim: usize, mat: CMat) -> Self {
        ChannelMatrix { sites, dim, mat }
    }

    /// Wrap a raw square matrix of order `(sites * dim)²`.
    pub fn from_matrix(sites: usize, dim: usize, mat: CMat) -> Result<Self> {
        let n = (sites * dim).pow(2);
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: mat.nrows().max(mat.ncols()) });
        }
        Ok(ChannelMatrix { sites, dim, mat })
    }

    /// Reinterpret the site layout; the underlying space must have the same size.
    pub fn with_layout(self, sites: usize, dim: usize) -> Result<Self> {
        if sites * dim != self.state_dim() {
            return Err(Error::DimensionMismatch { expected: self.state_dim(), found: sites * dim });
        }
        Ok(ChannelMatrix { sites, dim, mat: self.mat })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `kn`, the side of the density matrices acted upon.
    pub fn state_dim(&self) -> usize {
        self.sites * self.dim
    }

    /// `N = (kn)²`.
    pub fn order(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    /// Apply to a full `(kn) × (kn)` matrix.
    pub fn apply_matrix(&self, x: &CMat) -> Result<CMat> {
        let d = self.state_dim();
        if x.nrows() != d || x.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: x.nrows() });
        }
        unvec(&(&self.mat * vec(x)), d)
    }

    pub fn apply_state(&self, state: &VectorState) -> Result<Vec<CMat>> {
        state.check_shape(self.sites, self.dim)?;
        Ok(self.apply_blocks(state.blocks()))
    }

    /// `other ∘ self`: `self` acts first.
    pub fn then(&self, other: &ChannelMatrix) -> Result<ChannelMatrix> {
        if self.order() != other.order() {
            return Err(Error::ShapeMismatch {
                expected_sites: self.sites,
                expected_dim: self.dim,
                found_sites: other.sites,
                found_dim: other.dim,
            });
        }
        Ok(ChannelMatrix { sites: self.sites, dim: self.dim, mat: &other.mat * &self.mat })
    }

    /// `[Φ]^r` by repeated squaring.
    pub fn power(&self, r: u32) -> ChannelMatrix {
        let n = self.order();
        let mut result = CMat::identity(n, n);
        let mut base = self.mat.clone();
        let mut e = r;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        ChannelMatrix { sites: self.sites, dim: self.dim, mat: result }
    }

    /// Hilbert-Schmidt adjoint: the conjugate transpose of the representation.
    pub fn adjoint(&self) -> ChannelMatrix {
        ChannelMatrix { sites: self.sites, dim: self.dim, mat: self.mat.adjoint() }
    }

    /// Gram image of column `j`: the blocks of `Φ(I ⊗ |j⟩⟨j|)`.
    ///
    /// For a single QTM block `i` equals `B_j^i B_j^i*`; for products it is the
    /// aggregated transfer from site `j` to site `i`.
    pub fn column_gram(&self, j: usize) -> Result<Vec<CMat>> {
        if j >= self.sites {
            return Err(Error::SiteOutOfRange { site: j as i64 + 1 });
        }
        let mut blocks = vec![linalg::zeros(self.dim); self.sites];
        blocks[j] = linalg::identity(self.dim);
        Ok(self.apply_blocks(&blocks))
    }

    /// `Φ(I)` with `I` the identity on all sites.
    pub fn unit_image(&self) -> Vec<CMat> {
        self.apply_blocks(&vec![linalg::identity(self.dim); self.sites])
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        let id = linalg::identity(self.dim);
        self.unit_image().iter().all(|b| linalg::hs_norm(&(b - &id)) <= tol)
    }
}

impl VectorChannel for ChannelMatrix {
    fn sites(&self) -> usize {
        self.sites
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_blocks(&self, blocks: &[CMat]) -> Vec<CMat> {
        let x = block_diagonal(blocks);
        let y = CMat::from_row_slice(
            self.state_dim(),
            self.state_dim(),
            (&self.mat * vec(&x)).as_slice(),
        );
        diagonal_blocks(&y, self.sites, self.dim)
    }
}

/// Mix a Kraus set with a unitary `w`: `A'_i = Σ_j w_ij A_j`.
pub fn remix(kraus: &KrausSet, w: &CMat) -> Result<KrausSet> {
    let m = kraus.len();
    if w.nrows() != m || w.ncols() != m {
        return Err(Error::DimensionMismatch { expected: m, found: w.nrows() });
    }
    let ops = (0..m)
        .map(|i| {
            (0..m).fold(linalg::zeros(kraus.dim), |acc, j| acc + &kraus.operators[j] * w[(i, j)])
        })
        .collect();
    KrausSet::new(ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, complex_matrix, real_matrix};

    #[test]
    fn vec_stacks_rows() {
        let a = complex_matrix(&[&[c(1.0, 0.0), c(2.0, 0.0)], &[c(3.0, 0.0), c(4.0, 0.0)]]);
        let v = vec(&a);
        let got: Vec<f64> = v.iter().map(|z| z.re).collect();
        assert_eq!(got, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(unvec(&v, 2).unwrap(), a);
    }

    #[test]
    fn vec_of_identity() {
        let v = vec(&linalg::identity(2));
        let got: Vec<f64> = v.iter().map(|z| z.re).collect();
        assert_eq!(got, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn single_identity_kraus_gives_identity_matrix() {
        let k = KrausSet::new(vec![linalg::identity(3)]).unwrap();
        let m = matrix_representation(&k);
        assert_eq!(m.order(), 9);
        assert!(linalg::hs_norm(&(m.matrix() - CMat::identity(9, 9))) < 1e-15);
    }

    #[test]
    fn kraus_set_rejects_non_trace_preserving() {
        let a = real_matrix(&[&[1.0, 0.0], &[0.0, 0.5]]);
        assert!(matches!(KrausSet::new(vec![a]), Err(Error::NotTracePreserving { .. })));
    }

    #[test]
    fn classical_two_site_kraus_are_scaled_matrix_units() {
        let p = nalgebra::DMatrix::from_row_slice(2, 2, &[0.25, 0.5, 0.75, 0.5]);
        let q = Qtm::embed_classical(&p, 1).unwrap();
        let k = site_kraus(&q);
        assert_eq!(k.len(), 4);
        for a in k.operators() {
            let nz: Vec<_> = a.iter().filter(|z| z.norm() > 0.0).collect();
            assert_eq!(nz.len(), 1);
        }
        // operator for 1 -> 2 has sqrt(0.75) in entry (2,1)
        let a = k.operators().iter().find(|a| a[(1, 0)].norm() > 0.0).unwrap();
        assert!((a[(1, 0)].re - 0.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identity_qtm_kraus_acts_as_identity() {
        let q = Qtm::identity(2, 2);
        let k = site_kraus(&q);
        let s = block_diagonal(&[
            real_matrix(&[&[0.2, 0.1], &[0.1, 0.3]]),
            real_matrix(&[&[0.4, 0.0], &[0.0, 0.1]]),
        ]);
        assert!(linalg::hs_norm(&(k.apply(&s) - &s)) < 1e-15);
    }

    #[test]
    fn power_matches_repeated_product() {
        let p = nalgebra::DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.1, 0.8]);
        let m = Qtm::embed_classical(&p, 1).unwrap().channel_matrix();
        let slow = m.then(&m).unwrap().then(&m).unwrap();
        assert!(linalg::hs_norm(&(m.power(3).into_matrix() - slow.into_matrix())) < 1e-14);
    }
}
