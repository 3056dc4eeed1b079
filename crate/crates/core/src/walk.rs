//! Site labelling for finite QTMs and truncated nearest-neighbour walks on ℤ.
//!
//! A [`LatticeWindow`] covers the sites `lo..=hi`. Interior sites move left
//! with `L` and right with `R`; the two edge sites carry an identity
//! self-loop, so mass that reaches them stays there and can be accounted for.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::qtm::{Qtm, VectorState};

/// What to do when probability mass reaches the edge of a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Edge sites trap mass; results are lower bounds with an explicit tail.
    #[default]
    Absorbing,
    /// Mass above `1e-12` at an edge is an error.
    HardError,
}

/// A QTM together with user-facing site labels.
pub trait Walk: Sync {
    fn qtm(&self) -> &Qtm;

    /// Label of the site stored at `index`.
    fn label(&self, index: usize) -> i64;

    /// Inverse of [`Walk::label`].
    fn index_of(&self, label: i64) -> Result<usize>;

    /// Indices of truncation sites (empty for genuinely finite walks).
    fn edge_sites(&self) -> Vec<usize> {
        Vec::new()
    }

    fn boundary(&self) -> Boundary {
        Boundary::Absorbing
    }

    fn sites(&self) -> usize {
        self.qtm().sites()
    }

    fn dim(&self) -> usize {
        self.qtm().dim()
    }

    fn labels(&self) -> Vec<i64> {
        (0..self.sites()).map(|i| self.label(i)).collect()
    }

    fn indices_of(&self, labels: &[i64]) -> Result<Vec<usize>> {
        labels.iter().map(|&l| self.index_of(l)).collect()
    }

    /// `ρ ⊗ |label⟩⟨label|` as a vector state on this walk.
    fn localized(&self, label: i64, rho: CMat) -> Result<VectorState> {
        VectorState::localized(self.sites(), self.index_of(label)?, rho)
    }
}

/// Plain QTMs use the 1-based labels of their block matrix.
impl Walk for Qtm {
    fn qtm(&self) -> &Qtm {
        self
    }

    fn label(&self, index: usize) -> i64 {
        index as i64 + 1
    }

    fn index_of(&self, label: i64) -> Result<usize> {
        if label >= 1 && (label as usize) <= self.sites() {
            Ok(label as usize - 1)
        } else {
            Err(Error::SiteOutOfRange { site: label })
        }
    }
}

/// Finite window `lo..=hi` of a walk on the integers.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeWindow {
    lo: i64,
    hi: i64,
    boundary: Boundary,
    qtm: Qtm,
}

impl LatticeWindow {
    /// Homogeneous nearest-neighbour walk: `left` moves to `x - 1`, `right` to `x + 1`.
    pub fn nearest_neighbor(lo: i64, hi: i64, left: &CMat, right: &CMat, boundary: Boundary) -> Result<Self> {
        Self::with_overrides(lo, hi, left, right, &BTreeMap::new(), boundary)
    }

    /// Nearest-neighbour walk with per-site `(L_x, R_x)` replacing the defaults.
    pub fn with_overrides(
        lo: i64,
        hi: i64,
        left: &CMat,
        right: &CMat,
        overrides: &BTreeMap<i64, (CMat, CMat)>,
        boundary: Boundary,
    ) -> Result<Self> {
        Self::from_site_fn(lo, hi, boundary, |x| {
            overrides.get(&x).cloned().unwrap_or_else(|| (left.clone(), right.clone()))
        })
    }

    /// Site-dependent walk: `pair(x)` returns `(L_x, R_x)` for interior `x`.
    pub fn from_site_fn<F>(lo: i64, hi: i64, boundary: Boundary, pair: F) -> Result<Self>
    where
        F: Fn(i64) -> (CMat, CMat),
    {
        if lo >= hi {
            return Err(Error::InvalidArgument(format!("window needs lo < hi, got [{lo}, {hi}]")));
        }
        let n = (hi - lo + 1) as usize;
        let (l0, _) = pair(lo + 1);
        let k = l0.nrows();
        let mut blocks = vec![((0, 0), linalg::identity(k)), ((n - 1, n - 1), linalg::identity(k))];
        for i in 1..n - 1 {
            let (l, r) = pair(lo + i as i64);
            blocks.push(((i, i - 1), l));
            blocks.push(((i, i + 1), r));
        }
        let qtm = Qtm::new(n, k, blocks).map_err(|e| relabel(e, lo))?;
        Ok(LatticeWindow { lo, hi, boundary, qtm })
    }

    /// Any QTM whose index `0` is placed at `lo`. The first and last sites are
    /// treated as the window edges.
    pub fn from_qtm(lo: i64, qtm: Qtm, boundary: Boundary) -> Result<Self> {
        if qtm.sites() < 2 {
            return Err(Error::InvalidArgument("a window needs at least two sites".into()));
        }
        let hi = lo + qtm.sites() as i64 - 1;
        Ok(LatticeWindow { lo, hi, boundary, qtm })
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn contains(&self, label: i64) -> bool {
        (self.lo..=self.hi).contains(&label)
    }
}

/// Translate 1-based QTM site numbers in validation errors to window labels.
fn relabel(e: Error, lo: i64) -> Error {
    match e {
        Error::ColumnNotNormalized { site, residual } => {
            Error::ColumnNotNormalized { site: lo + site - 1, residual }
        }
        Error::SiteOutOfRange { site } => Error::SiteOutOfRange { site: lo + site - 1 },
        other => other,
    }
}

impl Walk for LatticeWindow {
    fn qtm(&self) -> &Qtm {
        &self.qtm
    }

    fn label(&self, index: usize) -> i64 {
        self.lo + index as i64
    }

    fn index_of(&self, label: i64) -> Result<usize> {
        if self.contains(label) {
            Ok((label - self.lo) as usize)
        } else {
            Err(Error::SiteOutOfRange { site: label })
        }
    }

    fn edge_sites(&self) -> Vec<usize> {
        vec![0, (self.hi - self.lo) as usize]
    }

    fn boundary(&self) -> Boundary {
        self.boundary
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{re, real_diag};

    fn classical(p: f64) -> (CMat, CMat) {
        (linalg::identity(1) * re((1.0 - p).sqrt()), linalg::identity(1) * re(p.sqrt()))
    }

    #[test]
    fn window_labels_round_trip() {
        let (l, r) = classical(0.3);
        let w = LatticeWindow::nearest_neighbor(-3, 4, &l, &r, Boundary::Absorbing).unwrap();
        assert_eq!(w.sites(), 8);
        for x in -3..=4 {
            assert_eq!(w.label(w.index_of(x).unwrap()), x);
        }
        assert_eq!(w.index_of(5), Err(Error::SiteOutOfRange { site: 5 }));
        assert_eq!(w.edge_sites(), vec![0, 7]);
    }

    #[test]
    fn interior_blocks_point_to_neighbours() {
        let (l, r) = classical(0.3);
        let w = LatticeWindow::nearest_neighbor(-2, 2, &l, &r, Boundary::Absorbing).unwrap();
        let i = w.index_of(0).unwrap();
        assert_eq!(w.qtm().block(i, w.index_of(-1).unwrap()), Some(&l));
        assert_eq!(w.qtm().block(i, w.index_of(1).unwrap()), Some(&r));
        assert!(w.qtm().block(0, 0).is_some());
    }

    #[test]
    fn bad_override_reports_lattice_label() {
        let (l, r) = classical(0.5);
        let mut o = BTreeMap::new();
        o.insert(-1, (real_diag(&[1.0]), real_diag(&[1.0])));
        let err = LatticeWindow::with_overrides(-3, 3, &l, &r, &o, Boundary::Absorbing).unwrap_err();
        assert!(matches!(err, Error::ColumnNotNormalized { site: -1, .. }));
    }

    #[test]
    fn degenerate_window_rejected() {
        let (l, r) = classical(0.5);
        assert!(LatticeWindow::nearest_neighbor(2, 2, &l, &r, Boundary::Absorbing).is_err());
    }

    #[test]
    fn qtm_labels_are_one_based() {
        let q = Qtm::identity(3, 1);
        assert_eq!(q.index_of(1).unwrap(), 0);
        assert!(q.index_of(0).is_err());
        assert!(q.index_of(4).is_err());
    }
}
