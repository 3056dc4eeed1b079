//! Expected accumulated cost until a boundary is reached.
//!
//! With interior `D`, boundary `∂D`, running cost `c ≥ 0` on `D` and terminal
//! value `f ≥ 0` on `∂D`, the potential `φ_i(ρ) = tr(G_i ρ)` is the minimal
//! nonnegative solution of `G_i = c(i) I + Σ_j B_i^j* G_j B_i^j` on `D` with
//! `G_i = f(i) I` on `∂D`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_point::{Problem, SolveOptions};
use crate::hitting::hitting_probabilities;
use crate::linalg::{self, re, CMat};
use crate::qtm::VectorState;
use crate::walk::Walk;

/// Slack allowed in the supersolution inequalities.
pub const SUPERSOLUTION_TOL: f64 = 1e-9;
/// Slack allowed when checking `ψ ⪰ G`.
pub const DOMINANCE_TOL: f64 = 1e-8;
/// Exit probability counted as certain in [`uniqueness_report`].
pub const CERTAIN_EXIT: f64 = 1.0 - 1e-9;

/// Interior, boundary, running cost and boundary values, keyed by site label.
/// Sites missing from `cost` or `boundary_values` get `0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSpec {
    pub interior: Vec<i64>,
    pub boundary: Vec<i64>,
    pub cost: BTreeMap<i64, f64>,
    pub boundary_values: BTreeMap<i64, f64>,
}

impl CostSpec {
    pub fn new(
        interior: Vec<i64>,
        boundary: Vec<i64>,
        cost: BTreeMap<i64, f64>,
        boundary_values: BTreeMap<i64, f64>,
    ) -> Result<Self> {
        let d: BTreeSet<i64> = interior.iter().copied().collect();
        let b: BTreeSet<i64> = boundary.iter().copied().collect();
        if d.len() != interior.len() || b.len() != boundary.len() {
            return Err(Error::InvalidArgument("site sets contain duplicates".into()));
        }
        if let Some(x) = d.intersection(&b).next() {
            return Err(Error::InvalidArgument(format!("site {x} is both interior and boundary")));
        }
        for (&x, &v) in &cost {
            if !d.contains(&x) {
                return Err(Error::InvalidArgument(format!("cost given for non-interior site {x}")));
            }
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("cost at site {x} must be finite and nonnegative")));
            }
        }
        for (&x, &v) in &boundary_values {
            if !b.contains(&x) {
                return Err(Error::InvalidArgument(format!("boundary value given for non-boundary site {x}")));
            }
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "boundary value at site {x} must be finite and nonnegative"
                )));
            }
        }
        Ok(CostSpec { interior, boundary, cost, boundary_values })
    }

    /// Same cost `c` on every interior site and value `f` on every boundary site.
    pub fn uniform(interior: Vec<i64>, boundary: Vec<i64>, c: f64, f: f64) -> Result<Self> {
        let cost = interior.iter().map(|&x| (x, c)).collect();
        let values = boundary.iter().map(|&x| (x, f)).collect();
        Self::new(interior, boundary, cost, values)
    }

    pub fn cost_at(&self, label: i64) -> f64 {
        self.cost.get(&label).copied().unwrap_or(0.0)
    }

    pub fn value_at(&self, label: i64) -> f64 {
        self.boundary_values.get(&label).copied().unwrap_or(0.0)
    }

    /// Every transition out of an interior site must land in `D ∪ ∂D`.
    pub fn check_closure<W: Walk + ?Sized>(&self, walk: &W) -> Result<()> {
        let allowed: BTreeSet<usize> =
            walk.indices_of(&self.interior)?.into_iter().chain(walk.indices_of(&self.boundary)?).collect();
        for i in walk.indices_of(&self.interior)? {
            for (j, b) in walk.qtm().outgoing(i) {
                if !allowed.contains(j) && linalg::hs_norm(b) > 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "interior site {} can move to site {} outside the domain",
                        walk.label(i),
                        walk.label(*j)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `{G_i}` with `φ_i(ρ) = tr(G_i ρ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialOperators {
    pub labels: Vec<i64>,
    #[serde(skip)]
    pub operators: Vec<CMat>,
    pub divergent: Vec<bool>,
    pub cap: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl PotentialOperators {
    fn position(&self, label: i64) -> Result<usize> {
        self.labels.iter().position(|&l| l == label).ok_or(Error::SiteOutOfRange { site: label })
    }

    pub fn operator(&self, label: i64) -> Result<&CMat> {
        Ok(&self.operators[self.position(label)?])
    }

    /// `tr(G_i ρ)`; `Divergent` when the potential is infinite at that site.
    pub fn evaluate(&self, label: i64, rho: &CMat) -> Result<f64> {
        let idx = self.position(label)?;
        if self.divergent[idx] {
            return Err(Error::Divergent { site: label, cap: self.cap });
        }
        let g = &self.operators[idx];
        if rho.nrows() != g.nrows() || rho.ncols() != g.ncols() {
            return Err(Error::DimensionMismatch { expected: g.nrows(), found: rho.nrows() });
        }
        VectorState::new(vec![rho.clone()])?;
        Ok(linalg::hs_inner(g, rho).re.max(0.0))
    }

    /// Largest eigenvalue of each `G_i` (infinite where divergent).
    pub fn norms(&self) -> Vec<f64> {
        self.operators
            .iter()
            .zip(&self.divergent)
            .map(|(g, &d)| if d { f64::INFINITY } else { linalg::max_eigenvalue(g) })
            .collect()
    }
}

fn potential_problem<'a, W: Walk + ?Sized>(walk: &'a W, spec: &CostSpec) -> Result<Problem<'a>> {
    spec.check_closure(walk)?;
    let k = walk.dim();
    let n = walk.sites();
    let id = linalg::identity(k);
    let mut fixed: Vec<Option<CMat>> = vec![Some(linalg::zeros(k)); n];
    let mut source = vec![linalg::zeros(k); n];
    for (i, &x) in walk.indices_of(&spec.interior)?.iter().zip(&spec.interior) {
        fixed[*i] = None;
        source[*i] = &id * re(spec.cost_at(x));
    }
    for (i, &x) in walk.indices_of(&spec.boundary)?.iter().zip(&spec.boundary) {
        fixed[*i] = Some(&id * re(spec.value_at(x)));
    }
    Ok(Problem { qtm: walk.qtm(), fixed, source })
}

/// Minimal nonnegative solution `{G_i}`. Sites outside `D ∪ ∂D` carry `0`.
pub fn solve_potential<W: Walk + ?Sized>(walk: &W, spec: &CostSpec, opts: &SolveOptions) -> Result<PotentialOperators> {
    let sol = potential_problem(walk, spec)?.solve(opts)?;
    Ok(PotentialOperators {
        labels: walk.labels(),
        operators: sol.values,
        divergent: sol.divergent,
        cap: opts.cap,
        iterations: sol.iterations,
        residual: sol.residual,
    })
}

/// `G^(0), …, G^(n)`.
pub fn potential_iterates<W: Walk + ?Sized>(walk: &W, spec: &CostSpec, n: usize) -> Result<Vec<Vec<CMat>>> {
    Ok(potential_problem(walk, spec)?.iterates(n))
}

/// `max_{i∈D} ‖c(i) I + Σ_j B_i^j* G_j B_i^j − G_i‖`. With `c ≡ 0` this is the
/// residual of the Laplace equation `Δ_Φ G = 0` on `D`.
pub fn laplacian_residual<W: Walk + ?Sized>(walk: &W, spec: &CostSpec, g: &PotentialOperators) -> Result<f64> {
    Ok(potential_problem(walk, spec)?.residual(&g.operators))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupersolutionVerdict {
    /// Smallest eigenvalue of `ψ_i − c(i) I − Σ_j B_i^j* ψ_j B_i^j` over `D`
    /// and of `ψ_i − f(i) I` over `∂D`.
    pub min_slack: f64,
    /// `ψ_i ⪰ G_i − 1e-8` on every site where `G_i` is finite.
    pub dominates: bool,
    pub min_dominance_gap: f64,
}

/// Check `ψ ≥ c + Pψ` on `D` and `ψ ≥ f` on `∂D`, then compare with the solution.
/// `psi` holds one Hermitian matrix per site of `walk`, in index order.
pub fn check_supersolution<W: Walk + ?Sized>(
    walk: &W,
    spec: &CostSpec,
    psi: &[CMat],
    opts: &SolveOptions,
) -> Result<SupersolutionVerdict> {
    let k = walk.dim();
    if psi.len() != walk.sites() {
        return Err(Error::ShapeMismatch {
            expected_sites: walk.sites(),
            expected_dim: k,
            found_sites: psi.len(),
            found_dim: psi.first().map_or(k, |m| m.nrows()),
        });
    }
    for (i, m) in psi.iter().enumerate() {
        if m.nrows() != k || m.ncols() != k {
            return Err(Error::DimensionMismatch { expected: k, found: m.nrows().max(m.ncols()) });
        }
        if linalg::skew_norm(m) > 1e-10 {
            return Err(Error::InvalidArgument(format!("ψ at site {} is not Hermitian", walk.label(i))));
        }
    }
    spec.check_closure(walk)?;
    let id = linalg::identity(k);
    let mut min_slack = f64::INFINITY;
    for (i, &x) in walk.indices_of(&spec.interior)?.iter().zip(&spec.interior) {
        let mut slack = &psi[*i] - &id * re(spec.cost_at(x));
        for (j, b) in walk.qtm().outgoing(*i) {
            slack -= linalg::adjoint_sandwich(b, &psi[*j]);
        }
        let e = linalg::min_eigenvalue(&linalg::hermitian_part(&slack));
        if e < -SUPERSOLUTION_TOL {
            return Err(Error::NotASupersolution { site: x, deficit: -e });
        }
        min_slack = min_slack.min(e);
    }
    for (i, &x) in walk.indices_of(&spec.boundary)?.iter().zip(&spec.boundary) {
        let e = linalg::min_eigenvalue(&(&psi[*i] - &id * re(spec.value_at(x))));
        if e < -SUPERSOLUTION_TOL {
            return Err(Error::NotASupersolution { site: x, deficit: -e });
        }
        min_slack = min_slack.min(e);
    }
    let g = solve_potential(walk, spec, opts)?;
    let mut gap = f64::INFINITY;
    for i in walk.indices_of(&spec.interior)?.into_iter().chain(walk.indices_of(&spec.boundary)?) {
        if !g.divergent[i] {
            gap = gap.min(linalg::min_eigenvalue(&(&psi[i] - &g.operators[i])));
        }
    }
    Ok(SupersolutionVerdict { min_slack, dominates: gap >= -DOMINANCE_TOL, min_dominance_gap: gap })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    /// `(label, λ_min(M_i))` for each interior site, with `M` the hitting operators of `∂D`.
    pub exit_probability: Vec<(i64, f64)>,
    pub verified: bool,
    /// First interior site whose exit is not certain.
    pub witness: Option<i64>,
}

/// Whether `∂D` is reached with probability one from every interior site and state.
pub fn uniqueness_report<W: Walk + ?Sized>(walk: &W, spec: &CostSpec, opts: &SolveOptions) -> Result<UniquenessReport> {
    let h = hitting_probabilities(walk, &spec.boundary, opts)?;
    let exit_probability: Vec<(i64, f64)> =
        spec.interior.iter().map(|&x| Ok((x, h.min_probability(x)?))).collect::<Result<_>>()?;
    let witness = exit_probability.iter().find(|(_, p)| *p < CERTAIN_EXIT).map(|(x, _)| *x);
    Ok(UniquenessReport { exit_probability, verified: witness.is_none(), witness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{Boundary, LatticeWindow};

    fn symmetric(a: i64) -> (LatticeWindow, Vec<i64>, Vec<i64>) {
        let h = linalg::identity(1) * re(0.5f64.sqrt());
        let w = LatticeWindow::nearest_neighbor(-a, a, &h, &h, Boundary::Absorbing).unwrap();
        ((w), (-a + 1..a).collect(), vec![-a, a])
    }

    #[test]
    fn mean_exit_time_is_quadratic() {
        let a = 5;
        let (w, d, b) = symmetric(a);
        let spec = CostSpec::uniform(d.clone(), b, 1.0, 0.0).unwrap();
        let g = solve_potential(&w, &spec, &SolveOptions::default()).unwrap();
        let one = linalg::identity(1);
        for i in d {
            let expected = ((a + i) * (a - i)) as f64;
            assert!((g.evaluate(i, &one).unwrap() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn unit_boundary_gives_unit_potential() {
        let (w, d, b) = symmetric(3);
        let spec = CostSpec::uniform(d.clone(), b, 0.0, 1.0).unwrap();
        let g = solve_potential(&w, &spec, &SolveOptions::default()).unwrap();
        for i in d {
            assert!((g.evaluate(i, &linalg::identity(1)).unwrap() - 1.0).abs() < 1e-10);
        }
        assert!(laplacian_residual(&w, &spec, &g).unwrap() < 1e-12);
    }

    #[test]
    fn overlapping_sets_rejected() {
        assert!(CostSpec::uniform(vec![1, 2], vec![2, 3], 1.0, 0.0).is_err());
        assert!(CostSpec::uniform(vec![1], vec![2], -1.0, 0.0).is_err());
    }

    #[test]
    fn open_domain_rejected() {
        let (w, _, _) = symmetric(3);
        let spec = CostSpec::uniform(vec![0, 1], vec![-1], 1.0, 0.0).unwrap();
        assert!(matches!(solve_potential(&w, &spec, &SolveOptions::default()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn supersolution_checks() {
        let (w, d, b) = symmetric(4);
        let spec = CostSpec::uniform(d, b, 1.0, 0.0).unwrap();
        let opts = SolveOptions::default();
        let g = solve_potential(&w, &spec, &opts).unwrap();
        let v = check_supersolution(&w, &spec, &g.operators, &opts).unwrap();
        assert!(v.dominates && v.min_slack.abs() < 1e-9);
        let shifted: Vec<CMat> = g.operators.iter().map(|m| m + linalg::identity(1) * re(0.1)).collect();
        assert!(check_supersolution(&w, &spec, &shifted, &opts).unwrap().dominates);
        let mut bad = g.operators.clone();
        let idx = w.index_of(1).unwrap();
        bad[idx] -= linalg::identity(1) * re(0.5);
        let err = check_supersolution(&w, &spec, &bad, &opts).unwrap_err();
        assert!(matches!(err, Error::NotASupersolution { site: 1, .. }));
    }

    #[test]
    fn trapped_interior_breaks_uniqueness() {
        let (w, d, b) = symmetric(3);
        let spec = CostSpec::uniform(d, b, 0.0, 0.0).unwrap();
        assert!(uniqueness_report(&w, &spec, &SolveOptions::default()).unwrap().verified);
        // column-stochastic chain on -2..=2 where site 0 never leaves
        #[rustfmt::skip]
        let p = nalgebra::DMatrix::from_row_slice(5, 5, &[
            1.0, 0.5, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.5, 0.0,
            0.0, 0.5, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.5, 1.0,
        ]);
        let q = crate::qtm::Qtm::embed_classical(&p, 1).unwrap();
        let w = LatticeWindow::from_qtm(-2, q, Boundary::Absorbing).unwrap();
        let spec = CostSpec::uniform(vec![-1, 0, 1], vec![-2, 2], 0.0, 0.0).unwrap();
        let r = uniqueness_report(&w, &spec, &SolveOptions::default()).unwrap();
        assert!(!r.verified);
        assert_eq!(r.witness, Some(-1));
    }
}
