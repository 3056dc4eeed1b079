//! Hitting probabilities and mean hitting times as positive operators.
//!
//! The hitting probability of `A` from site `i` and internal state `ρ` is
//! `h_i(ρ) = tr(M_i ρ)`, where `{M_i}` is the minimal solution of
//! `M_i = I` on `A` and `M_i = Σ_j B_i^j* M_j B_i^j` elsewhere. Mean hitting
//! times use `K_i = 0` on `A` and `K_i = I + Σ_{j∉A} B_i^j* K_j B_i^j`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_point::{Problem, SolveOptions};
use crate::linalg::{self, CMat};
use crate::qtm::VectorState;
use crate::walk::{LatticeWindow, Walk};

/// `{M_i}` with `h_i(ρ) = tr(M_i ρ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingOperators {
    pub labels: Vec<i64>,
    pub targets: Vec<i64>,
    #[serde(skip)]
    pub operators: Vec<CMat>,
    pub iterations: usize,
    pub residual: f64,
}

/// `{K_i}` with `k_i(ρ) = tr(K_i ρ)`; divergent sites have infinite expected time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanHittingOperators {
    pub labels: Vec<i64>,
    pub targets: Vec<i64>,
    #[serde(skip)]
    pub operators: Vec<CMat>,
    pub divergent: Vec<bool>,
    pub cap: f64,
    pub iterations: usize,
    pub residual: f64,
}

fn position(labels: &[i64], label: i64) -> Result<usize> {
    labels.iter().position(|&l| l == label).ok_or(Error::SiteOutOfRange { site: label })
}

fn check_density(rho: &CMat, k: usize) -> Result<()> {
    if rho.nrows() != k || rho.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, found: rho.nrows().max(rho.ncols()) });
    }
    VectorState::new(vec![rho.clone()]).map(|_| ())
}

impl HittingOperators {
    pub fn operator(&self, label: i64) -> Result<&CMat> {
        Ok(&self.operators[position(&self.labels, label)?])
    }

    /// `tr(M_i ρ)`, clamped to `[0, 1]`.
    pub fn evaluate(&self, label: i64, rho: &CMat) -> Result<f64> {
        let m = self.operator(label)?;
        check_density(rho, m.nrows())?;
        Ok(linalg::hs_inner(m, rho).re.clamp(0.0, 1.0))
    }

    /// Smallest eigenvalue of `M_i`: the hitting probability guaranteed for every state.
    pub fn min_probability(&self, label: i64) -> Result<f64> {
        Ok(linalg::min_eigenvalue(self.operator(label)?))
    }
}

/// Free-function form of [`HittingOperators::evaluate`].
pub fn evaluate(h: &HittingOperators, label: i64, rho: &CMat) -> Result<f64> {
    h.evaluate(label, rho)
}

impl MeanHittingOperators {
    pub fn operator(&self, label: i64) -> Result<&CMat> {
        Ok(&self.operators[position(&self.labels, label)?])
    }

    pub fn is_divergent(&self, label: i64) -> Result<bool> {
        Ok(self.divergent[position(&self.labels, label)?])
    }

    /// `tr(K_i ρ)`; `Divergent` when the site's expected time is infinite.
    pub fn evaluate(&self, label: i64, rho: &CMat) -> Result<f64> {
        let idx = position(&self.labels, label)?;
        if self.divergent[idx] {
            return Err(Error::Divergent { site: label, cap: self.cap });
        }
        check_density(rho, self.operators[idx].nrows())?;
        Ok(linalg::hs_inner(&self.operators[idx], rho).re.max(0.0))
    }
}

fn target_mask<W: Walk + ?Sized>(walk: &W, targets: &[i64]) -> Result<Vec<bool>> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("target set is empty".into()));
    }
    let mut mask = vec![false; walk.sites()];
    for i in walk.indices_of(targets)? {
        mask[i] = true;
    }
    Ok(mask)
}

fn hitting_problem<'a, W: Walk + ?Sized>(walk: &'a W, targets: &[i64]) -> Result<Problem<'a>> {
    let k = walk.dim();
    let mask = target_mask(walk, targets)?;
    Ok(Problem {
        qtm: walk.qtm(),
        fixed: mask.iter().map(|&a| a.then(|| linalg::identity(k))).collect(),
        source: vec![linalg::zeros(k); walk.sites()],
    })
}

/// Minimal solution `{M_i}` for hitting `targets`.
pub fn hitting_probabilities<W: Walk + ?Sized>(
    walk: &W,
    targets: &[i64],
    opts: &SolveOptions,
) -> Result<HittingOperators> {
    let problem = hitting_problem(walk, targets)?;
    let bounded = SolveOptions { cap: f64::INFINITY, ..*opts };
    let sol = problem.solve(&bounded)?;
    Ok(HittingOperators {
        labels: walk.labels(),
        targets: targets.to_vec(),
        operators: sol.values,
        iterations: sol.iterations,
        residual: sol.residual,
    })
}

/// The first `n + 1` iterates `M^(0), …, M^(n)`; `M^(r)_i` represents the
/// probability of reaching the targets within `r` steps.
pub fn hitting_iterates<W: Walk + ?Sized>(walk: &W, targets: &[i64], n: usize) -> Result<Vec<Vec<CMat>>> {
    Ok(hitting_problem(walk, targets)?.iterates(n))
}

/// `max_i ‖M_i − Σ_j B_i^j* M_j B_i^j‖` over sites outside the targets.
pub fn hitting_residual<W: Walk + ?Sized>(walk: &W, h: &HittingOperators) -> Result<f64> {
    Ok(hitting_problem(walk, &h.targets)?.residual(&h.operators))
}

/// Minimal solution `{K_i}` for the expected hitting time of `targets`.
pub fn mean_hitting_times<W: Walk + ?Sized>(
    walk: &W,
    targets: &[i64],
    opts: &SolveOptions,
) -> Result<MeanHittingOperators> {
    let k = walk.dim();
    let mask = target_mask(walk, targets)?;
    let problem = Problem {
        qtm: walk.qtm(),
        fixed: mask.iter().map(|&a| a.then(|| linalg::zeros(k))).collect(),
        source: vec![linalg::identity(k); walk.sites()],
    };
    let sol = problem.solve(opts)?;
    Ok(MeanHittingOperators {
        labels: walk.labels(),
        targets: targets.to_vec(),
        operators: sol.values,
        divergent: sol.divergent,
        cap: opts.cap,
        iterations: sol.iterations,
        residual: sol.residual,
    })
}

/// Outcome of growing a window until the hitting probability settles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutoWindowResult {
    pub value: f64,
    pub lo: i64,
    pub hi: i64,
    /// Change between the last two windows.
    pub change: f64,
    pub windows_tried: usize,
}

/// Evaluate `h_start(ρ)` on `build(w)` for `w = w0, 2 w0, 4 w0, …` until two
/// consecutive values differ by less than `tol`. Edge sites trap mass, so
/// every value is a lower bound and the sequence is non-decreasing when the
/// windows are nested.
#[allow(clippy::too_many_arguments)]
pub fn hitting_auto_window<F>(
    build: F,
    targets: &[i64],
    start: i64,
    rho: &CMat,
    w0: usize,
    w_max: usize,
    tol: f64,
    opts: &SolveOptions,
) -> Result<AutoWindowResult>
where
    F: Fn(usize) -> Result<LatticeWindow>,
{
    let mut w = w0.max(1);
    let mut previous: Option<f64> = None;
    let mut tried = 0;
    loop {
        let window = build(w)?;
        let h = hitting_probabilities(&window, targets, opts)?;
        let value = h.evaluate(start, rho)?;
        tried += 1;
        if let Some(p) = previous {
            let change = (value - p).abs();
            if change < tol {
                return Ok(AutoWindowResult {
                    value,
                    lo: window.lo(),
                    hi: window.hi(),
                    change,
                    windows_tried: tried,
                });
            }
        }
        if w >= w_max {
            let residual = previous.map_or(f64::INFINITY, |p| (value - p).abs());
            return Err(Error::NotConverged { iterations: tried, residual });
        }
        previous = Some(value);
        w = (w * 2).min(w_max);
    }
}
