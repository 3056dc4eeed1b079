//! Monotone operator iteration shared by the hitting and potential solvers.
//!
//! Every solver here looks for the minimal nonnegative solution of
//!
//! ```text
//! X_i = S_i + Σ_j B_i^j* X_j B_i^j     (i free)
//! X_i = F_i                            (i fixed)
//! ```
//!
//! by Jacobi iteration from `X = 0` on the free sites. The functional
//! `x_i(ρ) = tr(X_i ρ)` is the object of interest: a sum over paths
//! `Σ_C tr(C ρ C*)` equals `tr((Σ_C C* C) ρ)`, so each path-sum functional is
//! represented by one positive operator per site, and the iteration above
//! accumulates those operators path length by path length.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::qtm::Qtm;

/// Iterations per rate checkpoint.
const BLOCK: usize = 64;
/// Consecutive checkpoints a site must look divergent before it is flagged.
const PERSIST: usize = 8;
/// Relative change below this is indistinguishable from rounding noise.
const NOISE: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Stop once the estimated distance to the limit is below `tol` (relative
    /// to `max(1, ‖X_i‖)`).
    pub tol: f64,
    pub max_iter: usize,
    /// Operator norms beyond this (observed or extrapolated) mark a site divergent.
    pub cap: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-12, max_iter: 1_000_000, cap: 1e12 }
    }
}

pub(crate) struct Problem<'a> {
    pub qtm: &'a Qtm,
    /// `Some(F_i)` pins site `i`.
    pub fixed: Vec<Option<CMat>>,
    /// Source term `S_i` for free sites.
    pub source: Vec<CMat>,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub values: Vec<CMat>,
    pub divergent: Vec<bool>,
    pub iterations: usize,
    pub residual: f64,
}

impl Problem<'_> {
    fn initial(&self) -> Vec<CMat> {
        let k = self.qtm.dim();
        self.fixed.iter().map(|f| f.clone().unwrap_or_else(|| linalg::zeros(k))).collect()
    }

    fn sweep(&self, x: &[CMat]) -> Vec<CMat> {
        (0..x.len())
            .map(|i| match &self.fixed[i] {
                Some(f) => f.clone(),
                None => {
                    let mut acc = self.source[i].clone();
                    for (j, b) in self.qtm.outgoing(i) {
                        acc += linalg::adjoint_sandwich(b, &x[*j]);
                    }
                    linalg::hermitian_part(&acc)
                }
            })
            .collect()
    }

    /// `X^(0), …, X^(n)`.
    pub fn iterates(&self, n: usize) -> Vec<Vec<CMat>> {
        let mut out = vec![self.initial()];
        for _ in 0..n {
            let next = self.sweep(out.last().expect("nonempty"));
            out.push(next);
        }
        out
    }

    /// `max_i ‖X_i − S_i − Σ_j B_i^j* X_j B_i^j‖` over free sites.
    pub fn residual(&self, x: &[CMat]) -> f64 {
        let next = self.sweep(x);
        (0..x.len())
            .filter(|&i| self.fixed[i].is_none())
            .map(|i| linalg::hs_norm(&(&next[i] - &x[i])))
            .fold(0.0, f64::max)
    }

    pub fn solve(&self, opts: &SolveOptions) -> Result<Solution> {
        let n = self.qtm.sites();
        let free: Vec<usize> = (0..n).filter(|&i| self.fixed[i].is_none()).collect();
        let mut x = self.initial();
        let mut divergent = vec![false; n];
        let mut block_max = vec![0.0f64; n];
        let mut prev_block = vec![f64::NAN; n];
        let mut suspicious = vec![0usize; n];
        let mut prev_global = f64::NAN;
        let mut residual = f64::INFINITY;
        for it in 1..=opts.max_iter {
            let next = self.sweep(&x);
            for &i in &free {
                let d = linalg::hs_norm(&(&next[i] - &x[i]));
                block_max[i] = block_max[i].max(d);
            }
            x = next;
            if it % BLOCK != 0 && it != 1 {
                continue;
            }
            if it == 1 {
                // a map that is already stationary after one sweep
                if free.iter().all(|&i| block_max[i] == 0.0) {
                    let values = x.clone();
                    if self.residual(&values) == 0.0 {
                        return Ok(Solution { values, divergent, iterations: 1, residual: 0.0 });
                    }
                }
                continue;
            }
            let mut global: f64 = 0.0;
            for &i in &free {
                let norm = linalg::hs_norm(&x[i]);
                let d = block_max[i];
                if !divergent[i] {
                    let rate = if prev_block[i] > 0.0 {
                        (d / prev_block[i]).powf(1.0 / BLOCK as f64)
                    } else {
                        f64::NAN
                    };
                    let extrapolated = if rate < 1.0 { norm + d * rate / (1.0 - rate) } else { f64::INFINITY };
                    let looks_divergent = norm > opts.cap
                        || (d > NOISE * norm.max(1.0) && rate.is_finite() && extrapolated > opts.cap);
                    suspicious[i] = if looks_divergent { suspicious[i] + 1 } else { 0 };
                    if norm > opts.cap || suspicious[i] >= PERSIST {
                        divergent[i] = true;
                    } else {
                        global = global.max(d / norm.max(1.0));
                    }
                }
                prev_block[i] = d;
                block_max[i] = 0.0;
            }
            let rate = if prev_global > 0.0 {
                (global / prev_global).powf(1.0 / BLOCK as f64).min(1.0)
            } else {
                1.0
            };
            prev_global = global;
            // estimated distance to the limit of a geometrically converging sequence
            let tail = if rate < 1.0 { global / (1.0 - rate) } else { f64::INFINITY };
            residual = global;
            if global == 0.0 || tail <= opts.tol || (global <= opts.tol && global <= NOISE) {
                return Ok(Solution { values: x, divergent, iterations: it, residual });
            }
            if free.iter().all(|&i| divergent[i]) {
                return Ok(Solution { values: x, divergent, iterations: it, residual: 0.0 });
            }
        }
        Err(Error::NotConverged { iterations: opts.max_iter, residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::re;
    use nalgebra::DMatrix;

    #[test]
    fn pinned_everywhere_is_immediate() {
        let q = Qtm::identity(2, 1);
        let p = Problem {
            qtm: &q,
            fixed: vec![Some(linalg::identity(1)), Some(linalg::identity(1))],
            source: vec![linalg::zeros(1); 2],
        };
        let s = p.solve(&SolveOptions::default()).unwrap();
        assert_eq!(s.iterations, 1);
    }

    #[test]
    fn linear_growth_is_flagged_divergent() {
        // site 1 loops forever with unit cost
        let q = Qtm::identity(2, 1);
        let p = Problem {
            qtm: &q,
            fixed: vec![None, Some(linalg::zeros(1))],
            source: vec![linalg::identity(1), linalg::zeros(1)],
        };
        let s = p.solve(&SolveOptions::default()).unwrap();
        assert!(s.divergent[0]);
        assert!(s.iterations <= BLOCK * (PERSIST + 2));
    }

    #[test]
    fn two_state_mean_absorption_time() {
        // from site 1: stay w.p. 0.75, absorb in 2 w.p. 0.25 → mean time 4
        let p = DMatrix::from_row_slice(2, 2, &[0.75, 0.0, 0.25, 1.0]);
        let q = Qtm::embed_classical(&p, 1).unwrap();
        let pr = Problem {
            qtm: &q,
            fixed: vec![None, Some(linalg::zeros(1))],
            source: vec![linalg::identity(1), linalg::zeros(1)],
        };
        let s = pr.solve(&SolveOptions::default()).unwrap();
        assert!((s.values[0][(0, 0)] - re(4.0)).norm() < 1e-10);
        assert!(!s.divergent[0]);
    }
}
