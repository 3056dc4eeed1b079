//! Quantum trajectories and exact monitored evolution.
//!
//! A trajectory is a pair `(site, ρ)`. One step picks the destination `j`
//! with probability `tr(B ρ B*)`, `B` the block leaving the current site for
//! `j`, and replaces `ρ` by the normalized `B ρ B* / p`.
//!
//! Every trajectory draws from its own ChaCha stream `(seed, index)`, so
//! histograms do not depend on how the work is split between threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::par::{self, Execution};
use crate::qtm::{VectorState, DEFAULT_TOL};
use crate::walk::{Boundary, Walk};

/// Branches whose probability falls below this are dropped.
pub const BRANCH_THRESHOLD: f64 = 1e-14;

/// Mass at a hard window edge above this raises `WindowOverflow`.
pub const EDGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    /// Site label (see [`Walk::label`]).
    pub site: i64,
    pub density: CMat,
}

impl TrajectoryState {
    /// Validates trace one and positivity within `1e-10`; symmetrizes small drift.
    pub fn new(site: i64, density: CMat) -> Result<Self> {
        let state = VectorState::new(vec![density])?;
        Ok(TrajectoryState { site, density: state.into_blocks().remove(0) })
    }
}

/// One measurement-conditioned jump.
pub fn step<W: Walk + ?Sized, R: Rng + ?Sized>(
    walk: &W,
    state: &TrajectoryState,
    rng: &mut R,
) -> Result<TrajectoryState> {
    let from = walk.index_of(state.site)?;
    let out = walk.qtm().outgoing(from);
    let probs: Vec<f64> = out
        .iter()
        .map(|(_, b)| {
            let p = linalg::sandwich_trace(b, &state.density);
            if p < BRANCH_THRESHOLD {
                0.0
            } else {
                p
            }
        })
        .collect();
    let total: f64 = probs.iter().sum();
    if total <= 0.0 {
        return Err(Error::DeadEnd { site: state.site });
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut pick = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for (idx, &p) in probs.iter().enumerate() {
        acc += p;
        if p > 0.0 && u < acc {
            pick = idx;
            break;
        }
    }
    let (to, b) = &out[pick];
    let next = linalg::sandwich(b, &state.density);
    let tr = linalg::trace(&next).re;
    Ok(TrajectoryState {
        site: walk.label(*to),
        density: linalg::hermitian_part(&(next / linalg::re(tr))),
    })
}

/// Empirical first-entry histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstVisitHistogram {
    pub trajectories: usize,
    /// `counts[r]`: trajectories whose first entry into the target set happened at step `r`.
    pub counts: Vec<u64>,
    /// Trajectories that had not entered the target set by the horizon.
    pub censored: u64,
}

/// Wilson score interval for a binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

pub fn wilson_interval(successes: u64, trials: usize, z: f64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Interval { lo: (center - half).max(0.0), hi: (center + half).min(1.0) }
}

impl FirstVisitHistogram {
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.trajectories.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Wilson intervals per bin at normal quantile `z` (1.96 for 95%).
    pub fn intervals(&self, z: f64) -> Vec<Interval> {
        self.counts.iter().map(|&c| wilson_interval(c, self.trajectories, z)).collect()
    }

    /// Binomial standard deviation of bin `r` given the true mass `p`.
    pub fn binomial_sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trajectories.max(1) as f64).sqrt()
    }
}

/// Simulate `count` trajectories for at most `horizon` steps and record the
/// first step at which each enters `targets` (step 0 if it starts there).
pub fn run_trajectories<W: Walk + ?Sized>(
    walk: &W,
    initial: &TrajectoryState,
    targets: &[i64],
    horizon: usize,
    count: usize,
    seed: u64,
    exec: Execution,
) -> Result<FirstVisitHistogram> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("target set is empty".into()));
    }
    let target_idx = walk.indices_of(targets)?;
    let mut is_target = vec![false; walk.sites()];
    for i in target_idx {
        is_target[i] = true;
    }
    walk.index_of(initial.site)?;
    let bins = horizon + 1;
    let partials: Vec<Result<Vec<u64>>> = par::map_chunks(exec, count, 2048, |start, end| {
        let mut counts = vec![0u64; bins + 1];
        for t in start..end {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let mut state = initial.clone();
            let mut hit = None;
            for r in 0..=horizon {
                if is_target[walk.index_of(state.site)?] {
                    hit = Some(r);
                    break;
                }
                if r < horizon {
                    state = step(walk, &state, &mut rng)?;
                }
            }
            counts[hit.unwrap_or(bins)] += 1;
        }
        Ok(counts)
    });
    let mut total = vec![0u64; bins + 1];
    for part in partials {
        for (a, b) in total.iter_mut().zip(part?) {
            *a += b;
        }
    }
    let censored = total.pop().unwrap_or(0);
    Ok(FirstVisitHistogram { trajectories: count, counts: total, censored })
}

/// Exact evolution with the monitored sites emptied after every step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitoredResult {
    /// `S_0..S_N`: trace left outside the monitored set.
    pub survival: Vec<f64>,
    /// `b_1..b_N`: trace captured by the monitored set at each step.
    pub first_visit: Vec<f64>,
    /// `1 - S_N`.
    pub return_probability_estimate: f64,
    /// Mass sitting on window edges after the last step (zero for finite QTMs).
    pub edge_mass: f64,
    /// Unnormalized blocks after the last step, for chaining or inspection.
    #[serde(skip)]
    pub final_blocks: Vec<CMat>,
}

impl MonitoredResult {
    /// `Σ_r b_r`.
    pub fn total_first_visit(&self) -> f64 {
        self.first_visit.iter().sum()
    }
}

/// Iterate `Q∘Φ` for `steps` steps from `initial`. Monitoring starts after
/// step 0, so mass that starts inside the monitored set is not captured
/// until it returns.
pub fn monitored_evolution<W: Walk + ?Sized>(
    walk: &W,
    initial: &VectorState,
    monitored: &[i64],
    steps: usize,
) -> Result<MonitoredResult> {
    let qtm = walk.qtm();
    initial.check_shape(qtm.sites(), qtm.dim())?;
    let watch = walk.indices_of(monitored)?;
    let edges: Vec<usize> = walk.edge_sites().into_iter().filter(|e| !watch.contains(e)).collect();
    let zero = linalg::zeros(qtm.dim());
    let mut blocks = initial.blocks().to_vec();
    let s0: f64 = blocks.iter().map(|b| linalg::trace(b).re).sum();
    let mut survival = vec![s0];
    let mut first_visit = Vec::with_capacity(steps);
    let mut edge_mass = 0.0;
    for _ in 0..steps {
        blocks = qtm.step_blocks(&blocks);
        let mut captured = 0.0;
        for &i in &watch {
            captured += linalg::trace(&blocks[i]).re;
            blocks[i] = zero.clone();
        }
        edge_mass = 0.0;
        for &e in &edges {
            let m = linalg::trace(&blocks[e]).re;
            edge_mass += m;
            if walk.boundary() == Boundary::HardError && m > EDGE_TOLERANCE {
                return Err(Error::WindowOverflow { site: walk.label(e), mass: m });
            }
        }
        first_visit.push(captured.max(0.0));
        survival.push(blocks.iter().map(|b| linalg::trace(b).re).sum());
    }
    let last = *survival.last().unwrap_or(&s0);
    Ok(MonitoredResult {
        return_probability_estimate: 1.0 - last,
        survival,
        first_visit,
        edge_mass,
        final_blocks: blocks,
    })
}

/// Convenience: start from `rho` at `label`.
pub fn monitored_from_site<W: Walk + ?Sized>(
    walk: &W,
    label: i64,
    rho: CMat,
    monitored: &[i64],
    steps: usize,
) -> Result<MonitoredResult> {
    let init = walk.localized(label, rho)?;
    monitored_evolution(walk, &init, monitored, steps)
}

/// Probability of each branch out of `state`, as `(label, p)`, before thresholding.
pub fn branch_probabilities<W: Walk + ?Sized>(walk: &W, state: &TrajectoryState) -> Result<Vec<(i64, f64)>> {
    let from = walk.index_of(state.site)?;
    Ok(walk
        .qtm()
        .outgoing(from)
        .iter()
        .map(|(to, b)| (walk.label(*to), linalg::sandwich_trace(b, &state.density)))
        .collect())
}

/// Checks the trace-one and positivity invariants of a conditional density.
pub fn is_valid_density(rho: &CMat) -> bool {
    (linalg::trace(rho).re - 1.0).abs() <= DEFAULT_TOL && linalg::min_eigenvalue(rho) >= -DEFAULT_TOL
}
