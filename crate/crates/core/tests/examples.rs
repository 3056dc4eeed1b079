//! Worked examples checked against independent closed forms or direct evaluation.

use nalgebra::DMatrix;
use oqrw_core::channel::{self, adjoint_representation, matrix_representation, site_kraus};
use oqrw_core::commuting::{self, diagonalize_pair};
use oqrw_core::ergodicity::{self, ChainSpec};
use oqrw_core::hitting::{hitting_probabilities, mean_hitting_times};
use oqrw_core::linalg::{self, c, re, real_diag, real_matrix, CMat, CVec};
use oqrw_core::potential::{self, CostSpec};
use oqrw_core::trajectory::{self, TrajectoryState};
use oqrw_core::{compose, sample, Boundary, Execution, LatticeWindow, Qtm, SolveOptions, Walk};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pauli_circulant() -> Qtm {
    let s = 1.0 / 3f64.sqrt();
    let v = [
        real_matrix(&[&[0.0, 1.0], &[1.0, 0.0]]) * re(s),
        linalg::complex_matrix(&[&[re(0.0), c(0.0, -1.0)], &[c(0.0, 1.0), re(0.0)]]) * re(s),
        real_matrix(&[&[1.0, 0.0], &[0.0, -1.0]]) * re(s),
    ];
    let layout = [[0, 1, 2], [1, 2, 0], [2, 0, 1]];
    let mut blocks = Vec::new();
    for (r, row) in layout.iter().enumerate() {
        for (s, &m) in row.iter().enumerate() {
            blocks.push(((s, r), v[m].clone()));
        }
    }
    Qtm::new(3, 2, blocks).unwrap()
}

fn shear_kraus() -> Vec<CMat> {
    let s = 1.0 / 3f64.sqrt();
    vec![
        real_matrix(&[&[1.0, 1.0], &[0.0, 1.0]]) * re(s),
        real_matrix(&[&[1.0, 0.0], &[-1.0, 1.0]]) * re(s),
    ]
}

fn sqrt3_pair() -> (CMat, CMat) {
    let s2 = 2f64.sqrt();
    let s3 = 3f64.sqrt();
    (
        real_matrix(&[&[1.0 + s2, 1.0 - s2], &[1.0 - s2, 1.0 + s2]]) * re(0.25),
        real_matrix(&[&[s3 + s2, s3 - s2], &[s3 - s2, s3 + s2]]) * re(0.25),
    )
}

fn split_mode_pair(p: f64) -> (CMat, CMat) {
    (real_diag(&[1.0, p.sqrt()]), real_diag(&[0.0, (1.0 - p).sqrt()]))
}

fn classical_pair(p: f64) -> (CMat, CMat) {
    (real_diag(&[(1.0 - p).sqrt()]), real_diag(&[p.sqrt()]))
}

#[test]
fn vec_stacks_rows_of_a_general_matrix() {
    let a = linalg::complex_matrix(&[&[c(1.0, 2.0), c(3.0, 0.0)], &[c(0.0, -1.0), c(5.0, 5.0)]]);
    let v = channel::vec(&a);
    let want = [c(1.0, 2.0), c(3.0, 0.0), c(0.0, -1.0), c(5.0, 5.0)];
    assert_eq!(v.as_slice(), &want);
}

#[test]
fn vec_turns_sandwich_into_kronecker_product() {
    let mut r = rng(1);
    for _ in 0..5 {
        let a = sample::ginibre(3, 3, &mut r);
        let b = sample::ginibre(3, 3, &mut r);
        let x = sample::ginibre(3, 3, &mut r);
        let lhs = channel::vec(&(&a * &x * b.transpose()));
        let rhs: CVec = linalg::kron(&a, &b) * channel::vec(&x);
        assert!((lhs - rhs).norm() < 1e-12);
    }
}

#[test]
fn circulant_site_kraus_shape_and_order() {
    let q = pauli_circulant();
    let k = site_kraus(&q);
    assert_eq!(k.len(), 9);
    assert!(k.operators().iter().all(|m| m.nrows() == 6 && m.ncols() == 6));
    assert_eq!(matrix_representation(&k).order(), 36);
    assert_eq!(q.channel_matrix().order(), 36);
}

#[test]
fn adjoint_pairing_for_shear_channel() {
    let kraus = channel::KrausSet::new(shear_kraus()).unwrap();
    let phi = matrix_representation(&kraus);
    let phi_star = adjoint_representation(&kraus);
    let mut r = rng(2);
    for _ in 0..20 {
        let a = sample::ginibre(2, 2, &mut r);
        let b = sample::ginibre(2, 2, &mut r);
        let lhs = linalg::hs_inner(&a, &phi.apply_matrix(&b).unwrap());
        let rhs = linalg::hs_inner(&phi_star.apply_matrix(&a).unwrap(), &b);
        assert!((lhs - rhs).norm() < 1e-10, "{lhs} vs {rhs}");
        // direct sums as an independent oracle
        let direct: CMat = kraus.operators().iter().map(|v| v.adjoint() * &a * v).sum();
        assert!(linalg::hs_norm(&(phi_star.apply_matrix(&a).unwrap() - direct)) < 1e-12);
    }
}

#[test]
fn classical_adjoint_is_transpose_on_traces() {
    let p = DMatrix::from_row_slice(3, 3, &[0.2, 0.5, 0.0, 0.3, 0.0, 0.6, 0.5, 0.5, 0.4]);
    let q = Qtm::embed_classical(&p, 2).unwrap();
    let adj = adjoint_representation(&site_kraus(&q));
    let pi = [0.1, 0.7, 0.2];
    let blocks: Vec<CMat> = pi.iter().map(|&w| linalg::identity(2) * re(w / 2.0)).collect();
    let image = adj.apply_matrix(&channel::block_diagonal(&blocks)).unwrap();
    let out = channel::diagonal_blocks(&image, 3, 2);
    let want = p.transpose() * DMatrix::from_column_slice(3, 1, &pi);
    for i in 0..3 {
        assert!((linalg::trace(&out[i]).re - want[i]).abs() < 1e-12);
    }
}

#[test]
fn products_of_circulant_equalize_columns() {
    let chain = ChainSpec::homogeneous(pauli_circulant(), 40);
    let mut last = f64::INFINITY;
    for r in 1..=8 {
        let g = ergodicity::column_equalization_gap(&chain, r).unwrap();
        assert!(g <= last + 1e-12, "r={r}: {g} > {last}");
        last = g;
    }
    assert!(ergodicity::column_equalization_gap(&chain, 40).unwrap() < 1e-5);
}

#[test]
fn classical_composition_is_matrix_power() {
    let p = DMatrix::from_row_slice(3, 3, &[0.1, 0.6, 0.3, 0.4, 0.0, 0.3, 0.5, 0.4, 0.4]);
    let q = Qtm::embed_classical(&p, 1).unwrap();
    let m = compose(&[q.clone(), q]).unwrap();
    let p2 = &p * &p;
    // with k = 1 the channel matrix acts on the site-diagonal of the state
    for j in 0..3 {
        for i in 0..3 {
            let v = m.matrix()[(i * 3 + i, j * 3 + j)];
            assert!((v.re - p2[(i, j)]).abs() < 1e-14 && v.im.abs() < 1e-14);
        }
    }
}

#[test]
fn split_mode_first_step_branches() {
    let (p, a, b) = (0.3, 0.4, 0.6);
    let (l, r) = split_mode_pair(p);
    let walk = LatticeWindow::nearest_neighbor(-5, 5, &l, &r, Boundary::HardError).unwrap();
    let st = TrajectoryState::new(0, real_diag(&[a, b])).unwrap();
    let mut got = trajectory::branch_probabilities(&walk, &st).unwrap();
    got.sort_by_key(|(x, _)| *x);
    assert_eq!(got.len(), 2);
    assert_eq!((got[0].0, got[1].0), (-1, 1));
    assert!((got[0].1 - (a + p * b)).abs() < 1e-14);
    assert!((got[1].1 - (1.0 - p) * b).abs() < 1e-14);
}

#[test]
fn split_mode_site_distribution_closed_form() {
    let (p, a, b) = (0.3, 0.25, 0.75);
    let q = 1.0 - p;
    let (l, r) = split_mode_pair(p);
    let pair = diagonalize_pair(&l, &r).unwrap();
    let rho = real_diag(&[a, b]);
    for n in [1u64, 4, 9] {
        for x in -(n as i64) - 1..=n as i64 + 1 {
            let mut want = if x == -(n as i64) { a } else { 0.0 };
            for lft in 0..=n {
                if x == n as i64 - 2 * lft as i64 {
                    want += b * commuting::binomial(n, lft) * p.powi(lft as i32) * q.powi((n - lft) as i32);
                }
            }
            let got = commuting::site_probability(&pair, &rho, 0, x, n).unwrap();
            assert!((got - want).abs() < 1e-13, "n={n} x={x}: {got} vs {want}");
        }
    }
}

#[test]
fn split_mode_pure_left_mode_hits_far_site_at_time_n() {
    let (l, r) = split_mode_pair(0.3);
    let walk = LatticeWindow::nearest_neighbor(-8, 8, &l, &r, Boundary::HardError).unwrap();
    let st = TrajectoryState::new(0, real_diag(&[1.0, 0.0])).unwrap();
    let h = trajectory::run_trajectories(&walk, &st, &[-5], 10, 500, 3, Execution::Sequential).unwrap();
    assert_eq!(h.counts[5], 500);
    assert_eq!(h.censored, 0);
}

#[test]
fn phase_pair_diagonalization() {
    let (eps, theta) = (0.2f64, 0.7f64);
    let a = (0.5 - eps * eps).sqrt();
    let e = c(theta.cos(), theta.sin()) * eps;
    let b = linalg::complex_matrix(&[&[re(a), e], &[e, re(a)]]);
    let cm = linalg::complex_matrix(&[&[re(a), -e], &[-e, re(a)]]);
    let pair = diagonalize_pair(&b, &cm).unwrap();
    let plus = 0.5 + 2.0 * eps * a * theta.cos();
    let minus = 0.5 - 2.0 * eps * a * theta.cos();
    let (lam, mu) = (pair.lambda(), pair.mu());
    for u in 0..2 {
        let is_plus = (lam[u] - plus).abs() < 1e-12;
        assert!(is_plus || (lam[u] - minus).abs() < 1e-12);
        assert!((mu[u] - if is_plus { minus } else { plus }).abs() < 1e-12);
        for r in 0..2 {
            assert!((pair.u[(r, u)].norm() - 0.5f64.sqrt()).abs() < 1e-12);
        }
    }
    assert!((lam[0] - lam[1]).abs() > 0.1);
}

#[test]
fn classical_first_visit_matches_hitting_time_theorem() {
    let p = 0.35;
    let (l, r) = classical_pair(p);
    let pair = diagonalize_pair(&l, &r).unwrap();
    let one = real_diag(&[1.0]);
    for (x, n) in [(1i64, 1u64), (1, 5), (3, 7), (-2, 6)] {
        let steps_right = (n as i64 + x) / 2;
        let s = n as i64 - steps_right;
        let walk_prob = commuting::binomial(n, steps_right as u64) * p.powi(steps_right as i32) * (1.0 - p).powi(s as i32);
        let want = x.abs() as f64 / n as f64 * walk_prob;
        let got = commuting::first_visit_probability(&pair, &one, 0, x, n).unwrap();
        assert!((got - want).abs() < 1e-14, "x={x} n={n}");
    }
}

#[test]
fn sqrt3_first_visits_match_monitored_evolution() {
    let (b, cm) = sqrt3_pair();
    let pair = diagonalize_pair(&b, &cm).unwrap();
    let rho = linalg::complex_matrix(&[&[re(0.3), c(0.1, 0.2)], &[c(0.1, -0.2), re(0.7)]]);
    let (x, steps) = (3i64, 25usize);
    let walk = pair.window(-30, 30, Boundary::HardError).unwrap();
    let mon = trajectory::monitored_from_site(&walk, 0, rho.clone(), &[x], steps).unwrap();
    for n in 1..=steps {
        if n < x as usize {
            assert!(mon.first_visit[n - 1].abs() < 1e-15);
            continue;
        }
        let f = commuting::first_visit_probability(&pair, &rho, 0, x, n as u64).unwrap();
        assert!((f - mon.first_visit[n - 1]).abs() < 1e-9, "n={n}: {f} vs {}", mon.first_visit[n - 1]);
    }
}

#[test]
fn two_step_monitored_state() {
    let (l, r) = sqrt3_pair();
    let walk = LatticeWindow::nearest_neighbor(-4, 4, &l, &r, Boundary::HardError).unwrap();
    let rho = real_diag(&[0.4, 0.6]);
    let mon = trajectory::monitored_from_site(&walk, 0, rho.clone(), &[0], 2).unwrap();
    let blocks = &mon.final_blocks;
    let l2 = &l * &l;
    let r2 = &r * &r;
    let at = |x: i64| walk.index_of(x).unwrap();
    assert!(linalg::hs_norm(&(&blocks[at(-2)] - &l2 * &rho * l2.adjoint())) < 1e-14);
    assert!(linalg::hs_norm(&(&blocks[at(2)] - &r2 * &rho * r2.adjoint())) < 1e-14);
    for x in [-4, -3, -1, 0, 1, 3, 4] {
        assert!(linalg::hs_norm(&blocks[at(x)]) < 1e-15, "site {x}");
    }
}

#[test]
fn classical_return_probability_tends_to_one_minus_drift() {
    let p = 0.7;
    let (l, r) = classical_pair(p);
    let walk = LatticeWindow::nearest_neighbor(-400, 400, &l, &r, Boundary::HardError).unwrap();
    let mon = trajectory::monitored_from_site(&walk, 0, real_diag(&[1.0]), &[0], 300).unwrap();
    let want = 1.0 - (2.0 * p - 1.0f64).abs();
    assert!((mon.return_probability_estimate - want).abs() < 1e-9);
    let total: f64 = mon.total_first_visit() + mon.survival.last().unwrap();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn subfair_gambler_mean_duration() {
    let (p, w) = (0.3, 60usize);
    let mut m = DMatrix::zeros(w + 1, w + 1);
    m[(0, 0)] = 1.0;
    for i in 1..w {
        m[(i - 1, i)] = 1.0 - p;
        m[(i + 1, i)] = p;
    }
    m[(w - 1, w)] = 1.0;
    let q = Qtm::embed_classical(&m, 1).unwrap();
    let k = mean_hitting_times(&q, &[1], &SolveOptions::default()).unwrap();
    for i in [1usize, 2, 5, 10] {
        let got = k.evaluate(i as i64 + 1, &real_diag(&[1.0])).unwrap();
        let want = i as f64 / (1.0 - 2.0 * p);
        assert!((got - want).abs() < 1e-8, "i={i}: {got} vs {want}");
    }
    assert_eq!(k.evaluate(1, &real_diag(&[1.0])).unwrap(), 0.0);
}

#[test]
fn gambler_ruin_agrees_with_window_solver() {
    let mut r = rng(5);
    let (b, cm) = sample::commuting_pair(2, 0.3, 0.7, &mut r);
    let pair = diagonalize_pair(&b, &cm).unwrap();
    let rho = sample::density(2, &mut r);
    let walk = pair.window(-1, 400, Boundary::Absorbing).unwrap();
    let h = hitting_probabilities(&walk, &[0], &SolveOptions::default()).unwrap();
    for i in [1u64, 3] {
        let closed = commuting::gambler_ruin(&pair, &rho, i).unwrap();
        let solved = h.evaluate(i as i64, &rho).unwrap();
        assert!((closed - solved).abs() < 1e-8, "i={i}: {closed} vs {solved}");
    }
}

#[test]
fn gambler_potential_is_unique_and_constant_for_unit_boundary() {
    let (l, r) = classical_pair(0.4);
    let w = 12i64;
    let walk = LatticeWindow::nearest_neighbor(0, w, &l, &r, Boundary::Absorbing).unwrap();
    let interior: Vec<i64> = (1..w).collect();
    let spec = CostSpec::uniform(interior.clone(), vec![0, w], 0.0, 1.0).unwrap();
    let opts = SolveOptions::default();
    let report = potential::uniqueness_report(&walk, &spec, &opts).unwrap();
    assert!(report.verified);
    let g = potential::solve_potential(&walk, &spec, &opts).unwrap();
    for x in interior {
        assert!((g.evaluate(x, &real_diag(&[1.0])).unwrap() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn saloff_identity_on_circulant() {
    let q = pauli_circulant();
    for j in 0..3 {
        let s = ergodicity::saloff_identity_check(&q, j).unwrap();
        assert!(s.residual < 1e-9, "column {j}: {s:?}");
    }
}
