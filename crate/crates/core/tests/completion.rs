mod common;

use bmc::completion::{check_assumption, complete, limiting_solution, patch_means, penalty, BmcProblem, Fit};
use bmc::solver::{Method, SolverConfig};
use bmc::{Error, Mask, Matrix, ObservedMatrix, PenaltyParams, WeightedGraph};
use common::*;
use rand::Rng;

const MEANS: [[f64; 2]; 2] = [[10.0, -25.0], [25.0, -10.0]];

fn means() -> Vec<Vec<f64>> {
    MEANS.iter().map(|r| r.to_vec()).collect()
}

fn random_mask(n: usize, p: usize, missing: f64, r: &mut impl Rng) -> Mask {
    Mask::from_flags(n, p, (0..n * p).map(|_| r.random::<f64>() >= missing).collect()).unwrap()
}

/// Brute-force patch averaging over every entry.
fn patch_mean_oracle(prob: &BmcProblem) -> Vec<Vec<(f64, usize)>> {
    let rl = closure_components(&weight_matrix(prob.row_graph()));
    let cl = closure_components(&weight_matrix(prob.col_graph()));
    let nr = rl.iter().max().unwrap() + 1;
    let nc = cl.iter().max().unwrap() + 1;
    let mut acc = vec![vec![(0.0, 0usize); nc]; nr];
    for i in 0..prob.n_rows() {
        for j in 0..prob.n_cols() {
            if prob.mask().is_observed(i, j) {
                acc[rl[i]][cl[j]].0 += prob.data().values().get(i, j);
                acc[rl[i]][cl[j]].1 += 1;
            }
        }
    }
    acc.into_iter().map(|row| row.into_iter().map(|(s, c)| (s / c as f64, c)).collect()).collect()
}

#[test]
fn full_mask_passes_and_empty_fails_at_first_patch() {
    let g = WeightedGraph::from_fn(3, |_, _| 1.0).unwrap();
    let data = ObservedMatrix::fully_observed(Matrix::zeros(3, 3)).unwrap();
    let prob = BmcProblem::new(data, g.clone(), g).unwrap();
    assert!(check_assumption(&prob).holds);
    let check = bmc::completion::check_mask(&Mask::empty(3, 3), prob.row_partition(), prob.col_partition());
    assert!(!check.holds);
    assert_eq!(check.first_violation, Some((0, 0)));
}

#[test]
fn block_design_with_half_missing_holds() {
    let g = WeightedGraph::from_fn(50, |i, j| if (i < 25) == (j < 25) { 1.0 } else { 0.001 }).unwrap();
    let mut r = rng(1);
    let data = ObservedMatrix::new(Matrix::zeros(50, 50), random_mask(50, 50, 0.5, &mut r)).unwrap();
    let prob = BmcProblem::new(data, g.clone(), g).unwrap();
    let oracle = patch_mean_oracle(&prob);
    assert_eq!((oracle.len(), oracle[0].len()), (1, 1));
    assert!(check_assumption(&prob).holds);
}

#[test]
fn checkerboard_is_recovered_exactly() {
    let x = checkerboard(&[10, 10], &[10, 10], &means());
    let mut r = rng(2);
    let mask = loop {
        let m = random_mask(20, 20, 0.5, &mut r);
        let probe = BmcProblem::new(
            ObservedMatrix::new(x.clone(), m.clone()).unwrap(),
            block_graph(&[10, 10], 1.0),
            block_graph(&[10, 10], 1.0),
        )
        .unwrap();
        if check_assumption(&probe).holds {
            break m;
        }
    };
    let prob = BmcProblem::new(ObservedMatrix::new(x.clone(), mask).unwrap(), block_graph(&[10, 10], 1.0), block_graph(&[10, 10], 1.0)).unwrap();
    for gr in [1e-3, 1.0, 1e3] {
        for gc in [1e-3, 1.0, 1e3] {
            let z = complete(&prob, PenaltyParams::new(gr, gc).unwrap(), &SolverConfig::default()).unwrap();
            assert!(z.estimate.distance(&x) / x.frobenius_norm() < 1e-6, "({gr}, {gc})");
        }
    }
}

#[test]
fn no_graphs_and_full_mask_reproduce_data() {
    let mut r = rng(3);
    let data = random_observed(4, 5, 0.0, &mut r);
    let x = data.values().clone();
    let prob = BmcProblem::new(data, WeightedGraph::empty(4), WeightedGraph::empty(5)).unwrap();
    let z = complete(&prob, PenaltyParams::uniform(7.0).unwrap(), &SolverConfig::default()).unwrap();
    assert_eq!(z.estimate, x);
}

#[test]
fn estimate_matches_dense_inverse() {
    let mut r = rng(4);
    let prob = loop {
        let data = random_observed(5, 4, 0.3, &mut r);
        let prob = BmcProblem::new(data, random_graph(5, 0.4, &mut r), random_graph(4, 0.4, &mut r)).unwrap();
        if check_assumption(&prob).holds {
            break prob;
        }
    };
    let gamma = PenaltyParams::new(0.7, 1.3).unwrap();
    let lr = laplacian_oracle(&weight_matrix(prob.row_graph()));
    let lc = laplacian_oracle(&weight_matrix(prob.col_graph()));
    let inv = gauss_jordan_inverse(&dense_system(prob.mask(), &lr, &lc, 0.7, 1.3)).unwrap();
    let want = mat_vec(&inv, &prob.data().projected());
    let z = complete(&prob, gamma, &SolverConfig::default()).unwrap();
    let max = want.iter().zip(z.estimate.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(max < 1e-8);
    assert_eq!(z.fit, Fit::Penalized(gamma));
}

#[test]
fn violation_is_refused() {
    let g = WeightedGraph::new(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
    let mask = Mask::from_entries(4, 1, [(0, 0)]).unwrap();
    let prob = BmcProblem::new(ObservedMatrix::new(Matrix::zeros(4, 1), mask).unwrap(), g, WeightedGraph::empty(1)).unwrap();
    assert!(matches!(complete(&prob, PenaltyParams::uniform(1.0).unwrap(), &SolverConfig::default()), Err(Error::AssumptionViolated { row_component: 1, col_component: 0 })));
    assert!(matches!(patch_means(&prob), Err(Error::AssumptionViolated { .. })));
    assert!(limiting_solution(&prob).is_err());
}

#[test]
fn patch_means_match_brute_force() {
    let mut r = rng(5);
    for _ in 0..10 {
        let x = Matrix::from_fn(8, 6, |_, _| r.random_range(-5.0..5.0));
        let rg = block_graph(&[3, 5], 0.5);
        let cg = block_graph(&[4, 2], 2.0);
        let mask = random_mask(8, 6, 0.5, &mut r);
        let Ok(data) = ObservedMatrix::new(x, mask) else { continue };
        let prob = BmcProblem::new(data, rg, cg).unwrap();
        let oracle = patch_mean_oracle(&prob);
        match patch_means(&prob) {
            Ok(pm) => {
                for a in 0..2 {
                    for b in 0..2 {
                        assert!((pm.means[a][b] - oracle[a][b].0).abs() < 1e-12);
                        assert_eq!(pm.counts[a][b], oracle[a][b].1);
                    }
                }
            }
            Err(_) => assert!(oracle.iter().flatten().any(|&(_, c)| c == 0)),
        }
    }
}

#[test]
fn single_patch_and_constant_data() {
    let mut r = rng(6);
    let data = random_observed(5, 5, 0.3, &mut r);
    let g = WeightedGraph::from_fn(5, |_, _| 1.0).unwrap();
    let prob = BmcProblem::new(data.clone(), g.clone(), g.clone()).unwrap();
    let obs: Vec<f64> = data.mask().observed_indices().iter().map(|&k| data.values().as_slice()[k]).collect();
    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
    let z = limiting_solution(&prob).unwrap();
    assert!(z.estimate.as_slice().iter().all(|v| (v - mean).abs() < 1e-12));
    assert_eq!(z.fit, Fit::Limit);

    let constant = ObservedMatrix::new(Matrix::from_fn(5, 5, |_, _| 3.25), data.mask().clone()).unwrap();
    let pm = patch_means(&prob.with_data(constant).unwrap()).unwrap();
    assert_eq!(pm.means, vec![vec![3.25]]);
}

#[test]
fn fully_observed_checkerboard_is_its_own_limit() {
    let x = checkerboard(&[2, 3], &[3, 1], &means());
    let prob = BmcProblem::new(ObservedMatrix::fully_observed(x.clone()).unwrap(), block_graph(&[2, 3], 1.0), block_graph(&[3, 1], 1.0)).unwrap();
    assert!(limiting_solution(&prob).unwrap().estimate.max_abs_diff(&x) < 1e-12);
}

fn noisy_instance(seed: u64) -> BmcProblem {
    let mut r = rng(seed);
    let m = checkerboard(&[10, 10], &[10, 10], &means());
    let x = Matrix::from_fn(20, 20, |i, j| m.get(i, j) + r.random_range(-2.0..2.0));
    let rg = random_connected_graph(10, 0.3, &mut r);
    let block = |g: &WeightedGraph| {
        let w = weight_matrix(g);
        WeightedGraph::from_fn(20, |i, j| if (i < 10) == (j < 10) { w[i % 10][j % 10] } else { 0.0 }).unwrap()
    };
    let g = block(&rg);
    let mask = random_mask(20, 20, 0.3, &mut r);
    BmcProblem::new(ObservedMatrix::new(x, mask).unwrap(), g.clone(), g).unwrap()
}

#[test]
fn estimates_converge_monotonically_to_limit() {
    let prob = noisy_instance(7);
    assert!(check_assumption(&prob).holds);
    let oracle = patch_mean_oracle(&prob);
    let rl = closure_components(&weight_matrix(prob.row_graph()));
    let cl = closure_components(&weight_matrix(prob.col_graph()));
    let star = Matrix::from_fn(20, 20, |i, j| oracle[rl[i]][cl[j]].0);
    assert!(limiting_solution(&prob).unwrap().estimate.max_abs_diff(&star) < 1e-12);
    let mut prev = f64::INFINITY;
    for t in 0..=8 {
        let z = complete(&prob, PenaltyParams::uniform(10f64.powi(t)).unwrap(), &SolverConfig::default()).unwrap();
        let d = z.estimate.distance(&star);
        assert!(d <= prev + 1e-9, "t={t}: {d} > {prev}");
        prev = d;
    }
    assert!(prev < 1e-3 * star.frobenius_norm());
    let big = complete(&prob, PenaltyParams::uniform(1e8).unwrap(), &SolverConfig::default()).unwrap();
    assert!(big.estimate.max_abs_diff(&star) < 1e-3);
}

#[test]
fn limit_has_zero_penalty_and_methods_agree() {
    let prob = noisy_instance(8);
    let star = limiting_solution(&prob).unwrap().estimate;
    assert!(penalty(&prob, PenaltyParams::uniform(1.0).unwrap(), &star) < 1e-10);
    let gamma = PenaltyParams::new(2.0, 0.5).unwrap();
    let zd = complete(&prob, gamma, &SolverConfig::with_method(Method::Direct)).unwrap();
    let zp = complete(&prob, gamma, &SolverConfig::with_method(Method::Pcg)).unwrap();
    assert!(rel_diff(zp.estimate.as_slice(), zd.estimate.as_slice()) < 1e-6);
    assert!(penalty(&prob, gamma, &zd.estimate) > 0.0);
}
