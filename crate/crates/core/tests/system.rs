mod common;

use bmc::completion::BmcProblem;
use bmc::{Error, Mask, Matrix, ObservedMatrix, PenaltyParams, WeightedGraph};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn problem(n: usize, p: usize, missing: f64, seed: u64) -> BmcProblem {
    let mut r = rng(seed);
    let data = random_observed(n, p, missing, &mut r);
    BmcProblem::new(data, random_graph(n, 0.5, &mut r), random_graph(p, 0.5, &mut r)).unwrap()
}

fn random_vec(len: usize, r: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| r.random_range(-1.0..1.0)).collect()
}

#[test]
fn identity_when_unpenalized_and_fully_observed() {
    let prob = problem(4, 3, 0.0, 1);
    let op = prob.operator(PenaltyParams::new(0.0, 0.0).unwrap()).unwrap();
    let v: Vec<f64> = (0..12).map(|k| k as f64 - 3.5).collect();
    assert_eq!(op.apply(&v).unwrap(), v);
}

#[test]
fn indicator_products_vanish_without_observations() {
    let g = WeightedGraph::new(4, [(0, 1, 1.0), (2, 3, 2.0)]).unwrap();
    let h = WeightedGraph::new(3, [(0, 2, 0.5)]).unwrap();
    let data = ObservedMatrix::new(Matrix::zeros(4, 3), Mask::from_entries(4, 3, [(0, 0)]).unwrap()).unwrap();
    let prob = BmcProblem::new(data, g, h).unwrap();
    let empty = Mask::empty(4, 3);
    let op = bmc::SystemOperator::new(&empty, prob.row_laplacian(), prob.col_laplacian(), PenaltyParams::new(2.0, 3.0).unwrap()).unwrap();
    for a in 0..prob.row_partition().component_count() {
        for b in 0..prob.col_partition().component_count() {
            let ra = prob.row_partition().indicator(a);
            let cb = prob.col_partition().indicator(b);
            let v: Vec<f64> = (0..12).map(|k| ra[k % 4] * cb[k / 4]).collect();
            assert!(op.apply(&v).unwrap().iter().all(|x| x.abs() < 1e-12));
        }
    }
}

#[test]
fn apply_matches_explicit_kronecker() {
    let prob = problem(4, 3, 0.3, 2);
    let gamma = PenaltyParams::new(0.7, 1.9).unwrap();
    let op = prob.operator(gamma).unwrap();
    let lr = laplacian_oracle(&weight_matrix(prob.row_graph()));
    let lc = laplacian_oracle(&weight_matrix(prob.col_graph()));
    let s = dense_system(prob.mask(), &lr, &lc, gamma.gamma_r, gamma.gamma_c);
    let mut r = rng(9);
    for _ in 0..5 {
        let v = random_vec(12, &mut r);
        let want = mat_vec(&s, &v);
        let got = op.apply(&v).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    assert_eq!(op.to_dense().unwrap().len(), 12);
    for (row_got, row_want) in op.to_dense().unwrap().iter().zip(&s) {
        for (a, b) in row_got.iter().zip(row_want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn wrong_length_is_rejected() {
    let prob = problem(4, 3, 0.0, 3);
    let op = prob.operator(PenaltyParams::uniform(1.0).unwrap()).unwrap();
    assert!(matches!(op.apply(&[1.0; 5]), Err(Error::DimensionMismatch { expected: 12, got: 5 })));
}

#[test]
fn assembly_of_diagonal_case_is_identity() {
    let data = ObservedMatrix::fully_observed(Matrix::zeros(3, 2)).unwrap();
    let prob = BmcProblem::new(data, WeightedGraph::empty(3), WeightedGraph::empty(2)).unwrap();
    let a = prob.operator(PenaltyParams::uniform(5.0).unwrap()).unwrap().assemble_sparse(1_000_000).unwrap().to_dense();
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn assembly_of_two_by_two_by_hand() {
    let data = ObservedMatrix::fully_observed(Matrix::zeros(2, 2)).unwrap();
    let prob = BmcProblem::new(data, WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap(), WeightedGraph::empty(2)).unwrap();
    let a = prob.operator(PenaltyParams::new(1.0, 0.0).unwrap()).unwrap().assemble_sparse(100).unwrap().to_dense();
    let want = vec![
        vec![2.0, -1.0, 0.0, 0.0],
        vec![-1.0, 2.0, 0.0, 0.0],
        vec![0.0, 0.0, 2.0, -1.0],
        vec![0.0, 0.0, -1.0, 2.0],
    ];
    assert_eq!(a, want);
}

#[test]
fn assembly_agrees_with_apply_on_probes() {
    let prob = problem(5, 4, 0.3, 4);
    let op = prob.operator(PenaltyParams::new(0.3, 4.0).unwrap()).unwrap();
    let a = op.assemble_sparse(1_000_000).unwrap();
    let mut r = rng(10);
    for _ in 0..20 {
        let v = random_vec(20, &mut r);
        let d = a.mul_vec(&v).iter().zip(op.apply(&v).unwrap()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-12);
    }
    assert!(matches!(op.assemble_sparse(10), Err(Error::CapExceeded { .. })));
}

#[test]
fn projection_contract() {
    let mut r = rng(11);
    let v = random_vec(12, &mut r);
    assert_eq!(Mask::full(4, 3).project(&v), v);
    assert!(Mask::empty(4, 3).project(&v).iter().all(|&x| x == 0.0));
    let m = random_observed(4, 3, 0.5, &mut r).mask().clone();
    assert_eq!(m.project(&m.project(&v)), m.project(&v));
}

#[test]
fn observed_matrix_needs_an_observation() {
    assert!(ObservedMatrix::new(Matrix::zeros(2, 2), Mask::empty(2, 2)).is_err());
    let mut x = Matrix::zeros(2, 2);
    x.set(0, 0, f64::NAN);
    assert!(ObservedMatrix::new(x.clone(), Mask::full(2, 2)).is_err());
    assert!(ObservedMatrix::new(x, Mask::from_entries(2, 2, [(1, 1)]).unwrap()).is_ok());
}

#[test]
fn positive_definite_when_every_patch_is_observed() {
    let mut r = rng(12);
    let mut checked = 0;
    while checked < 10 {
        let n = r.random_range(2..9);
        let p = r.random_range(2..8);
        let prob = problem(n, p, 0.4, r.random());
        if !bmc::completion::check_assumption(&prob).holds {
            continue;
        }
        let op = prob.operator(PenaltyParams::new(0.5, 2.0).unwrap()).unwrap();
        let ev = jacobi_eigenvalues(&op.to_dense().unwrap());
        assert!(ev[0] > 0.0, "{ev:?}");
        checked += 1;
    }
}

fn arb_case() -> impl Strategy<Value = (u64, usize, usize, f64, f64)> {
    (any::<u64>(), 2usize..7, 2usize..7, 0.0f64..10.0, 0.0f64..10.0)
}

proptest! {
    #[test]
    fn operator_is_linear_symmetric_and_psd((seed, n, p, gr, gc) in arb_case()) {
        let prob = problem(n, p, 0.5, seed);
        let op = prob.operator(PenaltyParams::new(gr, gc).unwrap()).unwrap();
        let mut r = rng(seed ^ 0x55);
        let u = random_vec(n * p, &mut r);
        let v = random_vec(n * p, &mut r);
        let alpha = r.random_range(-3.0..3.0);
        let su = op.apply(&u).unwrap();
        let sv = op.apply(&v).unwrap();
        let comb: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + alpha * b).collect();
        let lhs = op.apply(&comb).unwrap();
        let scale = lhs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for k in 0..n * p {
            prop_assert!((lhs[k] - su[k] - alpha * sv[k]).abs() <= 1e-12 * scale);
        }
        let usv: f64 = u.iter().zip(&sv).map(|(a, b)| a * b).sum();
        let vsu: f64 = v.iter().zip(&su).map(|(a, b)| a * b).sum();
        prop_assert!((usv - vsu).abs() <= 1e-10 * usv.abs().max(vsu.abs()).max(1.0));
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let vsv: f64 = v.iter().zip(&sv).map(|(a, b)| a * b).sum();
        prop_assert!(vsv >= -1e-10 * vv);
    }
}
