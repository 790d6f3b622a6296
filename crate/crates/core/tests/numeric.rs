mod common;

use common::{grad_check, rand_tensor, rng};
use dualgrain::tensor::{matmul, row_softmax, Graph, NodeId, Tensor};
use proptest::prelude::*;
use rand::Rng;

const TOL: f64 = 1e-4;

/// Scalar probe `sum(x ⊙ w)` with fixed random weights, so every output
/// entry gets a distinct upstream gradient.
fn probe(g: &mut Graph, x: NodeId, seed: u64) -> NodeId {
    let (r, c) = g.value(x).shape();
    let w = g.constant(rand_tensor(&mut rng(seed), r, c));
    let m = g.mul(x, w).unwrap();
    g.sum(m)
}

fn dims(r: &mut impl Rng) -> (usize, usize, usize) {
    (r.gen_range(1..=8), r.gen_range(1..=8), r.gen_range(1..=8))
}

#[test]
fn every_differentiable_op_matches_finite_differences() {
    let mut r = rng(11);
    for trial in 0..10u64 {
        let (m, k, n) = dims(&mut r);
        let a = rand_tensor(&mut r, m, k);
        let b = rand_tensor(&mut r, k, n);
        let same = rand_tensor(&mut r, m, k);
        let s = rand_tensor(&mut r, 1, 1);
        let sq = rand_tensor(&mut r, m, m);
        let idx: Vec<usize> = (0..r.gen_range(1..=8)).map(|_| r.gen_range(0..m)).collect();

        let checks: Vec<(&str, f64)> = vec![
            (
                "matmul",
                grad_check(&[a.clone(), b.clone()], |g, x| {
                    let y = g.matmul(x[0], x[1]).unwrap();
                    probe(g, y, trial)
                }),
            ),
            (
                "transpose",
                grad_check(std::slice::from_ref(&a), |g, x| {
                    let y = g.transpose(x[0]);
                    probe(g, y, trial)
                }),
            ),
            (
                "add",
                grad_check(&[a.clone(), same.clone()], |g, x| {
                    let y = g.add(x[0], x[1]).unwrap();
                    probe(g, y, trial)
                }),
            ),
            (
                "mul",
                grad_check(&[a.clone(), same.clone()], |g, x| {
                    let y = g.mul(x[0], x[1]).unwrap();
                    probe(g, y, trial)
                }),
            ),
            (
                "scale",
                grad_check(std::slice::from_ref(&a), |g, x| {
                    let y = g.scale(x[0], -1.7).unwrap();
                    probe(g, y, trial)
                }),
            ),
            (
                "scale_by",
                grad_check(&[a.clone(), s.clone()], |g, x| {
                    let y = g.scale_by(x[0], x[1]).unwrap();
                    probe(g, y, trial)
                }),
            ),
            (
                "exp",
                grad_check(std::slice::from_ref(&a), |g, x| {
                    let y = g.exp(x[0]).unwrap();
                    probe(g, y, trial)
                }),
            ),
            (
                "row_softmax",
                grad_check(std::slice::from_ref(&a), |g, x| {
                    let y = g.row_softmax(x[0]).unwrap();
                    probe(g, y, trial)
                }),
            ),
            (
                "l2_normalize",
                grad_check(std::slice::from_ref(&a), |g, x| {
                    let y = g.l2_normalize(x[0]).unwrap();
                    probe(g, y, trial)
                }),
            ),
            (
                "gather_rows",
                grad_check(std::slice::from_ref(&a), |g, x| {
                    let y = g.gather_rows(x[0], &idx).unwrap();
                    probe(g, y, trial)
                }),
            ),
            (
                "mean_rows",
                grad_check(std::slice::from_ref(&a), |g, x| {
                    let y = g.mean_rows(x[0]).unwrap();
                    probe(g, y, trial)
                }),
            ),
            (
                "concat_rows",
                grad_check(&[a.clone(), same.clone()], |g, x| {
                    let y = g.concat_rows(&[x[0], x[1]]).unwrap();
                    probe(g, y, trial)
                }),
            ),
            (
                "diag_cross_entropy",
                grad_check(std::slice::from_ref(&sq), |g, x| {
                    g.diag_cross_entropy(x[0]).unwrap()
                }),
            ),
        ];
        for (name, err) in checks {
            assert!(err < TOL, "trial {trial}: {name} relative error {err:e}");
        }
    }
}

#[test]
fn random_composite_graph_matches_finite_differences() {
    let mut r = rng(5);
    for trial in 0..10u64 {
        let (m, k, n) = dims(&mut r);
        let inputs = [
            rand_tensor(&mut r, m, k),
            rand_tensor(&mut r, k, n),
            rand_tensor(&mut r, 1, 1),
        ];
        let err = grad_check(&inputs, |g, x| {
            let p = g.matmul(x[0], x[1]).unwrap();
            let p = g.scale_by(p, x[2]).unwrap();
            let sm = g.row_softmax(p).unwrap();
            let nrm = g.l2_normalize(p).unwrap();
            let both = g.mul(sm, nrm).unwrap();
            let e = g.exp(both).unwrap();
            probe(g, e, trial)
        });
        assert!(err < TOL, "trial {trial}: {err:e}");
    }
}

#[test]
fn shared_leaf_accumulates_both_paths() {
    let mut r = rng(9);
    let a = rand_tensor(&mut r, 3, 4);
    let w = rand_tensor(&mut r, 4, 4);
    // a feeds a matmul and an elementwise square.
    let err = grad_check(&[a.clone(), w], |g, x| {
        let p = g.matmul(x[0], x[1]).unwrap();
        let sq = g.mul(x[0], x[0]).unwrap();
        let s = g.add(p, sq).unwrap();
        probe(g, s, 1)
    });
    assert!(err < TOL, "{err:e}");

    let mut g = Graph::new();
    let x = g.param(a.clone());
    let y = g.add(x, x).unwrap();
    let s = g.sum(y);
    g.backward(s).unwrap();
    assert!(g.grad(x).unwrap().data().iter().all(|&v| v == 2.0));
}

fn product(a: &Tensor, b: &Tensor) -> Tensor {
    matmul(a, b).unwrap()
}

proptest! {
    #[test]
    fn matmul_is_associative(seed in any::<u64>(), m in 1usize..6, k in 1usize..6, l in 1usize..6, n in 1usize..6) {
        let mut r = rng(seed);
        let (a, b, c) = (rand_tensor(&mut r, m, k), rand_tensor(&mut r, k, l), rand_tensor(&mut r, l, n));
        let left = product(&product(&a, &b), &c);
        let right = product(&a, &product(&b, &c));
        for (x, y) in left.data().iter().zip(right.data()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 1..10), 1..6)) {
        let n = rows[0].len();
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|mut r| { r.resize(n, 0.0); r }).collect();
        let s = row_softmax(&Tensor::from_rows(&rows).unwrap()).unwrap();
        for r in 0..s.rows() {
            prop_assert!(s.row(r).iter().all(|&v| v >= 0.0));
            prop_assert!((s.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
