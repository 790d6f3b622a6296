#![allow(dead_code)]

pub mod geometry;
pub mod oracle;

use dualgrain::tensor::{Graph, NodeId, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_tensor(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

pub fn unit_rows(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let mut t = rand_tensor(rng, rows, cols);
    for r in 0..rows {
        let n = t.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
        for c in 0..cols {
            let v = t.get(r, c) / n;
            t.set(r, c, v);
        }
    }
    t
}

/// Norm-wise relative error between two gradient vectors; vanishing
/// gradients (norm below 1e-6) are compared in absolute terms.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    diff / scale.max(1e-6)
}

/// Largest relative error between backward() and central differences over
/// every input of a scalar-valued graph function.
pub fn grad_check<F>(inputs: &[Tensor], f: F) -> f64
where
    F: Fn(&mut Graph, &[NodeId]) -> NodeId,
{
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let root = f(&mut g, &ids);
    g.backward(root).unwrap();
    let eval = |ts: &[Tensor]| {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = ts.iter().map(|t| g.constant(t.clone())).collect();
        let root = f(&mut g, &ids);
        g.value(root).item().unwrap()
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (k, id) in ids.iter().enumerate() {
        let analytic = g
            .grad(*id)
            .map(|t| t.into_data())
            .unwrap_or_else(|| vec![0.0; inputs[k].len()]);
        let mut numeric = Vec::with_capacity(analytic.len());
        for i in 0..inputs[k].len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= h;
            numeric.push((eval(&plus) - eval(&minus)) / (2.0 * h));
        }
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    worst
}
