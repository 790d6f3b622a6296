//! Straightforward reimplementations used as test references.

use dualgrain::tensor::Tensor;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Direct evaluation of the symmetric loss from a similarity matrix.
pub fn reference_loss(sim: &[Vec<f64>], tau: f64) -> f64 {
    let n = sim.len();
    let lse = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    };
    let mut total = 0.0;
    for i in 0..n {
        let row = lse(&mut (0..n).map(|j| sim[i][j] / tau));
        let col = lse(&mut (0..n).map(|j| sim[j][i] / tau));
        total += (row - sim[i][i] / tau) + (col - sim[i][i] / tau);
    }
    total / (2.0 * n as f64)
}

pub fn sims(v: &Tensor, t: &Tensor) -> Vec<Vec<f64>> {
    (0..v.rows())
        .map(|i| {
            (0..t.rows())
                .map(|j| v.row(i).iter().zip(t.row(j)).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect()
}

/// Recall by fully sorting the gallery (stable, so equal scores keep index order).
pub fn sort_recall(queries: &Tensor, gallery: &Tensor, gt: &[Vec<usize>]) -> [f64; 3] {
    let mut hits = [0usize; 3];
    for (q, answers) in gt.iter().enumerate() {
        let mut order: Vec<usize> = (0..gallery.rows()).collect();
        let s: Vec<f64> = order
            .iter()
            .map(|&j| dot(queries.row(q), gallery.row(j)))
            .collect();
        order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
        let first = order.iter().position(|j| answers.contains(j)).unwrap();
        for (h, k) in hits.iter_mut().zip([1, 5, 10]) {
            if first < k {
                *h += 1;
            }
        }
    }
    hits.map(|h| 100.0 * h as f64 / gt.len() as f64)
}
