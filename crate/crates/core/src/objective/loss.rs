use crate::error::{Error, Result};
use crate::tensor::{Graph, NodeId, Tensor, DEFAULT_EPS};

/// `v.t / (|v| |t|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(v: &[f64], t: &[f64]) -> Result<f64> {
    if v.len() != t.len() {
        return Err(Error::Shape {
            op: "cosine_similarity",
            lhs: (1, v.len()),
            rhs: (1, t.len()),
        });
    }
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nt = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    for norm in [nv, nt] {
        if !(norm > DEFAULT_EPS) {
            return Err(Error::Degenerate {
                norm,
                eps: DEFAULT_EPS,
            });
        }
    }
    let dot: f64 = v.iter().zip(t).map(|(a, b)| a * b).sum();
    Ok((dot / (nv * nt)).clamp(-1.0, 1.0))
}

/// Symmetric InfoNCE over a square similarity matrix whose diagonal holds
/// the matched pairs. `log_tau` is a `1 x 1` node.
pub fn info_nce_from_similarity(g: &mut Graph, sim: NodeId, log_tau: NodeId) -> Result<NodeId> {
    let neg = g.scale(log_tau, -1.0)?;
    let inv_tau = g.exp(neg)?;
    let logits = g.scale_by(sim, inv_tau)?;
    let rows = g.diag_cross_entropy(logits)?;
    let logits_t = g.transpose(logits);
    let cols = g.diag_cross_entropy(logits_t)?;
    let both = g.add(rows, cols)?;
    g.scale(both, 0.5)
}

/// InfoNCE between `N x e` image and text embedding nodes with unit-norm rows.
pub fn info_nce_node(
    g: &mut Graph,
    images: NodeId,
    texts: NodeId,
    log_tau: NodeId,
) -> Result<NodeId> {
    let (vi, vt) = (g.value(images).shape(), g.value(texts).shape());
    if vi != vt || vi.0 == 0 {
        return Err(Error::Param(format!(
            "info_nce needs matching non-empty batches, got {vi:?} and {vt:?}"
        )));
    }
    let tt = g.transpose(texts);
    let sim = g.matmul(images, tt)?;
    info_nce_from_similarity(g, sim, log_tau)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Param(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    Ok(())
}

/// Loss value for a precomputed similarity matrix.
pub fn info_nce_similarity(sim: &Tensor, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let mut g = Graph::new();
    let s = g.constant(sim.clone());
    let lt = g.constant(Tensor::scalar(tau.ln()));
    let out = info_nce_from_similarity(&mut g, s, lt)?;
    g.value(out).item()
}

/// Loss value for unit-norm `N x e` image and text embeddings.
pub fn info_nce(images: &Tensor, texts: &Tensor, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    for t in [images, texts] {
        for r in 0..t.rows() {
            let n = t.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
            if (n - 1.0).abs() > 1e-6 {
                return Err(Error::Param(format!(
                    "row {r} is not unit-norm (|x| = {n})"
                )));
            }
        }
    }
    let mut g = Graph::new();
    let v = g.constant(images.clone());
    let t = g.constant(texts.clone());
    let lt = g.constant(Tensor::scalar(tau.ln()));
    let out = info_nce_node(&mut g, v, t, lt)?;
    g.value(out).item()
}

/// One step's dual-granularity loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss {
    pub loss_long: f64,
    pub loss_short: f64,
    pub alpha: f64,
    pub total: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Param(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(())
}

pub fn dual_loss(loss_long: f64, loss_short: f64, alpha: f64) -> Result<BatchLoss> {
    check_alpha(alpha)?;
    if !loss_long.is_finite() || !loss_short.is_finite() {
        return Err(Error::NonFinite("dual_loss input"));
    }
    Ok(BatchLoss {
        loss_long,
        loss_short,
        alpha,
        total: alpha * loss_long + (1.0 - alpha) * loss_short,
    })
}

/// Taped `alpha * long + (1 - alpha) * short`.
pub fn dual_loss_node(g: &mut Graph, long: NodeId, short: NodeId, alpha: f64) -> Result<NodeId> {
    check_alpha(alpha)?;
    let a = g.scale(long, alpha)?;
    let b = g.scale(short, 1.0 - alpha)?;
    g.add(a, b)
}
