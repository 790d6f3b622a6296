//! Dense rank-2 tensors and a taped reverse-mode graph.
//!
//! Every value is an `rows x cols` row-major `f64` matrix; vectors are `1 x n`
//! and scalars `1 x 1`. A [`Graph`] is an append-only tape: each operation
//! pushes a node holding its output, so inputs always precede outputs and
//! backpropagation is a single reverse sweep.
//!
//! ```
//! use dualgrain::tensor::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let x = g.param(Tensor::from_vec(1, 2, vec![3.0, 4.0]).unwrap());
//! let y = g.mul(x, x).unwrap();
//! let s = g.sum(y);
//! g.backward(s).unwrap();
//! assert_eq!(g.grad(x).unwrap().data(), &[6.0, 8.0]);
//! ```

use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "from_vec",
                lhs: (rows, cols),
                rhs: (data.len(), 1),
            });
        }
        Ok(Self {
            rows,
            cols,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![v],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Self {
            rows: 1,
            cols: n,
            data,
            requires_grad: false,
            grad: None,
        }
    }

    /// Stacks equal-width rows into one matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Shape {
                    op: "from_rows",
                    lhs: (1, cols),
                    rhs: (1, r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn with_grad(mut self, requires_grad: bool) -> Self {
        self.requires_grad = requires_grad;
        self
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Scalar value of a `1 x 1` tensor.
    pub fn item(&self) -> Result<f64> {
        if self.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "item() on non-scalar tensor of shape {:?}",
                self.shape()
            )));
        }
        Ok(self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn accumulate_grad(&mut self, g: &[f64]) {
        match &mut self.grad {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => self.grad = Some(g.to_vec()),
        }
    }
}

fn check_finite(t: Tensor, op: &'static str) -> Result<Tensor> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(Error::NonFinite(op))
    }
}

/// Plain (untaped) matrix product.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.cols != b.rows {
        return Err(Error::Shape {
            op: "matmul",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a.data[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    check_finite(Tensor::from_vec(m, n, out)?, "matmul")
}

pub fn transpose(a: &Tensor) -> Tensor {
    let mut out = vec![0.0; a.len()];
    for i in 0..a.rows {
        for j in 0..a.cols {
            out[j * a.rows + i] = a.data[i * a.cols + j];
        }
    }
    Tensor {
        rows: a.cols,
        cols: a.rows,
        data: out,
        requires_grad: false,
        grad: None,
    }
}

/// Numerically stable softmax of every row.
pub fn row_softmax(a: &Tensor) -> Result<Tensor> {
    if !a.is_finite() {
        return Err(Error::NonFinite("row_softmax input"));
    }
    let mut out = a.data.clone();
    for row in out.chunks_mut(a.cols.max(1)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        row.iter_mut().for_each(|v| *v /= z);
    }
    check_finite(Tensor::from_vec(a.rows, a.cols, out)?, "row_softmax")
}

/// Divides every row by its Euclidean norm; rows with norm `<= eps` are rejected.
pub fn l2_normalize(a: &Tensor, eps: f64) -> Result<Tensor> {
    if a.cols == 0 {
        return Err(Error::Input("l2_normalize of empty vector".into()));
    }
    let mut out = a.data.clone();
    for row in out.chunks_mut(a.cols) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > eps) {
            return Err(Error::Degenerate { norm, eps });
        }
        row.iter_mut().for_each(|v| *v /= norm);
    }
    check_finite(Tensor::from_vec(a.rows, a.cols, out)?, "l2_normalize")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    ScaleBy(NodeId, NodeId),
    Exp(NodeId),
    RowSoftmax(NodeId),
    L2Normalize(NodeId),
    GatherRows(NodeId, Vec<usize>),
    MeanRows(NodeId),
    ConcatRows(Vec<NodeId>),
    Sum(NodeId),
    DiagCrossEntropy(NodeId),
}

impl Op {
    pub fn tag(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::ScaleBy(..) => "scale_by",
            Op::Exp(_) => "exp",
            Op::RowSoftmax(_) => "row_softmax",
            Op::L2Normalize(_) => "l2_normalize",
            Op::GatherRows(..) => "gather_rows",
            Op::MeanRows(_) => "mean_rows",
            Op::ConcatRows(_) => "concat_rows",
            Op::Sum(_) => "sum",
            Op::DiagCrossEntropy(_) => "diag_cross_entropy",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Append-only operation tape.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
    eps: f64,
}

impl Graph {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            eps: DEFAULT_EPS,
        }
    }

    pub fn with_eps(eps: f64) -> Self {
        Self {
            nodes: Vec::new(),
            eps,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, t: Tensor) -> NodeId {
        self.push(Op::Leaf, t)
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, t: Tensor) -> NodeId {
        self.leaf(t.with_grad(true))
    }

    pub fn constant(&mut self, t: Tensor) -> NodeId {
        self.leaf(t.with_grad(false))
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.0].op
    }

    pub fn grad(&self, id: NodeId) -> Option<Tensor> {
        let v = &self.nodes[id.0].value;
        v.grad
            .as_ref()
            .map(|g| Tensor::from_vec(v.rows, v.cols, g.clone()).expect("grad shape"))
    }

    pub fn take_grad(&mut self, id: NodeId) -> Option<Vec<f64>> {
        self.nodes[id.0].value.grad.take()
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].value.requires_grad
    }

    fn push_derived(&mut self, op: Op, inputs: &[NodeId], value: Tensor) -> NodeId {
        let rg = inputs.iter().any(|&i| self.rg(i));
        self.push(op, value.with_grad(rg))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = matmul(self.value(a), self.value(b))?;
        Ok(self.push_derived(Op::MatMul(a, b), &[a, b], out))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let out = transpose(self.value(a));
        self.push_derived(Op::Transpose(a), &[a], out)
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::Shape {
                op,
                lhs: sa,
                rhs: sb,
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x + y).collect();
        let out = check_finite(Tensor::from_vec(va.rows, va.cols, data)?, "add")?;
        Ok(self.push_derived(Op::Add(a, b), &[a, b], out))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x * y).collect();
        let out = check_finite(Tensor::from_vec(va.rows, va.cols, data)?, "mul")?;
        Ok(self.push_derived(Op::Mul(a, b), &[a, b], out))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let va = self.value(a);
        let data = va.data.iter().map(|x| x * c).collect();
        let out = check_finite(Tensor::from_vec(va.rows, va.cols, data)?, "scale")?;
        Ok(self.push_derived(Op::Scale(a, c), &[a], out))
    }

    /// Multiplies every entry of `a` by the `1 x 1` node `s`.
    pub fn scale_by(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        let c = self.value(s).item()?;
        let va = self.value(a);
        let data = va.data.iter().map(|x| x * c).collect();
        let out = check_finite(Tensor::from_vec(va.rows, va.cols, data)?, "scale_by")?;
        Ok(self.push_derived(Op::ScaleBy(a, s), &[a, s], out))
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        let data = va.data.iter().map(|x| x.exp()).collect();
        let out = check_finite(Tensor::from_vec(va.rows, va.cols, data)?, "exp")?;
        Ok(self.push_derived(Op::Exp(a), &[a], out))
    }

    pub fn row_softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let out = row_softmax(self.value(a))?;
        Ok(self.push_derived(Op::RowSoftmax(a), &[a], out))
    }

    /// Row-wise L2 normalization using the graph's eps guard.
    pub fn l2_normalize(&mut self, a: NodeId) -> Result<NodeId> {
        let out = l2_normalize(self.value(a), self.eps)?;
        Ok(self.push_derived(Op::L2Normalize(a), &[a], out))
    }

    pub fn gather_rows(&mut self, a: NodeId, idx: &[usize]) -> Result<NodeId> {
        let va = self.value(a);
        let mut data = Vec::with_capacity(idx.len() * va.cols);
        for &i in idx {
            if i >= va.rows {
                return Err(Error::Input(format!(
                    "row index {i} out of range for {} rows",
                    va.rows
                )));
            }
            data.extend_from_slice(va.row(i));
        }
        let out = Tensor::from_vec(idx.len(), va.cols, data)?;
        Ok(self.push_derived(Op::GatherRows(a, idx.to_vec()), &[a], out))
    }

    pub fn mean_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        if va.rows == 0 {
            return Err(Error::Input("mean over zero rows".into()));
        }
        let mut out = vec![0.0; va.cols];
        for r in 0..va.rows {
            out.iter_mut().zip(va.row(r)).for_each(|(o, v)| *o += v);
        }
        let m = va.rows as f64;
        out.iter_mut().for_each(|o| *o /= m);
        Ok(self.push_derived(Op::MeanRows(a), &[a], Tensor::row_vector(out)))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let Some(&first) = parts.first() else {
            return Err(Error::Input("concat of zero tensors".into()));
        };
        let cols = self.value(first).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols != cols {
                return Err(Error::Shape {
                    op: "concat_rows",
                    lhs: self.value(first).shape(),
                    rhs: v.shape(),
                });
            }
            data.extend_from_slice(&v.data);
            rows += v.rows;
        }
        let out = Tensor::from_vec(rows, cols, data)?;
        Ok(self.push_derived(Op::ConcatRows(parts.to_vec()), parts, out))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data.iter().sum();
        self.push_derived(Op::Sum(a), &[a], Tensor::scalar(s))
    }

    /// Mean over rows of `-log softmax(row i)[i]` for a square logit matrix.
    pub fn diag_cross_entropy(&mut self, logits: NodeId) -> Result<NodeId> {
        let v = self.value(logits);
        if v.rows != v.cols || v.rows == 0 {
            return Err(Error::Shape {
                op: "diag_cross_entropy",
                lhs: v.shape(),
                rhs: (v.rows, v.rows),
            });
        }
        let mut total = 0.0;
        for i in 0..v.rows {
            let row = v.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            total += lse - row[i];
        }
        let out = check_finite(Tensor::scalar(total / v.rows as f64), "diag_cross_entropy")?;
        Ok(self.push_derived(Op::DiagCrossEntropy(logits), &[logits], out))
    }

    /// Reverse sweep from a scalar root. Leaf gradients accumulate into each
    /// leaf's grad slot; a leaf feeding several consumers receives the sum.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        if self.value(root).shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward root must be scalar, got {:?}",
                self.value(root).shape()
            )));
        }
        let n = root.0 + 1;
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; n];
        adj[root.0] = Some(vec![1.0]);

        for id in (0..n).rev() {
            let Some(g) = adj[id].take() else { continue };
            if !self.nodes[id].value.requires_grad {
                continue;
            }
            let op = self.nodes[id].op.clone();
            match op {
                Op::Leaf => {
                    self.nodes[id].value.accumulate_grad(&g);
                }
                Op::MatMul(a, b) => {
                    let gt =
                        Tensor::from_vec(self.nodes[id].value.rows, self.nodes[id].value.cols, g)?;
                    if self.rg(a) {
                        let da = matmul(&gt, &transpose(self.value(b)))?;
                        add_into(&mut adj[a.0], &da.data);
                    }
                    if self.rg(b) {
                        let db = matmul(&transpose(self.value(a)), &gt)?;
                        add_into(&mut adj[b.0], &db.data);
                    }
                }
                Op::Transpose(a) => {
                    let v = &self.nodes[id].value;
                    let gt = Tensor::from_vec(v.rows, v.cols, g)?;
                    add_into(&mut adj[a.0], &transpose(&gt).data);
                }
                Op::Add(a, b) => {
                    if self.rg(a) {
                        add_into(&mut adj[a.0], &g);
                    }
                    if self.rg(b) {
                        add_into(&mut adj[b.0], &g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.rg(a) {
                        let d: Vec<f64> = g
                            .iter()
                            .zip(&self.value(b).data)
                            .map(|(x, y)| x * y)
                            .collect();
                        add_into(&mut adj[a.0], &d);
                    }
                    if self.rg(b) {
                        let d: Vec<f64> = g
                            .iter()
                            .zip(&self.value(a).data)
                            .map(|(x, y)| x * y)
                            .collect();
                        add_into(&mut adj[b.0], &d);
                    }
                }
                Op::Scale(a, c) => {
                    let d: Vec<f64> = g.iter().map(|x| x * c).collect();
                    add_into(&mut adj[a.0], &d);
                }
                Op::ScaleBy(a, s) => {
                    let c = self.value(s).data[0];
                    if self.rg(a) {
                        let d: Vec<f64> = g.iter().map(|x| x * c).collect();
                        add_into(&mut adj[a.0], &d);
                    }
                    if self.rg(s) {
                        let ds: f64 = g.iter().zip(&self.value(a).data).map(|(x, y)| x * y).sum();
                        add_into(&mut adj[s.0], &[ds]);
                    }
                }
                Op::Exp(a) => {
                    let d: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[id].value.data)
                        .map(|(x, y)| x * y)
                        .collect();
                    add_into(&mut adj[a.0], &d);
                }
                Op::RowSoftmax(a) => {
                    let y = &self.nodes[id].value;
                    let mut d = vec![0.0; g.len()];
                    for r in 0..y.rows {
                        let yr = y.row(r);
                        let gr = &g[r * y.cols..(r + 1) * y.cols];
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for c in 0..y.cols {
                            d[r * y.cols + c] = yr[c] * (gr[c] - dot);
                        }
                    }
                    add_into(&mut adj[a.0], &d);
                }
                Op::L2Normalize(a) => {
                    let y = &self.nodes[id].value;
                    let x = self.value(a);
                    let mut d = vec![0.0; g.len()];
                    for r in 0..y.rows {
                        let xr = x.row(r);
                        let yr = y.row(r);
                        let gr = &g[r * y.cols..(r + 1) * y.cols];
                        let norm = xr.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for c in 0..y.cols {
                            d[r * y.cols + c] = (gr[c] - yr[c] * dot) / norm;
                        }
                    }
                    add_into(&mut adj[a.0], &d);
                }
                Op::GatherRows(a, idx) => {
                    let src = self.value(a);
                    let cols = src.cols;
                    let slot = adj[a.0].get_or_insert_with(|| vec![0.0; src.len()]);
                    for (k, &i) in idx.iter().enumerate() {
                        let dst = &mut slot[i * cols..(i + 1) * cols];
                        dst.iter_mut()
                            .zip(&g[k * cols..(k + 1) * cols])
                            .for_each(|(o, v)| *o += v);
                    }
                }
                Op::MeanRows(a) => {
                    let src = self.value(a);
                    let m = src.rows as f64;
                    let mut d = Vec::with_capacity(src.len());
                    for _ in 0..src.rows {
                        d.extend(g.iter().map(|v| v / m));
                    }
                    add_into(&mut adj[a.0], &d);
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let len = self.value(p).len();
                        if self.rg(p) {
                            add_into(&mut adj[p.0], &g[off..off + len]);
                        }
                        off += len;
                    }
                }
                Op::Sum(a) => {
                    let d = vec![g[0]; self.value(a).len()];
                    add_into(&mut adj[a.0], &d);
                }
                Op::DiagCrossEntropy(a) => {
                    let v = self.value(a);
                    let n = v.rows;
                    let sm = row_softmax(v)?;
                    let scale = g[0] / n as f64;
                    let mut d = sm.data;
                    for i in 0..n {
                        d[i * n + i] -= 1.0;
                    }
                    d.iter_mut().for_each(|x| *x *= scale);
                    add_into(&mut adj[a.0], &d);
                }
            }
        }
        Ok(())
    }
}

fn add_into(slot: &mut Option<Vec<f64>>, g: &[f64]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        None => *slot = Some(g.to_vec()),
    }
}
