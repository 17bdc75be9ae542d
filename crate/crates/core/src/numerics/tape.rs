//! Reverse-mode differentiation over dense 2-D tensors.
//!
//! A [`Graph`] records every operation as a node whose parents always have
//! smaller ids, so the graph is acyclic by construction and backward is a
//! single descending sweep. Stop-gradient nodes are leaves that copy their
//! input's value and have no parents.

use crate::error::{EcatError, Result};
use crate::numerics::functional::{clamp_prob, PROB_CLAMP};
use crate::numerics::tensor::{matmul_a_bt, matmul_at_b, matmul_raw, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Concat(Vec<NodeId>),
    Mean(NodeId),
    Sum(NodeId),
    Affine(NodeId, f64),
    Gather(NodeId, Vec<usize>),
    RowDot(NodeId, NodeId),
    Reshape(NodeId),
    MaskedSoftmax(NodeId, Vec<bool>),
    SumGroups(NodeId, usize),
    RepeatRows(NodeId, usize),
    Cosine(NodeId, NodeId),
    Bce(NodeId, Vec<f64>),
}

#[derive(Debug)]
struct NodeData {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

/// Differentiation graph. Confined to one thread from construction through
/// backward.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<NodeData>,
    grads: Vec<Option<Tensor>>,
    stops: Vec<NodeId>,
    pinned: Option<std::collections::VecDeque<Tensor>>,
}

fn dim_err(op: &str, a: &[usize], b: &[usize]) -> EcatError {
    EcatError::Dimension(format!("{op}: incompatible shapes {a:?} and {b:?}"))
}

fn two_d(op: &str, t: &Tensor) -> Result<(usize, usize)> {
    if t.shape().len() != 2 {
        return Err(EcatError::Dimension(format!("{op}: expected 2-D tensor, got {:?}", t.shape())));
    }
    Ok((t.shape()[0], t.shape()[1]))
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool, name: &str) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(EcatError::NonFinite(format!("output of {name} has shape {:?}", value.shape())));
        }
        self.nodes.push(NodeData { value, requires_grad, op });
        self.grads.push(None);
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(NodeData { value, requires_grad: true, op: Op::Leaf });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    /// Constant leaf; never accumulates gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(NodeData { value, requires_grad: false, op: Op::Leaf });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Leaves created with [`Graph::param`].
    pub fn trainable_leaves(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.requires_grad && matches!(n.op, Op::Leaf))
            .map(|(i, _)| NodeId(i))
            .collect()
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Accumulated gradient, `None` if nothing ever reached the node.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    pub fn grad_or_zeros(&self, id: NodeId) -> Tensor {
        self.grads[id.0].clone().unwrap_or_else(|| Tensor::zeros(self.nodes[id.0].value.shape()))
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    /// Graph whose stop-gradient nodes output `values` in creation order
    /// instead of their inputs. Finite-difference checks use this to hold
    /// stopped quantities at their unperturbed values.
    pub fn with_pinned_stops(values: Vec<Tensor>) -> Self {
        Graph { pinned: Some(values.into()), ..Self::default() }
    }

    /// Values of the stop-gradient nodes, in creation order.
    pub fn stop_values(&self) -> Vec<Tensor> {
        self.stops.iter().map(|id| self.nodes[id.0].value.clone()).collect()
    }

    /// Same forward value, no backward path to `x` or anything upstream.
    pub fn stop_gradient(&mut self, x: NodeId) -> NodeId {
        let value = match self.pinned.as_mut().and_then(|p| p.pop_front()) {
            Some(v) if v.shape() == self.nodes[x.0].value.shape() => v,
            _ => self.nodes[x.0].value.clone(),
        };
        let id = self.constant(value);
        self.stops.push(id);
        id
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (m, k) = two_d("matmul", va)?;
        let (k2, n) = two_d("matmul", vb)?;
        if k != k2 {
            return Err(dim_err("matmul", va.shape(), vb.shape()));
        }
        let out = Tensor::from_parts(vec![m, n], matmul_raw(va.data(), vb.data(), m, k, n));
        let rg = self.rg(&[a, b]);
        self.push(out, Op::MatMul(a, b), rg, "matmul")
    }

    /// Elementwise sum; `b` may also be a `[1, n]` row broadcast over `a`'s rows.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let out = if va.shape() == vb.shape() {
            let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
            Tensor::from_parts(va.shape().to_vec(), data)
        } else {
            let (m, n) = two_d("add", va)?;
            if vb.shape() != [1, n] {
                return Err(dim_err("add", va.shape(), vb.shape()));
            }
            let bias = vb.data();
            let mut data = va.data().to_vec();
            for r in 0..m {
                for (x, y) in data[r * n..(r + 1) * n].iter_mut().zip(bias) {
                    *x += y;
                }
            }
            Tensor::from_parts(vec![m, n], data)
        };
        let rg = self.rg(&[a, b]);
        self.push(out, Op::Add(a, b), rg, "add")
    }

    /// Elementwise product; either side may be a `[m, 1]` column broadcast.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let out = if va.shape() == vb.shape() {
            let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
            Tensor::from_parts(va.shape().to_vec(), data)
        } else {
            let (ma, na) = two_d("mul", va)?;
            let (mb, nb) = two_d("mul", vb)?;
            if ma != mb || (na != 1 && nb != 1) {
                return Err(dim_err("mul", va.shape(), vb.shape()));
            }
            let n = na.max(nb);
            let mut data = Vec::with_capacity(ma * n);
            for r in 0..ma {
                for c in 0..n {
                    let x = if na == 1 { va.data()[r] } else { va.data()[r * n + c] };
                    let y = if nb == 1 { vb.data()[r] } else { vb.data()[r * n + c] };
                    data.push(x * y);
                }
            }
            Tensor::from_parts(vec![ma, n], data)
        };
        let rg = self.rg(&[a, b]);
        self.push(out, Op::Mul(a, b), rg, "mul")
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let out = self.nodes[a.0].value.map(|v| v.max(0.0));
        let rg = self.rg(&[a]);
        self.push(out, Op::Relu(a), rg, "relu")
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let out = self.nodes[a.0].value.map(crate::numerics::functional::sigmoid);
        let rg = self.rg(&[a]);
        self.push(out, Op::Sigmoid(a), rg, "sigmoid")
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let out = self.nodes[a.0].value.map(f64::tanh);
        let rg = self.rg(&[a]);
        self.push(out, Op::Tanh(a), rg, "tanh")
    }

    /// Concatenate along the last axis.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = parts.first().ok_or_else(|| EcatError::Dimension("concat of nothing".into()))?;
        let (m, _) = two_d("concat", &self.nodes[first.0].value)?;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let v = &self.nodes[p.0].value;
            let (mp, np) = two_d("concat", v)?;
            if mp != m {
                return Err(dim_err("concat", self.nodes[first.0].value.shape(), v.shape()));
            }
            widths.push(np);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * total);
        for r in 0..m {
            for p in parts {
                data.extend_from_slice(self.nodes[p.0].value.row(r));
            }
        }
        let rg = self.rg(parts);
        self.push(Tensor::from_parts(vec![m, total], data), Op::Concat(parts.to_vec()), rg, "concat")
    }

    /// Mean of all elements, as a `[1, 1]` scalar.
    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let v = &self.nodes[a.0].value;
        if v.is_empty() {
            return Err(EcatError::Dimension("mean of empty tensor".into()));
        }
        let out = Tensor::scalar(v.sum() / v.len() as f64);
        let rg = self.rg(&[a]);
        self.push(out, Op::Mean(a), rg, "mean")
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let out = Tensor::scalar(self.nodes[a.0].value.sum());
        let rg = self.rg(&[a]);
        self.push(out, Op::Sum(a), rg, "sum")
    }

    /// `scale * a + shift`.
    pub fn affine(&mut self, a: NodeId, scale: f64, shift: f64) -> Result<NodeId> {
        let out = self.nodes[a.0].value.map(|v| scale * v + shift);
        let rg = self.rg(&[a]);
        self.push(out, Op::Affine(a, scale), rg, "affine")
    }

    /// Rows of `table` selected by `indices`.
    pub fn gather_rows(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId> {
        let t = &self.nodes[table.0].value;
        let (rows, d) = two_d("gather_rows", t)?;
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= rows {
                return Err(EcatError::Dimension(format!("gather_rows: index {i} out of {rows} rows")));
            }
            data.extend_from_slice(t.row(i));
        }
        let rg = self.rg(&[table]);
        let out = Tensor::from_parts(vec![indices.len(), d], data);
        self.push(out, Op::Gather(table, indices.to_vec()), rg, "gather_rows")
    }

    /// Per-row dot product, `[m, n] x [m, n] -> [m, 1]`.
    pub fn row_dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (m, _) = two_d("row_dot", va)?;
        if va.shape() != vb.shape() {
            return Err(dim_err("row_dot", va.shape(), vb.shape()));
        }
        let data = (0..m).map(|r| va.row(r).iter().zip(vb.row(r)).map(|(x, y)| x * y).sum()).collect();
        let rg = self.rg(&[a, b]);
        self.push(Tensor::from_parts(vec![m, 1], data), Op::RowDot(a, b), rg, "row_dot")
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let out = self.nodes[a.0].value.reshaped(shape)?;
        let rg = self.rg(&[a]);
        self.push(out, Op::Reshape(a), rg, "reshape")
    }

    /// Row softmax restricted to positions where `keep` is true. Rows with
    /// nothing kept produce all zeros.
    pub fn masked_softmax(&mut self, a: NodeId, keep: &[bool]) -> Result<NodeId> {
        let v = &self.nodes[a.0].value;
        let (m, n) = two_d("masked_softmax", v)?;
        if keep.len() != m * n {
            return Err(EcatError::Dimension(format!(
                "masked_softmax: mask of {} for shape {:?}",
                keep.len(),
                v.shape()
            )));
        }
        let mut data = vec![0.0; m * n];
        for r in 0..m {
            let row = v.row(r);
            let mask = &keep[r * n..(r + 1) * n];
            let max = row.iter().zip(mask).filter(|(_, &k)| k).fold(f64::NEG_INFINITY, |acc, (&x, _)| acc.max(x));
            if max == f64::NEG_INFINITY {
                continue;
            }
            let out = &mut data[r * n..(r + 1) * n];
            let mut z = 0.0;
            for c in 0..n {
                if mask[c] {
                    out[c] = (row[c] - max).exp();
                    z += out[c];
                }
            }
            out.iter_mut().for_each(|x| *x /= z);
        }
        let rg = self.rg(&[a]);
        self.push(Tensor::from_parts(vec![m, n], data), Op::MaskedSoftmax(a, keep.to_vec()), rg, "masked_softmax")
    }

    /// Sum consecutive blocks of `group` rows: `[m*group, d] -> [m, d]`.
    pub fn sum_groups(&mut self, a: NodeId, group: usize) -> Result<NodeId> {
        let v = &self.nodes[a.0].value;
        let (rows, d) = two_d("sum_groups", v)?;
        if group == 0 || rows % group != 0 {
            return Err(EcatError::Dimension(format!("sum_groups: {rows} rows not divisible by {group}")));
        }
        let m = rows / group;
        let mut data = vec![0.0; m * d];
        for r in 0..rows {
            let dst = &mut data[(r / group) * d..(r / group + 1) * d];
            for (o, x) in dst.iter_mut().zip(v.row(r)) {
                *o += x;
            }
        }
        let rg = self.rg(&[a]);
        self.push(Tensor::from_parts(vec![m, d], data), Op::SumGroups(a, group), rg, "sum_groups")
    }

    /// Repeat each row `times` times consecutively: `[m, d] -> [m*times, d]`.
    pub fn repeat_rows(&mut self, a: NodeId, times: usize) -> Result<NodeId> {
        let v = &self.nodes[a.0].value;
        let (m, d) = two_d("repeat_rows", v)?;
        let mut data = Vec::with_capacity(m * times * d);
        for r in 0..m {
            for _ in 0..times {
                data.extend_from_slice(v.row(r));
            }
        }
        let rg = self.rg(&[a]);
        self.push(Tensor::from_parts(vec![m * times, d], data), Op::RepeatRows(a, times), rg, "repeat_rows")
    }

    /// Per-row cosine similarity `[m, d] x [m, d] -> [m, 1]`.
    pub fn cosine_similarity(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (m, _) = two_d("cosine_similarity", va)?;
        if va.shape() != vb.shape() {
            return Err(dim_err("cosine_similarity", va.shape(), vb.shape()));
        }
        let mut data = Vec::with_capacity(m);
        for r in 0..m {
            data.push(
                cosine(va.row(r), vb.row(r))
                    .ok_or_else(|| EcatError::Degenerate(format!("cosine_similarity: zero-norm row {r}")))?,
            );
        }
        let rg = self.rg(&[a, b]);
        self.push(Tensor::from_parts(vec![m, 1], data), Op::Cosine(a, b), rg, "cosine_similarity")
    }

    /// Per-row binary cross-entropy of probabilities `p` (`[m, 1]`) against
    /// labels. Probabilities are clamped to `[1e-7, 1 - 1e-7]` before the log.
    pub fn binary_cross_entropy(&mut self, p: NodeId, labels: &[f64]) -> Result<NodeId> {
        let v = &self.nodes[p.0].value;
        let (m, n) = two_d("binary_cross_entropy", v)?;
        if n != 1 || labels.len() != m {
            return Err(EcatError::Dimension(format!(
                "binary_cross_entropy: probabilities {:?} vs {} labels",
                v.shape(),
                labels.len()
            )));
        }
        let mut data = Vec::with_capacity(m);
        for (&pi, &y) in v.data().iter().zip(labels) {
            if !(0.0..=1.0).contains(&pi) {
                return Err(EcatError::Contract(format!("probability {pi} outside [0, 1]")));
            }
            if y != 0.0 && y != 1.0 {
                return Err(EcatError::Contract(format!("label {y} not in {{0, 1}}")));
            }
            data.push(crate::numerics::functional::bce(pi, y));
        }
        let rg = self.rg(&[p]);
        self.push(Tensor::from_parts(vec![m, 1], data), Op::Bce(p, labels.to_vec()), rg, "binary_cross_entropy")
    }

    /// Accumulate d`loss`/d`node` into every node that requires gradient.
    /// Calling twice without [`Graph::zero_grad`] doubles the stored gradients.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(EcatError::Contract(format!("backward needs a scalar loss, got shape {:?}", lv.shape())));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        let mut pass: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        pass[loss.0] = Some(Tensor::full(lv.shape(), 1.0));
        for id in (0..=loss.0).rev() {
            let Some(g) = pass[id].take() else { continue };
            self.propagate(id, &g, &mut pass);
            match &mut self.grads[id] {
                Some(acc) => acc.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, id: usize, g: &Tensor, pass: &mut [Option<Tensor>]) {
        let node = &self.nodes[id];
        let out = &node.value;
        let mut send = |target: NodeId, grad: Tensor| {
            if !self.nodes[target.0].requires_grad {
                return;
            }
            match &mut pass[target.0] {
                Some(acc) => acc.add_assign(&grad),
                slot @ None => *slot = Some(grad),
            }
        };
        let val = |n: NodeId| &self.nodes[n.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let (m, k) = (va.shape()[0], va.shape()[1]);
                let n = vb.shape()[1];
                if self.nodes[a.0].requires_grad {
                    send(*a, Tensor::from_parts(vec![m, k], matmul_a_bt(g.data(), vb.data(), m, n, k)));
                }
                if self.nodes[b.0].requires_grad {
                    send(*b, Tensor::from_parts(vec![k, n], matmul_at_b(va.data(), g.data(), m, k, n)));
                }
            }
            Op::Add(a, b) => {
                send(*a, g.clone());
                let vb = val(*b);
                if vb.shape() == g.shape() {
                    send(*b, g.clone());
                } else {
                    let n = vb.len();
                    let mut col = vec![0.0; n];
                    for r in 0..g.rows() {
                        for (c, x) in col.iter_mut().zip(g.row(r)) {
                            *c += x;
                        }
                    }
                    send(*b, Tensor::from_parts(vb.shape().to_vec(), col));
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let n = g.cols();
                let bcast =
                    |v: &Tensor, r: usize, c: usize| if v.cols() == 1 { v.data()[r] } else { v.data()[r * n + c] };
                for (this, other) in [(a, vb), (b, va)] {
                    if !self.nodes[this.0].requires_grad {
                        continue;
                    }
                    let tv = val(*this);
                    let mut data = vec![0.0; tv.len()];
                    for r in 0..g.rows() {
                        for c in 0..n {
                            let contrib = g.data()[r * n + c] * bcast(other, r, c);
                            if tv.cols() == 1 && n != 1 {
                                data[r] += contrib;
                            } else {
                                data[r * n + c] += contrib;
                            }
                        }
                    }
                    send(*this, Tensor::from_parts(tv.shape().to_vec(), data));
                }
            }
            Op::Relu(a) => {
                let data = g.data().iter().zip(out.data()).map(|(gv, y)| if *y > 0.0 { *gv } else { 0.0 }).collect();
                send(*a, Tensor::from_parts(g.shape().to_vec(), data));
            }
            Op::Sigmoid(a) => {
                let data = g.data().iter().zip(out.data()).map(|(gv, s)| gv * s * (1.0 - s)).collect();
                send(*a, Tensor::from_parts(g.shape().to_vec(), data));
            }
            Op::Tanh(a) => {
                let data = g.data().iter().zip(out.data()).map(|(gv, t)| gv * (1.0 - t * t)).collect();
                send(*a, Tensor::from_parts(g.shape().to_vec(), data));
            }
            Op::Concat(parts) => {
                let m = g.rows();
                let mut offset = 0;
                for p in parts {
                    let w = val(*p).cols();
                    if self.nodes[p.0].requires_grad {
                        let mut data = Vec::with_capacity(m * w);
                        for r in 0..m {
                            data.extend_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        send(*p, Tensor::from_parts(vec![m, w], data));
                    }
                    offset += w;
                }
            }
            Op::Mean(a) => {
                let va = val(*a);
                send(*a, Tensor::full(va.shape(), g.item() / va.len() as f64));
            }
            Op::Sum(a) => {
                send(*a, Tensor::full(val(*a).shape(), g.item()));
            }
            Op::Affine(a, scale) => send(*a, g.map(|v| v * scale)),
            Op::Gather(table, indices) => {
                let vt = val(*table);
                let d = vt.cols();
                let mut data = vec![0.0; vt.len()];
                for (r, &i) in indices.iter().enumerate() {
                    for (o, x) in data[i * d..(i + 1) * d].iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
                send(*table, Tensor::from_parts(vt.shape().to_vec(), data));
            }
            Op::RowDot(a, b) => {
                for (this, other) in [(a, val(*b)), (b, val(*a))] {
                    if !self.nodes[this.0].requires_grad {
                        continue;
                    }
                    let d = other.cols();
                    let mut data = Vec::with_capacity(other.len());
                    for r in 0..other.rows() {
                        let gr = g.data()[r];
                        data.extend(other.row(r).iter().map(|x| gr * x));
                    }
                    send(*this, Tensor::from_parts(vec![other.rows(), d], data));
                }
            }
            Op::Reshape(a) => send(*a, Tensor::from_parts(val(*a).shape().to_vec(), g.data().to_vec())),
            Op::MaskedSoftmax(a, keep) => {
                let n = out.cols();
                let mut data = vec![0.0; out.len()];
                for r in 0..out.rows() {
                    let y = out.row(r);
                    let gr = g.row(r);
                    let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for c in 0..n {
                        if keep[r * n + c] {
                            data[r * n + c] = y[c] * (gr[c] - dot);
                        }
                    }
                }
                send(*a, Tensor::from_parts(out.shape().to_vec(), data));
            }
            Op::SumGroups(a, group) => {
                let va = val(*a);
                let d = va.cols();
                let mut data = Vec::with_capacity(va.len());
                for r in 0..va.rows() {
                    data.extend_from_slice(&g.data()[(r / group) * d..(r / group + 1) * d]);
                }
                send(*a, Tensor::from_parts(va.shape().to_vec(), data));
            }
            Op::RepeatRows(a, times) => {
                let va = val(*a);
                let d = va.cols();
                let mut data = vec![0.0; va.len()];
                for r in 0..g.rows() {
                    for (o, x) in data[(r / times) * d..(r / times + 1) * d].iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
                send(*a, Tensor::from_parts(va.shape().to_vec(), data));
            }
            Op::Cosine(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let d = va.cols();
                let mut ga = Vec::with_capacity(va.len());
                let mut gb = Vec::with_capacity(vb.len());
                for r in 0..va.rows() {
                    let (u, v) = (va.row(r), vb.row(r));
                    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let c = out.data()[r];
                    let gr = g.data()[r];
                    for j in 0..d {
                        ga.push(gr * (v[j] / (nu * nv) - c * u[j] / (nu * nu)));
                        gb.push(gr * (u[j] / (nu * nv) - c * v[j] / (nv * nv)));
                    }
                }
                send(*a, Tensor::from_parts(va.shape().to_vec(), ga));
                send(*b, Tensor::from_parts(vb.shape().to_vec(), gb));
            }
            Op::Bce(p, labels) => {
                let vp = val(*p);
                let (lo, hi) = PROB_CLAMP;
                let data = vp
                    .data()
                    .iter()
                    .zip(labels)
                    .zip(g.data())
                    .map(|((&pi, &y), &gv)| {
                        if pi < lo || pi > hi {
                            0.0
                        } else {
                            let pc = clamp_prob(pi);
                            gv * (-y / pc + (1.0 - y) / (1.0 - pc))
                        }
                    })
                    .collect();
                send(*p, Tensor::from_parts(vp.shape().to_vec(), data));
            }
        }
    }
}

/// Cosine of two vectors, `None` if either has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Option<f64> {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Some(dot / (nu * nv))
}
