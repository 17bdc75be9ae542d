//! Differentiable forward passes on a [`Graph`].

use crate::error::{EcatError, Result};
use crate::models::{Adapter, Batch, CtrModel, Dense, Discriminator, Gate, PhiBatch};
use crate::numerics::{cosine, Graph, NodeId, Tensor};

fn bind_dense(g: &mut Graph, d: &Dense) -> (NodeId, NodeId) {
    (g.param(d.weight.clone()), g.param(d.bias.clone()))
}

fn dense(g: &mut Graph, x: NodeId, (w, b): (NodeId, NodeId)) -> Result<NodeId> {
    let z = g.matmul(x, w)?;
    g.add(z, b)
}

/// Graph leaves of a [`CtrModel`], in [`Parameterized::params`] order.
///
/// [`Parameterized::params`]: crate::models::Parameterized::params
#[derive(Clone, Debug)]
pub struct CtrBinding {
    pub user_embedding: NodeId,
    pub item_embedding: NodeId,
    pub seq_default: NodeId,
    pub tower: Vec<(NodeId, NodeId)>,
    pub logit: (NodeId, NodeId),
}

impl CtrBinding {
    pub fn bind(g: &mut Graph, m: &CtrModel) -> Self {
        CtrBinding {
            user_embedding: g.param(m.user_embedding.clone()),
            item_embedding: g.param(m.item_embedding.clone()),
            seq_default: g.param(m.seq_default.clone()),
            tower: m.tower.iter().map(|l| bind_dense(g, l)).collect(),
            logit: bind_dense(g, &m.logit),
        }
    }

    pub fn ids(&self) -> Vec<NodeId> {
        let mut v = vec![self.user_embedding, self.item_embedding, self.seq_default];
        for (w, b) in &self.tower {
            v.extend([*w, *b]);
        }
        v.extend([self.logit.0, self.logit.1]);
        v
    }
}

/// Target attention of the candidate item over the behavior sequence.
///
/// Weights are a softmax over non-padding positions of
/// `candidate . seq_emb / sqrt(d)`; the output is the weighted sum of the
/// sequence embeddings, plus `seq_default` for rows that are all padding.
pub fn sequence_encode(
    g: &mut Graph,
    item_table: NodeId,
    seq_default: NodeId,
    candidate: NodeId,
    batch: &Batch,
) -> Result<NodeId> {
    let l = batch.seq_len;
    let b = batch.len();
    let d = g.value(candidate).cols();
    let cand = g.repeat_rows(candidate, l)?;
    let seq = g.gather_rows(item_table, &batch.seq_items)?;
    let scores = g.row_dot(cand, seq)?;
    let scores = g.affine(scores, 1.0 / (d as f64).sqrt(), 0.0)?;
    let scores = g.reshape(scores, &[b, l])?;
    let weights = g.masked_softmax(scores, &batch.seq_keep)?;
    let weights = g.reshape(weights, &[b * l, 1])?;
    let weighted = g.mul(seq, weights)?;
    let attended = g.sum_groups(weighted, l)?;
    let pad = g.constant(batch.all_pad.clone());
    let pad_term = g.matmul(pad, seq_default)?;
    g.add(attended, pad_term)
}

#[derive(Clone, Copy, Debug)]
pub struct Encoded {
    pub user: NodeId,
    pub item: NodeId,
    pub e_seq: NodeId,
}

pub fn encode(g: &mut Graph, p: &CtrBinding, batch: &Batch) -> Result<Encoded> {
    let user = g.gather_rows(p.user_embedding, &batch.users)?;
    let item = g.gather_rows(p.item_embedding, &batch.items)?;
    let e_seq = sequence_encode(g, p.item_embedding, p.seq_default, item, batch)?;
    Ok(Encoded { user, item, e_seq })
}

/// MLP tower and logit over `[user, item, seq_repr, numeric]`.
/// Returns `(logit, probability)`.
pub fn head(g: &mut Graph, p: &CtrBinding, enc: &Encoded, seq_repr: NodeId, batch: &Batch) -> Result<(NodeId, NodeId)> {
    let numeric = g.constant(batch.numeric.clone());
    let mut x = g.concat(&[enc.user, enc.item, seq_repr, numeric])?;
    for layer in &p.tower {
        let z = dense(g, x, *layer)?;
        x = g.relu(z)?;
    }
    let logit = dense(g, x, p.logit)?;
    let prob = g.sigmoid(logit)?;
    Ok((logit, prob))
}

#[derive(Clone, Copy, Debug)]
pub struct TargetForward {
    pub encoded: Encoded,
    pub logit: NodeId,
    pub prob: NodeId,
}

/// Full target forward; `seq_override` replaces `e_seq` in the head.
pub fn forward_target(
    g: &mut Graph,
    p: &CtrBinding,
    batch: &Batch,
    seq_override: Option<NodeId>,
) -> Result<TargetForward> {
    let encoded = encode(g, p, batch)?;
    let seq = seq_override.unwrap_or(encoded.e_seq);
    let (logit, prob) = head(g, p, &encoded, seq, batch)?;
    Ok(TargetForward { encoded, logit, prob })
}

#[derive(Clone, Debug)]
pub struct AdapterBinding {
    pub hidden: (NodeId, NodeId),
    pub out: (NodeId, NodeId),
}

impl AdapterBinding {
    pub fn bind(g: &mut Graph, a: &Adapter) -> Self {
        AdapterBinding { hidden: bind_dense(g, &a.hidden), out: bind_dense(g, &a.out) }
    }

    pub fn ids(&self) -> Vec<NodeId> {
        vec![self.hidden.0, self.hidden.1, self.out.0, self.out.1]
    }
}

/// `e' = W2 tanh(W1 e_t + b1) + b2`. The input is cut from the target
/// backbone first, so nothing downstream of `e'` trains `T` through here.
pub fn adapter_forward(g: &mut Graph, a: &AdapterBinding, e_seq_t: NodeId) -> Result<NodeId> {
    let x = g.stop_gradient(e_seq_t);
    let h = dense(g, x, a.hidden)?;
    let h = g.tanh(h)?;
    dense(g, h, a.out)
}

#[derive(Clone, Debug)]
pub struct GateBinding {
    pub layer: (NodeId, NodeId),
}

impl GateBinding {
    pub fn bind(g: &mut Graph, gate: &Gate) -> Self {
        GateBinding { layer: bind_dense(g, &gate.layer) }
    }

    pub fn ids(&self) -> Vec<NodeId> {
        vec![self.layer.0, self.layer.1]
    }
}

/// `fused = w * e' + (1 - w) * e_t` for a `[b, 1]` weight node.
pub fn convex_mix(g: &mut Graph, weight: NodeId, e_prime: NodeId, e_t: NodeId) -> Result<NodeId> {
    let a = g.mul(e_prime, weight)?;
    let rest = g.affine(weight, -1.0, 1.0)?;
    let b = g.mul(e_t, rest)?;
    g.add(a, b)
}

/// Learned fusion. The gate reads `[e', e_t, entropy]` with `e_t` cut from
/// the backbone; `e_t` reaches the backbone only through the mix itself.
/// Returns `(fused, gate_weight)`.
pub fn gate_fuse(
    g: &mut Graph,
    gate: &GateBinding,
    e_prime: NodeId,
    e_t: NodeId,
    entropy: &[f64],
) -> Result<(NodeId, NodeId)> {
    let rows = g.value(e_t).rows();
    if entropy.len() != rows {
        return Err(EcatError::Dimension(format!("gate: {} entropies for {rows} rows", entropy.len())));
    }
    let e_t_in = g.stop_gradient(e_t);
    let h = g.constant(Tensor::new(vec![rows, 1], entropy.to_vec())?);
    let input = g.concat(&[e_prime, e_t_in, h])?;
    let z = dense(g, input, gate.layer)?;
    let weight = g.sigmoid(z)?;
    let fused = convex_mix(g, weight, e_prime, e_t)?;
    Ok((fused, weight))
}

/// Mix with a constant weight, used when the gate is disabled.
pub fn fixed_fuse(g: &mut Graph, weight: f64, e_prime: NodeId, e_t: NodeId) -> Result<NodeId> {
    let rows = g.value(e_t).rows();
    let w = g.constant(Tensor::full(&[rows, 1], weight));
    convex_mix(g, w, e_prime, e_t)
}

/// Distillation intensity `(1 - cos(e', e_s)) / 2`, a plain number.
pub fn distill_intensity(e_prime: &[f64], e_s: &[f64]) -> Result<f64> {
    let c = cosine(e_prime, e_s)
        .ok_or_else(|| EcatError::Degenerate("distillation intensity of a zero-norm vector".into()))?;
    Ok(((1.0 - c) / 2.0).clamp(0.0, 1.0))
}

#[derive(Clone, Debug)]
pub struct DiscriminatorBinding {
    pub hidden: (NodeId, NodeId),
    pub out: (NodeId, NodeId),
}

impl DiscriminatorBinding {
    pub fn bind(g: &mut Graph, d: &Discriminator) -> Self {
        DiscriminatorBinding { hidden: bind_dense(g, &d.hidden), out: bind_dense(g, &d.out) }
    }

    pub fn ids(&self) -> Vec<NodeId> {
        vec![self.hidden.0, self.hidden.1, self.out.0, self.out.1]
    }
}

/// Probability that each row comes from the target domain. The input is a
/// graph constant, so the discriminator's loss has no path into any model.
pub fn discriminator_forward(g: &mut Graph, d: &DiscriminatorBinding, phi: &PhiBatch) -> Result<NodeId> {
    let x = g.constant(phi.tensor().clone());
    let h = dense(g, x, d.hidden)?;
    let h = g.relu(h)?;
    let z = dense(g, h, d.out)?;
    g.sigmoid(z)
}
