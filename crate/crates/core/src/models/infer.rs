//! Forward-only evaluation. Builds no differentiation graph; used for the
//! source model, the entropy pass, sample weights, and evaluation. The
//! arithmetic mirrors the graph ops operation for operation, so both paths
//! agree bitwise.

use crate::error::Result;
use crate::models::{Adapter, Batch, CtrModel, Dense, Discriminator, Gate, PhiBatch};
use crate::numerics::tensor::matmul_raw;
use crate::numerics::{entropy_binary, sigmoid, Tensor};

fn dense(x: &Tensor, layer: &Dense) -> Tensor {
    let (m, k) = (x.rows(), x.cols());
    let n = layer.weight.cols();
    let mut out = matmul_raw(x.data(), layer.weight.data(), m, k, n);
    let bias = layer.bias.data();
    for r in 0..m {
        for (o, b) in out[r * n..(r + 1) * n].iter_mut().zip(bias) {
            *o += b;
        }
    }
    Tensor::from_parts(vec![m, n], out)
}

fn gather(table: &Tensor, idx: &[usize]) -> Tensor {
    let d = table.cols();
    let mut data = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        data.extend_from_slice(table.row(i));
    }
    Tensor::from_parts(vec![idx.len(), d], data)
}

/// Same computation as [`crate::models::sequence_encode`].
pub fn sequence_encode_values(item_table: &Tensor, seq_default: &Tensor, candidate: &Tensor, batch: &Batch) -> Tensor {
    let l = batch.seq_len;
    let b = batch.len();
    let d = candidate.cols();
    let scale = 1.0 / (d as f64).sqrt();
    let mut out = vec![0.0; b * d];
    let mut w = vec![0.0; l];
    for r in 0..b {
        let cand = candidate.row(r);
        let keep = &batch.seq_keep[r * l..(r + 1) * l];
        let idx = &batch.seq_items[r * l..(r + 1) * l];
        let scores: Vec<f64> = idx
            .iter()
            .map(|&i| scale * cand.iter().zip(item_table.row(i)).map(|(x, y)| x * y).sum::<f64>() + 0.0)
            .collect();
        let max = scores.iter().zip(keep).filter(|(_, &k)| k).fold(f64::NEG_INFINITY, |a, (&x, _)| a.max(x));
        w.iter_mut().for_each(|x| *x = 0.0);
        if max != f64::NEG_INFINITY {
            let mut z = 0.0;
            for c in 0..l {
                if keep[c] {
                    w[c] = (scores[c] - max).exp();
                    z += w[c];
                }
            }
            w.iter_mut().for_each(|x| *x /= z);
        }
        let orow = &mut out[r * d..(r + 1) * d];
        for c in 0..l {
            for (o, e) in orow.iter_mut().zip(item_table.row(idx[c])) {
                *o += e * w[c];
            }
        }
        let pad = batch.all_pad.data()[r];
        for (o, dv) in orow.iter_mut().zip(seq_default.data()) {
            let term = if pad == 0.0 { 0.0 } else { 0.0 + pad * dv };
            *o += term;
        }
    }
    Tensor::from_parts(vec![b, d], out)
}

#[derive(Clone, Debug)]
pub struct Inference {
    pub prob: Vec<f64>,
    pub e_seq: Tensor,
}

impl CtrModel {
    /// Forward pass; `seq_override` replaces `e_seq` in the head.
    pub fn infer(&self, batch: &Batch, seq_override: Option<&Tensor>) -> Inference {
        let user = gather(&self.user_embedding, &batch.users);
        let item = gather(&self.item_embedding, &batch.items);
        let e_seq = sequence_encode_values(&self.item_embedding, &self.seq_default, &item, batch);
        let prob = self.head_values(&user, &item, seq_override.unwrap_or(&e_seq), batch);
        Inference { prob, e_seq }
    }

    fn head_values(&self, user: &Tensor, item: &Tensor, seq: &Tensor, batch: &Batch) -> Vec<f64> {
        let b = batch.len();
        let parts = [user, item, seq, &batch.numeric];
        let width: usize = parts.iter().map(|t| t.cols()).sum();
        let mut x = Vec::with_capacity(b * width);
        for r in 0..b {
            for p in parts {
                x.extend_from_slice(p.row(r));
            }
        }
        let mut x = Tensor::from_parts(vec![b, width], x);
        for layer in &self.tower {
            x = dense(&x, layer).map(|v| v.max(0.0));
        }
        dense(&x, &self.logit).data().iter().map(|&z| sigmoid(z)).collect()
    }
}

/// Source-model forward. Returns `(probability, e_seq_s)`.
pub fn forward_source(source: &CtrModel, batch: &Batch) -> (Vec<f64>, Tensor) {
    let out = source.infer(batch, None);
    (out.prob, out.e_seq)
}

/// Entropy of the target model's own, fusion-free prediction.
pub fn entropy_of_t(target: &CtrModel, batch: &Batch) -> Vec<f64> {
    target.infer(batch, None).prob.into_iter().map(entropy_binary).collect()
}

impl Adapter {
    pub fn infer(&self, e_seq_t: &Tensor) -> Tensor {
        dense(&dense(e_seq_t, &self.hidden).map(f64::tanh), &self.out)
    }
}

impl Gate {
    /// Fusion weight per row.
    pub fn infer(&self, e_prime: &Tensor, e_t: &Tensor, entropy: &[f64]) -> Vec<f64> {
        let b = e_t.rows();
        let mut x = Vec::with_capacity(b * (e_prime.cols() + e_t.cols() + 1));
        for r in 0..b {
            x.extend_from_slice(e_prime.row(r));
            x.extend_from_slice(e_t.row(r));
            x.push(entropy[r]);
        }
        let x = Tensor::from_parts(vec![b, e_prime.cols() + e_t.cols() + 1], x);
        dense(&x, &self.layer).data().iter().map(|&z| sigmoid(z)).collect()
    }
}

impl Discriminator {
    /// Probability of the target domain per row.
    pub fn infer(&self, phi: &PhiBatch) -> Vec<f64> {
        let h = dense(phi.tensor(), &self.hidden).map(|v| v.max(0.0));
        dense(&h, &self.out).data().iter().map(|&z| sigmoid(z)).collect()
    }
}

/// How the adapted representation enters the target head.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fusion {
    Gated,
    Fixed(f64),
}

/// Fused target prediction, as served.
pub fn predict(target: &CtrModel, adapter: &Adapter, gate: &Gate, fusion: Fusion, batch: &Batch) -> Result<Vec<f64>> {
    let plain = target.infer(batch, None);
    let e_t = &plain.e_seq;
    let e_prime = adapter.infer(e_t);
    let weights = match fusion {
        Fusion::Gated => {
            let entropy: Vec<f64> = plain.prob.iter().map(|&p| entropy_binary(p)).collect();
            gate.infer(&e_prime, e_t, &entropy)
        }
        Fusion::Fixed(w) => vec![w; batch.len()],
    };
    let d = e_t.cols();
    let mut fused = Vec::with_capacity(e_t.len());
    for r in 0..batch.len() {
        let w = weights[r];
        for j in 0..d {
            fused.push(e_prime.row(r)[j] * w + e_t.row(r)[j] * (-1.0 * w + 1.0));
        }
    }
    let fused = Tensor::from_parts(vec![batch.len(), d], fused);
    Ok(target.infer(batch, Some(&fused)).prob)
}
