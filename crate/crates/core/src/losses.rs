//! Loss terms and their weighted composition
//! `L = w_da * L_y + alpha * w_pow * L_di + beta * L_da`, with both weight
//! vectors applied per sample inside their term.

use std::f64::consts::LN_2;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::datagen::Domain;
use crate::error::{EcatError, Result};
use crate::numerics::{entropy_binary, Graph, NodeId, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { alpha: 0.5, beta: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EcatError::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchLossBreakdown {
    pub l_y: f64,
    pub l_di: f64,
    pub l_da: f64,
    pub l_total: f64,
    pub w_da: Vec<f64>,
    pub w_pow: Vec<f64>,
}

fn column(g: &mut Graph, values: &[f64]) -> Result<NodeId> {
    Ok(g.constant(Tensor::new(vec![values.len(), 1], values.to_vec())?))
}

/// `sum_i w_i * BCE(p_i, y_i) / n` over the whole batch.
pub fn loss_y(g: &mut Graph, preds: NodeId, labels: &[f64], w_da: &[f64]) -> Result<NodeId> {
    let n = g.value(preds).rows();
    if labels.len() != n || w_da.len() != n {
        return Err(EcatError::Dimension(format!(
            "loss_y: {n} predictions, {} labels, {} weights",
            labels.len(),
            w_da.len()
        )));
    }
    let bce = g.binary_cross_entropy(preds, labels)?;
    let w = column(g, w_da)?;
    let weighted = g.mul(bce, w)?;
    g.mean(weighted)
}

/// Admission weight of one sample. Target rows always get 1; transferred
/// rows get the discriminator's normalized entropy.
pub fn da_sample_weight(domain_prob: f64, domain: Domain) -> f64 {
    match domain {
        Domain::Target => 1.0,
        Domain::Source => (entropy_binary(domain_prob) / LN_2).clamp(0.0, 1.0),
    }
}

/// Mean of `w_pow_i * (1 - cos(e'_i, e_s_i))`. `e_s` should be a constant.
pub fn loss_di(g: &mut Graph, e_prime: NodeId, e_s: NodeId, w_pow: &[f64]) -> Result<NodeId> {
    let n = g.value(e_prime).rows();
    if w_pow.len() != n {
        return Err(EcatError::Dimension(format!("loss_di: {} intensities for {n} rows", w_pow.len())));
    }
    let cos = g.cosine_similarity(e_prime, e_s)?;
    let dist = g.affine(cos, -1.0, 1.0)?;
    let w = column(g, w_pow)?;
    let weighted = g.mul(dist, w)?;
    g.mean(weighted)
}

static WARNED_SINGLE_CLASS: AtomicBool = AtomicBool::new(false);

/// Mean BCE of the discriminator against domain labels (1 = target).
pub fn loss_da(g: &mut Graph, domain_probs: NodeId, domain_labels: &[f64]) -> Result<NodeId> {
    let first = domain_labels.first().copied();
    if domain_labels.iter().all(|&l| Some(l) == first) && !WARNED_SINGLE_CLASS.swap(true, Ordering::Relaxed) {
        log::warn!("domain loss computed on a single-class batch; further warnings suppressed");
    }
    let bce = g.binary_cross_entropy(domain_probs, domain_labels)?;
    g.mean(bce)
}

/// `l_y + alpha * l_di + beta * l_da`, each term already carrying its
/// per-sample weights.
pub fn loss_ecat(g: &mut Graph, l_y: NodeId, l_di: NodeId, l_da: NodeId, weights: LossWeights) -> Result<NodeId> {
    weights.validate()?;
    let di = g.affine(l_di, weights.alpha, 0.0)?;
    let da = g.affine(l_da, weights.beta, 0.0)?;
    let partial = g.add(l_y, di)?;
    g.add(partial, da)
}
