//! Target/source CTR model, adapter, fusion gate, and domain discriminator.
//!
//! The target model `T` and source model `S` share [`CtrModel`]. `T` runs on
//! a [`Graph`](crate::numerics::Graph) during training; `S` only ever runs
//! through [`infer`], which builds no graph at all.

pub mod batch;
pub mod checkpoint;
pub mod forward;
pub mod infer;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{EcatError, Result};
use crate::numerics::Tensor;

pub use batch::{Batch, PhiBatch};
pub use forward::{
    adapter_forward, discriminator_forward, distill_intensity, encode, forward_target, gate_fuse, head,
    sequence_encode, AdapterBinding, CtrBinding, DiscriminatorBinding, Encoded, GateBinding, TargetForward,
};
pub use infer::{entropy_of_t, forward_source, Inference};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub tower: Vec<usize>,
    pub adapter_hidden: usize,
    pub discriminator_hidden: usize,
    pub embedding_init_std: f64,
    /// Initial gate bias; strongly negative keeps fusion closed at start.
    pub gate_bias_init: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 16,
            tower: vec![64, 32],
            adapter_hidden: 32,
            discriminator_hidden: 16,
            embedding_init_std: 0.1,
            gate_bias_init: -4.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.adapter_hidden == 0 || self.discriminator_hidden == 0 {
            return Err(EcatError::Config("model dimensions must be > 0".into()));
        }
        if self.tower.contains(&0) {
            return Err(EcatError::Config("tower widths must be > 0".into()));
        }
        Ok(())
    }
}

/// Anything with an ordered list of named parameter tensors.
pub trait Parameterized {
    fn params(&self) -> Vec<(String, &Tensor)>;
    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)>;

    fn shape_signature(&self) -> String {
        self.params().iter().map(|(n, t)| format!("{n}:{:?}", t.shape())).collect::<Vec<_>>().join(";")
    }

    fn param_hash(&self) -> u64 {
        self.params().iter().fold(0u64, |h, (_, t)| h.rotate_left(7) ^ t.bit_hash())
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Fully connected layer, `x @ weight + bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn new(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Self {
        let std = (1.0 / fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        Dense { weight: Tensor::from_parts(vec![fan_in, fan_out], data), bias: Tensor::zeros(&[1, fan_out]) }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense { weight: Tensor::zeros(&[fan_in, fan_out]), bias: Tensor::zeros(&[1, fan_out]) }
    }

    fn push_params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.weight"), &self.weight));
        out.push((format!("{prefix}.bias"), &self.bias));
    }

    fn push_params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push((format!("{prefix}.weight"), &mut self.weight));
        out.push((format!("{prefix}.bias"), &mut self.bias));
    }
}

/// Embeddings, target attention over the behavior sequence, MLP tower, logit.
#[derive(Clone, Debug, PartialEq)]
pub struct CtrModel {
    pub user_embedding: Tensor,
    pub item_embedding: Tensor,
    /// Sequence representation used when the behavior sequence is all padding.
    pub seq_default: Tensor,
    pub tower: Vec<Dense>,
    pub logit: Dense,
}

impl CtrModel {
    pub fn new(cfg: &ModelConfig, n_users: usize, n_items: usize, numeric_features: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = cfg.embedding_dim;
        let mut emb = |rows: usize| {
            let data = (0..rows * d).map(|_| cfg.embedding_init_std * rng.sample::<f64, _>(StandardNormal)).collect();
            Tensor::from_parts(vec![rows, d], data)
        };
        let user_embedding = emb(n_users);
        let item_embedding = emb(n_items);
        let seq_default = emb(1);
        let mut width = 3 * d + numeric_features;
        let mut tower = Vec::with_capacity(cfg.tower.len());
        for &w in &cfg.tower {
            tower.push(Dense::new(&mut rng, width, w));
            width = w;
        }
        let logit = Dense::new(&mut rng, width, 1);
        CtrModel { user_embedding, item_embedding, seq_default, tower, logit }
    }

    pub fn embedding_dim(&self) -> usize {
        self.item_embedding.cols()
    }

    pub fn n_users(&self) -> usize {
        self.user_embedding.rows()
    }

    pub fn n_items(&self) -> usize {
        self.item_embedding.rows()
    }

    /// Overwrite every parameter with the values of a same-shaped model.
    pub fn copy_from(&mut self, other: &CtrModel) -> Result<()> {
        if self.shape_signature() != other.shape_signature() {
            return Err(EcatError::Dimension(format!(
                "cannot copy between models with signatures {} and {}",
                self.shape_signature(),
                other.shape_signature()
            )));
        }
        *self = other.clone();
        Ok(())
    }
}

impl Parameterized for CtrModel {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("user_embedding".to_string(), &self.user_embedding),
            ("item_embedding".to_string(), &self.item_embedding),
            ("seq_default".to_string(), &self.seq_default),
        ];
        for (i, l) in self.tower.iter().enumerate() {
            l.push_params(&format!("tower{i}"), &mut out);
        }
        self.logit.push_params("logit", &mut out);
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = vec![
            ("user_embedding".to_string(), &mut self.user_embedding),
            ("item_embedding".to_string(), &mut self.item_embedding),
            ("seq_default".to_string(), &mut self.seq_default),
        ];
        for (i, l) in self.tower.iter_mut().enumerate() {
            l.push_params_mut(&format!("tower{i}"), &mut out);
        }
        self.logit.push_params_mut("logit", &mut out);
        out
    }
}

/// `d_e -> hidden -> d_e` with tanh in between.
#[derive(Clone, Debug, PartialEq)]
pub struct Adapter {
    pub hidden: Dense,
    pub out: Dense,
}

impl Adapter {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Adapter {
            hidden: Dense::new(&mut rng, cfg.embedding_dim, cfg.adapter_hidden),
            out: Dense::new(&mut rng, cfg.adapter_hidden, cfg.embedding_dim),
        }
    }
}

impl Parameterized for Adapter {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.hidden.push_params("adapter.hidden", &mut out);
        self.out.push_params("adapter.out", &mut out);
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        self.hidden.push_params_mut("adapter.hidden", &mut out);
        self.out.push_params_mut("adapter.out", &mut out);
        out
    }
}

/// Scalar fusion weight from `[e', e_t, entropy]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub layer: Dense,
}

impl Gate {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = Dense::new(&mut rng, 2 * cfg.embedding_dim + 1, 1);
        layer.bias = Tensor::scalar(cfg.gate_bias_init);
        Gate { layer }
    }
}

impl Parameterized for Gate {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.layer.push_params("gate", &mut out);
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        self.layer.push_params_mut("gate", &mut out);
        out
    }
}

/// One hidden ReLU layer over the domain-independent features.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub hidden: Dense,
    pub out: Dense,
}

impl Discriminator {
    pub fn new(cfg: &ModelConfig, phi_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Discriminator {
            hidden: Dense::new(&mut rng, phi_dim, cfg.discriminator_hidden),
            out: Dense::new(&mut rng, cfg.discriminator_hidden, 1),
        }
    }
}

impl Parameterized for Discriminator {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.hidden.push_params("disc.hidden", &mut out);
        self.out.push_params("disc.out", &mut out);
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        self.hidden.push_params_mut("disc.hidden", &mut out);
        self.out.push_params_mut("disc.out", &mut out);
        out
    }
}

/// Every trainable component of the target side, for checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub target: CtrModel,
    pub adapter: Adapter,
    pub gate: Gate,
    pub discriminator: Discriminator,
}

impl Parameterized for ModelBundle {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> =
            self.target.params().into_iter().map(|(n, t)| (format!("target.{n}"), t)).collect();
        out.extend(self.adapter.params());
        out.extend(self.gate.params());
        out.extend(self.discriminator.params());
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> =
            self.target.params_mut().into_iter().map(|(n, t)| (format!("target.{n}"), t)).collect();
        out.extend(self.adapter.params_mut());
        out.extend(self.gate.params_mut());
        out.extend(self.discriminator.params_mut());
        out
    }
}
